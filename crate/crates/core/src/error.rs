use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at iteration {iteration}")]
    NonFinite { iteration: usize, value: f64 },

    #[error("state {state} lies outside the support of target `{target}`")]
    OutsideSupport { target: String, state: f64 },

    #[error("interval [{lo}, {hi}] has zero probability under N({mean}, {sd}^2)")]
    EmptyTruncation { mean: f64, sd: f64, lo: f64, hi: f64 },

    #[error("quadrature on [{lo}, {hi}] did not converge within {evaluations} evaluations")]
    QuadratureBudget { lo: f64, hi: f64, evaluations: usize },

    #[error("all importance weights are zero")]
    ZeroWeights,

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error(
        "scale calibration missed acceptance {target}: best scale {best_scale} measured {measured_rate}"
    )]
    Calibration { target: f64, best_scale: f64, measured_rate: f64 },

    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::OutsideSupport { .. }
            | Error::EmptyTruncation { .. }
            | Error::QuadratureBudget { .. }
            | Error::ZeroWeights
            | Error::Degenerate(_)
            | Error::Calibration { .. } => true,
            Error::Run { source, .. } => source.is_numerical(),
            Error::InvalidArgument(_) | Error::Io { .. } | Error::Parse { .. } => false,
        }
    }
}
