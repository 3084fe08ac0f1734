use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Figure1,
    Figure2,
    Figure3,
    Evidence,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Self::Figure1, Self::Figure2, Self::Figure3, Self::Evidence];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Figure1 => "figure1",
            Self::Figure2 => "figure2",
            Self::Figure3 => "figure3",
            Self::Evidence => "evidence",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleSetting {
    Fixed(f64),
    Auto,
}

impl FromStr for ScaleSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let v: f64 = s.parse().map_err(|_| Error::invalid(format!("scale must be a number or `auto`, got `{s}`")))?;
        Ok(Self::Fixed(v))
    }
}

impl fmt::Display for ScaleSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(v) => write!(f, "{v}"),
            Self::Auto => f.write_str("auto"),
        }
    }
}

pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_ITERS: usize = 10_000;
pub const DEFAULT_SCALE: f64 = 1.2;
pub const DEFAULT_TARGET_ACCEPT: f64 = 0.5;
pub const MIN_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub runs: usize,
    /// Retained iterations per run (after burn-in for chains; posterior and
    /// proposal draws per replication for the evidence experiment).
    pub iters: usize,
    pub mu: f64,
    pub scale: ScaleSetting,
    pub target_accept: f64,
    /// Discarded chain prefix; `None` means 10% of `iters`.
    pub burn_in: Option<usize>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            seed,
            runs: DEFAULT_RUNS,
            iters: DEFAULT_ITERS,
            mu: 0.0,
            scale: ScaleSetting::Fixed(DEFAULT_SCALE),
            target_accept: DEFAULT_TARGET_ACCEPT,
            burn_in: None,
            out_dir: out_dir.into(),
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iters / 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.iters < MIN_ITERS {
            return Err(Error::invalid(format!("iters must be at least {MIN_ITERS}, got {}", self.iters)));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid(format!("mu must be finite, got {}", self.mu)));
        }
        if let ScaleSetting::Fixed(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("scale must be positive, got {s}")));
            }
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid(format!("target_accept must lie in (0, 1), got {}", self.target_accept)));
        }
        Ok(())
    }
}

/// A partial configuration, as read from one source (command line or file).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub iters: Option<usize>,
    pub mu: Option<f64>,
    pub scale: Option<ScaleSetting>,
    pub target_accept: Option<f64>,
    pub burn_in: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigLayer {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            experiment: self.experiment.or(lower.experiment),
            seed: self.seed.or(lower.seed),
            runs: self.runs.or(lower.runs),
            iters: self.iters.or(lower.iters),
            mu: self.mu.or(lower.mu),
            scale: self.scale.or(lower.scale),
            target_accept: self.target_accept.or(lower.target_accept),
            burn_in: self.burn_in.or(lower.burn_in),
            out_dir: self.out_dir.or(lower.out_dir),
        }
    }

    /// Fills remaining gaps with defaults and validates. `experiment`, `seed`
    /// and `out_dir` have no default.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let experiment = self.experiment.ok_or_else(|| Error::invalid("no experiment given"))?;
        let seed = self.seed.ok_or_else(|| Error::invalid("no seed given"))?;
        let out_dir = self.out_dir.ok_or_else(|| Error::invalid("no output directory given"))?;
        let mut cfg = ExperimentConfig::new(experiment, seed, out_dir);
        cfg.runs = self.runs.unwrap_or(cfg.runs);
        cfg.iters = self.iters.unwrap_or(cfg.iters);
        cfg.mu = self.mu.unwrap_or(cfg.mu);
        cfg.scale = self.scale.unwrap_or(cfg.scale);
        cfg.target_accept = self.target_accept.unwrap_or(cfg.target_accept);
        cfg.burn_in = self.burn_in;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Flat `key = value` lines; `#` starts a comment. Keys may use `_` or `-`.
    pub fn parse(text: &str, path: &Path) -> Result<ConfigLayer> {
        let bad = |line: usize, reason: String| Error::Parse { path: path.to_path_buf(), reason: format!("line {line}: {reason}") };
        let mut layer = ConfigLayer::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line_no, format!("expected key = value, got `{line}`")))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("cannot parse `{v}`"))
            }
            let res: std::result::Result<(), String> = match key.as_str() {
                "experiment" => value.parse().map(|e| layer.experiment = Some(e)).map_err(|e: Error| e.to_string()),
                "seed" => num(value).map(|v| layer.seed = Some(v)),
                "runs" => num(value).map(|v| layer.runs = Some(v)),
                "iters" => num(value).map(|v| layer.iters = Some(v)),
                "mu" => num(value).map(|v| layer.mu = Some(v)),
                "scale" => value.parse().map(|v| layer.scale = Some(v)).map_err(|e: Error| e.to_string()),
                "target_accept" => num(value).map(|v| layer.target_accept = Some(v)),
                "burn_in" => num(value).map(|v| layer.burn_in = Some(v)),
                "out" | "out_dir" => {
                    layer.out_dir = Some(PathBuf::from(value));
                    Ok(())
                }
                other => Err(format!("unknown key `{other}`")),
            };
            res.map_err(|r| bad(line_no, r))?;
        }
        Ok(layer)
    }
}
