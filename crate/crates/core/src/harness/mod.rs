//! Multi-run experiments with convergence envelopes and CSV/SVG output.

pub mod config;
pub mod envelope;
pub mod experiments;
pub mod export;

pub use config::{ConfigLayer, Experiment, ExperimentConfig, ScaleSetting};
pub use envelope::{checkpoints, run_envelope, run_envelope_with, EnvelopeSummary, RunOutput};
pub use experiments::{evidence, figure1, figure2, figure3, run_experiment, ChainFigure, EvidenceReport, Histogram, RunReport};
pub use export::{export_csv, export_svg, read_csv};
