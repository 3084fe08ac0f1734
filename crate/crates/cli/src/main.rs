use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use mcstat_core::harness::{run_experiment, ConfigLayer, Experiment, ScaleSetting};
use mcstat_core::Error;

/// Reproducible Monte Carlo convergence experiments.
#[derive(Debug, Parser)]
#[command(name = "mcstat", version)]
struct Cli {
    /// figure1, figure2, figure3 or evidence.
    experiment: Experiment,

    /// Base seed; run k draws from substream k.
    #[arg(long)]
    seed: Option<u64>,

    /// Independent runs (evidence: replications).
    #[arg(long)]
    runs: Option<usize>,

    /// Retained iterations per run.
    #[arg(long)]
    iters: Option<usize>,

    /// Mean of the normal sampling distribution (figure1).
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,

    /// Random-walk scale, or `auto` to calibrate it (figure3).
    #[arg(long)]
    scale: Option<ScaleSetting>,

    /// Acceptance rate targeted by `--scale auto`.
    #[arg(long)]
    target_accept: Option<f64>,

    /// Discarded chain prefix [default: 10% of iters].
    #[arg(long)]
    burn_in: Option<usize>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Flat key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Cli {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            experiment: Some(self.experiment),
            seed: self.seed,
            runs: self.runs,
            iters: self.iters,
            mu: self.mu,
            scale: self.scale,
            target_accept: self.target_accept,
            burn_in: self.burn_in,
            out_dir: self.out.clone(),
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let file = match &cli.config {
        Some(path) => ConfigLayer::from_file(path)?,
        None => ConfigLayer::default(),
    };
    let cfg = cli.layer().over(file).resolve()?;
    let report = run_experiment(&cfg)?;
    for line in &report.lines {
        println!("{line}");
    }
    for path in &report.files {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
