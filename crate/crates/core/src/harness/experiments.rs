use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, ScaleSetting};
use super::envelope::{run_envelope, run_envelope_with, EnvelopeSummary, RunOutput};
use super::export::{envelope_plot, export_csv, fmt_f64, write_file, Plot, Series};
use crate::diagnostics::{mean, sample_sd};
use crate::distributions::{Normal, Proposal, Sampler, StudentT};
use crate::estimators::ess;
use crate::evidence::{bridge_log_evidence, chib_log_evidence, harmonic_mean_log_evidence, EvidenceMethod};
use crate::mcmc::{calibrate_scale, run_mh_chain, CalibrationReport, RwProposal};
use crate::slice::run_gibbs_chain;
use crate::targets::{
    analytic_log_evidence, builtin_model, example_target, gaussian_functional, gaussian_functional_expectation,
    posterior_params, synthetic_data, ConjugateNormalModel, ExampleCdf, SYNTHETIC_THETA,
};
use crate::{Error, Result, RngStream};

/// Stream used for scale calibration; run k always uses stream k.
pub const CALIBRATION_STREAM: u64 = u64::MAX;
/// Stream the synthetic evidence dataset is drawn from.
pub const DATA_STREAM: u64 = u64::MAX - 1;
pub const EVIDENCE_N: usize = 20;
pub const EVIDENCE_MODELS: [&str; 2] = ["conj-n01", "conj-n14"];
/// Degrees of freedom of the Student-t bridge proposal.
pub const BRIDGE_PROPOSAL_DF: f64 = 5.0;

pub const HIST_BINS: usize = 50;
pub const HIST_RANGE: (f64, f64) = (-4.0, 4.0);

/// Equal-width histogram; draws outside the range are counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self { lo, hi, counts: vec![0; bins], outside: 0 }
    }

    pub fn add(&mut self, x: f64) {
        let bins = self.counts.len();
        if x >= self.lo && x < self.hi {
            let i = (((x - self.lo) / (self.hi - self.lo)) * bins as f64) as usize;
            self.counts[i.min(bins - 1)] += 1;
        } else if x == self.hi {
            self.counts[bins - 1] += 1;
        } else {
            self.outside += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / self.counts.len() as f64
    }

    /// Bin probabilities among the in-range draws.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.in_range().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Target bin probabilities conditional on the histogram range.
    pub fn oracle_masses(&self, cdf: &ExampleCdf) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.counts.len()).map(|i| cdf.cdf(self.edge(i + 1)) - cdf.cdf(self.edge(i))).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|m| m / total).collect()
    }

    pub fn tv_distance(&self, cdf: &ExampleCdf) -> f64 {
        0.5 * self.masses().iter().zip(self.oracle_masses(cdf)).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn to_csv(&self, cdf: &ExampleCdf) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,mass,oracle_mass\n");
        for (i, (m, o)) in self.masses().iter().zip(self.oracle_masses(cdf)).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(self.edge(i)),
                fmt_f64(self.edge(i + 1)),
                self.counts[i],
                fmt_f64(*m),
                fmt_f64(o)
            );
        }
        out
    }

    /// Histogram as a step line with the target density overlaid.
    pub fn density_plot(&self, cdf: &ExampleCdf, title: &str) -> Plot {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        let in_mass = cdf.cdf(self.hi) - cdf.cdf(self.lo);
        let mut steps = Vec::with_capacity(2 * self.counts.len());
        for (i, m) in self.masses().iter().enumerate() {
            let h = m * in_mass / width;
            steps.push((self.edge(i), h));
            steps.push((self.edge(i + 1), h));
        }
        let curve = (0..=400).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 400.0).map(|x| (x, cdf.pdf(x))).collect();
        Plot {
            title: title.into(),
            x_label: "x".into(),
            y_label: "density".into(),
            log_x: false,
            bands: Vec::new(),
            series: vec![
                Series { name: "histogram".into(), points: steps, color: "#d9631e", dashed: false },
                Series { name: "target density".into(), points: curve, color: "#1f4e9c", dashed: false },
            ],
            reference: None,
        }
    }
}

fn cube(x: f64) -> f64 {
    x * x * x
}

/// Plain Monte Carlo for E[x³/(1+x²+x⁴)] under N(μ, 1).
pub fn figure1(cfg: &ExperimentConfig) -> Result<EnvelopeSummary> {
    cfg.validate()?;
    let g = Normal::new(cfg.mu, 1.0)?;
    let iters = cfg.iters;
    let mut s = run_envelope(|rng| Ok((0..iters).map(|_| gaussian_functional(g.sample(rng))).collect()), cfg.runs, iters, cfg.seed)?;
    s.reference = Some(gaussian_functional_expectation(cfg.mu)?);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFigure {
    /// Running mean of x³ over retained draws.
    pub envelope: EnvelopeSummary,
    /// All runs' retained draws pooled.
    pub histogram: Histogram,
    pub tv_distance: f64,
    pub scale: Option<f64>,
    /// Pooled post-burn-in acceptance rate (MH only).
    pub acceptance_rate: Option<f64>,
    pub calibration: Option<CalibrationReport>,
}

fn pooled(hists: &[Histogram]) -> Histogram {
    let mut h = Histogram::new(HIST_RANGE.0, HIST_RANGE.1, HIST_BINS);
    for other in hists {
        h.merge(other);
    }
    h
}

fn retained_histogram(xs: &[f64]) -> Histogram {
    let mut h = Histogram::new(HIST_RANGE.0, HIST_RANGE.1, HIST_BINS);
    xs.iter().for_each(|&x| h.add(x));
    h
}

/// Slice-Gibbs chains from x₀ = 0: `burn_in + iters` steps each.
pub fn figure2(cfg: &ExperimentConfig) -> Result<ChainFigure> {
    cfg.validate()?;
    let (iters, burn_in) = (cfg.iters, cfg.burn_in());
    let (envelope, hists) = run_envelope_with(
        |rng| {
            let chain = run_gibbs_chain(0.0, burn_in + iters, burn_in, rng)?;
            let post = chain.post_burn_in();
            Ok(RunOutput { values: post.iter().map(|&x| cube(x)).collect(), aux: retained_histogram(post) })
        },
        cfg.runs,
        iters,
        cfg.seed,
    )?;
    finish_chain_figure(envelope, &hists, None, None, None)
}

/// Random-walk MH chains from x₀ = 0 at a fixed or calibrated scale.
pub fn figure3(cfg: &ExperimentConfig) -> Result<ChainFigure> {
    cfg.validate()?;
    let target = example_target();
    let (scale, calibration) = match cfg.scale {
        ScaleSetting::Fixed(s) => (s, None),
        ScaleSetting::Auto => {
            let mut rng = RngStream::with_stream(cfg.seed, CALIBRATION_STREAM);
            let c = calibrate_scale(&target, cfg.target_accept, 0.0, &mut rng)?;
            (c.scale, Some(c))
        }
    };
    let prop = RwProposal::new(scale)?;
    let (iters, burn_in) = (cfg.iters, cfg.burn_in());
    let (envelope, aux) = run_envelope_with(
        |rng| {
            let chain = run_mh_chain(&target, &prop, 0.0, burn_in + iters, burn_in, rng)?;
            let post = chain.post_burn_in();
            let accepted = chain.accepted.as_ref().map_or(0, |a| a[burn_in..].iter().filter(|&&a| a).count());
            Ok(RunOutput { values: post.iter().map(|&x| cube(x)).collect(), aux: (retained_histogram(post), accepted) })
        },
        cfg.runs,
        iters,
        cfg.seed,
    )?;
    let accepted: usize = aux.iter().map(|a| a.1).sum();
    let rate = accepted as f64 / (cfg.runs * iters) as f64;
    let hists: Vec<Histogram> = aux.into_iter().map(|a| a.0).collect();
    finish_chain_figure(envelope, &hists, Some(scale), Some(rate), calibration)
}

fn finish_chain_figure(
    mut envelope: EnvelopeSummary,
    hists: &[Histogram],
    scale: Option<f64>,
    acceptance_rate: Option<f64>,
    calibration: Option<CalibrationReport>,
) -> Result<ChainFigure> {
    envelope.reference = Some(0.0);
    let histogram = pooled(hists);
    let tv_distance = histogram.tv_distance(&ExampleCdf::new());
    Ok(ChainFigure { envelope, histogram, tv_distance, scale, acceptance_rate, calibration })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRow {
    pub model: String,
    pub method: EvidenceMethod,
    pub replication: usize,
    pub draws: usize,
    pub log_evidence: f64,
    pub truth: f64,
    /// ESS of the harmonic-mean weights, or bridge iterations; `None` for Chib.
    pub ess_or_iterations: Option<f64>,
    pub converged: bool,
}

impl EvidenceRow {
    pub fn error(&self) -> f64 {
        self.log_evidence - self.truth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesFactorRow {
    pub method: EvidenceMethod,
    pub replication: usize,
    pub log_bayes_factor: f64,
    pub truth: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceReport {
    pub seed: u64,
    pub data: Vec<f64>,
    pub models: Vec<ConjugateNormalModel>,
    pub truths: Vec<f64>,
    pub rows: Vec<EvidenceRow>,
    pub bayes_factors: Vec<BayesFactorRow>,
}

impl EvidenceReport {
    pub fn errors(&self, model: &str, method: EvidenceMethod) -> Vec<f64> {
        self.rows.iter().filter(|r| r.model == model && r.method == method).map(EvidenceRow::error).collect()
    }

    pub fn count_within(&self, model: &str, method: EvidenceMethod, tol: f64) -> usize {
        self.errors(model, method).iter().filter(|e| e.abs() <= tol).count()
    }

    /// Cross-replication standard deviation of the log-evidence estimates.
    pub fn spread(&self, model: &str, method: EvidenceMethod) -> f64 {
        sample_sd(&self.errors(model, method))
    }

    pub fn csv(&self, model: &str) -> String {
        let mut out = String::from("estimator,replication,seed,T,log_evidence,analytic_truth,error,ess_or_iterations,converged\n");
        for r in self.rows.iter().filter(|r| r.model == model) {
            let extra = r.ess_or_iterations.map_or_else(|| "NA".to_string(), fmt_f64);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.method,
                r.replication,
                self.seed,
                r.draws,
                fmt_f64(r.log_evidence),
                fmt_f64(r.truth),
                fmt_f64(r.error()),
                extra,
                r.converged
            );
        }
        out
    }

    pub fn bayes_factor_csv(&self) -> String {
        let mut out = String::from("estimator,replication,seed,log_bayes_factor,analytic_truth,error,converged\n");
        for b in &self.bayes_factors {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                b.method,
                b.replication,
                self.seed,
                fmt_f64(b.log_bayes_factor),
                fmt_f64(b.truth),
                fmt_f64(b.log_bayes_factor - b.truth),
                b.converged
            );
        }
        out
    }
}

/// The fixed n = 20 dataset for `seed`.
pub fn evidence_dataset(seed: u64) -> Vec<f64> {
    synthetic_data(&mut RngStream::with_stream(seed, DATA_STREAM), EVIDENCE_N, SYNTHETIC_THETA, 1.0)
}

fn one_model(
    model: &ConjugateNormalModel,
    data: &[f64],
    truth: f64,
    replication: usize,
    t: usize,
    rng: &mut RngStream,
) -> Result<Vec<EvidenceRow>> {
    let post = posterior_params(model, data)?;
    let exact = Normal::new(post.mean, post.var.sqrt())?;
    let draws: Vec<f64> = (0..t).map(|_| exact.sample(rng)).collect();
    let proposal = StudentT::new(BRIDGE_PROPOSAL_DF, mean(&draws), sample_sd(&draws))?;
    let prop_draws: Vec<f64> = (0..t).map(|_| proposal.sample(rng)).collect();
    let log_liks: Vec<f64> = draws.iter().map(|&th| model.log_likelihood(data, th)).collect();

    let hm = harmonic_mean_log_evidence(&log_liks)?;
    let neg: Vec<f64> = log_liks.iter().map(|l| -l).collect();
    let bridge = bridge_log_evidence(&draws, &prop_draws, |th| model.log_joint(data, th), |th| proposal.log_pdf(th))?;
    let chib = chib_log_evidence(model, data, &draws)?;

    let row = |method, log_evidence, extra: Option<f64>, converged| EvidenceRow {
        model: model.name.clone(),
        method,
        replication,
        draws: t,
        log_evidence,
        truth,
        ess_or_iterations: extra,
        converged,
    };
    Ok(vec![
        row(EvidenceMethod::HarmonicMean, hm.log_evidence, Some(ess(&neg)?), hm.diagnostics.converged),
        row(
            EvidenceMethod::Bridge,
            bridge.log_evidence,
            bridge.diagnostics.iterations.map(|i| i as f64),
            bridge.diagnostics.converged,
        ),
        row(EvidenceMethod::Chib, chib.log_evidence, None, chib.diagnostics.converged),
    ])
}

/// Each replication r (stream r) draws `iters` exact posterior draws and as
/// many Student-t proposal draws per model, then applies all three
/// estimators.
pub fn evidence(cfg: &ExperimentConfig) -> Result<EvidenceReport> {
    cfg.validate()?;
    let data = evidence_dataset(cfg.seed);
    let models: Vec<ConjugateNormalModel> = EVIDENCE_MODELS.iter().map(|m| builtin_model(m)).collect::<Result<_>>()?;
    let truths: Vec<f64> = models.iter().map(|m| analytic_log_evidence(m, &data)).collect::<Result<_>>()?;
    let per_rep: Vec<Result<Vec<EvidenceRow>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::with_stream(cfg.seed, r as u64);
            let mut rows = Vec::with_capacity(3 * models.len());
            for (m, &truth) in models.iter().zip(&truths) {
                rows.extend(one_model(m, &data, truth, r, cfg.iters, &mut rng)?);
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::with_capacity(cfg.runs * 6);
    for (r, res) in per_rep.into_iter().enumerate() {
        rows.extend(res.map_err(|e| Error::Run { run: r, source: Box::new(e) })?);
    }
    let bf_truth = truths[0] - truths[1];
    let mut bayes_factors = Vec::with_capacity(cfg.runs * 3);
    for r in 0..cfg.runs {
        for method in EvidenceMethod::ALL {
            let pick = |name: &str| rows.iter().find(|x| x.replication == r && x.method == method && x.model == name).unwrap();
            let (a, b) = (pick(EVIDENCE_MODELS[0]), pick(EVIDENCE_MODELS[1]));
            bayes_factors.push(BayesFactorRow {
                method,
                replication: r,
                log_bayes_factor: a.log_evidence - b.log_evidence,
                truth: bf_truth,
                converged: a.converged && b.converged,
            });
        }
    }
    Ok(EvidenceReport { seed: cfg.seed, data, models, truths, rows, bayes_factors })
}

/// Files written and a short human-readable digest.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl RunReport {
    fn write(&mut self, name: &str, contents: &str, cfg: &ExperimentConfig) -> Result<()> {
        let path = cfg.out_dir.join(name);
        write_file(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn envelope(&mut self, s: &EnvelopeSummary, cfg: &ExperimentConfig, title: &str, with_se: bool) -> Result<()> {
        let name = cfg.experiment.as_str();
        let traces = cfg.out_dir.join(format!("{name}.csv"));
        let summary = cfg.out_dir.join("summary.csv");
        export_csv(s, &traces, &summary)?;
        self.files.push(traces);
        self.files.push(summary);
        let svg = cfg.out_dir.join(format!("{name}.svg"));
        envelope_plot(s, title, with_se).write(&svg)?;
        self.files.push(svg);
        let terminal = s.iters_axis.last().copied().unwrap_or(0);
        self.lines.push(format!(
            "terminal band at T={terminal}: [{:.6}, {:.6}] (width {:.6})",
            s.band_lo.last().unwrap_or(&f64::NAN),
            s.band_hi.last().unwrap_or(&f64::NAN),
            s.terminal_width()
        ));
        if let Some(r) = s.reference {
            self.lines.push(format!("reference value {r:.10}"));
        }
        Ok(())
    }

    fn chain(&mut self, fig: &ChainFigure, cfg: &ExperimentConfig, title: &str) -> Result<()> {
        let name = cfg.experiment.as_str();
        self.envelope(&fig.envelope, cfg, title, false)?;
        let cdf = ExampleCdf::new();
        self.write(&format!("{name}_histogram.csv"), &fig.histogram.to_csv(&cdf), cfg)?;
        let path = cfg.out_dir.join(format!("{name}_density.svg"));
        fig.histogram.density_plot(&cdf, &format!("{title}: retained draws")).write(&path)?;
        self.files.push(path);
        self.lines.push(format!("histogram total-variation distance {:.5}", fig.tv_distance));
        Ok(())
    }
}

/// Runs the configured experiment and writes its artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut report = RunReport::default();
    match cfg.experiment {
        Experiment::Figure1 => {
            let s = figure1(cfg)?;
            report.envelope(&s, cfg, &format!("Monte Carlo, mu = {}", cfg.mu), true)?;
        }
        Experiment::Figure2 => {
            let fig = figure2(cfg)?;
            report.chain(&fig, cfg, "Slice Gibbs sampler")?;
        }
        Experiment::Figure3 => {
            let fig = figure3(cfg)?;
            let scale = fig.scale.unwrap_or(f64::NAN);
            report.chain(&fig, cfg, &format!("Random-walk Metropolis-Hastings, scale {scale:.4}"))?;
            let rate = fig.acceptance_rate.unwrap_or(f64::NAN);
            let mut csv = String::from("scale,mode,validation_rate,windows_used,chain_acceptance\n");
            match fig.calibration {
                Some(c) => {
                    let _ = writeln!(csv, "{},auto,{},{},{}", fmt_f64(c.scale), fmt_f64(c.measured_rate), c.windows_used, fmt_f64(rate));
                }
                None => {
                    let _ = writeln!(csv, "{},fixed,NA,0,{}", fmt_f64(scale), fmt_f64(rate));
                }
            }
            report.write("calibration.csv", &csv, cfg)?;
            report.lines.push(format!("scale {scale:.6}, acceptance rate {rate:.4}"));
        }
        Experiment::Evidence => {
            let ev = evidence(cfg)?;
            for (model, truth) in EVIDENCE_MODELS.iter().zip(&ev.truths) {
                report.write(&format!("evidence_{model}.csv"), &ev.csv(model), cfg)?;
                report.lines.push(format!("{model}: analytic log evidence {truth:.8}"));
                for method in EvidenceMethod::ALL {
                    let errs = ev.errors(model, method);
                    report.lines.push(format!(
                        "  {:<14} mean error {:+.5}, sd {:.5}",
                        method.as_str(),
                        mean(&errs),
                        ev.spread(model, method)
                    ));
                }
            }
            report.write("bayes_factor.csv", &ev.bayes_factor_csv(), cfg)?;
            report.lines.push(format!("analytic log Bayes factor {:.8}", ev.truths[0] - ev.truths[1]));
        }
    }
    Ok(report)
}
