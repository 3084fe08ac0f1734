//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the report is always printed.

use std::path::Path;
use std::time::{Duration, Instant};

use mcstat_core::diagnostics::{ks_critical_value, ks_statistic, log_log_slope, mean, sample_sd};
use mcstat_core::evidence::EvidenceMethod;
use mcstat_core::harness::experiments::EVIDENCE_MODELS;
use mcstat_core::harness::{evidence, figure1, figure2, figure3, run_experiment, Experiment, ExperimentConfig};
use mcstat_core::mcmc::{
    calibrate_scale, discrete_mh_transition_matrix, discretized_pmf, empirical_transitions, run_discrete_mh,
    run_mh_chain, Matrix, RwProposal,
};
use mcstat_core::slice::{run_gibbs_chain, slice_truncation_bound};
use mcstat_core::targets::{example_target, gaussian_functional_expectation, ExampleCdf};
use mcstat_core::RngStream;

const SEED: u64 = 20_241_015;

// Tolerances and budgets, pinned.
const C1_SCALE: f64 = 1.2;
const C1_STEPS: usize = 100_000;
const C1_BURN_IN: usize = 1_000;
const C1_TOL: f64 = 0.05;
const C1_BUDGET: Duration = Duration::from_secs(5);
const C2_SEEDS: u64 = 10;
const C2_MIN_PASS: usize = 9;
const C2_SCALE_RANGE: (f64, f64) = (1.0, 1.4);
const C2_RATE_TOL: f64 = 0.05;
const C3_SEEDS: u64 = 100;
const C3_MIN_PASS: usize = 95;
const C3_DRAWS: usize = 10_000;
const C3_THIN: usize = 10;
const C3_BURN_IN: usize = 1_000;
const C3_ALPHA: f64 = 0.01;
const C3_BUDGET: Duration = Duration::from_secs(30);
const ENVELOPE_RUNS: usize = 100;
const ENVELOPE_ITERS: usize = 10_000;
const C5_SLOPE: f64 = -0.5;
const C5_SLOPE_TOL: f64 = 0.15;
const C6_MU: f64 = 2.5;
const C6_SES: f64 = 3.0;
const C7_BRIDGE_TOL: f64 = 0.05;
const C7_CHIB_TOL: f64 = 0.1;
const C7_MIN_PASS: usize = 90;
const C8_STEPS: usize = 1_000_000;
const C8_TOL: f64 = 0.01;
const C8_BALANCE_TOL: f64 = 1e-12;
const C8_GRID_STEP: f64 = 0.4;
const C9_DRAWS: usize = 1_000;
const C9_RESIDUAL_TOL: f64 = 1e-10;
const C9_THIRD_TOL: f64 = 1e-12;
const SUITE_BUDGET: Duration = Duration::from_secs(300);

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(e: Experiment) -> ExperimentConfig {
    ExperimentConfig::new(e, SEED, "unused")
}

fn c1_acceptance_anchor() -> Outcome {
    let start = Instant::now();
    let prop = RwProposal::new(C1_SCALE).unwrap();
    let chain = run_mh_chain(&example_target(), &prop, 0.0, C1_BURN_IN + C1_STEPS, C1_BURN_IN, &mut RngStream::new(SEED))
        .unwrap();
    let rate = chain.post_burn_in_acceptance_rate().unwrap();
    let took = start.elapsed();
    outcome(
        (rate - 0.5).abs() <= C1_TOL && took < C1_BUDGET,
        format!("acceptance {rate:.4} at scale {C1_SCALE} over {C1_STEPS} steps in {took:.2?}"),
    )
}

fn c2_calibration() -> Outcome {
    let target = example_target();
    let mut ok = 0;
    let mut scales = Vec::new();
    for k in 0..C2_SEEDS {
        let r = calibrate_scale(&target, 0.5, 0.0, &mut RngStream::new(SEED).derive_substream(k));
        if let Ok(r) = r {
            scales.push(r.scale);
            if (C2_SCALE_RANGE.0..=C2_SCALE_RANGE.1).contains(&r.scale) && (r.measured_rate - 0.5).abs() <= C2_RATE_TOL {
                ok += 1;
            }
        }
    }
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(ok >= C2_MIN_PASS, format!("{ok}/{C2_SEEDS} seeds calibrated, scales in [{lo:.3}, {hi:.3}]"))
}

fn c3_gibbs_fit() -> Outcome {
    let start = Instant::now();
    let table = ExampleCdf::new();
    let crit = ks_critical_value(C3_DRAWS, C3_ALPHA);
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for k in 0..C3_SEEDS {
        let mut rng = RngStream::new(SEED).derive_substream(k);
        let chain = run_gibbs_chain(0.0, C3_BURN_IN + C3_DRAWS * C3_THIN, C3_BURN_IN, &mut rng).unwrap();
        let thinned: Vec<f64> = chain.post_burn_in().iter().skip(C3_THIN - 1).step_by(C3_THIN).copied().collect();
        let d = ks_statistic(&thinned, |x| table.cdf(x));
        worst = worst.max(d);
        ok += usize::from(d < crit);
    }
    let took = start.elapsed();
    outcome(
        ok >= C3_MIN_PASS && took < C3_BUDGET,
        format!("{ok}/{C3_SEEDS} seeds below KS critical value {crit:.5} (max D {worst:.5}) in {took:.2?}"),
    )
}

fn envelope_config(e: Experiment) -> ExperimentConfig {
    let mut c = config(e);
    c.runs = ENVELOPE_RUNS;
    c.iters = ENVELOPE_ITERS;
    c
}

fn c4_shared_truth() -> Outcome {
    let gibbs = figure2(&envelope_config(Experiment::Figure2)).unwrap().envelope;
    let mh = figure3(&envelope_config(Experiment::Figure3)).unwrap().envelope;
    let (wg, wm) = (gibbs.terminal_width(), mh.terminal_width());
    outcome(
        gibbs.terminal_brackets(0.0) && mh.terminal_brackets(0.0) && wg < wm,
        format!(
            "Gibbs band [{:.4}, {:.4}], MH band [{:.4}, {:.4}], widths {wg:.4} < {wm:.4}",
            gibbs.band_lo.last().unwrap(),
            gibbs.band_hi.last().unwrap(),
            mh.band_lo.last().unwrap(),
            mh.band_hi.last().unwrap()
        ),
    )
}

fn c5_sqrt_t_law() -> Outcome {
    let s = figure1(&envelope_config(Experiment::Figure1)).unwrap();
    let t: Vec<f64> = s.iters_axis.iter().map(|&t| t as f64).collect();
    let slope = log_log_slope(&t, &s.width());
    outcome((slope - C5_SLOPE).abs() <= C5_SLOPE_TOL, format!("log-log slope of band width {slope:.4}"))
}

fn c6_figure1_asymptote() -> Outcome {
    let mut c = envelope_config(Experiment::Figure1);
    c.mu = C6_MU;
    let s = figure1(&c).unwrap();
    let truth = gaussian_functional_expectation(C6_MU).unwrap();
    let term = s.terminal_values();
    let se = sample_sd(&term) / (term.len() as f64).sqrt();
    let m = mean(&term);
    outcome(
        (m - truth).abs() <= C6_SES * se,
        format!("ensemble mean {m:.6} vs oracle {truth:.6} (|diff| {:.2e}, 3 se {:.2e})", (m - truth).abs(), C6_SES * se),
    )
}

fn c7_evidence() -> Outcome {
    let mut c = config(Experiment::Evidence);
    c.runs = 100;
    let ev = evidence(&c).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in EVIDENCE_MODELS {
        let bridge = ev.count_within(model, EvidenceMethod::Bridge, C7_BRIDGE_TOL);
        let chib = ev.count_within(model, EvidenceMethod::Chib, C7_CHIB_TOL);
        let sd_hm = ev.spread(model, EvidenceMethod::HarmonicMean);
        let sd_br = ev.spread(model, EvidenceMethod::Bridge);
        pass &= bridge >= C7_MIN_PASS && chib >= C7_MIN_PASS && sd_hm > sd_br;
        parts.push(format!("{model}: bridge {bridge}/100, chib {chib}/100, sd hm {sd_hm:.4} > bridge {sd_br:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn c8_discrete_oracle() -> Outcome {
    let xs: Vec<f64> = (-3..=3).map(|i| C8_GRID_STEP * f64::from(i)).collect();
    let pmf = discretized_pmf(&example_target(), &xs).unwrap();
    let mut rng = RngStream::new(SEED).derive_substream(8);
    let q: Matrix = (0..7)
        .map(|_| {
            let row: Vec<f64> = (0..7).map(|_| 0.05 + rng.next_f64()).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    let p = discrete_mh_transition_matrix(&pmf, &q).unwrap();
    let mut balance: f64 = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            balance = balance.max((pmf[i] * p[i][j] - pmf[j] * p[j][i]).abs());
        }
    }
    let path = run_discrete_mh(&pmf, &q, 3, C8_STEPS, &mut rng).unwrap();
    let emp = empirical_transitions(&path, 7);
    let dev = (0..7).flat_map(|i| (0..7).map(move |j| (i, j))).map(|(i, j)| (emp[i][j] - p[i][j]).abs()).fold(0.0, f64::max);
    outcome(
        dev <= C8_TOL && balance <= C8_BALANCE_TOL,
        format!("max |empirical - exact| {dev:.5}, detailed-balance residual {balance:.1e}"),
    )
}

fn c9_slice_bound() -> Outcome {
    let mut rng = RngStream::new(SEED).derive_substream(9);
    let mut worst: f64 = 0.0;
    for _ in 0..C9_DRAWS {
        let u = 1.0 - rng.next_f64();
        let b = slice_truncation_bound(u).unwrap();
        worst = worst.max((1.0 + b * b + b.powi(4) - 1.0 / u).abs());
    }
    let third = (slice_truncation_bound(1.0 / 3.0).unwrap() - 1.0).abs();
    outcome(
        worst <= C9_RESIDUAL_TOL && third <= C9_THIRD_TOL,
        format!("max residual {worst:.1e}, |b(1/3) - 1| {third:.1e}"),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn c10_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut files = 0;
    for e in Experiment::ALL {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let mut c = envelope_config(e);
            c.out_dir = root.path().join(format!("{e}-{attempt}"));
            run_experiment(&c).unwrap();
            outputs.push(csv_files(&c.out_dir));
        }
        files += outputs[0].len();
        if outputs[0] == outputs[1] && !outputs[0].is_empty() {
            identical += 1;
        }
    }
    outcome(identical == Experiment::ALL.len(), format!("{identical}/4 experiments byte-identical across reruns ({files} CSV files)"))
}

fn main() {
    let start = Instant::now();
    let criteria: [Criterion; 10] = [
        ("acceptance-rate anchor", c1_acceptance_anchor),
        ("calibration inverse", c2_calibration),
        ("Gibbs fit", c3_gibbs_fit),
        ("shared truth E[X^3] = 0", c4_shared_truth),
        ("sqrt(T) law", c5_sqrt_t_law),
        ("figure 1 asymptote at mu = 2.5", c6_figure1_asymptote),
        ("evidence oracles", c7_evidence),
        ("discrete MH oracle", c8_discrete_oracle),
        ("slice-bound self-consistency", c9_slice_bound),
        ("determinism", c10_determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        failures += usize::from(!o.pass);
        println!("[{}] {:>2}. {name}: {} ({:.1?})", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail, t.elapsed());
    }
    let total = start.elapsed();
    let in_budget = total < SUITE_BUDGET;
    println!("[{}] suite runtime {total:.1?} (budget {SUITE_BUDGET:?})", if in_budget { "PASS" } else { "FAIL" });
    if failures > 0 || !in_budget {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
