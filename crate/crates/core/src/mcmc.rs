//! Random-walk Metropolis–Hastings, scale calibration and a brute-force
//! discrete MH oracle.

use std::io::Write;

use crate::distributions::standard_normal;
use crate::targets::TargetDensity;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedInfo {
    pub seed: u64,
    pub stream_id: u64,
}

impl SeedInfo {
    pub fn of(rng: &RngStream) -> Self {
        Self { seed: rng.seed(), stream_id: rng.stream_id() }
    }

    /// A fresh stream positioned where the recorded chain started.
    pub fn stream(&self) -> RngStream {
        RngStream::with_stream(self.seed, self.stream_id)
    }
}

/// The path of one chain. `states[t]` is the state after step t + 1; the
/// starting point is kept in `init`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub init: f64,
    pub states: Vec<f64>,
    /// Per-step acceptance flags (Metropolis–Hastings chains only).
    pub accepted: Option<Vec<bool>>,
    pub burn_in: usize,
    pub seed_info: SeedInfo,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn post_burn_in(&self) -> &[f64] {
        &self.states[self.burn_in.min(self.states.len())..]
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        self.accepted.as_deref().map(rate)
    }

    pub fn post_burn_in_acceptance_rate(&self) -> Option<f64> {
        self.accepted.as_deref().map(|a| rate(&a[self.burn_in.min(a.len())..]))
    }

    /// CSV with columns `iter,state[,accepted]`; iterations count from 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.accepted {
            Some(acc) => {
                writeln!(w, "iter,state,accepted")?;
                for (i, (x, a)) in self.states.iter().zip(acc).enumerate() {
                    writeln!(w, "{},{:.16e},{}", i + 1, x, u8::from(*a))?;
                }
            }
            None => {
                writeln!(w, "iter,state")?;
                for (i, x) in self.states.iter().enumerate() {
                    writeln!(w, "{},{:.16e}", i + 1, x)?;
                }
            }
        }
        Ok(())
    }
}

fn rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&a| a).count() as f64 / flags.len() as f64
}

/// Normal random-walk proposal y ~ N(x, scale²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwProposal {
    scale: f64,
}

impl RwProposal {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("proposal scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// log q(to | from).
    pub fn log_pdf(&self, to: f64, from: f64) -> f64 {
        crate::special::normal_logpdf(to, from, self.scale)
    }

    #[inline]
    fn propose(&self, x: f64, rng: &mut RngStream) -> f64 {
        x + self.scale * standard_normal(rng)
    }
}

/// min(0, [log f(y) + log q(x|y)] − [log f(x) + log q(y|x)]) from the four
/// log terms. −∞ when f(y) = 0.
#[inline]
pub fn log_acceptance(log_fx: f64, log_fy: f64, log_q_x_given_y: f64, log_q_y_given_x: f64) -> f64 {
    if log_fy == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    ((log_fy + log_q_x_given_y) - (log_fx + log_q_y_given_x)).min(0.0)
}

/// Log acceptance probability of a move x → y. `proposal_logpdf(to, from)`
/// is log q(to | from).
pub fn mh_acceptance_log_prob<Q>(x: f64, y: f64, target: &TargetDensity, proposal_logpdf: Q) -> Result<f64>
where
    Q: Fn(f64, f64) -> f64,
{
    let log_fx = target.log_density(x);
    if log_fx == f64::NEG_INFINITY || !x.is_finite() {
        return Err(Error::OutsideSupport { target: target.name().to_string(), state: x });
    }
    if y == x {
        return Ok(0.0);
    }
    let log_fy = target.log_density(y);
    Ok(log_acceptance(log_fx, log_fy, proposal_logpdf(x, y), proposal_logpdf(y, x)))
}

/// One random-walk MH transition from `x`.
pub fn mh_step(x: f64, target: &TargetDensity, prop: &RwProposal, rng: &mut RngStream) -> Result<(f64, bool)> {
    let log_fx = target.log_density(x);
    if log_fx == f64::NEG_INFINITY || !x.is_finite() {
        return Err(Error::OutsideSupport { target: target.name().to_string(), state: x });
    }
    let (next, _, accepted) = step_cached(x, log_fx, target, prop, rng);
    Ok((next, accepted))
}

/// MH step reusing log f(x). The proposal is symmetric, so the q terms
/// cancel exactly.
#[inline]
fn step_cached(
    x: f64,
    log_fx: f64,
    target: &TargetDensity,
    prop: &RwProposal,
    rng: &mut RngStream,
) -> (f64, f64, bool) {
    let y = prop.propose(x, rng);
    let log_fy = target.log_density(y);
    let log_alpha = log_acceptance(log_fx, log_fy, 0.0, 0.0);
    let u = rng.next_open01();
    if u.ln() < log_alpha {
        (y, log_fy, true)
    } else {
        (x, log_fx, false)
    }
}

fn check_lengths(iters: usize, burn_in: usize) -> Result<()> {
    if iters <= burn_in {
        return Err(Error::invalid(format!("iters ({iters}) must exceed burn_in ({burn_in})")));
    }
    Ok(())
}

pub fn run_mh_chain(
    target: &TargetDensity,
    prop: &RwProposal,
    init: f64,
    iters: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<ChainTrace> {
    check_lengths(iters, burn_in)?;
    let seed_info = SeedInfo::of(rng);
    let mut log_fx = target.log_density(init);
    if log_fx == f64::NEG_INFINITY || !init.is_finite() {
        return Err(Error::OutsideSupport { target: target.name().to_string(), state: init });
    }
    let mut x = init;
    let mut states = Vec::with_capacity(iters);
    let mut accepted = Vec::with_capacity(iters);
    for _ in 0..iters {
        let (nx, nl, acc) = step_cached(x, log_fx, target, prop, rng);
        x = nx;
        log_fx = nl;
        states.push(x);
        accepted.push(acc);
    }
    Ok(ChainTrace { init, states, accepted: Some(accepted), burn_in, seed_info })
}

/// Acceptance rate of `steps` frozen random-walk steps from `init`; returns
/// the rate and the final state.
pub fn measure_acceptance(
    target: &TargetDensity,
    prop: &RwProposal,
    init: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let mut log_fx = target.log_density(init);
    if log_fx == f64::NEG_INFINITY || !init.is_finite() {
        return Err(Error::OutsideSupport { target: target.name().to_string(), state: init });
    }
    let mut x = init;
    let mut hits = 0usize;
    for _ in 0..steps {
        let (nx, nl, acc) = step_cached(x, log_fx, target, prop, rng);
        x = nx;
        log_fx = nl;
        hits += usize::from(acc);
    }
    Ok((hits as f64 / steps.max(1) as f64, x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub initial_scale: f64,
    pub windows: usize,
    pub window_len: usize,
    pub validation_steps: usize,
    /// Accepted |validated rate − target|.
    pub tolerance: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { initial_scale: 1.0, windows: 50, window_len: 400, validation_steps: 20_000, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub scale: f64,
    pub measured_rate: f64,
    pub windows_used: usize,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Tunes the random-walk scale towards `target_accept` with default options.
pub fn calibrate_scale(
    target: &TargetDensity,
    target_accept: f64,
    init: f64,
    rng: &mut RngStream,
) -> Result<CalibrationReport> {
    calibrate_scale_with(target, target_accept, init, rng, CalibrationOptions::default())
}

/// Stochastic approximation on log(scale): after window k,
/// log s ← log s + (logit(â_k) − logit(a*)) / k, where â_k is the window's
/// acceptance rate (clamped half a step away from 0 and 1). The scale is then
/// frozen and validated on a fresh run; adaptation draws are discarded.
pub fn calibrate_scale_with(
    target: &TargetDensity,
    target_accept: f64,
    init: f64,
    rng: &mut RngStream,
    opts: CalibrationOptions,
) -> Result<CalibrationReport> {
    if !(target_accept > 0.0 && target_accept < 1.0) {
        return Err(Error::invalid(format!("target acceptance must lie in (0, 1), got {target_accept}")));
    }
    if opts.windows == 0 || opts.window_len == 0 || opts.validation_steps == 0 {
        return Err(Error::invalid("calibration needs nonzero windows, window length and validation steps"));
    }
    RwProposal::new(opts.initial_scale)?;
    let goal = logit(target_accept);
    let floor = 0.5 / opts.window_len as f64;
    let mut log_scale = opts.initial_scale.ln();
    let mut x = init;
    for k in 1..=opts.windows {
        let prop = RwProposal::new(log_scale.exp())?;
        let (acc, last) = measure_acceptance(target, &prop, x, opts.window_len, rng)?;
        x = last;
        let observed = logit(acc.clamp(floor, 1.0 - floor));
        log_scale += (observed - goal) / k as f64;
        // Keep the scale representable; the chain cannot move otherwise.
        log_scale = log_scale.clamp(-700.0, 700.0);
    }
    let scale = log_scale.exp();
    let (measured_rate, _) = measure_acceptance(target, &RwProposal::new(scale)?, x, opts.validation_steps, rng)?;
    if (measured_rate - target_accept).abs() > opts.tolerance {
        return Err(Error::Calibration { target: target_accept, best_scale: scale, measured_rate });
    }
    Ok(CalibrationReport { scale, measured_rate, windows_used: opts.windows })
}

pub type Matrix = Vec<Vec<f64>>;

fn validate_discrete(pmf: &[f64], proposal: &[Vec<f64>]) -> Result<()> {
    let n = pmf.len();
    if n == 0 {
        return Err(Error::invalid("empty pmf"));
    }
    if pmf.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::invalid("pmf entries must be positive"));
    }
    if (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("pmf must sum to 1"));
    }
    if proposal.len() != n || proposal.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(format!("proposal must be {n}x{n}")));
    }
    for (i, row) in proposal.iter().enumerate() {
        if row.iter().any(|&q| !(q >= 0.0 && q.is_finite())) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("proposal row {i} is not a probability vector")));
        }
    }
    Ok(())
}

/// Exact MH transition matrix for a finite target `pmf` and proposal matrix
/// `proposal[i][j] = q(j | i)`.
pub fn discrete_mh_transition_matrix(pmf: &[f64], proposal: &[Vec<f64>]) -> Result<Matrix> {
    validate_discrete(pmf, proposal)?;
    let n = pmf.len();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if j == i || proposal[i][j] == 0.0 {
                continue;
            }
            let ratio = pmf[j] * proposal[j][i] / (pmf[i] * proposal[i][j]);
            p[i][j] = proposal[i][j] * ratio.min(1.0);
            off += p[i][j];
        }
        p[i][i] = 1.0 - off;
    }
    Ok(p)
}

/// Target restricted to a finite grid, normalized to a pmf.
pub fn discretized_pmf(target: &TargetDensity, points: &[f64]) -> Result<Vec<f64>> {
    let logs: Vec<f64> = points.iter().map(|&x| target.log_density(x)).collect();
    if let Some(i) = logs.iter().position(|l| !l.is_finite()) {
        return Err(Error::OutsideSupport { target: target.name().to_string(), state: points[i] });
    }
    let total = crate::special::log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - total).exp()).collect())
}

/// Simulates the discrete MH chain through the same acceptance rule as the
/// continuous kernel and returns the visited states (starting with `init`).
pub fn run_discrete_mh(
    pmf: &[f64],
    proposal: &[Vec<f64>],
    init: usize,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    validate_discrete(pmf, proposal)?;
    if init >= pmf.len() {
        return Err(Error::invalid(format!("initial state {init} out of range")));
    }
    let log_pmf: Vec<f64> = pmf.iter().map(|p| p.ln()).collect();
    let mut path = Vec::with_capacity(steps + 1);
    let mut i = init;
    path.push(i);
    for _ in 0..steps {
        let u = rng.next_f64();
        let row = &proposal[i];
        let mut acc = 0.0;
        let mut j = row.len() - 1;
        for (k, &q) in row.iter().enumerate() {
            acc += q;
            if u < acc {
                j = k;
                break;
            }
        }
        let log_alpha = if j == i {
            0.0
        } else {
            log_acceptance(log_pmf[i], log_pmf[j], proposal[j][i].ln(), row[j].ln())
        };
        if rng.next_open01().ln() < log_alpha {
            i = j;
        }
        path.push(i);
    }
    Ok(path)
}

/// Row-normalized empirical transition frequencies of a state path.
pub fn empirical_transitions(path: &[usize], n: usize) -> Matrix {
    let mut counts = vec![vec![0.0; n]; n];
    for w in path.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    for row in &mut counts {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|c| *c /= total);
        }
    }
    counts
}
