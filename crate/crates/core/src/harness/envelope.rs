use rayon::prelude::*;

use crate::diagnostics::quantile_sorted;
use crate::estimators::RunningEstimate;
use crate::{Error, Result, RngStream};

pub const FIRST_CHECKPOINT: usize = 10;

/// Running means and standard errors at the checkpoints, plus the side result.
type RunSummary<A> = (Vec<f64>, Vec<f64>, A);

/// Iteration counts 10, 10√2, 20, … (rounded, deduplicated) up to and
/// including `iters`.
pub fn checkpoints(iters: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = 0i32;
    loop {
        let t = (FIRST_CHECKPOINT as f64 * std::f64::consts::SQRT_2.powi(k)).round() as usize;
        if t >= iters {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        k += 1;
    }
    if iters > 0 {
        out.push(iters);
    }
    out
}

/// Running-mean trajectories of several independent runs, evaluated at
/// logarithmic checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSummary {
    pub iters_axis: Vec<usize>,
    /// `per_run_traces[run][c]` is run's running mean at `iters_axis[c]`.
    pub per_run_traces: Vec<Vec<f64>>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    /// Run 0 (substream 0).
    pub single_run: Vec<f64>,
    /// Running standard error of run 0.
    pub single_run_se: Vec<f64>,
    /// True value of the estimated quantity, when known.
    pub reference: Option<f64>,
}

impl EnvelopeSummary {
    pub fn runs(&self) -> usize {
        self.per_run_traces.len()
    }

    pub fn width(&self) -> Vec<f64> {
        self.band_hi.iter().zip(&self.band_lo).map(|(h, l)| h - l).collect()
    }

    pub fn terminal_width(&self) -> f64 {
        self.band_hi.last().copied().unwrap_or(0.0) - self.band_lo.last().copied().unwrap_or(0.0)
    }

    pub fn terminal_values(&self) -> Vec<f64> {
        self.per_run_traces.iter().filter_map(|t| t.last().copied()).collect()
    }

    pub fn terminal_brackets(&self, value: f64) -> bool {
        match (self.band_lo.last(), self.band_hi.last()) {
            (Some(&lo), Some(&hi)) => lo <= value && value <= hi,
            _ => false,
        }
    }

    /// Rebuilds the bands from `iters_axis` and `per_run_traces`.
    pub fn from_traces(iters_axis: Vec<usize>, per_run_traces: Vec<Vec<f64>>, single_run_se: Vec<f64>) -> Self {
        let n = iters_axis.len();
        let mut band_lo = Vec::with_capacity(n);
        let mut band_hi = Vec::with_capacity(n);
        let mut q05 = Vec::with_capacity(n);
        let mut q95 = Vec::with_capacity(n);
        let mut column = Vec::with_capacity(per_run_traces.len());
        for c in 0..n {
            column.clear();
            column.extend(per_run_traces.iter().map(|t| t[c]));
            column.sort_by(f64::total_cmp);
            band_lo.push(column[0]);
            band_hi.push(column[column.len() - 1]);
            q05.push(quantile_sorted(&column, 0.05));
            q95.push(quantile_sorted(&column, 0.95));
        }
        let single_run = per_run_traces.first().cloned().unwrap_or_default();
        Self { iters_axis, per_run_traces, band_lo, band_hi, q05, q95, single_run, single_run_se, reference: None }
    }
}

/// One run's output: the sequence h(x_1), h(x_2), … whose running mean is
/// tracked, plus any side result the caller wants back.
pub struct RunOutput<A> {
    pub values: Vec<f64>,
    pub aux: A,
}

/// [`run_envelope_with`] without side results.
pub fn run_envelope<F>(make_trace: F, runs: usize, iters: usize, seed: u64) -> Result<EnvelopeSummary>
where
    F: Fn(&mut RngStream) -> Result<Vec<f64>> + Sync,
{
    run_envelope_with(|rng| make_trace(rng).map(|values| RunOutput { values, aux: () }), runs, iters, seed)
        .map(|(s, _)| s)
}

/// Runs `make_trace` once per run, run k on substream k of `seed`, in
/// parallel. Each trace must have exactly `iters` values. The first failing
/// run (by index) aborts the envelope.
pub fn run_envelope_with<F, A>(make_trace: F, runs: usize, iters: usize, seed: u64) -> Result<(EnvelopeSummary, Vec<A>)>
where
    F: Fn(&mut RngStream) -> Result<RunOutput<A>> + Sync,
    A: Send,
{
    if runs == 0 {
        return Err(Error::invalid("an envelope needs at least one run"));
    }
    if iters == 0 {
        return Err(Error::invalid("an envelope needs at least one iteration"));
    }
    let axis = checkpoints(iters);
    let results: Vec<Result<RunSummary<A>>> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::with_stream(seed, k as u64);
            let out = make_trace(&mut rng).map_err(|e| Error::Run { run: k, source: Box::new(e) })?;
            if out.values.len() != iters {
                let msg = format!("trace has {} values, expected {iters}", out.values.len());
                return Err(Error::Run { run: k, source: Box::new(Error::invalid(msg)) });
            }
            let (means, ses) = at_checkpoints(&out.values, &axis).map_err(|e| Error::Run { run: k, source: Box::new(e) })?;
            Ok((means, ses, out.aux))
        })
        .collect();
    let mut traces = Vec::with_capacity(runs);
    let mut aux = Vec::with_capacity(runs);
    let mut se0 = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        let (means, ses, a) = r?;
        if k == 0 {
            se0 = ses;
        }
        traces.push(means);
        aux.push(a);
    }
    Ok((EnvelopeSummary::from_traces(axis, traces, se0), aux))
}

fn at_checkpoints(values: &[f64], axis: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut est = RunningEstimate::new();
    let mut means = Vec::with_capacity(axis.len());
    let mut ses = Vec::with_capacity(axis.len());
    let mut next = axis.iter().peekable();
    for (i, &v) in values.iter().enumerate() {
        est.update(v)?;
        if next.peek() == Some(&&(i + 1)) {
            next.next();
            means.push(est.mean);
            ses.push(est.se());
        }
    }
    Ok((means, ses))
}
