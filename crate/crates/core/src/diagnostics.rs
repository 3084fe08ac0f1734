//! Goodness-of-fit and MCMC error diagnostics.

use crate::{Error, Result};

/// One-sample Kolmogorov–Smirnov statistic sup |F̂ₙ − F|.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Critical value of the KS statistic at level `alpha`, using the asymptotic
/// Kolmogorov quantile with Stephens' small-sample correction.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let k = (-0.5 * (0.5 * alpha).ln()).sqrt();
    let sn = (n as f64).sqrt();
    k / (sn + 0.12 + 0.11 / sn)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean of a correlated series from the spread of
/// `n_batches` contiguous batch means. Trailing draws that do not fill a
/// batch are dropped.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> Result<f64> {
    if n_batches < 2 {
        return Err(Error::invalid("batch means needs at least two batches"));
    }
    let size = xs.len() / n_batches;
    if size == 0 {
        return Err(Error::invalid(format!(
            "{} draws cannot fill {n_batches} batches",
            xs.len()
        )));
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(n_batches).map(mean).collect();
    Ok(sample_sd(&means) / (n_batches as f64).sqrt())
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of an unsorted slice.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least-squares slope of log(y) on log(x).
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
