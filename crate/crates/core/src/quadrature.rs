//! One-dimensional quadrature used as the numerical oracle.
//!
//! Two unrelated rules are provided so that every derived constant can be
//! cross-checked: adaptive Simpson with Richardson error control, and a fixed
//! composite Gauss–Legendre rule.

use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_EVALS: usize = 1_000_000;

/// Bisection depth below which a panel is never accepted, so that narrow
/// features are not skipped by a lucky coarse estimate.
const MIN_DEPTH: u32 = 4;
const MAX_DEPTH: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

/// Adaptive Simpson on `[lo, hi]` with the default evaluation budget.
pub fn quadrature_integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<QuadratureResult> {
    adaptive_simpson(f, lo, hi, tol, DEFAULT_MAX_EVALS)
}

struct Simpson<'a, F> {
    f: &'a F,
    evals: usize,
    max_evals: usize,
    err: f64,
    lo: f64,
    hi: f64,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        if self.evals > self.max_evals {
            return Err(Error::QuadratureBudget { lo: self.lo, hi: self.hi, evaluations: self.max_evals });
        }
        let y = (self.f)(x);
        if !y.is_finite() {
            return Err(Error::NonFinite { iteration: self.evals, value: y });
        }
        Ok(y)
    }

    #[allow(clippy::too_many_arguments)]
    fn panel(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        let local_tol = tol.max(4.0 * f64::EPSILON * (left + right).abs());
        if depth >= MIN_DEPTH && delta.abs() <= 15.0 * local_tol {
            self.err += delta.abs() / 15.0;
            return Ok(left + right + delta / 15.0);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::QuadratureBudget { lo: self.lo, hi: self.hi, evaluations: self.evals });
        }
        let l = self.panel(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = self.panel(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_evals: usize,
) -> Result<QuadratureResult> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::invalid(format!("integration bounds must be finite with lo <= hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if lo == hi {
        return Ok(QuadratureResult { value: 0.0, abs_error_estimate: 0.0, evaluations: 1 });
    }
    let mut s = Simpson { f: &f, evals: 0, max_evals, err: 0.0, lo, hi };
    let m = 0.5 * (lo + hi);
    let fa = s.eval(lo)?;
    let fm = s.eval(m)?;
    let fb = s.eval(hi)?;
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    let value = s.panel(lo, hi, fa, fm, fb, whole, tol, 0)?;
    Ok(QuadratureResult { value, abs_error_estimate: s.err, evaluations: s.evals })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on Pₙ.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Pₙ(x) and Pₙ'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre: `panels` equal panels, `order` points each.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre_rule(order);
    let h = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let a = lo + p as f64 * h;
            let c = a + 0.5 * h;
            let s: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * f(c + 0.5 * h * x)).sum();
            0.5 * h * s
        })
        .sum()
}
