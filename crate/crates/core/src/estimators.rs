//! Plain Monte Carlo averages and self-normalized importance sampling.

use crate::distributions::{Proposal, Sampler};
use crate::targets::TargetDensity;
use crate::{Error, Result, RngStream};

/// Running mean and sum of squared deviations of h(x₁), …, h(x_T)
/// (Welford's one-pass recurrence).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningEstimate {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl RunningEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one observation. Non-finite values are rejected with the index
    /// (1-based) they would have occupied.
    pub fn update(&mut self, h_value: f64) -> Result<()> {
        if !h_value.is_finite() {
            return Err(Error::NonFinite { iteration: self.count + 1, value: h_value });
        }
        self.count += 1;
        let delta = h_value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (h_value - self.mean);
        Ok(())
    }

    /// Population variance m2 / T.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    /// √(m2/T)/√T. Reported as 0 while T < 2, see [`se_defined`](Self::se_defined).
    pub fn se(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn se_defined(&self) -> bool {
        self.count >= 2
    }
}

/// Functional form of [`RunningEstimate::update`].
pub fn running_update(est: RunningEstimate, h_value: f64) -> Result<RunningEstimate> {
    let mut next = est;
    next.update(h_value)?;
    Ok(next)
}

/// Draws x₁..x_T from `sampler` and returns the running estimate of E[h(X)]
/// after every draw.
pub fn mc_estimate<S, H>(sampler: &S, h: H, t: usize, rng: &mut RngStream) -> Result<Vec<RunningEstimate>>
where
    S: Sampler + ?Sized,
    H: Fn(f64) -> f64,
{
    if t == 0 {
        return Err(Error::invalid("at least one draw is required"));
    }
    let mut est = RunningEstimate::new();
    let mut trace = Vec::with_capacity(t);
    for _ in 0..t {
        let x = sampler.sample(rng);
        est.update(h(x))?;
        trace.push(est);
    }
    Ok(trace)
}

/// Below this effective sample size an importance-sampling result carries a
/// warning.
pub const LOW_ESS_THRESHOLD: f64 = 10.0;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct IsEstimate {
    pub estimate: f64,
    pub ess: f64,
    /// Nonparametric bootstrap standard error over resampled (h, w) pairs.
    pub bootstrap_se: f64,
    pub draws: usize,
    pub low_ess: bool,
}

/// Σwᵢhᵢ / Σwᵢ accumulated incrementally; with unit weights this performs
/// exactly the same floating-point operations as the Welford mean.
fn weighted_mean(h: &[f64], w: &[f64]) -> f64 {
    let (mut mean, mut total) = (0.0, 0.0);
    for (&hv, &wv) in h.iter().zip(w) {
        if wv == 0.0 {
            continue;
        }
        total += wv;
        let delta = hv - mean;
        mean += delta * wv / total;
    }
    mean
}

/// Self-normalized importance sampling estimate of E_f[h(X)] using draws
/// from `proposal`.
pub fn self_normalized_is<P, H>(
    target: &TargetDensity,
    proposal: &P,
    h: H,
    t: usize,
    rng: &mut RngStream,
) -> Result<IsEstimate>
where
    P: Proposal + ?Sized,
    H: Fn(f64) -> f64,
{
    if t == 0 {
        return Err(Error::invalid("at least one draw is required"));
    }
    let mut hs = Vec::with_capacity(t);
    let mut lws = Vec::with_capacity(t);
    for i in 0..t {
        let x = proposal.sample(rng);
        let log_g = proposal.log_pdf(x);
        let log_f = target.log_density(x);
        if log_g == f64::NEG_INFINITY && log_f > f64::NEG_INFINITY {
            return Err(Error::Degenerate(format!(
                "draw {x} has target mass but lies outside the proposal support"
            )));
        }
        let hv = h(x);
        if !hv.is_finite() {
            return Err(Error::NonFinite { iteration: i + 1, value: hv });
        }
        hs.push(hv);
        lws.push(log_f - log_g);
    }
    let weights = shifted_weights(&lws)?;
    let estimate = weighted_mean(&hs, &weights);
    let ess = ess_from_weights(&weights);

    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let (mut bh, mut bw) = (vec![0.0; t], vec![0.0; t]);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for j in 0..t {
            let k = rng.next_index(t);
            bh[j] = hs[k];
            bw[j] = weights[k];
        }
        if bw.iter().any(|&w| w > 0.0) {
            boot.push(weighted_mean(&bh, &bw));
        }
    }
    let bootstrap_se = if boot.len() >= 2 { crate::diagnostics::sample_sd(&boot) } else { f64::NAN };

    Ok(IsEstimate { estimate, ess, bootstrap_se, draws: t, low_ess: ess < LOW_ESS_THRESHOLD })
}

/// exp(lwᵢ − max lw). Fails when every weight is zero.
fn shifted_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    if log_weights.is_empty() {
        return Err(Error::invalid("no weights"));
    }
    if let Some(&bad) = log_weights.iter().find(|w| w.is_nan() || **w == f64::INFINITY) {
        return Err(Error::invalid(format!("log weight {bad} is not usable")));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroWeights);
    }
    Ok(log_weights.iter().map(|&lw| (lw - max).exp()).collect())
}

fn ess_from_weights(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    (s * s / s2).clamp(1.0, w.len() as f64)
}

/// Effective sample size (Σw)²/Σw² from unnormalized log weights.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    Ok(ess_from_weights(&shifted_weights(log_weights)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Normal, StudentT};
    use crate::targets::{example_target, gaussian_functional, gaussian_target, ExampleTargetSampler};
    use proptest::prelude::*;

    #[test]
    fn constant_sequence() {
        let mut e = RunningEstimate::new();
        for _ in 0..5 {
            e.update(3.0).unwrap();
        }
        assert_eq!((e.count, e.mean, e.se()), (5, 3.0, 0.0));
    }

    #[test]
    fn hand_computed_m2() {
        let e = [1.0, 2.0, 3.0, 4.0].iter().try_fold(RunningEstimate::new(), |e, &x| running_update(e, x)).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.m2, 5.0);
    }

    #[test]
    fn single_value_has_undefined_se() {
        let e = running_update(RunningEstimate::new(), 7.0).unwrap();
        assert_eq!(e.count, 1);
        assert!(!e.se_defined());
        assert_eq!(e.se(), 0.0);
    }

    #[test]
    fn non_finite_reports_index() {
        let mut e = RunningEstimate::new();
        e.update(1.0).unwrap();
        e.update(2.0).unwrap();
        match e.update(f64::NAN) {
            Err(Error::NonFinite { iteration, .. }) => assert_eq!(iteration, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(e.count, 2);
    }

    proptest! {
        #[test]
        fn one_pass_equals_batch(
            xs in prop::collection::vec(
                (prop::bool::ANY, 1e-8f64..1e8).prop_map(|(neg, m)| if neg { -m } else { m }),
                2..300,
            )
        ) {
            let mut e = RunningEstimate::new();
            for &x in &xs {
                e.update(x).unwrap();
            }
            // Oracle: two-pass with compensated summation.
            let n = xs.len() as f64;
            let mean = kahan(xs.iter().copied()) / n;
            let m2 = kahan(xs.iter().map(|x| (x - mean) * (x - mean)));
            let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!((e.mean - mean).abs() <= 1e-12 * scale);
            prop_assert!((e.m2 - m2).abs() <= 1e-12 * m2.max(f64::MIN_POSITIVE) + 1e-12 * scale * scale);
        }
    }

    fn kahan(it: impl Iterator<Item = f64>) -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for x in it {
            let y = x - c;
            let t = s + y;
            c = (t - s) - y;
            s = t;
        }
        s
    }

    #[test]
    fn se_decays_like_inverse_sqrt() {
        let mut rng = RngStream::new(21);
        let trace = mc_estimate(&Normal::new(0.0, 1.0).unwrap(), |x| x, 100_000, &mut rng).unwrap();
        let ts: Vec<f64> = (0..=12).map(|k| 100.0 * 1.7f64.powi(k)).filter(|&t| t <= 1e5).collect();
        let ses: Vec<f64> = ts.iter().map(|&t| trace[t as usize - 1].se()).collect();
        let slope = crate::diagnostics::log_log_slope(&ts, &ses);
        assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn mc_on_constant_function() {
        let mut rng = RngStream::new(1);
        let trace = mc_estimate(&Normal::new(0.0, 1.0).unwrap(), |_| 1.0, 50, &mut rng).unwrap();
        let last = trace.last().unwrap();
        assert_eq!((trace.len(), last.mean, last.se()), (50, 1.0, 0.0));
        assert!(mc_estimate(&Normal::new(0.0, 1.0).unwrap(), |_| 1.0, 0, &mut rng).is_err());
    }

    #[test]
    fn mc_gaussian_functional_at_zero() {
        let mut rng = RngStream::new(31);
        let trace = mc_estimate(&Normal::new(0.0, 1.0).unwrap(), gaussian_functional, 10_000, &mut rng).unwrap();
        let last = trace.last().unwrap();
        assert!(last.mean.abs() <= 3.0 * last.se());
    }

    #[test]
    fn mc_gaussian_functional_at_two_and_a_half() {
        let truth = crate::targets::gaussian_functional_expectation(2.5).unwrap();
        let mut rng = RngStream::new(32);
        let trace = mc_estimate(&Normal::new(2.5, 1.0).unwrap(), gaussian_functional, 100_000, &mut rng).unwrap();
        let last = trace.last().unwrap();
        assert!((last.mean - truth).abs() <= 3.0 * last.se(), "{} vs {truth}", last.mean);
    }

    #[test]
    fn mc_propagates_h_failure() {
        let mut rng = RngStream::new(1);
        let r = mc_estimate(&Normal::new(0.0, 1.0).unwrap(), |x| if x > 1.0 { f64::NAN } else { x }, 1000, &mut rng);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn identity_proposal_reproduces_plain_mc() {
        let target = example_target();
        let h = |x: f64| x * x;
        let is = self_normalized_is(&target, &ExampleTargetSampler, h, 5000, &mut RngStream::new(77)).unwrap();
        let mc = mc_estimate(&ExampleTargetSampler, h, 5000, &mut RngStream::new(77)).unwrap();
        assert_eq!(is.estimate, mc.last().unwrap().mean);
        assert_eq!(is.ess, 5000.0);
    }

    #[test]
    fn heavy_tailed_proposal_for_third_moment() {
        let t = StudentT::new(3.0, 0.0, 1.5).unwrap();
        let r = self_normalized_is(&example_target(), &t, |x| x * x * x, 20_000, &mut RngStream::new(5)).unwrap();
        assert!(r.estimate.abs() <= 3.0 * r.bootstrap_se, "{r:?}");
        assert!(!r.low_ess);
    }

    #[test]
    fn wide_normal_proposal_second_moment() {
        let g = Normal::new(0.0, 2.0).unwrap();
        let r = self_normalized_is(&gaussian_target(0.0), &g, |x| x * x, 100_000, &mut RngStream::new(6)).unwrap();
        assert!((r.estimate - 1.0).abs() < 0.05, "{}", r.estimate);
    }

    #[test]
    fn shift_invariance_of_snis() {
        let g = Normal::new(0.0, 2.0).unwrap();
        let t = example_target();
        let a = self_normalized_is(&t, &g, |x| x * x, 2000, &mut RngStream::new(9)).unwrap();
        let b = self_normalized_is(&t.shifted(123.4), &g, |x| x * x, 2000, &mut RngStream::new(9)).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-12);
    }

    #[test]
    fn all_zero_weights_fail() {
        let narrow = crate::targets::TargetDensity::new("far", 100.0, 101.0, |_| 0.0).unwrap();
        let r = self_normalized_is(&narrow, &Normal::new(0.0, 1.0).unwrap(), |x| x, 100, &mut RngStream::new(1));
        assert!(matches!(r, Err(Error::ZeroWeights)));
    }

    #[test]
    fn poor_proposal_flags_low_ess() {
        let g = Normal::new(6.0, 0.3).unwrap();
        let r = self_normalized_is(&gaussian_target(0.0), &g, |x| x, 2000, &mut RngStream::new(1)).unwrap();
        assert!(r.low_ess, "ess {}", r.ess);
    }

    #[test]
    fn ess_cases() {
        assert_eq!(ess(&[0.3; 40]).unwrap(), 40.0);
        let mut dominant = vec![-700.0; 50];
        dominant[3] = 0.0;
        assert!((ess(&dominant).unwrap() - 1.0).abs() < 1e-12);
        let mut two = vec![f64::NEG_INFINITY; 12];
        two[0] = -1.0;
        two[7] = -1.0;
        assert_eq!(ess(&two).unwrap(), 2.0);
        assert!(ess(&[]).is_err());
        assert!(matches!(ess(&[f64::NEG_INFINITY; 3]), Err(Error::ZeroWeights)));
    }

    proptest! {
        #[test]
        fn ess_is_bounded(lw in prop::collection::vec(-50.0f64..50.0, 1..200)) {
            let e = ess(&lw).unwrap();
            prop_assert!(e >= 1.0 && e <= lw.len() as f64);
        }
    }
}
