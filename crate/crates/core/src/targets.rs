//! Target densities and the models with known ground truth.
//!
//! The running example is f(x) ∝ exp(−x²/2) / (1 + x² + x⁴). Its normalizing
//! constant, CDF and moments are computed by quadrature on [−10, 10]; the
//! Gaussian envelope puts less than 1e−22 of mass outside that window.
//!
//! [`ConjugateNormalModel`] (known-variance normal data, normal prior on the
//! mean) has a closed-form marginal likelihood and supplies the reference
//! values for the evidence estimators.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::distributions::{standard_normal, Proposal, Sampler};
use crate::quadrature::{gauss_legendre, quadrature_integrate, DEFAULT_TOL};
use crate::special::{normal_logpdf, LN_SQRT_2PI};
use crate::{Error, Result, RngStream};

/// Integration window for the example target.
pub const EXAMPLE_DOMAIN: (f64, f64) = (-10.0, 10.0);

type LogDensityFn = dyn Fn(f64) -> f64 + Send + Sync;

/// An unnormalized log density on an interval.
#[derive(Clone)]
pub struct TargetDensity {
    name: String,
    support_lo: f64,
    support_hi: f64,
    log_unnorm: Arc<LogDensityFn>,
}

impl fmt::Debug for TargetDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDensity")
            .field("name", &self.name)
            .field("support_lo", &self.support_lo)
            .field("support_hi", &self.support_hi)
            .finish_non_exhaustive()
    }
}

impl TargetDensity {
    pub fn new<F>(name: impl Into<String>, support_lo: f64, support_hi: f64, log_unnorm: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if support_lo.is_nan() || support_hi.is_nan() || support_lo >= support_hi {
            return Err(Error::invalid(format!("empty support [{support_lo}, {support_hi}]")));
        }
        Ok(Self { name: name.into(), support_lo, support_hi, log_unnorm: Arc::new(log_unnorm) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    /// log of the unnormalized density; −∞ outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if !(x >= self.support_lo && x <= self.support_hi) {
            return f64::NEG_INFINITY;
        }
        let v = (self.log_unnorm)(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        self.log_density(x) > f64::NEG_INFINITY
    }

    /// Returns a copy whose log density is shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = Arc::clone(&self.log_unnorm);
        Self {
            name: format!("{}+{c}", self.name),
            support_lo: self.support_lo,
            support_hi: self.support_hi,
            log_unnorm: Arc::new(move |x| inner(x) + c),
        }
    }
}

/// log of exp(−x²/2)/(1+x²+x⁴), unnormalized.
#[inline]
pub fn example_target_logpdf(x: f64) -> f64 {
    let x2 = x * x;
    -0.5 * x2 - (x2 + x2 * x2).ln_1p()
}

#[inline]
fn example_unnorm(x: f64) -> f64 {
    let x2 = x * x;
    (-0.5 * x2).exp() / (1.0 + x2 + x2 * x2)
}

pub fn example_target() -> TargetDensity {
    TargetDensity::new("example", f64::NEG_INFINITY, f64::INFINITY, example_target_logpdf)
        .expect("static support")
}

/// N(mu, 1) as a target (unnormalized).
pub fn gaussian_target(mu: f64) -> TargetDensity {
    let name = format!("gauss-mu{mu}");
    TargetDensity::new(name, f64::NEG_INFINITY, f64::INFINITY, move |x| -0.5 * (x - mu) * (x - mu))
        .expect("static support")
}

/// Built-in targets by CLI name: `example`, `gauss-mu0`, `gauss-mu2.5`.
pub fn builtin_target(name: &str) -> Result<TargetDensity> {
    match name {
        "example" => Ok(example_target()),
        "gauss-mu0" => Ok(gaussian_target(0.0)),
        "gauss-mu2.5" => Ok(gaussian_target(2.5)),
        other => Err(Error::invalid(format!("unknown target `{other}`"))),
    }
}

/// Normalizing constant Z = ∫ exp(example_target_logpdf) over [−10, 10].
pub fn example_normalizing_constant() -> Result<f64> {
    static Z: OnceLock<f64> = OnceLock::new();
    if let Some(z) = Z.get() {
        return Ok(*z);
    }
    let (lo, hi) = EXAMPLE_DOMAIN;
    let z = quadrature_integrate(example_unnorm, lo, hi, DEFAULT_TOL)?.value;
    Ok(*Z.get_or_init(|| z))
}

/// F(x) of the example target, by direct quadrature.
pub fn example_target_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::invalid("cdf at NaN"));
    }
    let (lo, hi) = EXAMPLE_DOMAIN;
    if x <= lo {
        return Ok(0.0);
    }
    if x >= hi {
        return Ok(1.0);
    }
    let z = example_normalizing_constant()?;
    // Integrate the shorter tail, complementing when needed, so both halves
    // are computed to the same absolute accuracy.
    if x <= 0.0 {
        Ok(quadrature_integrate(example_unnorm, lo, x, DEFAULT_TOL)?.value / z)
    } else {
        Ok(1.0 - quadrature_integrate(example_unnorm, x, hi, DEFAULT_TOL)?.value / z)
    }
}

/// E_f[Xᵖ] for the example target.
pub fn example_target_moment(p: u32) -> Result<f64> {
    let z = example_normalizing_constant()?;
    let (lo, hi) = EXAMPLE_DOMAIN;
    let m = quadrature_integrate(|x: f64| x.powi(p as i32) * example_unnorm(x), lo, hi, DEFAULT_TOL)?;
    Ok(m.value / z)
}

/// Tabulated CDF of the example target for bulk evaluation (KS tests,
/// histogram overlays).
///
/// Cell masses come from an 8-point Gauss–Legendre rule per cell and values
/// between nodes from cubic Hermite interpolation using the exact density as
/// the derivative, which keeps the table within ~1e−12 of the direct
/// quadrature.
#[derive(Debug, Clone)]
pub struct ExampleCdf {
    lo: f64,
    step: f64,
    z: f64,
    cum: Vec<f64>,
    dens: Vec<f64>,
}

impl ExampleCdf {
    const CELLS: usize = 4000;

    pub fn new() -> Self {
        let (lo, hi) = EXAMPLE_DOMAIN;
        let step = (hi - lo) / Self::CELLS as f64;
        let mut cum = Vec::with_capacity(Self::CELLS + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 0..Self::CELLS {
            let a = lo + i as f64 * step;
            acc += gauss_legendre(example_unnorm, a, a + step, 1, 8);
            cum.push(acc);
        }
        let z = acc;
        for c in &mut cum {
            *c /= z;
        }
        let dens = (0..=Self::CELLS).map(|i| example_unnorm(lo + i as f64 * step) / z).collect();
        Self { lo, step, z, cum, dens }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if !(t > 0.0) {
            return 0.0;
        }
        if t >= Self::CELLS as f64 {
            return 1.0;
        }
        let i = t as usize;
        let s = t - i as f64;
        let (y0, y1) = (self.cum[i], self.cum[i + 1]);
        let (m0, m1) = (self.dens[i] * self.step, self.dens[i + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        v.clamp(0.0, 1.0)
    }

    /// Normalized density f(x).
    pub fn pdf(&self, x: f64) -> f64 {
        example_unnorm(x) / self.z
    }
}

impl Default for ExampleCdf {
    fn default() -> Self {
        Self::new()
    }
}

/// Exact iid sampler for the example target: N(0,1) proposals accepted with
/// probability 1/(1+x²+x⁴).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExampleTargetSampler;

impl Sampler for ExampleTargetSampler {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        loop {
            let x = standard_normal(rng);
            let x2 = x * x;
            if rng.next_f64() * (1.0 + x2 + x2 * x2) < 1.0 {
                return x;
            }
        }
    }
}

impl Proposal for ExampleTargetSampler {
    /// Unnormalized; identical to [`example_target_logpdf`].
    fn log_pdf(&self, x: f64) -> f64 {
        example_target_logpdf(x)
    }
}

/// The integrand of the first experiment, x³/(1+x²+x⁴).
#[inline]
pub fn gaussian_functional(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x / (1.0 + x2 + x2 * x2)
}

/// E[X³/(1+X²+X⁴)] for X ~ N(mu, 1), by quadrature over mu ± 12.
pub fn gaussian_functional_expectation(mu: f64) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::invalid(format!("mu must be finite, got {mu}")));
    }
    let r = quadrature_integrate(
        |x| gaussian_functional(x) * (-0.5 * (x - mu) * (x - mu) - LN_SQRT_2PI).exp(),
        mu - 12.0,
        mu + 12.0,
        DEFAULT_TOL,
    )?;
    Ok(r.value)
}

/// Data xᵢ ~ N(θ, σ²) with σ² known and prior θ ~ N(μ₀, τ²).
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateNormalModel {
    pub name: String,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub obs_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorParams {
    pub mean: f64,
    pub var: f64,
}

impl ConjugateNormalModel {
    pub fn new(name: impl Into<String>, prior_mean: f64, prior_var: f64, obs_var: f64) -> Result<Self> {
        if !prior_mean.is_finite() {
            return Err(Error::invalid("prior mean must be finite"));
        }
        if !(prior_var > 0.0 && prior_var.is_finite()) || !(obs_var > 0.0 && obs_var.is_finite()) {
            return Err(Error::invalid(format!(
                "variances must be positive, got prior_var={prior_var} obs_var={obs_var}"
            )));
        }
        Ok(Self { name: name.into(), prior_mean, prior_var, obs_var })
    }

    pub fn log_likelihood(&self, data: &[f64], theta: f64) -> f64 {
        let sd = self.obs_var.sqrt();
        data.iter().map(|&x| normal_logpdf(x, theta, sd)).sum()
    }

    pub fn log_prior(&self, theta: f64) -> f64 {
        normal_logpdf(theta, self.prior_mean, self.prior_var.sqrt())
    }

    /// log f(x|θ) + log π(θ).
    pub fn log_joint(&self, data: &[f64], theta: f64) -> f64 {
        self.log_likelihood(data, theta) + self.log_prior(theta)
    }
}

/// Built-in models by CLI name: `conj-n01` (prior N(0,1)) and `conj-n14`
/// (prior N(1,4)), both with unit observation variance.
pub fn builtin_model(name: &str) -> Result<ConjugateNormalModel> {
    match name {
        "conj-n01" => ConjugateNormalModel::new(name, 0.0, 1.0, 1.0),
        "conj-n14" => ConjugateNormalModel::new(name, 1.0, 4.0, 1.0),
        other => Err(Error::invalid(format!("unknown model `{other}`"))),
    }
}

fn nonempty(data: &[f64]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("data must be nonempty"));
    }
    if let Some((i, &x)) = data.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { iteration: i, value: x });
    }
    Ok(())
}

/// Exact log marginal likelihood. Marginally the data are jointly normal
/// with mean μ₀·1 and covariance σ²I + τ²11ᵀ.
pub fn analytic_log_evidence(model: &ConjugateNormalModel, data: &[f64]) -> Result<f64> {
    nonempty(data)?;
    let n = data.len() as f64;
    let (s2, t2) = (model.obs_var, model.prior_var);
    let (sum_d, sum_d2) = data.iter().fold((0.0, 0.0), |(s, q), &x| {
        let d = x - model.prior_mean;
        (s + d, q + d * d)
    });
    let log_det = n * s2.ln() + (n * t2 / s2).ln_1p();
    let quad = (sum_d2 - t2 * sum_d * sum_d / (s2 + n * t2)) / s2;
    Ok(-n * LN_SQRT_2PI - 0.5 * log_det - 0.5 * quad)
}

/// log B₀₁ = log m₀(x) − log m₁(x) for two priors sharing one likelihood.
pub fn analytic_log_bayes_factor(
    m0: &ConjugateNormalModel,
    m1: &ConjugateNormalModel,
    data: &[f64],
) -> Result<f64> {
    if m0.obs_var != m1.obs_var {
        return Err(Error::invalid(format!(
            "models must share the likelihood: obs_var {} vs {}",
            m0.obs_var, m1.obs_var
        )));
    }
    Ok(analytic_log_evidence(m0, data)? - analytic_log_evidence(m1, data)?)
}

pub fn posterior_params(model: &ConjugateNormalModel, data: &[f64]) -> Result<PosteriorParams> {
    nonempty(data)?;
    let n = data.len() as f64;
    let var = 1.0 / (1.0 / model.prior_var + n / model.obs_var);
    let sum: f64 = data.iter().sum();
    let mean = var * (model.prior_mean / model.prior_var + sum / model.obs_var);
    Ok(PosteriorParams { mean, var })
}

/// Location of the data-generating mean for the synthetic evidence dataset.
pub const SYNTHETIC_THETA: f64 = 0.5;

/// n observations from N(θ, σ²) drawn from `rng`.
pub fn synthetic_data(rng: &mut RngStream, n: usize, theta: f64, obs_sd: f64) -> Vec<f64> {
    (0..n).map(|_| theta + obs_sd * standard_normal(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logpdf_values() {
        assert_eq!(example_target_logpdf(0.0), 0.0);
        assert!((example_target_logpdf(1.0) - (-0.5 - 3f64.ln())).abs() < 1e-15);
        assert!((example_target_logpdf(1.0) + 1.598_612_288_668_109_8).abs() < 1e-12);
        for &x in &[0.1, 0.7, 2.3, 9.9] {
            assert_eq!(example_target_logpdf(x), example_target_logpdf(-x));
        }
    }

    #[test]
    fn target_support_and_shift() {
        let t = TargetDensity::new("half", 0.0, f64::INFINITY, |x| -x).unwrap();
        assert_eq!(t.log_density(-1.0), f64::NEG_INFINITY);
        assert!(!t.in_support(f64::NAN));
        assert_eq!(t.shifted(2.0).log_density(1.0), 1.0);
        assert!(TargetDensity::new("bad", 1.0, 1.0, |x| x).is_err());
        assert!(builtin_target("gauss-mu2.5").unwrap().log_density(2.5) == 0.0);
        assert!(builtin_target("nope").is_err());
    }

    #[test]
    fn cdf_symmetry_and_edges() {
        assert!((example_target_cdf(0.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(example_target_cdf(-10.0).unwrap() < 1e-12);
        assert!(example_target_cdf(10.0).unwrap() > 1.0 - 1e-12);
        for &x in &[0.5, 1.0, 2.0, 3.0] {
            let s = example_target_cdf(-x).unwrap() + example_target_cdf(x).unwrap();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let mut prev = 0.0;
        for i in -40..=40 {
            let f = example_target_cdf(i as f64 / 8.0).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn cdf_table_matches_direct_quadrature() {
        let table = ExampleCdf::new();
        for i in -70..=70 {
            let x = i as f64 * 0.0713;
            let d = (table.cdf(x) - example_target_cdf(x).unwrap()).abs();
            assert!(d < 1e-10, "x={x} diff={d}");
        }
        assert!((table.pdf(0.0) - 1.0 / example_normalizing_constant().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn odd_moments_vanish() {
        assert!(example_target_moment(3).unwrap().abs() < 1e-10);
        assert!(example_target_moment(1).unwrap().abs() < 1e-10);
        assert!((example_target_moment(0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn functional_expectation_symmetries() {
        assert!(gaussian_functional_expectation(0.0).unwrap().abs() < 1e-14);
        let p = gaussian_functional_expectation(2.5).unwrap();
        let m = gaussian_functional_expectation(-2.5).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!((p + m).abs() < 1e-14);
        assert!(gaussian_functional_expectation(f64::NAN).is_err());
    }

    #[test]
    fn single_observation_evidence() {
        let m = ConjugateNormalModel::new("m", 0.3, 2.0, 0.5).unwrap();
        let got = analytic_log_evidence(&m, &[0.3]).unwrap();
        assert!((got - normal_logpdf(0.3, 0.3, 2.5f64.sqrt())).abs() < 1e-14);
        assert!(analytic_log_evidence(&m, &[]).is_err());
    }

    #[test]
    fn point_mass_prior_limit() {
        let m = ConjugateNormalModel::new("m", 0.2, 1e-8, 1.0).unwrap();
        let data = [0.1, -0.4, 1.3, 0.9];
        let ev = analytic_log_evidence(&m, &data).unwrap();
        assert!((ev - m.log_likelihood(&data, 0.2)).abs() < 1e-6);
    }

    #[test]
    fn bayes_factor_identities() {
        let a = builtin_model("conj-n01").unwrap();
        let b = builtin_model("conj-n14").unwrap();
        let data = [0.4, 1.1, -0.2, 0.8];
        assert_eq!(analytic_log_bayes_factor(&a, &a, &data).unwrap(), 0.0);
        let ab = analytic_log_bayes_factor(&a, &b, &data).unwrap();
        let ba = analytic_log_bayes_factor(&b, &a, &data).unwrap();
        assert_eq!(ab, -ba);
        let c = ConjugateNormalModel::new("c", 0.0, 1.0, 2.0).unwrap();
        assert!(analytic_log_bayes_factor(&a, &c, &data).is_err());
    }

    #[test]
    fn posterior_update() {
        let m = ConjugateNormalModel::new("m", 0.0, 1.0, 1.0).unwrap();
        let p = posterior_params(&m, &[2.0]).unwrap();
        assert_eq!((p.mean, p.var), (1.0, 0.5));
        let fixed = posterior_params(&m, &[0.0; 7]).unwrap();
        assert_eq!(fixed.mean, 0.0);
        let mut rng = RngStream::new(3);
        let data = synthetic_data(&mut rng, 30, 0.5, 1.0);
        let vars: Vec<f64> = (1..=30).map(|n| posterior_params(&m, &data[..n]).unwrap().var).collect();
        assert!(vars.windows(2).all(|w| w[1] < w[0]));
        assert!(posterior_params(&m, &[]).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(ConjugateNormalModel::new("m", 0.0, 0.0, 1.0).is_err());
        assert!(ConjugateNormalModel::new("m", 0.0, 1.0, -1.0).is_err());
        assert!(builtin_model("conj-x").is_err());
    }

    #[test]
    fn iid_sampler_matches_cdf() {
        use crate::diagnostics::{ks_critical_value, ks_statistic};
        let table = ExampleCdf::new();
        let mut rng = RngStream::new(12);
        let xs: Vec<f64> = (0..10_000).map(|_| ExampleTargetSampler.sample(&mut rng)).collect();
        assert!(ks_statistic(&xs, |x| table.cdf(x)) < ks_critical_value(10_000, 0.01));
    }
}
