//! Marginal-likelihood (evidence) estimators: harmonic mean, bridge sampling
//! and Chib's posterior-ordinate identity. All arithmetic is in log space.

use std::fmt;

use crate::diagnostics::{mean, sample_sd};
use crate::special::{log_add_exp, log_sum_exp, normal_logpdf};
use crate::targets::ConjugateNormalModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvidenceMethod {
    HarmonicMean,
    Bridge,
    Chib,
}

impl EvidenceMethod {
    pub const ALL: [EvidenceMethod; 3] = [EvidenceMethod::HarmonicMean, EvidenceMethod::Bridge, EvidenceMethod::Chib];

    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceMethod::HarmonicMean => "harmonic_mean",
            EvidenceMethod::Bridge => "bridge",
            EvidenceMethod::Chib => "chib",
        }
    }
}

impl fmt::Display for EvidenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvidenceDiagnostics {
    pub draws: usize,
    /// Effective sample size of the proposal-side bridge weights.
    pub ess: Option<f64>,
    pub iterations: Option<usize>,
    /// False when an iterative estimate stopped at its iteration cap. Such
    /// estimates must not be used.
    pub converged: bool,
    /// max − min of the log-likelihoods fed to the harmonic mean.
    pub log_lik_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceEstimate {
    pub log_evidence: f64,
    pub method: EvidenceMethod,
    pub diagnostics: EvidenceDiagnostics,
}

impl EvidenceEstimate {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.converged && self.log_evidence.is_finite()
    }
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid(format!("{what} must be nonempty")));
    }
    if let Some((i, &x)) = xs.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { iteration: i, value: x });
    }
    Ok(())
}

/// Harmonic mean of the likelihood at posterior draws:
/// log m̂ = −[logsumexp(−ℓᵢ) − log T].
///
/// No truncation or stabilisation is applied, so its large variance shows up
/// as is.
pub fn harmonic_mean_log_evidence(log_liks: &[f64]) -> Result<EvidenceEstimate> {
    check_finite(log_liks, "log-likelihoods")?;
    let neg: Vec<f64> = log_liks.iter().map(|l| -l).collect();
    let t = log_liks.len() as f64;
    let log_evidence = -(log_sum_exp(&neg) - t.ln());
    let (lo, hi) = log_liks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    Ok(EvidenceEstimate {
        log_evidence,
        method: EvidenceMethod::HarmonicMean,
        diagnostics: EvidenceDiagnostics {
            draws: log_liks.len(),
            converged: true,
            log_lik_spread: Some(hi - lo),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeOptions {
    /// Stop once successive log estimates differ by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000 }
    }
}

/// Bridge-sampling estimate of log ∫ exp(log_post_unnorm) with the default
/// [`BridgeOptions`].
pub fn bridge_log_evidence<P, G>(
    post_draws: &[f64],
    prop_draws: &[f64],
    log_post_unnorm: P,
    log_prop: G,
) -> Result<EvidenceEstimate>
where
    P: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    bridge_log_evidence_with(post_draws, prop_draws, log_post_unnorm, log_prop, BridgeOptions::default())
}

/// Iterative optimal bridge (Meng & Wong, 1996).
///
/// With lᵢ = log q(θᵢ) − log g(θᵢ) at posterior draws and l̃ⱼ the same at
/// proposal draws, s₁ = N₁/(N₁+N₂), s₂ = N₂/(N₁+N₂), iterate
///
/// r ← [ (1/N₂) Σⱼ e^{l̃ⱼ} / (s₁e^{l̃ⱼ} + s₂r) ] / [ (1/N₁) Σᵢ 1 / (s₁e^{lᵢ} + s₂r) ]
///
/// from the importance-sampling start r₀ = mean(e^{l̃ⱼ}).
pub fn bridge_log_evidence_with<P, G>(
    post_draws: &[f64],
    prop_draws: &[f64],
    log_post_unnorm: P,
    log_prop: G,
    opts: BridgeOptions,
) -> Result<EvidenceEstimate>
where
    P: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if post_draws.is_empty() || prop_draws.is_empty() {
        return Err(Error::invalid("bridge sampling needs draws from both densities"));
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) {
        return Err(Error::invalid("bridge options need max_iter >= 1 and tol > 0"));
    }
    let mut l_post = Vec::with_capacity(post_draws.len());
    for &th in post_draws {
        let (q, g) = (log_post_unnorm(th), log_prop(th));
        if q.is_nan() || g.is_nan() || q == f64::NEG_INFINITY || q == f64::INFINITY || g == f64::INFINITY {
            return Err(Error::OutsideSupport { target: "posterior".into(), state: th });
        }
        l_post.push(q - g);
    }
    let mut l_prop = Vec::with_capacity(prop_draws.len());
    for &th in prop_draws {
        let (q, g) = (log_post_unnorm(th), log_prop(th));
        if q.is_nan() || g.is_nan() || !g.is_finite() || q == f64::INFINITY {
            return Err(Error::OutsideSupport { target: "proposal".into(), state: th });
        }
        l_prop.push(q - g);
    }
    if l_prop.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Err(Error::Degenerate("posterior and proposal draws have disjoint support".into()));
    }

    let (n1, n2) = (post_draws.len() as f64, prop_draws.len() as f64);
    let ln_s1 = (n1 / (n1 + n2)).ln();
    let ln_s2 = (n2 / (n1 + n2)).ln();
    let (ln_n1, ln_n2) = (n1.ln(), n2.ln());

    let mut log_r = log_sum_exp(&l_prop) - ln_n2;
    let mut num_terms = vec![0.0; l_prop.len()];
    let mut den_terms = vec![0.0; l_post.len()];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        for (t, &l) in num_terms.iter_mut().zip(&l_prop) {
            *t = l - log_add_exp(ln_s1 + l, ln_s2 + log_r);
        }
        for (t, &l) in den_terms.iter_mut().zip(&l_post) {
            *t = -log_add_exp(ln_s1 + l, ln_s2 + log_r);
        }
        let num = log_sum_exp(&num_terms) - ln_n2;
        let den = log_sum_exp(&den_terms) - ln_n1;
        let next = num - den;
        if !next.is_finite() {
            return Err(Error::Degenerate(format!("bridge iterate became {next}")));
        }
        let step = (next - log_r).abs();
        log_r = next;
        if step < opts.tol {
            converged = true;
            break;
        }
    }

    let ess = crate::estimators::ess(&l_prop).ok();
    Ok(EvidenceEstimate {
        log_evidence: log_r,
        method: EvidenceMethod::Bridge,
        diagnostics: EvidenceDiagnostics {
            draws: post_draws.len() + prop_draws.len(),
            ess,
            iterations: Some(iterations),
            converged,
            log_lik_spread: None,
        },
    })
}

/// Chib's identity log m(x) = log f(x|θ*) + log π(θ*) − log π̂(θ*|x), with
/// π̂ a normal fitted to the posterior draws and θ* their sample mean.
pub fn chib_log_evidence(
    model: &ConjugateNormalModel,
    data: &[f64],
    posterior_draws: &[f64],
) -> Result<EvidenceEstimate> {
    check_finite(posterior_draws, "posterior draws")?;
    chib_log_evidence_at(model, data, posterior_draws, mean(posterior_draws))
}

/// [`chib_log_evidence`] evaluated at a caller-chosen θ*.
pub fn chib_log_evidence_at(
    model: &ConjugateNormalModel,
    data: &[f64],
    posterior_draws: &[f64],
    theta_star: f64,
) -> Result<EvidenceEstimate> {
    check_finite(data, "data")?;
    check_finite(posterior_draws, "posterior draws")?;
    if posterior_draws.len() < 2 {
        return Err(Error::Degenerate("need at least two posterior draws to fit the ordinate".into()));
    }
    let m = mean(posterior_draws);
    let sd = sample_sd(posterior_draws);
    if !(sd > 8.0 * f64::EPSILON * m.abs()) {
        return Err(Error::Degenerate("posterior draws have zero variance".into()));
    }
    let log_ordinate = normal_logpdf(theta_star, m, sd);
    let log_evidence = model.log_likelihood(data, theta_star) + model.log_prior(theta_star) - log_ordinate;
    Ok(EvidenceEstimate {
        log_evidence,
        method: EvidenceMethod::Chib,
        diagnostics: EvidenceDiagnostics { draws: posterior_draws.len(), converged: true, ..Default::default() },
    })
}
