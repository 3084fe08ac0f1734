//! Elementary samplers: uniform, normal, truncated normal, gamma, Student-t.
//!
//! Every sampler draws from an [`RngStream`] and consumes a fixed pattern of
//! uniforms for a given outcome, so a seeded sequence of calls is reproducible.
//! Normals are generated by inversion, Φ⁻¹(u), and the truncated normal uses the
//! same inversion restricted to the interval's CDF range, which keeps its cost
//! bounded however narrow or far out in the tail the interval is.

use crate::special::{ln_gamma, normal_cdf, normal_logpdf, normal_quantile, normal_sf, normal_sf_inverse};
use crate::{Error, Result, RngStream};

/// Something that produces univariate draws.
pub trait Sampler {
    fn sample(&self, rng: &mut RngStream) -> f64;
}

/// A sampler whose density can also be evaluated.
///
/// `log_pdf` may be unnormalized; self-normalized importance sampling only
/// requires it up to a constant.
pub trait Proposal: Sampler {
    fn log_pdf(&self, x: f64) -> f64;
}

impl<S: Fn(&mut RngStream) -> f64> Sampler for S {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        self(rng)
    }
}

/// Uniform draw on `[lo, hi)`.
pub fn sample_uniform(rng: &mut RngStream, lo: f64, hi: f64) -> Result<f64> {
    if !lo.is_finite() || !hi.is_finite() || !(hi - lo).is_finite() {
        return Err(Error::invalid(format!("uniform bounds must be finite, got [{lo}, {hi})")));
    }
    if lo >= hi {
        return Err(Error::invalid(format!("uniform needs lo < hi, got [{lo}, {hi})")));
    }
    loop {
        let x = lo + (hi - lo) * rng.next_f64();
        if x < hi {
            return Ok(x);
        }
    }
}

#[inline]
pub(crate) fn standard_normal(rng: &mut RngStream) -> f64 {
    normal_quantile(rng.next_open01())
}

fn check_sd(sd: f64) -> Result<()> {
    if sd > 0.0 && sd.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("standard deviation must be positive and finite, got {sd}")))
    }
}

pub fn sample_normal(rng: &mut RngStream, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    if !mean.is_finite() {
        return Err(Error::invalid(format!("normal mean must be finite, got {mean}")));
    }
    Ok(mean + sd * standard_normal(rng))
}

/// N(mean, sd²) restricted to `[lo, hi]`; infinite bounds are allowed.
pub fn sample_truncated_normal(rng: &mut RngStream, mean: f64, sd: f64, lo: f64, hi: f64) -> Result<f64> {
    check_sd(sd)?;
    if lo.is_nan() || hi.is_nan() || !mean.is_finite() || lo >= hi {
        return Err(Error::invalid(format!("truncation interval must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let empty = || Error::EmptyTruncation { mean, sd, lo, hi };
    let z = if a >= 0.0 {
        // Right of the mean: invert the survival function so that far-tail
        // intervals keep their relative precision.
        let (qa, qb) = (normal_sf(a), normal_sf(b));
        if !(qa - qb > 0.0) {
            return Err(empty());
        }
        normal_sf_inverse(qb + (qa - qb) * rng.next_open01())
    } else {
        let (pa, pb) = (normal_cdf(a), normal_cdf(b));
        if !(pb - pa > 0.0) {
            return Err(empty());
        }
        normal_quantile(pa + (pb - pa) * rng.next_open01())
    };
    Ok((mean + sd * z).clamp(lo, hi))
}

/// Gamma(shape, 1) by Marsaglia–Tsang, boosted for shape < 1.
pub fn sample_gamma(rng: &mut RngStream, shape: f64) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::invalid(format!("gamma shape must be positive, got {shape}")));
    }
    Ok(gamma_unchecked(rng, shape))
}

fn gamma_unchecked(rng: &mut RngStream, shape: f64) -> f64 {
    if shape < 1.0 {
        let g = gamma_unchecked(rng, shape + 1.0);
        return g * rng.next_open01().powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.next_open01();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// loc + scale · Z / √(χ²_df / df).
pub fn sample_student_t(rng: &mut RngStream, df: f64, loc: f64, scale: f64) -> Result<f64> {
    if !(df > 0.0) || df.is_infinite() {
        return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
    }
    check_sd(scale)?;
    let z = standard_normal(rng);
    let chi2 = 2.0 * gamma_unchecked(rng, 0.5 * df);
    Ok(loc + scale * z / (chi2 / df).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        check_sd(sd)?;
        Ok(Self { mean, sd })
    }
}

impl Sampler for Normal {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        self.mean + self.sd * standard_normal(rng)
    }
}

impl Proposal for Normal {
    fn log_pdf(&self, x: f64) -> f64 {
        normal_logpdf(x, self.mean, self.sd)
    }
}

/// Location-scale Student-t, the heavy-tailed alternative to a normal proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    pub df: f64,
    pub loc: f64,
    pub scale: f64,
    log_norm: f64,
}

impl StudentT {
    pub fn new(df: f64, loc: f64, scale: f64) -> Result<Self> {
        if !(df > 0.0) || df.is_infinite() {
            return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
        }
        check_sd(scale)?;
        let log_norm = ln_gamma(0.5 * (df + 1.0))
            - ln_gamma(0.5 * df)
            - 0.5 * (df * std::f64::consts::PI).ln()
            - scale.ln();
        Ok(Self { df, loc, scale, log_norm })
    }
}

impl Sampler for StudentT {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        let z = standard_normal(rng);
        let chi2 = 2.0 * gamma_unchecked(rng, 0.5 * self.df);
        self.loc + self.scale * z / (chi2 / self.df).sqrt()
    }
}

impl Proposal for StudentT {
    fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.scale;
        self.log_norm - 0.5 * (self.df + 1.0) * (z * z / self.df).ln_1p()
    }
}
