//! Normal CDF/quantile and log-space helpers.

use std::f64::consts::FRAC_1_SQRT_2;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF, Φ(x).
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function, 1 − Φ(x), accurate in the upper tail.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - LN_SQRT_2PI - sd.ln()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

// Acklam's rational approximation (relative error ~1.15e-9), used only as
// the starting point for a Halley step against erfc.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

/// Initial guess for p ≤ 0.5 (result ≤ 0).
fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile for the lower half, p ∈ (0, 0.5].
fn quantile_lower(p: f64) -> f64 {
    let x = acklam_lower(p);
    // Halley step on Φ(x) − p. The ratio p/φ(x) is formed in log space so
    // that it stays finite for subnormal p.
    let e = normal_cdf(x) - p;
    let p_over_pdf = (p.ln() + 0.5 * x * x + LN_SQRT_2PI).exp();
    let u = (e / p) * p_over_pdf;
    x - u / (1.0 + 0.5 * x * u)
}

/// Standard normal quantile Φ⁻¹(p). Returns ∓∞ at p = 0 / 1 and NaN outside
/// `[0, 1]`.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p <= 0.5 {
        quantile_lower(p)
    } else {
        // 1 − p is exact for p ∈ [0.5, 1].
        -quantile_lower(1.0 - p)
    }
}

/// Quantile of the upper tail: the x with 1 − Φ(x) = q.
pub fn normal_sf_inverse(q: f64) -> f64 {
    -normal_quantile(q)
}

/// log Σ exp(xᵢ) with max-shift; −∞ for an empty or all −∞ input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// log(eᵃ + eᵇ).
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
