//! Standard normal pdf, cdf and quantile to double precision.

use super::{abs, erfc, exp, ln, sqrt};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / SQRT_2PI
}

/// Φ(x), computed through `erfc` so that both tails keep full relative precision.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

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

// Acklam's rational approximation, lower half only (p <= 0.5).
fn acklam_lower(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = sqrt(-2.0 * ln(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Φ⁻¹(p) for p in [0, 1]; returns ±∞ at the endpoints and NaN outside.
///
/// Acklam's approximation followed by one Halley step against `erfc`, which
/// brings the error down to a few ulps.
pub fn norm_ppf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        // 1 - p is exact for p in (0.5, 1].
        return -lower_refined(1.0 - p);
    }
    lower_refined(p)
}

fn lower_refined(p: f64) -> f64 {
    let x = acklam_lower(p);
    if !x.is_finite() {
        return x;
    }
    let e = norm_cdf(x) - p;
    let u = e * SQRT_2PI * exp(0.5 * x * x);
    let refined = x - u / (1.0 + 0.5 * x * u);
    if refined.is_finite() && abs(refined - x) < 1e-6 * (1.0 + abs(x)) {
        refined
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-15);
        // deep tail keeps relative precision
        let t = norm_cdf(-10.0);
        assert!((t / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ppf_round_trip() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = norm_ppf(p);
            assert!((norm_cdf(x) - p).abs() < 2e-16, "p={p}");
        }
        for k in 2..300 {
            let p = libm::pow(10.0, -(k as f64));
            let x = norm_ppf(p);
            assert!((norm_cdf(x) / p - 1.0).abs() < 1e-15 * (1.0 + x * x), "p={p:e} x={x} ratio={}", norm_cdf(x)/p);
        }
    }

    #[test]
    fn ppf_edges() {
        assert_eq!(norm_ppf(0.0), f64::NEG_INFINITY);
        assert_eq!(norm_ppf(1.0), f64::INFINITY);
        assert!(norm_ppf(1.5).is_nan());
        assert!((norm_ppf(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
    }
}
