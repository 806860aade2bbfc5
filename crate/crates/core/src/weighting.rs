//! Probability weighting functions and the change of variables
//! `ν(p) = 1 - w⁻¹(1 - p)`.
//!
//! Besides the plain `p`-space interface, every weighting exposes a few
//! helpers in the normal coordinate `z = Φ⁻¹(p)`. The solver works in that
//! coordinate because the lognormal tails live at `|z|` up to about 38, where
//! `p` itself has long since rounded to 0 or 1.

use crate::error::{Error, Result};
use crate::math::{exp, expm1, ln, ln1p, norm_cdf, norm_ppf, powf};

/// Two-piece Gaussian weighting, inverse S-shaped for `ā, b̄ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JinZhou {
    pub p_bar: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    /// Normalizing constant.
    pub k: f64,
    /// Intercept of the right piece, `1 - k e^{b̄²/2}`.
    pub big_a: f64,
    z_bar: f64,
    c_left: f64,
    c_right: f64,
}

impl JinZhou {
    pub fn new(p_bar: f64, a_bar: f64, b_bar: f64) -> Result<Self> {
        if !(p_bar > 0.0 && p_bar < 1.0) {
            return Err(Error::InvalidParameter { name: "p_bar", value: p_bar });
        }
        if !(a_bar >= 0.0 && a_bar.is_finite()) {
            return Err(Error::InvalidParameter { name: "a_bar", value: a_bar });
        }
        if !(b_bar >= 0.0 && b_bar.is_finite()) {
            return Err(Error::InvalidParameter { name: "b_bar", value: b_bar });
        }
        let z_bar = norm_ppf(p_bar);
        let left = exp((a_bar + b_bar) * z_bar + 0.5 * a_bar * a_bar);
        let right = exp(0.5 * b_bar * b_bar);
        let k = 1.0 / (right * norm_cdf(b_bar - z_bar) + left * norm_cdf(z_bar + a_bar));
        Ok(Self {
            p_bar,
            a_bar,
            b_bar,
            k,
            big_a: 1.0 - k * right,
            z_bar,
            c_left: k * left,
            c_right: k * right,
        })
    }

    /// The usual parameterization relative to the kernel volatility:
    /// `p̄ = 0.3`, `ā = 1.6 σ`, `b̄ = 0.8 σ`.
    pub fn for_kernel_sigma(sigma: f64) -> Result<Self> {
        Self::new(0.3, 1.6 * sigma, 0.8 * sigma)
    }

    /// Value of the left piece at `p̄`.
    pub fn left_at_p_bar(&self) -> f64 {
        self.c_left * norm_cdf(self.z_bar + self.a_bar)
    }

    /// Value of the right piece at `p̄`.
    pub fn right_at_p_bar(&self) -> f64 {
        self.big_a + self.c_right * norm_cdf(self.z_bar - self.b_bar)
    }

    fn w_at_z(&self, z: f64) -> f64 {
        if z <= self.z_bar {
            self.c_left * norm_cdf(z + self.a_bar)
        } else {
            1.0 - self.c_right * norm_cdf(self.b_bar - z)
        }
    }

    fn one_minus_w_at_z(&self, z: f64) -> f64 {
        if z <= self.z_bar {
            1.0 - self.c_left * norm_cdf(z + self.a_bar)
        } else {
            self.c_right * norm_cdf(self.b_bar - z)
        }
    }

    fn w_prime_at_z(&self, z: f64) -> f64 {
        if z <= self.z_bar {
            self.k * exp((self.a_bar + self.b_bar) * self.z_bar - self.a_bar * z)
        } else {
            self.k * exp(self.b_bar * z)
        }
    }

    /// `z` with `w(Φ(z)) = 1 - r`, accurate for small `r`.
    fn inv_z_complement(&self, r: f64) -> f64 {
        let q_bar = self.left_at_p_bar();
        if 1.0 - r <= q_bar {
            norm_ppf((1.0 - r) / self.c_left) - self.a_bar
        } else {
            self.b_bar - norm_ppf(r / self.c_right)
        }
    }

    /// `z` with `w(Φ(z)) = q`, accurate for small `q`.
    fn inv_z(&self, q: f64) -> f64 {
        if q <= self.left_at_p_bar() {
            norm_ppf(q / self.c_left) - self.a_bar
        } else {
            self.b_bar - norm_ppf((1.0 - q) / self.c_right)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    Identity,
    /// `w(p) = p^γ`.
    Power { gamma: f64 },
    JinZhou(JinZhou),
}

fn check_unit(what: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain { what, value: p })
    }
}

/// `Φ⁻¹(x)` where `x` is given both directly and as `1 - x`; uses whichever
/// is smaller so that neither tail loses precision.
fn ppf_pair(x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.5 {
        norm_ppf(x)
    } else {
        -norm_ppf(one_minus_x)
    }
}

/// `log Φ(z)` without cancellation in either tail.
fn ln_cdf(z: f64) -> f64 {
    if z < 0.0 {
        ln(norm_cdf(z))
    } else {
        ln1p(-norm_cdf(-z))
    }
}

impl Weighting {
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter { name: "gamma", value: gamma });
        }
        Ok(Self::Power { gamma })
    }

    pub fn sqrt() -> Self {
        Self::Power { gamma: 0.5 }
    }

    pub fn jin_zhou(p_bar: f64, a_bar: f64, b_bar: f64) -> Result<Self> {
        Ok(Self::JinZhou(JinZhou::new(p_bar, a_bar, b_bar)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Power { .. } => "power",
            Self::JinZhou(_) => "jinzhou",
        }
    }

    pub fn w(&self, p: f64) -> Result<f64> {
        check_unit("w", p)?;
        Ok(match self {
            Self::Identity => p,
            Self::Power { gamma } => powf(p, *gamma),
            Self::JinZhou(j) => {
                if p == 0.0 {
                    0.0
                } else if p == 1.0 {
                    1.0
                } else {
                    j.w_at_z(norm_ppf(p))
                }
            }
        })
    }

    pub fn w_prime(&self, p: f64) -> Result<f64> {
        check_unit("w'", p)?;
        let d = match self {
            Self::Identity => 1.0,
            Self::Power { gamma } => *gamma * powf(p, *gamma - 1.0),
            Self::JinZhou(j) => j.w_prime_at_z(norm_ppf(p)),
        };
        if d.is_finite() && d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Domain { what: "w'", value: p })
        }
    }

    pub fn w_inv(&self, q: f64) -> Result<f64> {
        check_unit("w inverse", q)?;
        Ok(match self {
            Self::Identity => q,
            Self::Power { gamma } => powf(q, 1.0 / *gamma),
            Self::JinZhou(j) => {
                if q == 0.0 {
                    0.0
                } else if q == 1.0 {
                    1.0
                } else {
                    norm_cdf(j.inv_z(q))
                }
            }
        })
    }

    /// `ν(p) = 1 - w⁻¹(1 - p)`.
    pub fn nu(&self, p: f64) -> Result<f64> {
        check_unit("nu", p)?;
        Ok(match self {
            Self::Identity => p,
            // 1 - (1-p)^{1/γ}
            Self::Power { gamma } => -expm1(ln1p(-p) / *gamma),
            Self::JinZhou(j) => {
                if p == 0.0 {
                    0.0
                } else if p == 1.0 {
                    1.0
                } else {
                    norm_cdf(-j.inv_z_complement(p))
                }
            }
        })
    }

    /// `ν'(p) = 1 / w'(w⁻¹(1 - p))`.
    pub fn nu_prime(&self, p: f64) -> Result<f64> {
        check_unit("nu'", p)?;
        let d = 1.0 / self.w_prime_at_z(self.inv_z_complement(p));
        if d.is_finite() && d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Domain { what: "nu'", value: p })
        }
    }

    /// `w(Φ(z))`.
    pub fn w_at_z(&self, z: f64) -> f64 {
        match self {
            Self::Identity => norm_cdf(z),
            Self::Power { gamma } => powf(norm_cdf(z), *gamma),
            Self::JinZhou(j) => j.w_at_z(z),
        }
    }

    /// `1 - w(Φ(z))` without cancellation for large `z`.
    pub fn one_minus_w_at_z(&self, z: f64) -> f64 {
        match self {
            Self::Identity => norm_cdf(-z),
            Self::Power { gamma } => -expm1(*gamma * ln_cdf(z)),
            Self::JinZhou(j) => j.one_minus_w_at_z(z),
        }
    }

    /// `w'(Φ(z))`.
    pub fn w_prime_at_z(&self, z: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Power { gamma } => {
                *gamma * exp((*gamma - 1.0) * ln_cdf(z))
            }
            Self::JinZhou(j) => j.w_prime_at_z(z),
        }
    }

    /// `z` with `Φ(z) = w⁻¹(1 - r)`, i.e. `Φ(z) = 1 - ν(r)`.
    pub fn inv_z_complement(&self, r: f64) -> f64 {
        match self {
            Self::Identity => -norm_ppf(r),
            Self::Power { gamma } => {
                let x = powf(1.0 - r, 1.0 / *gamma);
                let one_minus_x = -expm1(ln1p(-r) / *gamma);
                ppf_pair(x, one_minus_x)
            }
            Self::JinZhou(j) => j.inv_z_complement(r),
        }
    }

    /// `z` with `w(Φ(z)) = q`.
    pub fn inv_z(&self, q: f64) -> f64 {
        match self {
            Self::Identity => norm_ppf(q),
            Self::Power { gamma } => {
                let x = powf(q, 1.0 / *gamma);
                ppf_pair(x, -expm1(ln(q) / *gamma))
            }
            Self::JinZhou(j) => j.inv_z(q),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jz() -> Weighting {
        Weighting::JinZhou(JinZhou::for_kernel_sigma(0.2).unwrap())
    }

    fn all() -> [Weighting; 3] {
        [Weighting::Identity, Weighting::sqrt(), jz()]
    }

    // bisection on [0, 1], the reference inverse
    fn bisect_inverse(w: &Weighting, q: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if w.w(m).unwrap() < q {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(Weighting::Identity.w(0.3).unwrap(), 0.3);
        assert!((Weighting::sqrt().w(0.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((Weighting::sqrt().nu(0.75).unwrap() - 0.9375).abs() < 1e-15);
        assert_eq!(Weighting::Identity.nu(0.4).unwrap(), 0.4);
        assert_eq!(Weighting::Identity.nu_prime(0.4).unwrap(), 1.0);
    }

    #[test]
    fn jin_zhou_continuity_and_normalization() {
        let j = JinZhou::for_kernel_sigma(0.2).unwrap();
        assert!((j.left_at_p_bar() - j.right_at_p_bar()).abs() < 1e-10);
        assert!((j.big_a + j.k * (0.5 * j.b_bar * j.b_bar).exp() - 1.0).abs() < 1e-12);
        let w = Weighting::JinZhou(j);
        assert_eq!(w.w(0.0).unwrap(), 0.0);
        assert!((w.w(1.0 - 1e-16).unwrap() - 1.0).abs() < 1e-12);
        // derivative continuity at p̄
        let h = 1e-9;
        let l = w.w_prime(j.p_bar - h).unwrap();
        let r = w.w_prime(j.p_bar + h).unwrap();
        assert!((l - r).abs() < 1e-6);
    }

    #[test]
    fn jin_zhou_is_inverse_s_shaped() {
        let w = jz();
        // w' decreasing then increasing
        let d: std::vec::Vec<f64> = (1..100).map(|i| w.w_prime(i as f64 / 100.0).unwrap()).collect();
        let argmin = d.iter().enumerate().fold(0, |m, (i, &x)| if x < d[m] { i } else { m });
        assert!(argmin > 5 && argmin < 95);
        assert!(d[..argmin].windows(2).all(|p| p[0] >= p[1]));
        assert!(d[argmin..].windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn out_of_range_arguments() {
        for w in all() {
            assert!(w.w(-0.1).is_err());
            assert!(w.w(1.1).is_err());
            assert!(w.w_inv(f64::NAN).is_err());
            assert!(w.nu(2.0).is_err());
        }
        assert!(Weighting::sqrt().w_prime(0.0).is_err());
        assert!(Weighting::sqrt().nu_prime(1.0).is_err());
    }

    #[test]
    fn inverse_round_trip_and_bisection_oracle() {
        for w in all() {
            for i in 1..1000 {
                let p = i as f64 / 1000.0;
                let q = w.w(p).unwrap();
                assert!((w.w_inv(q).unwrap() - p).abs() < 1e-12, "{} p={p}", w.name());
                assert!((w.w_inv(q).unwrap() - bisect_inverse(&w, q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fast_path_identity() {
        for w in all() {
            for i in 1..1000 {
                let u = i as f64 / 1000.0;
                let nu = w.nu(1.0 - w.w(u).unwrap()).unwrap();
                assert!((nu - (1.0 - u)).abs() < 1e-12, "{} u={u}", w.name());
            }
        }
    }

    #[test]
    fn derivative_matches_richardson() {
        for w in all() {
            for i in 1..200 {
                let p = i as f64 / 200.0;
                // the Jin-Zhou curvature jumps at p̄
                if (p - 0.3).abs() < 1e-9 {
                    continue;
                }
                let h = 1e-4 * p.min(1.0 - p);
                let d1 = (w.w(p + h).unwrap() - w.w(p - h).unwrap()) / (2.0 * h);
                let d2 = (w.w(p + 0.5 * h).unwrap() - w.w(p - 0.5 * h).unwrap()) / h;
                let rich = (4.0 * d2 - d1) / 3.0;
                let exact = w.w_prime(p).unwrap();
                assert!(((rich - exact) / exact).abs() < 1e-6, "{} p={p}", w.name());
            }
        }
    }

    #[test]
    fn nu_prime_by_inverse_rule() {
        for w in all() {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let via_inv = 1.0 / w.w_prime(w.w_inv(1.0 - p).unwrap()).unwrap();
                let direct = w.nu_prime(p).unwrap();
                assert!(((via_inv - direct) / direct).abs() < 1e-10, "{} p={p}", w.name());
                let h = 1e-6;
                let fd = (w.nu(p + h).unwrap() - w.nu(p - h).unwrap()) / (2.0 * h);
                assert!(((fd - direct) / direct).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn z_space_helpers_agree_with_p_space() {
        for w in all() {
            for i in -40..=40 {
                let z = i as f64 / 8.0;
                let p = norm_cdf(z);
                let wp = w.w(p).unwrap();
                assert!((w.w_at_z(z) - wp).abs() < 1e-14);
                let om = w.one_minus_w_at_z(z);
                assert!((om - (1.0 - wp)).abs() < 1e-14, "{} z={z} {om} {}", w.name(), 1.0 - wp);
                let dp = w.w_prime(p).unwrap();
                // the p-space reference recovers z through Φ⁻¹, whose conditioning is 1/φ(z)
                let cond = 1e-12 + 4e-16 / crate::math::norm_pdf(z);
                assert!(((w.w_prime_at_z(z) - dp) / dp).abs() < cond, "{} z={z}", w.name());
                assert!((w.inv_z(wp) - z).abs() < 1e-9 * (1.0 + z.abs()));
                assert!((w.inv_z_complement(1.0 - wp) - z).abs() < 1e-9 * (1.0 + z.abs()));
            }
        }
    }

    #[test]
    fn deep_tail_round_trip() {
        for w in all() {
            for z in [-30.0, -20.0, -10.0, 10.0, 20.0, 30.0] {
                let q = w.w_at_z(z);
                let r = w.one_minus_w_at_z(z);
                let back = if q < 0.5 { w.inv_z(q) } else { w.inv_z_complement(r) };
                assert!((back - z).abs() < 1e-8 * z.abs(), "{} z={z} back={back}", w.name());
            }
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn jin_zhou_monotone_and_normalized(
            p_bar in 0.05f64..0.95,
            a_bar in 0.0f64..1.5,
            b_bar in 0.0f64..1.5,
            p in 0.0f64..1.0,
            dp in 1e-6f64..0.1,
        ) {
            let w = Weighting::jin_zhou(p_bar, a_bar, b_bar).unwrap();
            let j = match w { Weighting::JinZhou(j) => j, _ => unreachable!() };
            prop_assert!((j.left_at_p_bar() - j.right_at_p_bar()).abs() < 1e-12);
            let q = (p + dp).min(1.0);
            prop_assert!(w.w(q).unwrap() >= w.w(p).unwrap());
            prop_assert!(w.w(1.0).unwrap() == 1.0);
            if p > 1e-9 && p < 1.0 - 1e-9 {
                prop_assert!(w.w_prime(p).unwrap() > 0.0);
                let back = w.w_inv(w.w(p).unwrap()).unwrap();
                prop_assert!((back - p).abs() < 1e-11);
            }
        }

        #[test]
        fn power_inverse_round_trip(gamma in 0.05f64..1.0, p in 0.0f64..1.0) {
            let w = Weighting::power(gamma).unwrap();
            let back = w.w_inv(w.w(p).unwrap()).unwrap();
            prop_assert!((back - p).abs() < 1e-12);
        }
    }
}
