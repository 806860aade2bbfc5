//! The piecewise power utility `u`, the relative utility `v(x) = u(log x)`,
//! and the concave envelopes of `v` that drive the optimal solution.
//!
//! `v` is concave on `(0, e^{β-1}]`, convex on `[e^{β-1}, 1]` and concave on
//! `[1, ∞)`. Its derivative is infinite at `x = 1` from both sides, and the
//! tangency points of the envelope sit extremely close to 1 for the usual
//! parameters (b - 1 is of order 1e-5), so the upper branch is handled in the
//! coordinate `t = log x` throughout.

use crate::error::{Error, Result};
use crate::math::roots::{bisect, newton_bracketed};
use crate::math::{abs, exp, expm1, ln, powf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    /// Curvature on gains, in (0, 1).
    pub alpha: f64,
    /// Curvature on losses, in (0, 1).
    pub beta: f64,
    /// Loss aversion, > 0.
    pub kappa: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self::TVERSKY_KAHNEMAN
    }
}

impl UtilityParams {
    pub const TVERSKY_KAHNEMAN: Self = Self {
        alpha: 0.88,
        beta: 0.88,
        kappa: 2.5,
    };

    pub fn new(alpha: f64, beta: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter { name: "alpha", value: alpha });
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter { name: "beta", value: beta });
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter { name: "kappa", value: kappa });
        }
        Ok(Self { alpha, beta, kappa })
    }

    /// S-shaped utility of a relative log-return.
    pub fn u(&self, x: f64) -> f64 {
        if x >= 0.0 {
            powf(x, self.alpha)
        } else {
            -self.kappa * powf(-x, self.beta)
        }
    }

    /// Inverse of `u'` on the gain side: `(y/α)^{1/(α-1)}`.
    pub fn u_prime_inverse_gain(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain { what: "u' inverse", value: y });
        }
        Ok(powf(y / self.alpha, 1.0 / (self.alpha - 1.0)))
    }

    pub fn v(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain { what: "v", value: x });
        }
        Ok(self.u(ln(x)))
    }

    /// `v'(x) = u'(log x) / x` written in `t = log x`, valid for `t != 0`.
    pub fn v_prime_log(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.alpha * powf(t, self.alpha - 1.0) * exp(-t)
        } else {
            self.kappa * self.beta * powf(-t, self.beta - 1.0) * exp(-t)
        }
    }

    pub fn v_prime(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain { what: "v'", value: x });
        }
        if x == 1.0 {
            return Err(Error::Singularity { what: "v'", value: x });
        }
        Ok(self.v_prime_log(ln(x)))
    }

    /// Boundary `e^{β-1}` between the lower concave and the convex piece.
    pub fn inflection(&self) -> f64 {
        exp(self.beta - 1.0)
    }

    /// Smallest slope taken by the lower concave branch, `v'(e^{β-1})`.
    pub fn lower_branch_min_slope(&self) -> f64 {
        self.v_prime_log(self.beta - 1.0)
    }

    /// `t = log x > 0` with `v'(x) = y` on the upper concave branch.
    pub fn upper_log_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain { what: "v' inverse (upper)", value: y });
        }
        let a = self.alpha;
        let (ln_a, ln_y) = (ln(a), ln(y));
        // g(τ) = log v'(e^{e^τ}) - log y, strictly decreasing in τ = log t
        let g = |tau: f64| {
            let t = exp(tau);
            (ln_a + (a - 1.0) * tau - t - ln_y, (a - 1.0) - t)
        };
        // for very negative τ the e^τ term vanishes and g is affine
        let mut lo = ((ln_y - ln_a) / (a - 1.0) - 1.0).min(-1.0);
        let mut hi = 1.0;
        for _ in 0..200 {
            if g(hi).0 < 0.0 {
                break;
            }
            hi += 1.0;
        }
        while g(lo).0 <= 0.0 {
            lo -= 10.0;
            if lo < -1e4 {
                return Err(Error::Domain { what: "v' inverse (upper)", value: y });
            }
        }
        let tau = newton_bracketed(g, lo, hi, 1e-15, 300, "v' inverse (upper)")?;
        Ok(exp(tau))
    }

    /// `(v')^{-1}(y)` on `(1, ∞)`.
    pub fn v_prime_inverse_upper(&self, y: f64) -> Result<f64> {
        Ok(exp(self.upper_log_inverse(y)?))
    }

    /// `s = -log x >= 1 - β` with `v'(x) = y` on the lower concave branch.
    pub fn lower_neglog_inverse(&self, y: f64) -> Result<f64> {
        let b = self.beta;
        let y_min = self.lower_branch_min_slope();
        if !(y >= y_min * (1.0 - 1e-14)) || !y.is_finite() {
            return Err(Error::Domain { what: "v' inverse (lower)", value: y });
        }
        let s0 = 1.0 - b;
        if y <= y_min {
            return Ok(s0);
        }
        let c = ln(self.kappa * b) - ln(y);
        let h = |s: f64| (c + (b - 1.0) * ln(s) + s, (b - 1.0) / s + 1.0);
        let mut hi = s0 + 1.0;
        while h(hi).0 < 0.0 {
            hi *= 2.0;
        }
        newton_bracketed(h, s0, hi, 1e-15, 300, "v' inverse (lower)")
    }

    /// `(v')^{-1}(y)` on `(0, e^{β-1}]`.
    pub fn v_prime_inverse_lower(&self, y: f64) -> Result<f64> {
        Ok(exp(-self.lower_neglog_inverse(y)?))
    }

    /// Tangent points `(a, b)` of the global concave envelope of `v`.
    pub fn global_envelope_points(&self) -> Result<(f64, f64)> {
        let g = GlobalEnvelope::solve(self)?;
        Ok((g.a, g.b))
    }
}

/// The bitangent of `v`: `v'(a) = v'(b) = (v(b) - v(a)) / (b - a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalEnvelope {
    pub a: f64,
    pub b: f64,
    /// `log b`, kept separately because `b - 1` is tiny.
    pub log_b: f64,
    pub slope: f64,
}

impl GlobalEnvelope {
    /// Bisection over the common slope `y`: for each `y` the tangent points on
    /// the two concave branches are the minimizers of `y x - v(x)` on `(0, 1]`
    /// and `[1, ∞)`, and the equation asks for equal minimal values.
    pub fn solve(p: &UtilityParams) -> Result<Self> {
        // intercept gap of the two tangents with slope y; decreasing in y,
        // with derivative a(y) - b(y)
        let gap = |y: f64| -> Result<(f64, f64, f64, f64)> {
            let s = p.lower_neglog_inverse(y)?;
            let t = p.upper_log_inverse(y)?;
            let a = exp(-s);
            let b = exp(t);
            let upper = p.u(t) - y * b;
            let lower = p.u(-s) - y * a;
            Ok((upper - lower, a, b, t))
        };
        let y_lo = p.lower_branch_min_slope();
        // at the inflection slope the convex piece lies above the lower tangent,
        // so the gap is positive there
        let mut y_hi = 2.0 * y_lo;
        let mut iters = 0;
        while gap(y_hi)?.0 > 0.0 {
            y_hi *= 2.0;
            iters += 1;
            if iters > 200 {
                return Err(Error::NotBracketed { what: "envelope slope", lo: y_lo, hi: y_hi });
            }
        }
        let y = newton_bracketed(
            |y| match gap(y) {
                Ok((d, a, b, _)) => (d, a - b),
                Err(_) => (f64::NAN, f64::NAN),
            },
            y_lo,
            y_hi,
            1e-15,
            400,
            "envelope slope",
        )?;
        let (_, a, b, log_b) = gap(y)?;
        Ok(Self { a, b, log_b, slope: y })
    }

    /// `(|v'(a) - v'(b)|, |v'(a) - chord slope|)`.
    pub fn residuals(&self, p: &UtilityParams) -> (f64, f64) {
        let va = p.v_prime_log(ln(self.a));
        let vb = p.v_prime_log(self.log_b);
        let chord = (p.u(self.log_b) - p.u(ln(self.a))) / (expm1(self.log_b) + (1.0 - self.a));
        (abs(va - vb), abs(va - chord))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeRegime {
    /// `ĉ <= a`: the local envelope on `[ĉ, ∞)` is the global one.
    GlobalCoincides,
    /// `ĉ > a`: chord from `(ĉ, v(ĉ))` tangent to `v` at `d ∈ (1, b)`.
    LocalChord,
}

/// Local concave envelope `v̂_ĉ` of `v` on `[ĉ, ∞)` with its generalized
/// inverse marginal `I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeData {
    pub params: UtilityParams,
    pub a: f64,
    pub b: f64,
    pub log_b: f64,
    pub c_hat: f64,
    pub d: Option<f64>,
    pub log_d: Option<f64>,
    /// Slope of the linear piece: `v'(a) = v'(b)` or `v'(d)`.
    pub slope: f64,
    pub regime: EnvelopeRegime,
}

impl EnvelopeData {
    pub fn local(params: &UtilityParams, c_hat: f64) -> Result<Self> {
        let g = GlobalEnvelope::solve(params)?;
        Self::from_global(params, &g, c_hat)
    }

    pub fn from_global(params: &UtilityParams, g: &GlobalEnvelope, c_hat: f64) -> Result<Self> {
        if !(c_hat > 0.0 && c_hat < 1.0) {
            return Err(Error::Domain { what: "local envelope floor", value: c_hat });
        }
        let mut env = Self {
            params: *params,
            a: g.a,
            b: g.b,
            log_b: g.log_b,
            c_hat,
            d: None,
            log_d: None,
            slope: g.slope,
            regime: EnvelopeRegime::GlobalCoincides,
        };
        if c_hat <= g.a {
            return Ok(env);
        }
        let p = *params;
        let v_c = p.u(ln(c_hat));
        // E(τ) = v(d) - v(ĉ) - v'(d)(d - ĉ) with log d = e^τ; increasing in d
        let tangency = |tau: f64| {
            let t = exp(tau);
            let span = expm1(t) + (1.0 - c_hat);
            p.u(t) - v_c - p.v_prime_log(t) * span
        };
        let tau = bisect(tangency, -700.0, ln(g.log_b), 1e-15, 400, "local envelope tangency")?;
        let log_d = exp(tau);
        env.log_d = Some(log_d);
        env.d = Some(exp(log_d));
        env.slope = p.v_prime_log(log_d);
        env.regime = EnvelopeRegime::LocalChord;
        Ok(env)
    }

    /// Residual of the tangency equation for `d` (zero in the global regime).
    pub fn d_residual(&self) -> f64 {
        match self.log_d {
            Some(t) => {
                let p = &self.params;
                let chord = (p.u(t) - p.u(ln(self.c_hat))) / (expm1(t) + (1.0 - self.c_hat));
                abs(p.v_prime_log(t) - chord)
            }
            None => 0.0,
        }
    }

    /// The slope at which `I` jumps: `v'(d)` or `v'(a)`.
    pub fn jump_slope(&self) -> f64 {
        self.slope
    }

    /// `v'(ĉ)`, above which `I` returns the floor. Only meaningful in the
    /// global regime; equals the jump slope otherwise.
    pub fn floor_slope(&self) -> f64 {
        match self.regime {
            EnvelopeRegime::GlobalCoincides if self.c_hat < self.a => self.params.v_prime_log(ln(self.c_hat)),
            _ => self.slope,
        }
    }

    /// Lower end of the range gap of `I`: `ĉ` or `a`.
    pub fn gap(&self) -> (f64, f64) {
        match self.regime {
            EnvelopeRegime::LocalChord => (self.c_hat, self.d.unwrap_or(self.b)),
            EnvelopeRegime::GlobalCoincides => (self.a, self.b),
        }
    }

    /// Right-continuous generalized inverse of `v̂_ĉ'`:
    /// `I(x) = inf{y >= ĉ : v̂_ĉ'(y) <= x} ∨ ĉ`.
    pub fn inverse_marginal(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain { what: "I", value: x });
        }
        let p = &self.params;
        match self.regime {
            EnvelopeRegime::LocalChord => {
                if x < self.slope {
                    Ok(p.v_prime_inverse_upper(x)?.max(self.d.unwrap_or(self.b)))
                } else {
                    Ok(self.c_hat)
                }
            }
            EnvelopeRegime::GlobalCoincides => {
                if x < self.slope {
                    Ok(p.v_prime_inverse_upper(x)?.max(self.b))
                } else if x == self.slope {
                    Ok(self.a)
                } else if x < self.floor_slope() {
                    Ok(p.v_prime_inverse_lower(x)?.clamp(self.c_hat, self.a))
                } else {
                    Ok(self.c_hat)
                }
            }
        }
    }

    /// `v̂_ĉ(x)` for `x >= ĉ`.
    pub fn value(&self, x: f64) -> Result<f64> {
        if !(x >= self.c_hat) {
            return Err(Error::Domain { what: "local envelope", value: x });
        }
        let p = &self.params;
        match self.regime {
            EnvelopeRegime::LocalChord => {
                let d = self.d.unwrap_or(self.b);
                if x >= d {
                    p.v(x)
                } else {
                    Ok(p.u(ln(self.c_hat)) + self.slope * (x - self.c_hat))
                }
            }
            EnvelopeRegime::GlobalCoincides => {
                if x > self.a && x < self.b {
                    Ok(p.u(ln(self.a)) + self.slope * (x - self.a))
                } else {
                    p.v(x)
                }
            }
        }
    }

    /// `max_{y >= ĉ} (v(y) - x y) = v̂_ĉ(I(x)) - x I(x)`.
    pub fn conjugate(&self, x: f64) -> Result<f64> {
        let y = self.inverse_marginal(x)?;
        Ok(self.value(y)? - x * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    const TK: UtilityParams = UtilityParams::TVERSKY_KAHNEMAN;
    const E: f64 = core::f64::consts::E;

    // independent oracle: plain bisection on v' in x-space
    fn bisect_v_prime(p: &UtilityParams, y: f64, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        let f_lo = p.v_prime(lo).unwrap() - y;
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            let fm = p.v_prime(m).unwrap() - y;
            if (fm > 0.0) == (f_lo > 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn utility_values() {
        assert_eq!(TK.u(0.0), 0.0);
        assert_eq!(TK.u(1.0), 1.0);
        assert!((TK.u(-1.0) + 2.5).abs() < 1e-15);
        assert_eq!(TK.v(1.0).unwrap(), 0.0);
        assert!((TK.v(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((TK.v(1.0 / E).unwrap() + 2.5).abs() < 1e-14);
        assert!(TK.v(0.0).is_err());
        assert!(TK.v(-1.0).is_err());
    }

    #[test]
    fn v_prime_singular_at_one() {
        assert!(matches!(TK.v_prime(1.0), Err(Error::Singularity { .. })));
        assert!(matches!(TK.v_prime(0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn branch_inverses_match_bisection_oracle() {
        // v'(e) = 0.88 / e on the upper branch
        let y = 0.88 / E;
        assert!((TK.v_prime(E).unwrap() - y).abs() < 1e-15);
        let x = TK.v_prime_inverse_upper(y).unwrap();
        assert!((x - E).abs() < 1e-12);
        assert!((x - bisect_v_prime(&TK, y, 1.0 + 1e-12, 50.0)).abs() < 1e-11);

        // v'(1/e) = κβ e = 2.2 e on the lower branch
        let y = 2.2 * E;
        assert!((TK.v_prime(1.0 / E).unwrap() - y).abs() < 1e-13);
        let x = TK.v_prime_inverse_lower(y).unwrap();
        assert!((x - 1.0 / E).abs() < 1e-12);
        assert!((x - bisect_v_prime(&TK, y, 1e-6, TK.inflection())).abs() < 1e-11);

        // below the lower branch's range
        assert!(TK.v_prime_inverse_lower(0.5 * TK.lower_branch_min_slope()).is_err());
        assert!(TK.v_prime_inverse_upper(0.0).is_err());
        assert!(TK.v_prime_inverse_upper(-1.0).is_err());
    }

    #[test]
    fn upper_inverse_diverges_at_zero_slope() {
        let mut last = 1.0;
        for k in 1..30 {
            let x = TK.v_prime_inverse_upper(libm::pow(10.0, -(k as f64))).unwrap();
            assert!(x > last);
            last = x;
        }
        assert!(last > 1e25);
    }

    #[test]
    fn global_envelope_for_tk_parameters() {
        let g = GlobalEnvelope::solve(&TK).unwrap();
        assert!(g.a > libm::exp(-0.3) && g.a <= libm::exp(-0.2), "a = {}", g.a);
        assert!(g.b > 1.0 && g.a < 1.0);
        let (r1, r2) = g.residuals(&TK);
        assert!(r1 < 1e-8 && r2 < 1e-8, "{r1} {r2}");
        assert!(g.a < TK.inflection());
        // frozen from an independent chord bisection in x-space
        assert!((g.a - 0.7784423030795683).abs() < 1e-10, "a = {}", g.a);
        assert!((g.b - 1.0000149994344165).abs() < 1e-12, "b = {}", g.b);
        assert!((g.slope - 3.336933584134036).abs() < 1e-8, "slope = {}", g.slope);
    }

    #[test]
    fn local_tangency_points_frozen() {
        let d1 = EnvelopeData::local(&TK, libm::exp(-0.1)).unwrap();
        assert!((d1.d.unwrap() - 1.0000110064217338).abs() < 1e-12, "{:?}", d1.d);
        assert!((d1.slope - 3.4632).abs() < 1e-4);
        let d2 = EnvelopeData::local(&TK, libm::exp(-0.2)).unwrap();
        assert!((d2.d.unwrap() - 1.0000146638).abs() < 1e-10, "{:?}", d2.d);
        assert!((d2.slope - 3.3460).abs() < 1e-4);
    }

    #[test]
    fn local_envelope_regimes() {
        let c03 = EnvelopeData::local(&TK, libm::exp(-0.3)).unwrap();
        assert_eq!(c03.regime, EnvelopeRegime::GlobalCoincides);
        assert!(c03.d.is_none());

        let c01 = EnvelopeData::local(&TK, libm::exp(-0.1)).unwrap();
        assert_eq!(c01.regime, EnvelopeRegime::LocalChord);
        let d = c01.d.unwrap();
        assert!(d > 1.0 && d < c01.b);
        assert!(c01.d_residual() < 1e-8);

        let low = EnvelopeData::local(&TK, 0.5).unwrap();
        assert_eq!(low.regime, EnvelopeRegime::GlobalCoincides);
        assert!(EnvelopeData::local(&TK, 1.0).is_err());
        assert!(EnvelopeData::local(&TK, 0.0).is_err());
    }

    #[test]
    fn inverse_marginal_cases() {
        let two = EnvelopeData::local(&TK, libm::exp(-0.1)).unwrap();
        let vd = two.jump_slope();
        assert_eq!(two.inverse_marginal(vd).unwrap(), two.c_hat);
        assert_eq!(two.inverse_marginal(10.0 * vd).unwrap(), two.c_hat);
        assert!(two.inverse_marginal(vd * (1.0 - 1e-9)).unwrap() >= two.d.unwrap());
        assert!(two.inverse_marginal(1e-12).unwrap() > 1e10);
        assert!(two.inverse_marginal(0.0).is_err());

        let three = EnvelopeData::local(&TK, libm::exp(-0.3)).unwrap();
        let va = three.jump_slope();
        assert_eq!(three.inverse_marginal(va).unwrap(), three.a);
        assert!(three.inverse_marginal(va * (1.0 - 1e-12)).unwrap() >= three.b);
        let mid = 0.5 * (va + three.floor_slope());
        let x = three.inverse_marginal(mid).unwrap();
        assert!(x > three.c_hat && x < three.a);
        assert_eq!(three.inverse_marginal(three.floor_slope()).unwrap(), three.c_hat);
    }

    #[test]
    fn envelope_values() {
        let env = EnvelopeData::local(&TK, libm::exp(-0.1)).unwrap();
        let d = env.d.unwrap();
        assert_eq!(env.value(2.0).unwrap(), TK.v(2.0).unwrap());
        assert_eq!(env.value(d).unwrap(), TK.v(d).unwrap());
        assert!((env.value(env.c_hat).unwrap() - TK.v(env.c_hat).unwrap()).abs() < 1e-15);
        let mid = 0.5 * (env.c_hat + d);
        let expect = 0.5 * (TK.v(env.c_hat).unwrap() + TK.v(d).unwrap());
        assert!((env.value(mid).unwrap() - expect).abs() < 1e-10);
        assert!(env.value(0.5 * env.c_hat).is_err());
    }

    // v'' by central differences, away from the kink at 1
    #[test]
    fn shape_of_v() {
        let h = 1e-5;
        let second = |x: f64| (TK.v(x + h).unwrap() - 2.0 * TK.v(x).unwrap() + TK.v(x - h).unwrap()) / (h * h);
        let infl = TK.inflection();
        for i in 1..100 {
            let x = 0.05 + (infl - 0.06) * i as f64 / 100.0;
            assert!(second(x) <= 1e-3, "concave below inflection at {x}");
        }
        for i in 1..100 {
            let x = infl + 0.01 + (0.98 - infl) * i as f64 / 100.0;
            assert!(second(x) >= -1e-3, "convex between inflection and 1 at {x}");
        }
        for i in 1..100 {
            let x = 1.02 + 5.0 * i as f64 / 100.0;
            assert!(second(x) <= 1e-3, "concave above 1 at {x}");
        }
    }

    // Dense search over y >= ĉ; the grid is log-spaced in y - 1 above 1 because
    // the maximizer is often within 1e-5 of 1.
    fn grid_conjugate(env: &EnvelopeData, x: f64) -> f64 {
        let mut pts: Vec<f64> = Vec::new();
        for i in 0..=20_000 {
            pts.push(env.c_hat + (1.0 - env.c_hat) * i as f64 / 20_000.0);
        }
        for i in 0..=40_000 {
            let t = libm::exp(-30.0 + 35.0 * i as f64 / 40_000.0);
            pts.push(libm::exp(t));
        }
        let f = |y: f64| TK.v(y).unwrap() - x * y;
        let (mut best_y, mut best) = (env.c_hat, f(env.c_hat));
        for &y in &pts {
            let val = f(y);
            if val > best {
                best = val;
                best_y = y;
            }
        }
        // golden-section polish in log(y-1) or y
        if best_y > 1.0 {
            let (mut lo, mut hi) = (libm::log(best_y - 1.0) - 0.01, libm::log(best_y - 1.0) + 0.01);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(1.0 + libm::exp(m1)) < f(1.0 + libm::exp(m2)) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            best = best.max(f(1.0 + libm::exp(0.5 * (lo + hi))));
        } else {
            let step = (1.0 - env.c_hat) / 20_000.0;
            let (mut lo, mut hi) = ((best_y - step).max(env.c_hat), (best_y + step).min(1.0));
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) < f(m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            best = best.max(f(0.5 * (lo + hi)));
        }
        best
    }

    #[test]
    fn fenchel_property_against_grid_search() {
        for c in [0.1, 0.2, 0.3, 0.5] {
            let env = EnvelopeData::local(&TK, libm::exp(-c)).unwrap();
            for x in crate::math::logspace(0.05, 20.0, 40) {
                let closed = env.conjugate(x).unwrap();
                let grid = grid_conjugate(&env, x);
                assert!((closed - grid).abs() < 1e-6, "c={c} x={x}: {closed} vs {grid}");
            }
        }
    }

    #[test]
    fn envelope_touches_v_at_inverse_marginal() {
        for c in [0.1, 0.2, 0.3] {
            let env = EnvelopeData::local(&TK, libm::exp(-c)).unwrap();
            for x in crate::math::logspace(1e-4, 100.0, 200) {
                let y = env.inverse_marginal(x).unwrap();
                let gap = env.value(y).unwrap() - TK.v(y).unwrap();
                assert!(gap.abs() < 1e-12, "c={c} x={x} y={y} gap={gap}");
            }
        }
    }

    #[test]
    fn lower_floor_gives_larger_envelope() {
        let envs: Vec<_> = [0.05, 0.1, 0.2, 0.3, 0.6]
            .iter()
            .map(|&c| EnvelopeData::local(&TK, libm::exp(-c)).unwrap())
            .collect();
        let start = envs[0].c_hat;
        for i in 0..500 {
            let x = start + 3.0 * i as f64 / 500.0;
            for w in envs.windows(2) {
                assert!(w[1].value(x).unwrap() >= w[0].value(x).unwrap() - 1e-14, "x={x}");
            }
        }
    }

    #[test]
    fn inverse_marginal_monotone_and_right_continuous() {
        for c in [0.1, 0.3] {
            let env = EnvelopeData::local(&TK, libm::exp(-c)).unwrap();
            let xs = crate::math::logspace(1e-3, 50.0, 2000);
            for w in xs.windows(2) {
                assert!(env.inverse_marginal(w[0]).unwrap() >= env.inverse_marginal(w[1]).unwrap());
            }
            for x in [env.jump_slope(), env.floor_slope()] {
                let at = env.inverse_marginal(x).unwrap();
                let right = env.inverse_marginal(x * (1.0 + 1e-13)).unwrap();
                assert!((at - right).abs() < 1e-9, "c={c} x={x}: {at} vs {right}");
            }
        }
    }
}
