//! Bracketing root finders. Every scalar equation in the crate goes through
//! one of these: plain bisection, or bisection safeguarding Newton steps.

use super::abs;
use crate::error::{Error, Result};

/// Absolute argument tolerance used throughout.
pub const XTOL: f64 = 1e-12;

/// Bisection on `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize, what: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NotBracketed { what, lo, hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if abs(hi - lo) <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
        residual: abs(hi - lo),
    })
}

/// Newton's method kept inside a shrinking bracket; falls back to bisection
/// whenever the Newton step leaves the bracket or stalls. `f` returns the
/// value and the derivative.
pub fn newton_bracketed<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    max_iter: usize,
    what: &'static str,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NotBracketed { what, lo, hi });
    }
    // orient so that f(neg) < 0 < f(pos)
    let (mut neg, mut pos) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = abs(hi - lo);
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..max_iter {
        let newton_ok = dfx != 0.0 && dfx.is_finite() && {
            let cand = x - fx / dfx;
            (cand - neg) * (cand - pos) < 0.0 && abs(2.0 * fx) <= abs(dx_old * dfx)
        };
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (pos - neg);
            x = neg + dx;
        }
        let tol = xtol + 4.0 * f64::EPSILON * abs(x);
        if abs(dx) <= tol || abs(pos - neg) <= tol {
            return Ok(x);
        }
        let (fv, dv) = f(x);
        fx = fv;
        dfx = dv;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.is_nan() {
            return Err(Error::NoConvergence {
                what,
                iterations: max_iter,
                residual: f64::NAN,
            });
        }
        if fx < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
        residual: abs(fx),
    })
}
