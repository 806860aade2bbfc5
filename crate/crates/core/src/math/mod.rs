//! Numerical building blocks: floating-point helpers, the standard normal
//! distribution, scalar root finding and quadrature.

pub mod normal;
pub mod quad;
pub mod roots;

pub use normal::{norm_cdf, norm_pdf, norm_ppf};

// `core` has no transcendental functions, so route everything through libm.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> alloc::vec::Vec<f64> {
    let (l0, l1) = (ln(lo), ln(hi));
    (0..n)
        .map(|i| {
            if n == 1 {
                lo
            } else {
                exp(l0 + (l1 - l0) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}
