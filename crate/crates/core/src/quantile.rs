//! Quantile-side machinery: Choquet expectations, the curve
//! `φ(p) = -∫_p^1 Q_η(1 - ν(s)) ν'(s) ds` and its concave envelope `φ̂`.
//!
//! Substituting `u = 1 - ν(s)` gives `φ(p) = -∫_0^{w⁻¹(1-p)} Q_η(u) du`, and
//! with `u = Φ(ζ)` this is a partial normal expectation of `η`. All evaluation
//! happens in `ζ`, where the endpoints `p = 0, 1` map to `ζ = ±∞`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::quad::{integrate, normal_expectation, Tolerance, Z_MAX};
use crate::math::roots::bisect;
use crate::math::{abs, cos, exp, norm_cdf, norm_ppf};
use crate::weighting::Weighting;

/// Law of the benchmark-adjusted kernel `η`, described by its quantile
/// function in normal coordinates: `Q_η(Φ(ζ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaLaw {
    /// `Q_η(Φ(ζ)) = exp(mu + sigma ζ)`.
    Lognormal { mu: f64, sigma: f64 },
    Constant(f64),
}

impl EtaLaw {
    pub fn at_z(&self, z: f64) -> f64 {
        match *self {
            Self::Lognormal { mu, sigma } => exp(mu + sigma * z),
            Self::Constant(c) => c,
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain { what: "eta quantile", value: u });
        }
        Ok(self.at_z(norm_ppf(u)))
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Lognormal { mu, sigma } => exp(mu + 0.5 * sigma * sigma),
            Self::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    PiecewiseConstantRightContinuous,
    PiecewiseLinear,
}

/// A nondecreasing function on `(0, 1)` sampled on a grid; constant
/// extrapolation outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub interpolation: Interpolation,
}

impl QuantileCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::TooFewSamples { needed: 1, got: grid.len().min(values.len()) });
        }
        for g in grid.windows(2) {
            if !(g[1] > g[0]) {
                return Err(Error::Domain { what: "quantile grid order", value: g[1] });
            }
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
            return Err(Error::Domain { what: "quantile grid range", value: grid[0] });
        }
        for v in values.windows(2) {
            if v[1] < v[0] {
                return Err(Error::Domain { what: "quantile values order", value: v[1] });
            }
        }
        Ok(Self { grid, values, interpolation })
    }

    fn cell(&self, p: f64) -> usize {
        // last index with grid[i] <= p
        self.grid.partition_point(|&g| g <= p).saturating_sub(1)
    }

    pub fn eval(&self, p: f64) -> f64 {
        let n = self.grid.len();
        if p <= self.grid[0] {
            return self.values[0];
        }
        if p >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let i = self.cell(p);
        match self.interpolation {
            Interpolation::PiecewiseConstantRightContinuous => self.values[i],
            Interpolation::PiecewiseLinear => {
                let t = (p - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
                self.values[i] + t * (self.values[i + 1] - self.values[i])
            }
        }
    }
}

/// `∫_0^1 Q(p) w'(1 - p) dp` for a sampled quantile curve.
///
/// Piecewise-constant curves are integrated exactly. Linear cells use the
/// integration by parts `∫ Q w'(1-p) = [-Q w(1-p)] + Q' ∫ w(1-p) dp`, which
/// avoids the singularity of `w'` at 0.
pub fn choquet_expectation(curve: &QuantileCurve, w: &Weighting) -> Result<f64> {
    let n = curve.grid.len();
    let g = &curve.grid;
    let q = &curve.values;
    let tail = |p: f64| w.w(1.0 - p);
    // constant extrapolation on [0, g0] and [g_last, 1]
    let mut total = q[0] * (1.0 - tail(g[0])?) + q[n - 1] * tail(g[n - 1])?;
    for i in 0..n - 1 {
        let (a, b) = (g[i], g[i + 1]);
        let (wa, wb) = (tail(a)?, tail(b)?);
        total += match curve.interpolation {
            Interpolation::PiecewiseConstantRightContinuous => q[i] * (wa - wb),
            Interpolation::PiecewiseLinear => {
                let slope = (q[i + 1] - q[i]) / (b - a);
                let inner = integrate(
                    |p| w.w(1.0 - p).unwrap_or(f64::NAN),
                    a,
                    b,
                    Tolerance::absolute(1e-14),
                    "choquet cell",
                )?;
                q[i] * wa - q[i + 1] * wb + slope * inner.value
            }
        };
    }
    Ok(total)
}

/// `∫_0^1 Q(p) w'(1 - p) dp` for a quantile given in normal coordinates,
/// `q_at_z(z) = Q(Φ(z))`, with optional discontinuities `breaks` (in `z`).
pub fn choquet_expectation_normal<F>(q_at_z: F, w: &Weighting, breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let r = normal_expectation(
        |z| {
            let q = q_at_z(z);
            if q == 0.0 {
                0.0
            } else {
                q * w.w_prime_at_z(-z)
            }
        },
        breaks,
        Tolerance { abs: 1e-13, rel: 1e-13, max_intervals: 4000 },
        "choquet expectation",
    )?;
    Ok(r.value)
}

/// Upper concave hull of points sorted by `x`; returns vertex indices.
fn upper_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while h.len() >= 2 {
            let (o, a) = (h[h.len() - 2], h[h.len() - 1]);
            let cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o]);
            if cross >= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

/// Concave envelope of samples `(x, y)`: returns envelope values at every
/// sample and right derivatives (the slope of the segment to the right; the
/// last entry repeats the final slope).
pub fn concave_envelope(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::TooFewSamples { needed: 2, got: x.len().min(y.len()) });
    }
    let hull = upper_hull(x, y);
    let mut hat = Vec::with_capacity(x.len());
    for e in hull.windows(2) {
        let (i, j) = (e[0], e[1]);
        let s = (y[j] - y[i]) / (x[j] - x[i]);
        for k in i..j {
            hat.push(if k == i { y[i] } else { y[i] + s * (x[k] - x[i]) });
        }
    }
    hat.push(y[x.len() - 1]);
    let mut slope: Vec<f64> = hat.windows(2).zip(x.windows(2)).map(|(h, p)| (h[1] - h[0]) / (p[1] - p[0])).collect();
    slope.push(*slope.last().unwrap_or(&0.0));
    Ok((hat, slope))
}

/// `n` Chebyshev–Lobatto nodes on `[0, 1]`, clustered at both ends.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else if i == n - 1 {
                1.0
            } else {
                0.5 * (1.0 - cos(core::f64::consts::PI * i as f64 / m))
            }
        })
        .collect()
}

/// A maximal interval on which `φ̂` is affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub p1: f64,
    pub p2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub slope: f64,
    /// `ζ` images of the endpoints: `z_hi = ζ(p1) > z_lo = ζ(p2)`.
    pub z_hi: f64,
    pub z_lo: f64,
    /// `φ̂ > φ` strictly inside (a concavification gap), as opposed to `φ`
    /// itself being affine there.
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiShape {
    Concave,
    /// One gap, starting at `p = 0`.
    SShaped,
    General,
}

/// Grid size used by default when building `φ`.
pub const DEFAULT_GRID: usize = 4001;

/// Deviation `φ̂ - φ` above which a hull edge counts as a gap.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PhiCurve {
    pub eta: EtaLaw,
    pub weighting: Weighting,
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_hat: Vec<f64>,
    /// Right derivatives of the sampled envelope.
    pub phi_hat_prime: Vec<f64>,
    pub pieces: Vec<LinearPiece>,
    pub shape: PhiShape,
}

const PHI_TOL: Tolerance = Tolerance { abs: 1e-15, rel: 1e-14, max_intervals: 2000 };

fn clamp_z(z: f64) -> f64 {
    z.clamp(-Z_MAX, Z_MAX)
}

/// `∫_{lo}^{hi} η(z) n(z) dz`.
fn eta_mass(eta: &EtaLaw, lo: f64, hi: f64) -> Result<f64> {
    let (lo, hi) = (clamp_z(lo), clamp_z(hi));
    if hi <= lo {
        return Ok(0.0);
    }
    Ok(integrate(|z| eta.at_z(z) * crate::math::norm_pdf(z), lo, hi, PHI_TOL, "phi")?.value)
}

/// Builds `φ` on a Chebyshev grid and its concave envelope, with the gap
/// endpoints refined to the true tangency points.
pub fn build_phi(eta: EtaLaw, weighting: Weighting, n_grid: usize) -> Result<PhiCurve> {
    if n_grid < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n_grid });
    }
    if !(eta.mean() > 0.0 && eta.mean().is_finite()) {
        return Err(Error::InvalidParameter { name: "eta", value: eta.mean() });
    }
    let grid = chebyshev_grid(n_grid);
    let zeta: Vec<f64> = grid.iter().map(|&p| weighting.inv_z_complement(p)).collect();
    // cumulative partial means, from p = 1 (ζ = -∞) backwards
    let mut phi = alloc::vec![0.0; n_grid];
    let mut m = 0.0;
    for i in (0..n_grid - 1).rev() {
        m += eta_mass(&eta, zeta[i + 1], zeta[i])?;
        phi[i] = -m;
    }
    let mut curve = PhiCurve {
        eta,
        weighting,
        grid,
        phi,
        phi_hat: Vec::new(),
        phi_hat_prime: Vec::new(),
        pieces: Vec::new(),
        shape: PhiShape::Concave,
    };
    curve.envelope()?;
    Ok(curve)
}

impl PhiCurve {
    /// `ζ(p)` with `Φ(ζ) = w⁻¹(1 - p)`.
    pub fn z_of_p(&self, p: f64) -> f64 {
        self.weighting.inv_z_complement(p)
    }

    /// `p(ζ) = 1 - w(Φ(ζ))`.
    pub fn p_of_z(&self, z: f64) -> f64 {
        self.weighting.one_minus_w_at_z(z)
    }

    /// `φ'(p) = Q_η(w⁻¹(1-p)) / w'(w⁻¹(1-p))`, written in `ζ`.
    pub fn phi_prime_at_z(&self, z: f64) -> f64 {
        self.eta.at_z(z) / self.weighting.w_prime_at_z(z)
    }

    pub fn phi_prime(&self, p: f64) -> f64 {
        self.phi_prime_at_z(self.z_of_p(p))
    }

    /// `φ(p)` by quadrature.
    pub fn phi_at(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain { what: "phi", value: p });
        }
        Ok(-eta_mass(&self.eta, -Z_MAX, self.z_of_p(p))?)
    }

    /// `E[η] = -φ(0)`.
    pub fn eta_mean(&self) -> f64 {
        -self.phi[0]
    }

    fn piece_at(&self, p: f64) -> Option<&LinearPiece> {
        self.pieces.iter().find(|g| p >= g.p1 && p < g.p2)
    }

    pub fn phi_hat_at(&self, p: f64) -> Result<f64> {
        match self.piece_at(p) {
            Some(g) => Ok(g.phi1 + g.slope * (p - g.p1)),
            None => self.phi_at(p),
        }
    }

    /// Right derivative `φ̂'(p)`.
    pub fn phi_hat_prime_at(&self, p: f64) -> f64 {
        match self.piece_at(p) {
            Some(g) => g.slope,
            None => self.phi_prime(p),
        }
    }

    /// `φ̂'(1 - w(Φ(ζ)))`; nondecreasing in `ζ`.
    pub fn hat_prime_at_z(&self, z: f64) -> f64 {
        for g in &self.pieces {
            if z > g.z_lo && z <= g.z_hi {
                return g.slope;
            }
        }
        self.phi_prime_at_z(z)
    }

    pub fn gaps(&self) -> impl Iterator<Item = &LinearPiece> {
        self.pieces.iter().filter(|g| g.strict)
    }

    /// `ζ`-intervals, inside `[-Z_MAX, Z_MAX]`, where `φ̂ = φ` and `φ` is not
    /// affine. Sorted increasing.
    pub fn free_z_intervals(&self) -> Vec<(f64, f64)> {
        let mut cuts: Vec<(f64, f64)> = self.pieces.iter().map(|g| (clamp_z(g.z_lo), clamp_z(g.z_hi))).collect();
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Vec::new();
        let mut start = -Z_MAX;
        for (lo, hi) in cuts {
            if lo > start {
                out.push((start, lo));
            }
            start = start.max(hi);
        }
        if start < Z_MAX {
            out.push((start, Z_MAX));
        }
        out
    }

    fn envelope(&mut self) -> Result<()> {
        let (x, y) = (&self.grid, &self.phi);
        let n = x.len();
        let hull = upper_hull(x, y);
        let mut pieces = Vec::new();
        for e in hull.windows(2) {
            let (i, j) = (e[0], e[1]);
            if j - i < 2 {
                continue;
            }
            let s = (y[j] - y[i]) / (x[j] - x[i]);
            let dev = (i + 1..j).map(|k| y[i] + s * (x[k] - x[i]) - y[k]).fold(0.0, f64::max);
            if dev > GAP_TOL {
                pieces.push(self.refine_gap(i, j)?);
            }
        }
        // stretches where φ itself is affine: runs of constant analytic slope
        let d: Vec<f64> = x.iter().map(|&p| self.phi_prime(p)).collect();
        let in_gap = |p: f64| pieces.iter().any(|g: &LinearPiece| p > g.p1 && p < g.p2);
        let mut affine = Vec::new();
        let mut k = 0;
        while k < n {
            let start = k;
            while k + 1 < n
                && d[start] > 0.0
                && d[start].is_finite()
                && abs(d[k + 1] / d[start] - 1.0) < 1e-9
                && !in_gap(x[k + 1])
            {
                k += 1;
            }
            if k - start >= 3 {
                affine.push(LinearPiece {
                    p1: x[start],
                    p2: x[k],
                    phi1: y[start],
                    phi2: y[k],
                    slope: (y[k] - y[start]) / (x[k] - x[start]),
                    z_hi: self.z_of_p(x[start]),
                    z_lo: self.z_of_p(x[k]),
                    strict: false,
                });
            }
            k += 1;
        }
        pieces.extend(affine);
        pieces.sort_by(|a, b| a.p1.total_cmp(&b.p1));
        let mut hat = y.clone();
        for g in &pieces {
            for k in 0..n {
                if x[k] > g.p1 && x[k] < g.p2 {
                    hat[k] = g.phi1 + g.slope * (x[k] - g.p1);
                }
            }
        }
        let mut slope: Vec<f64> = (0..n - 1).map(|k| (hat[k + 1] - hat[k]) / (x[k + 1] - x[k])).collect();
        slope.push(slope[n - 2]);
        let strict: Vec<&LinearPiece> = pieces.iter().filter(|g| g.strict).collect();
        self.shape = match strict.len() {
            0 => PhiShape::Concave,
            1 if strict[0].p1 == 0.0 => PhiShape::SShaped,
            _ => PhiShape::General,
        };
        self.phi_hat = hat;
        self.phi_hat_prime = slope;
        self.pieces = pieces;
        Ok(())
    }

    /// Moves the hull vertices `i < j` of a gap to the exact tangency points
    /// by alternating one-sided tangency solves; endpoints 0 and 1 stay put.
    fn refine_gap(&self, i: usize, j: usize) -> Result<LinearPiece> {
        let x = &self.grid;
        let n = x.len();
        let (mut p1, mut p2) = (x[i], x[j]);
        let (mut f1, mut f2) = (self.phi[i], self.phi[j]);
        // tangency residual at p for a chord anchored at (q, φ(q))
        let tangency = |p: f64, q: f64, fq: f64| -> f64 {
            match self.phi_at(p) {
                Ok(fp) => self.phi_prime(p) * (p - q) - (fp - fq),
                Err(_) => f64::NAN,
            }
        };
        let solve = |k: usize, q: f64, fq: f64| -> Option<f64> {
            for w in 1..=8usize {
                let lo = x[k.saturating_sub(w).max(1)];
                let hi = x[(k + w).min(n - 2)];
                let (a, b) = (tangency(lo, q, fq), tangency(hi, q, fq));
                if a.is_finite() && b.is_finite() && (a > 0.0) != (b > 0.0) {
                    return bisect(|p| tangency(p, q, fq), lo, hi, 1e-15, 200, "gap tangency").ok();
                }
            }
            None
        };
        for _ in 0..20 {
            let (old1, old2) = (p1, p2);
            if j < n - 1 {
                if let Some(p) = solve(j, p1, f1) {
                    p2 = p;
                    f2 = self.phi_at(p2)?;
                }
            }
            if i > 0 {
                if let Some(p) = solve(i, p2, f2) {
                    p1 = p;
                    f1 = self.phi_at(p1)?;
                }
            }
            if abs(p1 - old1) < 1e-15 && abs(p2 - old2) < 1e-15 {
                break;
            }
        }
        Ok(LinearPiece {
            p1,
            p2,
            phi1: f1,
            phi2: f2,
            slope: (f2 - f1) / (p2 - p1),
            z_hi: self.z_of_p(p1),
            z_lo: self.z_of_p(p2),
            strict: true,
        })
    }
}

/// `∫_0^{x} Q_η(u) du` in closed form for a lognormal law; used as an oracle.
pub fn lognormal_partial_mean(mu: f64, sigma: f64, x: f64) -> f64 {
    exp(mu + 0.5 * sigma * sigma) * norm_cdf(norm_ppf(x) - sigma)
}
