//! Quadrature: globally adaptive Gauss–Kronrod (7/15 points) and a fixed
//! Gauss–Hermite rule for smooth expectations under a standard normal.

use alloc::vec::Vec;

use super::{abs, exp, norm_pdf, sqrt};
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Truncation of the real line for integrals against the normal density;
/// φ(38) is below 1e-313.
pub const Z_MAX: f64 = 38.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, ..Self::default() }
    }
}

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, abs((kron - gauss) * h))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Globally adaptive integration of `f` over `[a, b]`: the panel with the
/// largest error estimate is split until the total error meets `tol`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance, what: &'static str) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = Vec::with_capacity(64);
    panels.push(Panel { a, b, value: v, error: e });
    let mut evals = 15;
    loop {
        let (total, err) = panels
            .iter()
            .fold((0.0, 0.0), |(s, e), p| (s + p.value, e + p.error));
        if !total.is_finite() {
            return Err(Error::Quadrature { what, error: f64::INFINITY, evals });
        }
        if err <= tol.abs.max(tol.rel * abs(total)) {
            return Ok(QuadResult { value: total, error: err, evals });
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Quadrature { what, error: err, evals });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // panel cannot be split further in floating point
            return Ok(QuadResult { value: total, error: err, evals });
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        evals += 30;
        panels.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        panels.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }
}

/// Integrates over consecutive pieces `[knots[i], knots[i+1]]`, so that no
/// panel straddles a knot. `knots` must be sorted.
pub fn integrate_pieces<F>(mut f: F, knots: &[f64], tol: Tolerance, what: &'static str) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    let pieces = knots.len().saturating_sub(1).max(1);
    let per = Tolerance {
        abs: tol.abs / pieces as f64,
        ..tol
    };
    let mut out = QuadResult { value: 0.0, error: 0.0, evals: 0 };
    for w in knots.windows(2) {
        if w[1] > w[0] {
            let r = integrate(&mut f, w[0], w[1], per, what)?;
            out.value += r.value;
            out.error += r.error;
            out.evals += r.evals;
        }
    }
    Ok(out)
}

/// E[f(Z)] for a standard normal Z, splitting the line at the given
/// z-coordinates (discontinuities of `f`).
pub fn normal_expectation<F>(mut f: F, breaks: &[f64], tol: Tolerance, what: &'static str) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    let mut knots: Vec<f64> = Vec::with_capacity(breaks.len() + 4);
    knots.push(-Z_MAX);
    knots.extend(breaks.iter().copied().filter(|z| z.abs() < Z_MAX && z.is_finite()));
    // the mass sits in the middle; extra knots keep early panels informative
    knots.extend([-8.0, 0.0, 8.0]);
    knots.push(Z_MAX);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    integrate_pieces(|z| f(z) * norm_pdf(z), &knots, tol, what)
}

/// Gauss–Hermite rule for the probabilists' weight: Σ wᵢ g(xᵢ) ≈ E[g(Z)].
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Node count used for all smooth kernel expectations.
    pub const DEFAULT_NODES: usize = 201;

    /// Nodes are the eigenvalues of the Jacobi matrix of the Hermite
    /// recurrence (zero diagonal, off-diagonal √k), isolated by Sturm-sequence
    /// bisection; weights follow from the Christoffel numbers.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter { name: "gauss-hermite nodes", value: 0.0 });
        }
        let nf = n as f64;
        let bound = 2.0 * sqrt(nf) + 1.0;
        // number of eigenvalues strictly below x
        let count_below = |x: f64| -> usize {
            let mut count = 0;
            let mut q = -x;
            if q < 0.0 {
                count += 1;
            }
            for k in 1..n {
                let qq = if q == 0.0 { f64::EPSILON } else { q };
                q = -x - (k as f64) / qq;
                if q < 0.0 {
                    count += 1;
                }
            }
            count
        };
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > i {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let (mut prev, mut cur) = (0.0, 1.0);
                let mut sum = 1.0;
                for j in 0..n - 1 {
                    let jf = j as f64;
                    let next = (x * cur - sqrt(jf) * prev) / sqrt(jf + 1.0);
                    prev = cur;
                    cur = next;
                    sum += cur * cur;
                }
                1.0 / sum
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    /// The shared `DEFAULT_NODES` rule, built once.
    pub fn standard() -> &'static Self {
        static RULE: once_cell::race::OnceBox<GaussHermite> = once_cell::race::OnceBox::new();
        RULE.get_or_init(|| {
            alloc::boxed::Box::new(Self::new(Self::DEFAULT_NODES).expect("nonzero node count"))
        })
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| if w > 0.0 { w * f(z) } else { 0.0 })
            .sum()
    }
}

/// E[exp(m + s Z)], the lognormal mean.
#[inline]
pub fn lognormal_mean(m: f64, s: f64) -> f64 {
    exp(m + 0.5 * s * s)
}
