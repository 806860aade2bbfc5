//! Brute-force validators. Everything here takes a slow road on purpose:
//! plain bisection instead of Newton, enumeration instead of duality.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::market::{Benchmark, MarketParams};
use crate::math::roots::bisect;
use crate::math::{abs, exp, ln, powf};
use crate::preferences::{EnvelopeData, GlobalEnvelope, UtilityParams};
use crate::quantile::PhiCurve;
use crate::solver::{self, Problem, Regime};
use crate::weighting::{JinZhou, Weighting};

pub const MAX_BINS: usize = 6;
pub const MAX_LEVELS: usize = 25;
pub const DEFAULT_SLACK: f64 = 0.02;

/// A cell-wise discretization of the quantile problem: maximize
/// `Σ v(G_i) / n` over nondecreasing `G_i >= ĉ` with `Σ G_i s_i / n = 1`,
/// where `s_i` is the average of `φ̂'` over cell `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    pub env: EnvelopeData,
    pub weights: Vec<f64>,
    pub value_grid: Vec<f64>,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub objective: f64,
    /// `Σ v̂(G_i) / n`; equals `objective` unless a cell sits in the gap.
    pub envelope_objective: f64,
    pub budget: f64,
    /// The cell placed inside the gap when the cell budget jumps over 1.
    pub jump_cell: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub values: Vec<f64>,
    pub objective: f64,
    /// `objective + λ (1 - budget)`.
    pub adjusted: f64,
    pub budget: f64,
    pub visited: usize,
    pub admissible: usize,
}

impl DiscreteProblem {
    pub fn new(env: EnvelopeData, weights: Vec<f64>, value_grid: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || n > MAX_BINS {
            return Err(Error::InvalidParameter { name: "number of cells", value: n as f64 });
        }
        if value_grid.is_empty() || value_grid.len() > MAX_LEVELS {
            return Err(Error::InvalidParameter { name: "number of levels", value: value_grid.len() as f64 });
        }
        if weights.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter { name: "cell weight", value: f64::NAN });
        }
        for w in value_grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter { name: "value grid order", value: w[1] });
            }
        }
        if value_grid[0] < env.c_hat * (1.0 - 1e-15) {
            return Err(Error::InvalidParameter { name: "value grid floor", value: value_grid[0] });
        }
        Ok(Self { env, weights, value_grid, slack: DEFAULT_SLACK })
    }

    /// `n_bins` equal cells on `[0, 1]`. The levels are `ĉ` plus points
    /// `I(y)` on a geometric ladder of slopes, from `v̂'(ĉ)` down to the slope
    /// at the largest level the budget allows in the top cell; this keeps
    /// them dense where `v` bends hardest. With `gap_levels > 0` that many
    /// levels are placed evenly inside the range gap of `I`.
    pub fn from_phi(
        env: EnvelopeData,
        phi: &PhiCurve,
        n_bins: usize,
        n_levels: usize,
        gap_levels: usize,
    ) -> Result<Self> {
        if n_bins == 0 || n_levels < gap_levels + 3 {
            return Err(Error::InvalidParameter { name: "discretization size", value: n_levels as f64 });
        }
        let n = n_bins as f64;
        let mut weights = Vec::with_capacity(n_bins);
        let mut left = phi.phi_hat_at(0.0)?;
        for i in 1..=n_bins {
            let right = if i == n_bins { 0.0 } else { phi.phi_hat_at(i as f64 / n)? };
            weights.push((right - left) * n);
            left = right;
        }
        let last = weights[n_bins - 1];
        let rest: f64 = weights[..n_bins - 1].iter().sum::<f64>() / n;
        let top = (1.0 - env.c_hat * rest) * n / last;
        let (lo, hi) = (ln(env.params.v_prime(top)?), ln(env.floor_slope()));
        let k = n_levels - 1 - gap_levels;
        let mut grid = vec![env.c_hat];
        for i in 0..k {
            // open at the floor slope, where I returns ĉ
            let y = hi + (lo - hi) * (i + 1) as f64 / k as f64;
            grid.push(env.inverse_marginal(exp(y))?);
        }
        let (g0, g1) = env.gap();
        for i in 0..gap_levels {
            grid.push(g0 + (g1 - g0) * (i + 1) as f64 / (gap_levels + 1) as f64);
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Self::new(env, weights, grid)
    }

    pub fn n_bins(&self) -> usize {
        self.weights.len()
    }

    pub fn budget(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.weights).map(|(g, s)| g * s).sum::<f64>() / self.n_bins() as f64
    }

    pub fn objective(&self, g: &[f64]) -> f64 {
        let p = &self.env.params;
        g.iter().map(|&x| p.v(x).unwrap_or(f64::NEG_INFINITY)).sum::<f64>() / self.n_bins() as f64
    }

    /// `G_i = I(λ s_i)` with `λ` from a bisection on the cell budget. When
    /// the budget jumps over 1 at `λ`, the cell that jumps is set inside the
    /// gap to close the budget, where `v̂` is linear; the envelope objective is
    /// then an upper bound for every admissible assignment but the plain
    /// objective is not attained by any `I`-composition.
    pub fn closed_form(&self) -> Result<DiscreteSolution> {
        let eval = |x: f64| -> Result<Vec<f64>> {
            self.weights.iter().map(|&s| self.env.inverse_marginal(exp(x) * s)).collect()
        };
        let (mut lo, mut hi) = (ln(solver::LAMBDA_MIN), ln(solver::LAMBDA_MAX));
        if !(self.budget(&eval(lo)?) > 1.0) || !(self.budget(&eval(hi)?) <= 1.0) {
            return Err(Error::NotBracketed { what: "cell multiplier", lo: solver::LAMBDA_MIN, hi: solver::LAMBDA_MAX });
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.budget(&eval(mid)?) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut values = eval(hi)?;
        let mut budget = self.budget(&values);
        let mut jump_cell = None;
        if abs(budget - 1.0) > 1e-10 {
            let left = eval(lo)?;
            let j = (0..values.len())
                .max_by(|&i, &k| (left[i] - values[i]).total_cmp(&(left[k] - values[k])))
                .unwrap_or(0);
            values[j] += (1.0 - budget) * self.n_bins() as f64 / self.weights[j];
            budget = self.budget(&values);
            jump_cell = Some(j);
        }
        let env_obj = values.iter().map(|&x| self.env.value(x)).sum::<Result<f64>>()? / self.n_bins() as f64;
        Ok(DiscreteSolution {
            lambda: exp(hi),
            objective: self.objective(&values),
            envelope_objective: env_obj,
            budget,
            jump_cell,
            values,
        })
    }

    /// Best adjusted objective over nondecreasing assignments whose first
    /// level index is `first`, among those within the budget slack.
    pub fn brute_force_from(&self, lambda: f64, first: usize) -> Option<BruteForce> {
        let n = self.n_bins();
        let mut idx = vec![first; n];
        let mut best: Option<BruteForce> = None;
        let mut visited = 0usize;
        let mut admissible = 0usize;
        let m = self.value_grid.len();
        if first >= m {
            return None;
        }
        loop {
            visited += 1;
            let g: Vec<f64> = idx.iter().map(|&k| self.value_grid[k]).collect();
            let budget = self.budget(&g);
            if abs(budget - 1.0) <= self.slack {
                admissible += 1;
                let objective = self.objective(&g);
                let adjusted = objective + lambda * (1.0 - budget);
                if best.as_ref().map_or(true, |b| adjusted > b.adjusted) {
                    best = Some(BruteForce { values: g, objective, adjusted, budget, visited: 0, admissible: 0 });
                }
            }
            // next nondecreasing index vector with idx[0] fixed
            match (1..n).rev().find(|&j| idx[j] + 1 < m) {
                Some(j) => {
                    let v = idx[j] + 1;
                    for k in idx.iter_mut().skip(j) {
                        *k = v;
                    }
                }
                None => break,
            }
        }
        best.map(|mut b| {
            b.visited = visited;
            b.admissible = admissible;
            b
        })
    }

    /// Exhaustive search with the first-order correction `λ (1 - budget)`.
    pub fn brute_force(&self, lambda: f64) -> Result<BruteForce> {
        let parts: Vec<Option<BruteForce>> =
            (0..self.value_grid.len()).map(|f| self.brute_force_from(lambda, f)).collect();
        merge(parts).ok_or(Error::NoAdmissible { slack: self.slack })
    }
}

/// Max-reduce of partial searches; counters are summed.
pub fn merge<I: IntoIterator<Item = Option<BruteForce>>>(parts: I) -> Option<BruteForce> {
    let mut out: Option<BruteForce> = None;
    let (mut visited, mut admissible) = (0, 0);
    for b in parts.into_iter().flatten() {
        visited += b.visited;
        admissible += b.admissible;
        if out.as_ref().map_or(true, |o| b.adjusted > o.adjusted) {
            out = Some(b);
        }
    }
    out.map(|mut b| {
        b.visited = visited;
        b.admissible = admissible;
        b
    })
}

// ---------------------------------------------------------------------------
// couplings

/// Smallest `Σ x_i y_{π(i)}` over all permutations `π`, by enumeration
/// (Heap's algorithm), together with the anti-comonotone pairing.
pub fn min_coupling_exact(x: &[i64], y: &[i64]) -> (i128, i128) {
    assert_eq!(x.len(), y.len());
    let n = y.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let dot = |p: &[usize]| x.iter().zip(p).map(|(&a, &i)| a as i128 * y[i] as i128).sum::<i128>();
    let mut best = dot(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(dot(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable();
    ys.sort_unstable_by(|a, b| b.cmp(a));
    let anti = xs.iter().zip(&ys).map(|(&a, &b)| a as i128 * b as i128).sum();
    (best, anti)
}

/// Floating-point version of [`min_coupling_exact`]; both sums are divided
/// by `n` (equally likely atoms).
pub fn min_coupling(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = y.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let dot = |p: &[usize]| x.iter().zip(p).map(|(a, &i)| a * y[i]).sum::<f64>() / n as f64;
    let mut best = dot(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(dot(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(|a, b| b.total_cmp(a));
    (best, xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / n as f64)
}

// ---------------------------------------------------------------------------
// envelope points by plain bisection

/// `(a, b, slope)` of the global envelope, by nested bisections in `x`.
pub fn envelope_points_bisection(p: &UtilityParams) -> Result<(f64, f64, f64)> {
    // lower concave branch in s = -log x > 1 - β, upper branch in t = log x > 0
    let lower = |y: f64| -> Result<f64> {
        let g = |s: f64| p.kappa * p.beta * powf(s, p.beta - 1.0) * exp(s) - y;
        bisect(g, 1.0 - p.beta, 700.0, 1e-15, 400, "lower tangent")
    };
    let upper = |y: f64| -> Result<f64> {
        let g = |x: f64| y - p.alpha * powf(ln(x), p.alpha - 1.0) / x;
        bisect(g, 1.0 + 1e-15, 1e6, 1e-15, 400, "upper tangent")
    };
    let gap = |y: f64| -> f64 {
        match (lower(y), upper(y)) {
            (Ok(s), Ok(b)) => p.u(ln(b)) - p.u(-s) - y * (b - exp(-s)),
            _ => f64::NAN,
        }
    };
    let y_min = p.kappa * p.beta * powf(1.0 - p.beta, p.beta - 1.0) * exp(1.0 - p.beta);
    let (mut lo, mut hi) = (y_min * (1.0 + 1e-12), y_min * 2.0);
    while !(gap(hi) < 0.0) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NotBracketed { what: "envelope slope", lo, hi });
        }
    }
    if !(gap(lo) > 0.0) {
        return Err(Error::NotBracketed { what: "envelope slope", lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    Ok((exp(-lower(y)?), upper(y)?, y))
}

/// Tangency point `d` of the chord from `(ĉ, v(ĉ))`, by bisection in `x`.
pub fn local_point_bisection(p: &UtilityParams, c_hat: f64, b: f64) -> Result<f64> {
    let v_c = p.u(ln(c_hat));
    let g = |x: f64| {
        let t = ln(x);
        p.u(t) - v_c - p.alpha * powf(t, p.alpha - 1.0) / x * (x - c_hat)
    };
    bisect(g, 1.0 + 1e-15, b, 1e-16, 400, "local tangency")
}

// ---------------------------------------------------------------------------
// golden values

pub const GOLDEN_C: [f64; 3] = [0.1, 0.2, 0.3];
pub const GOLDEN_G: [f64; 3] = [0.0, 0.05, -0.05];

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenRow {
    pub weighting: &'static str,
    pub c: f64,
    pub g: f64,
    pub a: f64,
    pub b: f64,
    /// `NaN` in the global regime.
    pub d: f64,
    pub lambda_star: f64,
    pub l: f64,
    /// `|a - a'| + |b - b'|` against the bisection path.
    pub ab_residual: f64,
    pub d_residual: f64,
    /// `|E[ρ X*] - x0|`.
    pub budget_residual: f64,
    pub l_residual: f64,
    pub regime: &'static str,
}

impl GoldenRow {
    pub fn max_residual(&self) -> f64 {
        self.ab_residual.max(self.d_residual).max(self.budget_residual).max(self.l_residual)
    }
}

/// The three weightings of the study matrix, in output order.
pub fn study_weightings(m: &MarketParams) -> Result<[Weighting; 3]> {
    Ok([Weighting::Identity, Weighting::sqrt(), Weighting::JinZhou(JinZhou::for_kernel_sigma(m.kernel().sigma)?)])
}

pub fn golden_row(problem: &Problem, reference: (f64, f64)) -> Result<GoldenRow> {
    let u = problem.utility;
    let c = problem.benchmark.c;
    let g_excess = match problem.benchmark.kind {
        crate::market::BenchmarkKind::ConstantExcess { g } => g,
        crate::market::BenchmarkKind::KernelPower { .. } => f64::NAN,
    };
    let sol = solver::solve(problem)?;
    let env = sol.envelope;
    let ab_residual = abs(env.a - reference.0) + abs(env.b - reference.1);
    let d = match env.d {
        Some(d) => d,
        None => f64::NAN,
    };
    let d_residual = match env.d {
        Some(d) => abs(d - local_point_bisection(&u, env.c_hat, env.b)?),
        None => 0.0,
    };
    let pw = problem.benchmark.log_growth(&problem.market, 1.0);
    let big_l = problem.market.x0 * exp(pw) * (1.0 - problem.benchmark.c_hat());
    let l = solver::solve_l(&u, big_l)?;
    Ok(GoldenRow {
        weighting: problem.weighting.name(),
        c,
        g: g_excess,
        a: env.a,
        b: env.b,
        d,
        lambda_star: sol.lambda_star,
        l,
        ab_residual,
        d_residual,
        budget_residual: abs(sol.diagnostics.budget_residual),
        l_residual: solver::l_residual(&u, big_l, l),
        regime: match sol.regime {
            Regime::TwoRegion => "TwoRegion",
            Regime::ThreeRegion => "ThreeRegion",
        },
    })
}

/// One row per cell of the study matrix (weighting, then `c`, then `g`).
pub fn golden_value_report() -> Result<Vec<GoldenRow>> {
    let m = MarketParams::default();
    let u = UtilityParams::TVERSKY_KAHNEMAN;
    let (a, b, _) = envelope_points_bisection(&u)?;
    let mut rows = Vec::with_capacity(27);
    for w in study_weightings(&m)? {
        for c in GOLDEN_C {
            for g in GOLDEN_G {
                let p = Problem::new(m, Benchmark::constant_excess(g, c)?, u, w);
                rows.push(golden_row(&p, (a, b))?);
            }
        }
    }
    Ok(rows)
}

/// `(a, b)` from the production solver and from the bisection path.
pub fn envelope_agreement(p: &UtilityParams) -> Result<f64> {
    let g = GlobalEnvelope::solve(p)?;
    let (a, b, _) = envelope_points_bisection(p)?;
    Ok(abs(g.a - a).max(abs(g.b - b)))
}
