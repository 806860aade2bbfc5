//! The Lagrange multiplier search, the optimal terminal maps, and the
//! comparison model whose reference point is the benchmark wealth itself.
//!
//! With `λ` fixed, the optimal quantile is `G*(p) = I(λ φ̂'(p))` and the
//! multiplier solves `f(λ) = ∫ I(λ φ̂'(p)) φ̂'(p) dp = 1`. All `p`-integrals are
//! taken in the normal coordinate `ζ` with `p = 1 - w(Φ(ζ))`, on which
//! `φ̂'(p) = Q_η(Φ(ζ)) / w'(Φ(ζ))` outside the affine pieces of `φ̂`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::market::{budget_value, Benchmark, BenchmarkKind, MarketParams, WealthMap};
use crate::math::quad::{integrate, integrate_pieces, Tolerance, Z_MAX};
use crate::math::roots::bisect;
use crate::math::{abs, exp, ln, norm_pdf, powf};
use crate::preferences::{EnvelopeData, UtilityParams};
use crate::quantile::{build_phi, Interpolation, PhiCurve, PhiShape, QuantileCurve, DEFAULT_GRID};
use crate::weighting::Weighting;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `a <= ĉ`: good states above a jump, then the floor.
    TwoRegion,
    /// `a > ĉ`: good states, a jump, intermediate states on the lower concave
    /// branch, then the floor.
    ThreeRegion,
}

impl Regime {
    pub fn of(env: &EnvelopeData) -> Self {
        if env.a <= env.c_hat {
            Self::TwoRegion
        } else {
            Self::ThreeRegion
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TwoRegion => "TwoRegion",
            Self::ThreeRegion => "ThreeRegion",
        }
    }
}

/// One scenario: market, benchmark, preference and distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub market: MarketParams,
    pub benchmark: Benchmark,
    pub utility: UtilityParams,
    pub weighting: Weighting,
    pub n_grid: usize,
}

impl Problem {
    pub fn new(market: MarketParams, benchmark: Benchmark, utility: UtilityParams, weighting: Weighting) -> Self {
        Self { market, benchmark, utility, weighting, n_grid: DEFAULT_GRID }
    }

    fn check(&self) -> Result<()> {
        self.market.validate()?;
        if !(self.market.theta > 0.0) {
            return Err(Error::Unsupported("a degenerate (riskless) pricing kernel"));
        }
        let f = self.benchmark.feasibility(&self.market);
        if !f.feasible {
            return Err(Error::Infeasible { expectation: f.expectation, bound: f.bound });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// well-posedness

#[derive(Debug, Clone, PartialEq)]
pub struct WellPosedness {
    /// `∫ (max(-log φ̂', 0))^α dp`, with the tails beyond `10^-16`
    /// extrapolated geometrically.
    pub value: f64,
    pub finite: bool,
    /// Contributions of `p` (and `1 - p`) in `[10^-(k+1), 10^-k]`, `k = 1, 2, ...`.
    pub decades: Vec<f64>,
}

const DECADES: i32 = 15;

/// Evaluates `∫_0^1 (max(-log φ̂'(p), 0))^α dp` decade by decade towards both
/// endpoints. `log_hat_prime(p, q)` receives `p` and `q = 1 - p` so that the
/// caller can resolve either end without cancellation. The integral is taken
/// as finite when the decade contributions shrink geometrically and the
/// extrapolated remainder is negligible.
pub fn wellposedness_integral<F>(log_hat_prime: F, alpha: f64) -> Result<WellPosedness>
where
    F: Fn(f64, f64) -> f64,
{
    let tol = Tolerance { abs: 1e-14, rel: 1e-10, max_intervals: 2000 };
    let term = |l: f64| {
        let x = -l;
        if x > 0.0 {
            powf(x, alpha)
        } else {
            0.0
        }
    };
    let mid = integrate(|p| term(log_hat_prime(p, 1.0 - p)), 0.1, 0.9, tol, "well-posedness")?.value;
    let mut decades = Vec::with_capacity(DECADES as usize);
    for k in 1..=DECADES {
        let (lo, hi) = (powf(10.0, -(k + 1) as f64), powf(10.0, -k as f64));
        let left = integrate(|p| term(log_hat_prime(p, 1.0 - p)), lo, hi, tol, "well-posedness")?.value;
        let right = integrate(|q| term(log_hat_prime(1.0 - q, q)), lo, hi, tol, "well-posedness")?.value;
        decades.push(left + right);
    }
    let n = decades.len();
    let (last, prev) = (decades[n - 1], decades[n - 2]);
    let mut value = mid + decades.iter().sum::<f64>();
    let finite = if last == 0.0 {
        value.is_finite()
    } else {
        // geometric extrapolation of the remaining decades
        let r = last / prev;
        let ok = r < 0.9 && value.is_finite();
        if ok {
            value += last * r / (1.0 - r);
        }
        ok && last * r / (1.0 - r) <= 1e-6 * (1.0 + value)
    };
    Ok(WellPosedness { value, finite, decades })
}

pub fn wellposedness(phi: &PhiCurve, alpha: f64) -> Result<WellPosedness> {
    wellposedness_integral(
        |p, q| {
            let z = if p < 0.5 { phi.z_of_p(p) } else { phi.weighting.inv_z(q) };
            ln(phi.hat_prime_at_z(z))
        },
        alpha,
    )
}

// ---------------------------------------------------------------------------
// the multiplier

const F_TOL: Tolerance = Tolerance { abs: 1e-14, rel: 1e-12, max_intervals: 4000 };

/// `f(λ)` and friends for a fixed envelope and `φ` curve.
#[derive(Debug, Clone, Copy)]
pub struct Lagrangian<'a> {
    pub env: &'a EnvelopeData,
    pub phi: &'a PhiCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub f_value: f64,
    pub iterations: usize,
    /// `(λ, f(λ))` for every evaluation, in order.
    pub history: Vec<(f64, f64)>,
    /// `f` at `λ (1 ∓ 1e-9)`.
    pub one_sided: (f64, f64),
}

pub const LAMBDA_MIN: f64 = 1e-8;
pub const LAMBDA_MAX: f64 = 1e8;

impl<'a> Lagrangian<'a> {
    pub fn new(env: &'a EnvelopeData, phi: &'a PhiCurve) -> Self {
        Self { env, phi }
    }

    /// Slopes at which `I` is not smooth: the jump, and the kink at `v'(ĉ)`
    /// when there are three regions.
    pub fn levels(&self) -> Vec<f64> {
        let mut v = vec![self.env.jump_slope()];
        if Regime::of(self.env) == Regime::ThreeRegion {
            v.push(self.env.floor_slope());
        }
        v
    }

    fn inv(&self, x: f64) -> f64 {
        self.env.inverse_marginal(x).unwrap_or(f64::NAN)
    }

    /// Smallest `ζ` in `[lo, hi]` with `λ φ̂' >= level`, when it is interior.
    pub fn crossing(&self, lambda: f64, level: f64, lo: f64, hi: f64) -> Option<f64> {
        let h = |z: f64| lambda * self.phi.hat_prime_at_z(z) - level;
        if h(lo) >= 0.0 || h(hi) < 0.0 {
            return None;
        }
        bisect(h, lo, hi, 1e-14, 300, "I threshold crossing").ok()
    }

    fn knots(&self, lambda: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut k = vec![lo, hi];
        for level in self.levels() {
            if let Some(z) = self.crossing(lambda, level, lo, hi) {
                k.push(z);
            }
        }
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// `∫_0^1 h(G*(p), φ̂'(p)) dp` with `G* = I(λ φ̂')`.
    pub fn integrate_p<H>(&self, lambda: f64, h: H, what: &'static str) -> Result<f64>
    where
        H: Fn(f64, f64) -> f64,
    {
        let mut total = 0.0;
        for g in &self.phi.pieces {
            total += h(self.inv(lambda * g.slope), g.slope) * (g.p2 - g.p1);
        }
        let w = &self.phi.weighting;
        let eta = &self.phi.eta;
        for (lo, hi) in self.phi.free_z_intervals() {
            let knots = self.knots(lambda, lo, hi);
            let r = integrate_pieces(
                |z| {
                    let wp = w.w_prime_at_z(z);
                    let dens = wp * norm_pdf(z);
                    let d = eta.at_z(z) / wp;
                    if dens == 0.0 || !(d > 0.0) {
                        0.0
                    } else {
                        h(self.inv(lambda * d), d) * dens
                    }
                },
                &knots,
                F_TOL,
                what,
            )?;
            total += r.value;
        }
        Ok(total)
    }

    /// `f(λ) = ∫ I(λ φ̂') φ̂' dp`; decreasing and right-continuous.
    pub fn f(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain { what: "lambda", value: lambda });
        }
        self.integrate_p(lambda, |g, d| g * d, "f(lambda)")
    }

    /// `Λ = {ṽ / s}` over the affine pieces of `φ̂`: the only multipliers at
    /// which `f` can jump.
    pub fn lambda_set(&self) -> Vec<f64> {
        self.phi.pieces.iter().map(|g| self.env.jump_slope() / g.slope).collect()
    }

    /// Bisection on `log λ` over `[1e-8, 1e8]` for `f(λ) = 1`. When `f` jumps
    /// over 1 the result is `Error::NoMultiplier` with both one-sided values.
    pub fn solve_lambda(&self) -> Result<LambdaSolution> {
        let mut history = Vec::new();
        let eval = |l: f64, history: &mut Vec<(f64, f64)>| -> Result<f64> {
            let v = self.f(l)?;
            history.push((l, v));
            Ok(v)
        };
        // geometric bracketing outwards from 1
        let (mut lo, mut hi);
        let mut step = 0.0f64;
        loop {
            let a = eval(exp(-step).max(LAMBDA_MIN), &mut history)?;
            let b = eval(exp(step).min(LAMBDA_MAX), &mut history)?;
            if a > 1.0 && b <= 1.0 {
                lo = ln(exp(-step).max(LAMBDA_MIN));
                hi = ln(exp(step).min(LAMBDA_MAX));
                break;
            }
            if exp(step) >= LAMBDA_MAX {
                return Err(Error::NotBracketed { what: "lagrange multiplier", lo: LAMBDA_MIN, hi: LAMBDA_MAX });
            }
            step = if step == 0.0 { 1.0 } else { step * 2.0 };
            step = step.min(ln(LAMBDA_MAX));
        }
        // tighten to the innermost evaluated bracket
        for &(l, v) in &history {
            let x = ln(l);
            if v > 1.0 && x > lo && x < hi {
                lo = x;
            }
            if v <= 1.0 && x < hi && x > lo {
                hi = x;
            }
        }
        let mut iterations = 0;
        while hi - lo > 1e-13 * (1.0 + abs(hi)) && iterations < 200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = eval(exp(mid), &mut history)?;
            iterations += 1;
            if v > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = exp(hi);
        let f_value = eval(lambda, &mut history)?;
        let f_lo = eval(exp(lo), &mut history)?;
        let one_sided = (eval(lambda * (1.0 - 1e-9), &mut history)?, eval(lambda * (1.0 + 1e-9), &mut history)?);
        let (lambda, f_value) = if abs(f_lo - 1.0) < abs(f_value - 1.0) { (exp(lo), f_lo) } else { (lambda, f_value) };
        if abs(f_value - 1.0) < 1e-8 {
            return Ok(LambdaSolution { lambda, f_value, iterations, history, one_sided });
        }
        Err(Error::NoMultiplier { lambda0: lambda, f_left: one_sided.0, f_right: one_sided.1 })
    }
}

// ---------------------------------------------------------------------------
// the optimal solution

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateClass {
    Good,
    Intermediate,
    Bad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `∫ G* φ̂' dp`.
    pub quantile_budget: f64,
    /// `E[ρ X*(T)]` by kernel quadrature.
    pub budget: f64,
    pub budget_residual: f64,
    pub iterations: usize,
    pub history: Vec<(f64, f64)>,
    pub one_sided: (f64, f64),
    pub lambda_set: Vec<f64>,
    pub shape: PhiShape,
    pub wellposedness: WellPosedness,
}

#[derive(Debug, Clone)]
pub struct SolverSolution {
    pub problem: Problem,
    pub envelope: EnvelopeData,
    pub phi: PhiCurve,
    pub lambda_star: f64,
    pub regime: Regime,
    /// `G*` on the interior of the `φ` grid.
    pub g_star: QuantileCurve,
    /// States where the terminal map jumps.
    pub jump_rho: Vec<f64>,
    /// States where it is continuous but not smooth.
    pub kink_rho: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Envelope, `φ` curve and well-posedness for a problem, before the
/// multiplier search.
pub fn prepare(problem: &Problem) -> Result<(EnvelopeData, PhiCurve, WellPosedness)> {
    problem.check()?;
    let env = EnvelopeData::local(&problem.utility, problem.benchmark.c_hat())?;
    let phi = build_phi(problem.benchmark.eta_law(&problem.market), problem.weighting, problem.n_grid)?;
    let wp = wellposedness(&phi, problem.utility.alpha)?;
    if !wp.finite {
        return Err(Error::IllPosed("the well-posedness integral diverges"));
    }
    Ok((env, phi, wp))
}

pub fn solve(problem: &Problem) -> Result<SolverSolution> {
    let (env, phi, wp) = prepare(problem)?;
    let lag = Lagrangian::new(&env, &phi);
    let sol = lag.solve_lambda()?;
    let lambda_set = lag.lambda_set();
    assemble_solution(problem, env, phi, sol, lambda_set, wp)
}

pub fn assemble_solution(
    problem: &Problem,
    env: EnvelopeData,
    phi: PhiCurve,
    sol: LambdaSolution,
    lambda_set: Vec<f64>,
    wellposedness: WellPosedness,
) -> Result<SolverSolution> {
    let lambda = sol.lambda;
    let regime = Regime::of(&env);
    let (jump_z, kink_z) = {
        let lag = Lagrangian::new(&env, &phi);
        let jump = lag.crossing(lambda, env.jump_slope(), -Z_MAX, Z_MAX);
        let kink = match regime {
            Regime::ThreeRegion => lag.crossing(lambda, env.floor_slope(), -Z_MAX, Z_MAX),
            Regime::TwoRegion => None,
        };
        (jump, kink)
    };
    let to_rho = |z: Option<f64>| -> Vec<f64> {
        z.map(|z| problem.benchmark.rho_of_zeta(&problem.market, z)).into_iter().collect()
    };
    let n = phi.grid.len();
    let grid: Vec<f64> = phi.grid[1..n - 1].to_vec();
    let mut values: Vec<f64> = Vec::with_capacity(grid.len());
    for &p in &grid {
        let g = env.inverse_marginal(lambda * phi.phi_hat_prime_at(p))?;
        // rounding in φ̂' near p = 1 can break monotonicity by an ulp
        values.push(match values.last() {
            Some(&last) if g < last => last,
            _ => g,
        });
    }
    let g_star = QuantileCurve::new(grid, values, Interpolation::PiecewiseConstantRightContinuous)?;
    let shape = phi.shape;
    let mut out = SolverSolution {
        problem: *problem,
        envelope: env,
        phi,
        lambda_star: lambda,
        regime,
        g_star,
        jump_rho: to_rho(jump_z),
        kink_rho: to_rho(kink_z),
        diagnostics: Diagnostics {
            quantile_budget: sol.f_value,
            budget: f64::NAN,
            budget_residual: f64::NAN,
            iterations: sol.iterations,
            history: sol.history,
            one_sided: sol.one_sided,
            lambda_set,
            shape,
            wellposedness,
        },
    };
    let budget = budget_value(&problem.market, &out)?;
    out.diagnostics.budget = budget;
    out.diagnostics.budget_residual = budget - problem.market.x0;
    Ok(out)
}

impl SolverSolution {
    fn lagrangian(&self) -> Lagrangian<'_> {
        Lagrangian::new(&self.envelope, &self.phi)
    }

    /// `G*(p) = I(λ φ̂'(p))`.
    pub fn g_star_at(&self, p: f64) -> Result<f64> {
        self.envelope.inverse_marginal(self.lambda_star * self.phi.phi_hat_prime_at(p))
    }

    pub fn relative_at_zeta(&self, z: f64) -> f64 {
        self.envelope
            .inverse_marginal(self.lambda_star * self.phi.hat_prime_at_z(z))
            .unwrap_or(f64::NAN)
    }

    /// `X*(T) / (x0 e^℘)` in the state `ρ`.
    pub fn relative_wealth(&self, rho: f64) -> f64 {
        let p = &self.problem;
        self.relative_at_zeta(p.benchmark.zeta_of_rho(&p.market, rho))
    }

    /// Terminal log growth rate `℘ + log G*`.
    pub fn growth_rate(&self, rho: f64) -> f64 {
        let p = &self.problem;
        p.benchmark.log_growth(&p.market, rho) + ln(self.relative_wealth(rho))
    }

    pub fn floor(&self, rho: f64) -> f64 {
        let p = &self.problem;
        p.market.x0 * exp(p.benchmark.log_growth(&p.market, rho) - p.benchmark.c)
    }

    pub fn state_class(&self, rho: f64) -> StateClass {
        let p = &self.problem;
        let x = self.lambda_star * self.phi.hat_prime_at_z(p.benchmark.zeta_of_rho(&p.market, rho));
        if x < self.envelope.jump_slope() {
            StateClass::Good
        } else if self.regime == Regime::ThreeRegion && x < self.envelope.floor_slope() {
            StateClass::Intermediate
        } else {
            StateClass::Bad
        }
    }

    /// The explicit case formulas in `ρ`, with `y = λ e^℘ ρ / w'(F_ρ(ρ))`;
    /// they agree with the general map whenever `φ̂ = φ`. Only for a constant
    /// excess benchmark.
    pub fn direct_wealth(&self, rho: f64) -> Result<f64> {
        let p = &self.problem;
        if !matches!(p.benchmark.kind, BenchmarkKind::ConstantExcess { .. }) {
            return Err(Error::Unsupported("explicit formulas need a constant benchmark"));
        }
        let pw = p.benchmark.log_growth(&p.market, rho);
        let f_rho = p.market.kernel().cdf(rho);
        let y = self.lambda_star * exp(pw) * rho / p.weighting.w_prime(f_rho)?;
        let env = &self.envelope;
        let u = &p.utility;
        let rel = match self.regime {
            Regime::TwoRegion => {
                if y <= env.slope {
                    u.v_prime_inverse_upper(y)?
                } else {
                    env.c_hat
                }
            }
            Regime::ThreeRegion => {
                if y <= env.slope {
                    u.v_prime_inverse_upper(y)?
                } else if y <= env.floor_slope() {
                    u.v_prime_inverse_lower(y)?
                } else {
                    env.c_hat
                }
            }
        };
        Ok(p.market.x0 * exp(pw) * rel)
    }

    /// `∫ v(G*(p)) dp`.
    pub fn objective(&self) -> Result<f64> {
        let u = self.problem.utility;
        self.lagrangian()
            .integrate_p(self.lambda_star, |g, _| u.v(g).unwrap_or(f64::NAN), "objective")
    }

    /// `∫ v̂_ĉ(G*(p)) dp`.
    pub fn envelope_objective(&self) -> Result<f64> {
        let env = self.envelope;
        self.lagrangian()
            .integrate_p(self.lambda_star, |g, _| env.value(g).unwrap_or(f64::NAN), "envelope objective")
    }
}

impl WealthMap for SolverSolution {
    fn wealth(&self, rho: f64) -> f64 {
        let p = &self.problem;
        p.market.x0 * exp(p.benchmark.log_growth(&p.market, rho)) * self.relative_wealth(rho)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.jump_rho.clone();
        b.extend_from_slice(&self.kink_rho);
        b
    }
}

// ---------------------------------------------------------------------------
// comparison model: prospect utility of X(T) - x0 e^℘ with maximal loss L

#[derive(Debug, Clone)]
pub struct ZhangSolution {
    pub problem: Problem,
    /// Gain at the edge of the good states.
    pub l: f64,
    pub lambda1: f64,
    /// Maximal loss `x0 e^℘ (1 - e^{-c})`.
    pub big_l: f64,
    /// `α l^{α-1}`.
    pub threshold: f64,
    /// State of the jump down to the maximal loss; may be infinite.
    pub jump_rho: f64,
    pub budget: f64,
    pub budget_residual: f64,
    pub l_residual: f64,
}

/// Solves `α l^{α-1} = (l^α + κ L^β) / (l + L)` for `l > 0`.
pub fn solve_l(u: &UtilityParams, big_l: f64) -> Result<f64> {
    if !(big_l > 0.0) {
        return Err(Error::Domain { what: "maximal loss", value: big_l });
    }
    let (a, b, k) = (u.alpha, u.beta, u.kappa);
    let target = k * powf(big_l, b);
    // α L l^{α-1} - (1-α) l^α - κ L^β, decreasing in l; in x = log l
    let h = |x: f64| a * big_l * exp((a - 1.0) * x) - (1.0 - a) * exp(a * x) - target;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while h(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return Err(Error::NotBracketed { what: "l equation", lo, hi });
        }
    }
    while h(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NotBracketed { what: "l equation", lo, hi });
        }
    }
    Ok(exp(bisect(h, lo, hi, 1e-15, 400, "l equation")?))
}

/// Relative residual of the `l` equation.
pub fn l_residual(u: &UtilityParams, big_l: f64, l: f64) -> f64 {
    let lhs = u.alpha * powf(l, u.alpha - 1.0);
    let rhs = (powf(l, u.alpha) + u.kappa * powf(big_l, u.beta)) / (l + big_l);
    abs(lhs - rhs) / lhs
}

/// `log(ρ / w'(F_ρ(ρ)))` at `ρ = e^{μ + σ z}`.
fn zhang_log_ratio(p: &Problem, z: f64) -> f64 {
    let k = p.market.kernel();
    k.mu + k.sigma * z - ln(p.weighting.w_prime_at_z(z))
}

struct ZhangMap<'a> {
    p: &'a Problem,
    lambda1: f64,
    threshold: f64,
    big_l: f64,
    jump_rho: f64,
}

impl ZhangMap<'_> {
    fn new<'a>(p: &'a Problem, lambda1: f64, threshold: f64, big_l: f64) -> ZhangMap<'a> {
        let k = p.market.kernel();
        let target = ln(threshold) - ln(lambda1);
        let h = |z: f64| zhang_log_ratio(p, z) - target;
        let jump_rho = if h(-Z_MAX) >= 0.0 {
            0.0
        } else if h(Z_MAX) <= 0.0 {
            f64::INFINITY
        } else {
            k.rho_of_z(bisect(h, -Z_MAX, Z_MAX, 1e-14, 300, "comparison jump").unwrap_or(Z_MAX))
        };
        ZhangMap { p, lambda1, threshold, big_l, jump_rho }
    }

    fn wealth_at(&self, rho: f64) -> f64 {
        let p = self.p;
        let base = p.market.x0 * exp(p.benchmark.log_growth(&p.market, rho));
        let z = p.market.kernel().z_of_rho(rho);
        let y = self.lambda1 * exp(zhang_log_ratio(p, z));
        if y <= self.threshold {
            base + powf(y / p.utility.alpha, 1.0 / (p.utility.alpha - 1.0))
        } else {
            base - self.big_l
        }
    }
}

impl WealthMap for ZhangMap<'_> {
    fn wealth(&self, rho: f64) -> f64 {
        self.wealth_at(rho)
    }
    fn breakpoints(&self) -> Vec<f64> {
        if self.jump_rho.is_finite() && self.jump_rho > 0.0 {
            vec![self.jump_rho]
        } else {
            Vec::new()
        }
    }
}

/// Optimal terminal wealth of the comparison model, which applies the same
/// utility and distortion to the gain `X(T) - x0 e^℘` and caps the loss at
/// `L`. Needs a constant benchmark and `ρ / w'(F_ρ(ρ))` increasing in `ρ`.
pub fn solve_zhang(problem: &Problem) -> Result<ZhangSolution> {
    problem.check()?;
    if !matches!(problem.benchmark.kind, BenchmarkKind::ConstantExcess { .. }) {
        return Err(Error::Unsupported("the comparison model needs a constant benchmark"));
    }
    let u = &problem.utility;
    // monotone state ranking
    let mut last = f64::NEG_INFINITY;
    let mut z = -Z_MAX;
    while z <= Z_MAX {
        let r = zhang_log_ratio(problem, z);
        if !(r > last) {
            return Err(Error::Unsupported("the comparison model needs rho / w'(F(rho)) increasing"));
        }
        last = r;
        z += 0.05;
    }
    // the gain payoff grows like (ρ / w')^{1/(α-1)}; its kernel expectation
    // has to decay in the good-state tail
    let log_tail = |z: f64| {
        let k = problem.market.kernel();
        k.mu + k.sigma * z + (zhang_log_ratio(problem, z) - ln(u.alpha)) / (u.alpha - 1.0) - 0.5 * z * z
    };
    if !(log_tail(-Z_MAX + 1.0) < log_tail(-30.0) - 10.0) {
        return Err(Error::IllPosed("comparison model: the gain budget diverges in the good states"));
    }
    let m = &problem.market;
    let pw = problem.benchmark.log_growth(m, 1.0);
    let big_l = m.x0 * exp(pw) * (1.0 - problem.benchmark.c_hat());
    let l = solve_l(u, big_l)?;
    let threshold = u.alpha * powf(l, u.alpha - 1.0);
    let budget_at = |x: f64| -> Result<f64> {
        let map = ZhangMap::new(problem, exp(x), threshold, big_l);
        budget_value(m, &map)
    };
    let (mut lo, mut hi) = (ln(LAMBDA_MIN), ln(LAMBDA_MAX));
    if !(budget_at(lo)? > m.x0) || !(budget_at(hi)? < m.x0) {
        return Err(Error::NotBracketed { what: "comparison multiplier", lo: LAMBDA_MIN, hi: LAMBDA_MAX });
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + abs(hi)) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if budget_at(mid)? > m.x0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda1 = exp(0.5 * (lo + hi));
    let map = ZhangMap::new(problem, lambda1, threshold, big_l);
    let budget = budget_value(m, &map)?;
    Ok(ZhangSolution {
        problem: *problem,
        l,
        lambda1,
        big_l,
        threshold,
        jump_rho: map.jump_rho,
        budget,
        budget_residual: budget - m.x0,
        l_residual: l_residual(u, big_l, l),
    })
}

impl ZhangSolution {
    fn map(&self) -> ZhangMap<'_> {
        ZhangMap {
            p: &self.problem,
            lambda1: self.lambda1,
            threshold: self.threshold,
            big_l: self.big_l,
            jump_rho: self.jump_rho,
        }
    }
}

impl WealthMap for ZhangSolution {
    fn wealth(&self, rho: f64) -> f64 {
        self.map().wealth_at(rho)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.map().breakpoints()
    }
}

// ---------------------------------------------------------------------------
// comparison

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub rho: f64,
    pub ours: f64,
    pub theirs: f64,
    pub class: StateClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// First grid state where ours exceeds theirs by more than the tolerance.
    pub lower_crossing: Option<f64>,
    /// Last grid state where ours falls short of theirs by more than the
    /// tolerance.
    pub upper_crossing: Option<f64>,
    /// Ours is below theirs in the good states and above in the bad states:
    /// every shortfall lies to the left of every excess.
    pub ordering_holds: bool,
}

pub const COMPARISON_TOL: f64 = 1e-9;
pub const RHO_GRID_POINTS: usize = 2001;

/// Log-spaced states over `μ ± 5σ`, densified around the given jumps.
pub fn rho_grid(m: &MarketParams, jumps: &[f64], n: usize) -> Vec<f64> {
    let k = m.kernel();
    let mut g = crate::math::logspace(exp(k.mu - 5.0 * k.sigma), exp(k.mu + 5.0 * k.sigma), n);
    let (lo, hi) = (g[0], g[n - 1]);
    for &j in jumps {
        if !(j > lo && j < hi) {
            continue;
        }
        for e in 2..=8 {
            let d = powf(10.0, -(e as f64));
            g.push(j * (1.0 - d));
            g.push(j * (1.0 + d));
        }
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

pub fn compare_maps(ours: &SolverSolution, theirs: &ZhangSolution, rho_grid: &[f64]) -> Comparison {
    let rows: Vec<ComparisonRow> = rho_grid
        .iter()
        .map(|&rho| ComparisonRow {
            rho,
            ours: ours.wealth(rho),
            theirs: theirs.wealth(rho),
            class: ours.state_class(rho),
        })
        .collect();
    let lower_crossing = rows.iter().find(|r| r.ours - r.theirs > COMPARISON_TOL).map(|r| r.rho);
    let upper_crossing = rows.iter().rev().find(|r| r.ours - r.theirs < -COMPARISON_TOL).map(|r| r.rho);
    let ordering_holds = match (lower_crossing, upper_crossing) {
        (Some(l), Some(u)) => u < l,
        _ => true,
    };
    Comparison { rows, lower_crossing, upper_crossing, ordering_holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::EtaLaw;

    fn problem(c: f64, g: f64, w: Weighting) -> Problem {
        Problem::new(
            MarketParams::default(),
            Benchmark::constant_excess(g, c).unwrap(),
            UtilityParams::TVERSKY_KAHNEMAN,
            w,
        )
    }

    #[test]
    fn wellposedness_of_trivial_and_divergent_curves() {
        let flat = wellposedness_integral(|_, _| 0.5, 0.88).unwrap();
        assert!(flat.finite);
        assert_eq!(flat.value, 0.0);
        // φ̂'(p) = exp(-(1-p)^{-2}): integrand (1-p)^{-2α}
        let bad = wellposedness_integral(|_, q| -1.0 / (q * q), 0.88).unwrap();
        assert!(!bad.finite);
        // (1-p)^{-1/2} is integrable: -log φ̂' = (1-p)^{-1/(2α)}
        let ok = wellposedness_integral(|_, q| -powf(q, -0.5 / 0.88), 0.88).unwrap();
        assert!(ok.finite, "{:?}", ok.decades);
        assert!((ok.value - 2.0).abs() < 1e-6, "{}", ok.value);
    }

    #[test]
    fn l_equation_residual() {
        let u = UtilityParams::TVERSKY_KAHNEMAN;
        for big_l in [1e-3, 0.0951625819640404, 0.5, 2.0] {
            let l = solve_l(&u, big_l).unwrap();
            assert!(l_residual(&u, big_l, l) < 1e-12);
        }
        assert!(solve_l(&u, 0.0).is_err());
    }

    #[test]
    fn f_limits_and_monotonicity() {
        let p = problem(0.2, 0.0, Weighting::Identity);
        let (env, phi, _) = prepare(&p).unwrap();
        let lag = Lagrangian::new(&env, &phi);
        let big = lag.f(1e8).unwrap();
        assert!((big - env.c_hat * phi.eta_mean()).abs() < 1e-9, "{big}");
        assert!(lag.f(1e-8).unwrap() > 1e6);
        let mut last = f64::INFINITY;
        for l in crate::math::logspace(1e-3, 1e3, 60) {
            let v = lag.f(l).unwrap();
            assert!(v <= last + 1e-14, "{l}: {v} > {last}");
            last = v;
        }
    }

    #[test]
    fn identity_scenario_closes_budget() {
        let p = problem(0.2, 0.0, Weighting::Identity);
        let s = solve(&p).unwrap();
        assert_eq!(s.regime, Regime::TwoRegion);
        assert!((s.diagnostics.quantile_budget - 1.0).abs() < 1e-8);
        assert!(s.diagnostics.budget_residual.abs() < 1e-6, "{}", s.diagnostics.budget_residual);
        assert_eq!(s.jump_rho.len(), 1);
        assert!(s.kink_rho.is_empty());
        // frozen from an independent scipy computation (budget by adaptive
        // quadrature, multiplier by Brent)
        assert!((s.lambda_star - 2.0894157189930893).abs() < 1e-6, "{}", s.lambda_star);
    }

    #[test]
    fn three_region_scenario() {
        let p = problem(0.3, 0.0, Weighting::Identity);
        let s = solve(&p).unwrap();
        assert_eq!(s.regime, Regime::ThreeRegion);
        assert_eq!(s.jump_rho.len(), 1);
        assert_eq!(s.kink_rho.len(), 1);
        assert!(s.jump_rho[0] < s.kink_rho[0]);
        assert!(s.diagnostics.budget_residual.abs() < 1e-6);
        assert!((s.lambda_star - 2.052458711560687).abs() < 1e-6, "{}", s.lambda_star);
        let mid = 0.5 * (s.jump_rho[0] + s.kink_rho[0]);
        assert_eq!(s.state_class(mid), StateClass::Intermediate);
        let g = s.relative_wealth(mid);
        assert!(g > s.envelope.c_hat && g < s.envelope.a);
    }

    #[test]
    fn constant_eta_has_no_multiplier() {
        let m = MarketParams::default();
        let p = Problem::new(
            m,
            Benchmark::new(BenchmarkKind::KernelPower { k: 1.0 }, 0.1).unwrap(),
            UtilityParams::TVERSKY_KAHNEMAN,
            Weighting::Identity,
        );
        assert_eq!(p.benchmark.eta_law(&m), EtaLaw::Constant(1.0));
        let (env, phi, _) = prepare(&p).unwrap();
        let lag = Lagrangian::new(&env, &phi);
        // f reduces to I
        for x in [0.5, 2.0, 3.0, 10.0] {
            assert!((lag.f(x).unwrap() - env.inverse_marginal(x).unwrap()).abs() < 1e-10);
        }
        match lag.solve_lambda() {
            Err(Error::NoMultiplier { lambda0, f_left, f_right }) => {
                assert!((lambda0 - env.jump_slope()).abs() < 1e-6 * lambda0);
                assert!(f_left > 1.0 && f_right < 1.0);
                assert!((f_right - env.c_hat).abs() < 1e-10);
            }
            other => panic!("expected NoMultiplier, got {other:?}"),
        }
        assert_eq!(lag.lambda_set().len(), 1);
    }

    #[test]
    fn zhang_identity_scenario() {
        let p = problem(0.1, 0.0, Weighting::Identity);
        let z = solve_zhang(&p).unwrap();
        assert!(z.budget_residual.abs() < 1e-6);
        assert!(z.l_residual < 1e-8);
        assert!((z.l - 1.6153210609747398e-05).abs() < 1e-12);
        assert!((z.lambda1 - 2.1957540117164287).abs() < 1e-6, "{}", z.lambda1);
        // continuity of the gain at the threshold
        let u = p.utility;
        let at = powf(z.threshold / u.alpha, 1.0 / (u.alpha - 1.0));
        assert!((at - z.l).abs() < 1e-12 * z.l.max(1.0));
    }

    #[test]
    fn zhang_refusals() {
        assert!(matches!(solve_zhang(&problem(0.1, 0.0, Weighting::sqrt())), Err(Error::IllPosed(_))));
        let kp = Problem::new(
            MarketParams::default(),
            Benchmark::new(BenchmarkKind::KernelPower { k: 0.5 }, 0.1).unwrap(),
            UtilityParams::TVERSKY_KAHNEMAN,
            Weighting::Identity,
        );
        assert!(matches!(solve_zhang(&kp), Err(Error::Unsupported(_))));
        assert!(matches!(solve(&problem(0.1, 0.2, Weighting::Identity)), Err(Error::Infeasible { .. })));
    }
}
