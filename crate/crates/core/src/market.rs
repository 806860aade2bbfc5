//! Deterministic-coefficient market with a lognormal pricing kernel, the
//! benchmark, and kernel expectations of terminal wealth maps.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::quad::{normal_expectation, GaussHermite, Tolerance};
use crate::math::{exp, ln, norm_cdf, sqrt};
use crate::quantile::EtaLaw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Norm of the market price of risk.
    pub theta: f64,
    /// Horizon in years.
    pub horizon: f64,
    pub x0: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self { r: 0.02, theta: 0.2, horizon: 1.0, x0: 1.0 }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter { name: "horizon", value: self.horizon });
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidParameter { name: "x0", value: self.x0 });
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParameter { name: "theta", value: self.theta });
        }
        if !self.r.is_finite() {
            return Err(Error::InvalidParameter { name: "r", value: self.r });
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelLaw {
        self.kernel_over(self.horizon)
    }

    /// Law of `ρ(t + τ) / ρ(t)`.
    pub fn kernel_over(&self, tau: f64) -> KernelLaw {
        KernelLaw {
            mu: -(self.r + 0.5 * self.theta * self.theta) * tau,
            sigma: self.theta * sqrt(tau),
        }
    }
}

/// `log ρ ~ N(mu, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelLaw {
    pub mu: f64,
    pub sigma: f64,
}

impl KernelLaw {
    pub fn z_of_rho(&self, rho: f64) -> f64 {
        (ln(rho) - self.mu) / self.sigma
    }

    pub fn rho_of_z(&self, z: f64) -> f64 {
        exp(self.mu + self.sigma * z)
    }

    pub fn cdf(&self, rho: f64) -> f64 {
        norm_cdf(self.z_of_rho(rho))
    }

    pub fn mean(&self) -> f64 {
        exp(self.mu + 0.5 * self.sigma * self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchmarkKind {
    /// `℘ = (r + g) T`.
    ConstantExcess { g: f64 },
    /// `℘ = k log(1/ρ)`.
    KernelPower { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    /// Risk tolerance: the terminal growth rate may fall at most `c` below `℘`.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `E[ρ e^℘]`.
    pub expectation: f64,
    /// `e^c`.
    pub bound: f64,
    pub margin: f64,
}

impl Benchmark {
    pub fn constant_excess(g: f64, c: f64) -> Result<Self> {
        Self::new(BenchmarkKind::ConstantExcess { g }, c)
    }

    pub fn new(kind: BenchmarkKind, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter { name: "c", value: c });
        }
        Ok(Self { kind, c })
    }

    pub fn c_hat(&self) -> f64 {
        exp(-self.c)
    }

    /// `℘` in the state `ρ`.
    pub fn log_growth(&self, m: &MarketParams, rho: f64) -> f64 {
        match self.kind {
            BenchmarkKind::ConstantExcess { g } => (m.r + g) * m.horizon,
            BenchmarkKind::KernelPower { k } => -k * ln(rho),
        }
    }

    /// Law of `η = ρ e^℘` in normal coordinates.
    pub fn eta_law(&self, m: &MarketParams) -> EtaLaw {
        let ker = m.kernel();
        match self.kind {
            BenchmarkKind::ConstantExcess { g } => EtaLaw::Lognormal {
                mu: ker.mu + (m.r + g) * m.horizon,
                sigma: ker.sigma,
            },
            BenchmarkKind::KernelPower { k } => {
                let e = 1.0 - k;
                if e == 0.0 || ker.sigma == 0.0 {
                    EtaLaw::Constant(exp(e * ker.mu))
                } else {
                    EtaLaw::Lognormal { mu: e * ker.mu, sigma: e.abs() * ker.sigma }
                }
            }
        }
    }

    /// `+1` when `η` increases with `ρ`, `-1` when it decreases. For `η`
    /// constant the ranking follows `ρ`.
    pub fn orientation(&self) -> f64 {
        match self.kind {
            BenchmarkKind::KernelPower { k } if k > 1.0 => -1.0,
            _ => 1.0,
        }
    }

    /// Normal coordinate `ζ` of the state `ρ`, with `Q_η(Φ(ζ)) = η(ρ)`.
    pub fn zeta_of_rho(&self, m: &MarketParams, rho: f64) -> f64 {
        self.orientation() * m.kernel().z_of_rho(rho)
    }

    pub fn rho_of_zeta(&self, m: &MarketParams, zeta: f64) -> f64 {
        m.kernel().rho_of_z(self.orientation() * zeta)
    }

    pub fn feasibility(&self, m: &MarketParams) -> Feasibility {
        let expectation = self.eta_law(m).mean();
        let bound = exp(self.c);
        Feasibility {
            feasible: expectation < bound,
            expectation,
            bound,
            margin: bound - expectation,
        }
    }
}

/// A terminal wealth map `ρ ↦ X(T)` together with the states where it is
/// not smooth (jumps and kinks), so that quadrature can split there.
pub trait WealthMap {
    fn wealth(&self, rho: f64) -> f64;
    fn breakpoints(&self) -> Vec<f64>;
}

/// Closure-backed wealth map.
#[derive(Debug, Clone)]
pub struct FnMap<F> {
    pub f: F,
    pub breaks: Vec<f64>,
}

impl<F: Fn(f64) -> f64> WealthMap for FnMap<F> {
    fn wealth(&self, rho: f64) -> f64 {
        (self.f)(rho)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

const EXPECT_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-13, max_intervals: 4000 };

/// `E[ρ' X(ρ_t ρ')]` where `log ρ' ~ N(mu, sigma²)`: Gauss–Hermite for smooth
/// maps, adaptive Gauss–Kronrod split at the breakpoints otherwise.
fn kernel_expectation<M: WealthMap + ?Sized>(
    law: KernelLaw,
    scale: f64,
    map: &M,
    weight: impl Fn(f64) -> f64,
) -> Result<f64> {
    let breaks: Vec<f64> = map
        .breakpoints()
        .iter()
        .filter(|b| b.is_finite() && **b > 0.0)
        .map(|&b| (ln(b / scale) - law.mu) / law.sigma)
        .collect();
    let f = |z: f64| {
        let rel = law.rho_of_z(z);
        rel * map.wealth(scale * rel) * weight(z)
    };
    if breaks.is_empty() {
        Ok(GaussHermite::standard().expect(f))
    } else {
        Ok(normal_expectation(f, &breaks, EXPECT_TOL, "kernel expectation")?.value)
    }
}

/// `E[ρ X(T)]`.
pub fn budget_value<M: WealthMap + ?Sized>(m: &MarketParams, map: &M) -> Result<f64> {
    kernel_expectation(m.kernel(), 1.0, map, |_| 1.0)
}

/// Time-`t` wealth `Ψ(t, ρ_t) = E[ρ(T) X(T) | ρ(t) = ρ_t] / ρ_t`.
pub fn time_t_wealth<M: WealthMap + ?Sized>(m: &MarketParams, map: &M, t: f64, rho_t: f64) -> Result<f64> {
    check_time(m, t, rho_t)?;
    kernel_expectation(m.kernel_over(m.horizon - t), rho_t, map, |_| 1.0)
}

fn check_time(m: &MarketParams, t: f64, rho_t: f64) -> Result<()> {
    if !(t >= 0.0 && t < m.horizon) {
        return Err(Error::Domain { what: "time", value: t });
    }
    if !(rho_t > 0.0) {
        return Err(Error::Domain { what: "kernel state", value: rho_t });
    }
    Ok(())
}

/// Relative risk exposure `-Ψ_x ρ_t / Ψ` by a central difference with step
/// `1e-4 ρ_t`.
pub fn exposure<M: WealthMap + ?Sized>(m: &MarketParams, map: &M, t: f64, rho_t: f64) -> Result<f64> {
    check_time(m, t, rho_t)?;
    let h = 1e-4 * rho_t;
    let up = time_t_wealth(m, map, t, rho_t + h)?;
    let dn = time_t_wealth(m, map, t, rho_t - h)?;
    let psi = time_t_wealth(m, map, t, rho_t)?;
    Ok(-(up - dn) / (2.0 * h) * rho_t / psi)
}

/// Same quantity through the score identity
/// `ρ_t Ψ_x = -Ψ + E[ρ' X Z] / σ_τ`.
pub fn exposure_score<M: WealthMap + ?Sized>(m: &MarketParams, map: &M, t: f64, rho_t: f64) -> Result<f64> {
    check_time(m, t, rho_t)?;
    let law = m.kernel_over(m.horizon - t);
    let psi = kernel_expectation(law, rho_t, map, |_| 1.0)?;
    let score = kernel_expectation(law, rho_t, map, |z| z)?;
    Ok(1.0 - score / (law.sigma * psi))
}

/// Log-spaced time-`t` states over `exp(μ_t ± 5σ_t)`, widened so that every
/// terminal feature (jump or kink of a map) sits at least five standard
/// deviations of the remaining horizon inside the range.
pub fn exposure_grid(m: &MarketParams, t: f64, features: &[f64], n: usize) -> Vec<f64> {
    let now = m.kernel_over(t);
    let rest = m.kernel_over(m.horizon - t);
    let mut lo = exp(now.mu - 5.0 * now.sigma);
    let mut hi = exp(now.mu + 5.0 * now.sigma);
    for &f in features.iter().filter(|f| f.is_finite() && **f > 0.0) {
        lo = lo.min(f * exp(-rest.mu - 5.0 * rest.sigma));
        hi = hi.max(f * exp(-rest.mu + 5.0 * rest.sigma));
    }
    crate::math::logspace(lo, hi, n)
}
