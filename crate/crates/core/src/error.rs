use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("{what}: singular at {value}")]
    Singularity { what: &'static str, value: f64 },

    #[error("{what}: no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what}: root not bracketed on [{lo}, {hi}]")]
    NotBracketed { what: &'static str, lo: f64, hi: f64 },

    #[error("quadrature failed for {what}: error estimate {error:e} after {evals} evaluations")]
    Quadrature {
        what: &'static str,
        error: f64,
        evals: usize,
    },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("infeasible scenario: E[rho e^benchmark] = {expectation} is not below e^c = {bound}")]
    Infeasible { expectation: f64, bound: f64 },

    #[error("problem is not well-posed: {0}")]
    IllPosed(&'static str),

    #[error("no Lagrange multiplier: f jumps over 1 at lambda = {lambda0} (left limit {f_left}, right limit {f_right})")]
    NoMultiplier { lambda0: f64, f_left: f64, f_right: f64 },

    #[error("no assignment within budget slack {slack}")]
    NoAdmissible { slack: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}
