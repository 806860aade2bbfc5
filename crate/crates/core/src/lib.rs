//! Relative growth-rate optimization for an investor with a prospect-type
//! preference on log-returns and a probability distortion.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function of
//! immutable inputs, so results can be shared across threads freely. File
//! formats, the experiment runner and the CLI live in the `relgrowth` crate.
//!
//! Rough map:
//!
//! * [`preferences`]: the S-shaped utility `u`, the M-shaped relative utility
//!   `v(x) = u(log x)`, its concave envelopes and the generalized inverse `I`.
//! * [`weighting`]: probability weighting functions and `nu(p) = 1 - w^{-1}(1-p)`.
//! * [`quantile`]: Choquet expectations, the `phi` curve and its concave envelope.
//! * [`market`]: lognormal pricing kernel, benchmarks, budget and time-t wealth.
//! * [`solver`]: Lagrange multiplier search, optimal maps and the comparison model.
//! * [`oracle`]: brute-force validators used to certify the closed form.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod market;
pub mod math;
pub mod oracle;
pub mod preferences;
pub mod quantile;
pub mod solver;
pub mod weighting;

pub use error::{Error, Result};
pub use market::{Benchmark, BenchmarkKind, KernelLaw, MarketParams, WealthMap};
pub use preferences::{EnvelopeData, EnvelopeRegime, GlobalEnvelope, UtilityParams};
pub use quantile::{EtaLaw, Interpolation, PhiCurve, PhiShape, QuantileCurve};
pub use solver::{solve, solve_zhang, Problem, Regime, SolverSolution, ZhangSolution};
pub use weighting::{JinZhou, Weighting};
