//! Active-set block coordinate descent for ℓ1-regularized least squares,
//! `min ½‖Ax − b‖² + τ‖x‖₁`.
//!
//! * [`problem`]: instances, objective arithmetic, generators and file I/O
//! * [`activeset`]: active-set estimates and the adaptive ε search
//! * [`blocksolve`]: exact 1D/2D block minimizers and optimality measures
//! * [`driver`]: the outer loop, its ε-adaptive and enhanced variants
//! * [`baselines`]: ISTA and FISTA
//! * [`bench`]: benchmark sweeps, performance profiles and error traces

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activeset;
pub mod baselines;
pub mod bench;
pub mod blocksolve;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use problem::{Instance, SolverState};
pub use trace::{RunTrace, Solution, Status};
