//! Deterministic numerical engines.
//!
//! Two solvers, both dense and both free of randomized choices so that
//! repeated runs are bit-for-bit identical:
//!
//! - [`solve_concave`]: log-barrier path following for maximizing a weighted
//!   sum of logarithms under nonnegative linear inequality constraints (the
//!   PEF optimization has exactly this shape: 16 variables, one constraint
//!   per polytope extreme point).
//! - [`solve_lp`]: a two-phase primal simplex with Bland's rule, used for
//!   convex-hull membership and extremality queries.

mod barrier;
mod simplex;

pub use barrier::{solve_concave, ConcaveProgram, ConcaveSolution};
pub use simplex::{solve_lp, LinearProgram, LpOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("barrier did not converge: duality gap {gap:.3e} after {outer} outer rounds")]
    MaxIterations { gap: f64, outer: usize },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
