//! Tsirelson polytopes for the (2,2,2) Bell scenario.
//!
//! The no-signaling set of (2,2,2) behaviors is a polytope with 24 extreme
//! points. Intersecting it with half-spaces given by Tsirelson-type bounds
//! (quantum upper bounds on Bell functionals) yields smaller polytopes that
//! still contain every quantum-achievable behavior, and whose extreme points
//! have closed forms. Those extreme points are exactly what the probability
//! estimation factor (PEF) method needs: a PEF valid at each extreme point is
//! valid for every behavior in the polytope, so certifying randomness reduces
//! to a finite set of linear constraints.
//!
//! The crate is organized as:
//!
//! - [`bell`]: behaviors, Bell functionals, the 24 no-signaling generators,
//!   and local/no-signaling bound computations.
//! - [`polytope`]: single-bound, eight-CHSH and two-bound polytope
//!   constructions, convex decomposition, and LP extremality verification.
//! - [`scenarios`]: reference quantum behaviors and trial distributions used
//!   as optimization targets.
//! - [`pef`]: PEF validity, the log-expectation objective, certified-bits
//!   reporting, and the beta/alpha sweeps.
//! - [`solver`]: the deterministic numerical engines (log-barrier concave
//!   maximizer and a dense two-phase simplex).

pub mod bell;
pub mod pef;
pub mod polytope;
pub mod scenarios;
pub mod solver;

pub use bell::{Behavior, BellFunctional, BoundsSummary};
pub use pef::{CertificationConfig, CertificationReport, Pef};
pub use polytope::{PolytopeModel, TsirelsonConstraint};
pub use scenarios::{SettingsDistribution, TrialDistribution};
