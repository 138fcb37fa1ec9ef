//! Probability estimation factors: validity, optimization, and reporting.
//!
//! A PEF with power `beta` is a nonnegative function `F` of one trial's
//! settings and outcomes whose defining expectation
//! `E[F . P(O|S)^beta] <= 1` holds for every allowed behavior. The
//! expectation is linear in the behavior for fixed `F`, so it suffices to
//! check it at the extreme points of any polytope containing the allowed
//! set. Under an i.i.d. trial model, `(eps exp(n E[ln F]))^(-1/beta)` is the
//! median anticipated bound on the probability of the observed outcome
//! string; its negative base-2 logarithm is the certified-bits figure of
//! merit reported here.
//!
//! Finding the best PEF for a given trial distribution is a concave
//! maximization of `E[ln F]` under one linear constraint per extreme point;
//! [`optimize_pef`] hands exactly that program to the barrier solver. Sweeps
//! over the power ([`sweep_beta`]) and over the tilted-bound weight
//! ([`sweep_alpha`]) run their grid points in parallel; each point is an
//! independent deterministic solve, so reports do not depend on scheduling.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bell::{cell_index, cell_label, Behavior, CELLS, SOLVER_TOL};
use crate::polytope::{double_bound_extremes, PolytopeError, PolytopeModel};
use crate::scenarios::{tilted_maximizer, ScenarioError, SettingsDistribution, TrialDistribution};
use crate::solver::{solve_concave, ConcaveProgram, SolverError};

/// Barrier tolerance used by the PEF optimizer.
pub const OPTIMIZER_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PefError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("PEF value at {label} is {value}; values must be finite and nonnegative")]
    InvalidValue { label: String, value: f64 },
    #[error("power beta = {0} must be positive and finite")]
    BetaRange(f64),
    #[error("epsilon = {0} must lie in (0, 1]")]
    EpsilonRange(f64),
    #[error("trial count n must be positive")]
    TrialCount,
    #[error("trial probability at {label} is zero; the log objective is undefined there")]
    ZeroTrialCell { label: String },
    #[error("PEF is zero at {label} where the trial has positive probability")]
    ZeroPefCell { label: String },
    #[error("grid must be nonempty with positive finite entries")]
    BadGrid,
    #[error("every grid point failed; first failure: {0}")]
    AllPointsFailed(String),
}

/// A probability estimation factor: 16 nonnegative values indexed like a
/// behavior, together with its power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pef {
    f: [f64; CELLS],
    beta: f64,
}

impl Pef {
    pub fn new(values: [f64; CELLS], beta: f64) -> Result<Self, PefError> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(PefError::BetaRange(beta));
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(PefError::InvalidValue {
                    label: cell_label(k),
                    value: v,
                });
            }
        }
        Ok(Self { f: values, beta })
    }

    /// The constant-`c` PEF (valid for any model whenever `c <= 1`).
    pub fn constant(c: f64, beta: f64) -> Result<Self, PefError> {
        Self::new([c; CELLS], beta)
    }

    pub fn values(&self) -> &[f64; CELLS] {
        &self.f
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The same PEF scaled by `c` in (0, 1]; scaling down preserves validity
    /// since the defining constraint is linear in `F`.
    pub fn scaled(&self, c: f64) -> Result<Self, PefError> {
        let mut f = self.f;
        for v in &mut f {
            *v *= c;
        }
        Self::new(f, self.beta)
    }
}

/// Left side of the PEF defining constraint under one behavior:
/// `sum_s pi(s) sum_o P(o|s)^(1+beta) F(o,s)`, with `0^(1+beta) = 0`.
///
/// The exponent is `1 + beta` because the expectation itself weights each
/// cell by `P(o|s)`.
pub fn constraint_value(pef: &Pef, behavior: &Behavior, settings: &SettingsDistribution) -> f64 {
    let mut total = 0.0;
    for s in 0..4 {
        let pi = settings.prob(s);
        if pi == 0.0 {
            continue;
        }
        for o in 0..4 {
            let p = behavior.get(s, o);
            if p > 0.0 {
                total += pi * p.powf(1.0 + pef.beta) * pef.f[cell_index(s, o)];
            }
        }
    }
    total
}

/// Whether the defining constraint holds (within solver tolerance) at every
/// extreme point of the model, and hence on the whole polytope.
pub fn is_valid_pef(pef: &Pef, model: &PolytopeModel, settings: &SettingsDistribution) -> bool {
    model
        .points()
        .iter()
        .all(|p| constraint_value(pef, &p.behavior, settings) <= 1.0 + SOLVER_TOL)
}

/// `E[ln F]` under the trial's joint distribution of settings and outcomes.
///
/// Errors when the PEF vanishes on a cell the trial assigns positive
/// probability (the objective would be negative infinity).
pub fn expected_log(pef: &Pef, trial: &TrialDistribution) -> Result<f64, PefError> {
    let q = trial.joint();
    let mut total = 0.0;
    for (k, &weight) in q.iter().enumerate() {
        if weight > 0.0 {
            let f = pef.f[k];
            if f <= 0.0 {
                return Err(PefError::ZeroPefCell {
                    label: cell_label(k),
                });
            }
            total += weight * f.ln();
        }
    }
    Ok(total)
}

/// Error bound and trial count for converting `E[ln F]` into bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationConfig {
    pub epsilon: f64,
    pub n: u64,
}

impl CertificationConfig {
    /// `epsilon = 1` is allowed as the degenerate zero-bits baseline.
    pub fn new(epsilon: f64, n: u64) -> Result<Self, PefError> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon > 1.0 {
            return Err(PefError::EpsilonRange(epsilon));
        }
        if n == 0 {
            return Err(PefError::TrialCount);
        }
        Ok(Self { epsilon, n })
    }
}

/// Certified bits: `-log2` of the median anticipated probability bound
/// `(eps exp(n E[ln F]))^(-1/beta)`, i.e.
/// `(log2(eps) + n E[ln F] / ln 2) / beta`.
///
/// Strictly increasing in `expected_log` for fixed config and power.
pub fn bits_from_expected_log(cfg: &CertificationConfig, beta: f64, expected_log: f64) -> f64 {
    (cfg.epsilon.log2() + cfg.n as f64 * expected_log / std::f64::consts::LN_2) / beta
}

/// Maximizes `E[ln F]` over PEFs with power `beta` valid for the model.
///
/// The trial joint distribution must be positive on all 16 cells, which
/// holds for the tilted-maximizer targets; the optimum is then interior
/// (every `F(o,s) > 0`). The returned PEF is re-checked against the model
/// before being handed back.
pub fn optimize_pef(
    model: &PolytopeModel,
    trial: &TrialDistribution,
    beta: f64,
) -> Result<Pef, PefError> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(PefError::BetaRange(beta));
    }
    let q = trial.joint();
    for (k, &weight) in q.iter().enumerate() {
        if weight <= 0.0 {
            return Err(PefError::ZeroTrialCell {
                label: cell_label(k),
            });
        }
    }
    let rows: Vec<[f64; CELLS]> = model
        .points()
        .iter()
        .map(|point| {
            let mut row = [0.0; CELLS];
            for s in 0..4 {
                let pi = trial.settings.prob(s);
                for o in 0..4 {
                    let p = point.behavior.get(s, o);
                    if p > 0.0 && pi > 0.0 {
                        row[cell_index(s, o)] = pi * p.powf(1.0 + beta);
                    }
                }
            }
            row
        })
        .collect();
    let program = ConcaveProgram::new(q, rows)?;
    let solution = solve_concave(&program, OPTIMIZER_TOL)?;
    let pef = Pef::new(solution.x, beta)?;
    debug_assert!(is_valid_pef(&pef, model, &trial.settings));
    Ok(pef)
}

/// Outcome of one grid point in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Ok,
    Failed(String),
}

impl SolveStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, SolveStatus::Ok)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Ok => write!(f, "ok"),
            SolveStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

/// One `beta` grid point: the optimized objective and its bits value.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub beta: f64,
    /// `E[ln F]` at the optimum (natural log).
    pub expected_log: f64,
    /// Certified bits (base 2).
    pub bits: f64,
    pub status: SolveStatus,
}

/// Result of a beta sweep: the best grid point plus the full trace.
#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub beta: f64,
    pub expected_log: f64,
    pub bits: f64,
    pub trace: Vec<SweepPoint>,
}

/// The 100 equally spaced powers in [0.001, 0.100] used by default.
pub fn default_beta_grid() -> Vec<f64> {
    let step = 0.099 / 99.0;
    (0..100).map(|i| 0.001 + step * i as f64).collect()
}

fn sweep_point(
    model: &PolytopeModel,
    trial: &TrialDistribution,
    cfg: &CertificationConfig,
    beta: f64,
) -> SweepPoint {
    match optimize_pef(model, trial, beta).and_then(|pef| expected_log(&pef, trial)) {
        Ok(value) => SweepPoint {
            beta,
            expected_log: value,
            bits: bits_from_expected_log(cfg, beta, value),
            status: SolveStatus::Ok,
        },
        Err(err) => SweepPoint {
            beta,
            expected_log: f64::NAN,
            bits: f64::NAN,
            status: SolveStatus::Failed(err.to_string()),
        },
    }
}

/// Optimizes a PEF at every power in `grid` and reports the best certified
/// bits together with the full trace.
///
/// Grid points run in parallel. Failed points stay in the trace with their
/// error message and are excluded from the maximum; only an all-failed grid
/// is an error.
pub fn sweep_beta(
    model: &PolytopeModel,
    trial: &TrialDistribution,
    cfg: &CertificationConfig,
    grid: &[f64],
) -> Result<CertificationReport, PefError> {
    if grid.is_empty() || grid.iter().any(|b| !b.is_finite() || *b <= 0.0) {
        return Err(PefError::BadGrid);
    }
    let trace: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&beta| sweep_point(model, trial, cfg, beta))
        .collect();
    let best = trace
        .iter()
        .filter(|p| p.status.is_ok())
        .max_by(|a, b| a.bits.total_cmp(&b.bits));
    match best {
        Some(best) => Ok(CertificationReport {
            beta: best.beta,
            expected_log: best.expected_log,
            bits: best.bits,
            trace: trace.clone(),
        }),
        None => {
            let first = trace
                .iter()
                .find_map(|p| match &p.status {
                    SolveStatus::Failed(msg) => Some(msg.clone()),
                    SolveStatus::Ok => None,
                })
                .unwrap_or_default();
            Err(PefError::AllPointsFailed(first))
        }
    }
}

/// One row of an alpha sweep: the best beta point for that polytope.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaSweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub expected_log: f64,
    pub bits: f64,
    pub status: SolveStatus,
}

/// For each `alpha`, builds the CHSH + tilted double-bound polytope and runs
/// a beta sweep against the fixed trial `tilted_maximizer(trial_alpha)`
/// under equiprobable settings.
pub fn sweep_alpha(
    alpha_grid: &[f64],
    trial_alpha: f64,
    cfg: &CertificationConfig,
    beta_grid: &[f64],
) -> Result<Vec<AlphaSweepRow>, PefError> {
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !a.is_finite() || *a <= 1.0) {
        return Err(PefError::BadGrid);
    }
    let trial = TrialDistribution::uniform(tilted_maximizer(trial_alpha)?);
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            let model = double_bound_extremes(alpha)?;
            let report = sweep_beta(&model, &trial, cfg, beta_grid)?;
            Ok(AlphaSweepRow {
                alpha,
                beta: report.beta,
                expected_log: report.expected_log,
                bits: report.bits,
                status: SolveStatus::Ok,
            })
        })
        .collect()
}
