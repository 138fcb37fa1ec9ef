//! Tsirelson polytope constructions, decomposition, and extremality checks.
//!
//! A Tsirelson polytope is the no-signaling set cut down by one or more
//! half-spaces `B . P <= TB*` where `TB*` sits between the local bound and
//! the no-signaling bound of `B`. Its extreme points have closed forms:
//! the surviving no-signaling generators plus mixtures of the removed PR box
//! with the local points saturating that box's CHSH version. This module
//! builds the three families used here (single bound, all eight CHSH
//! versions at `2 sqrt 2`, and the interacting CHSH + tilted pair), writes
//! members back as convex combinations of the extreme points, and verifies
//! extremality with membership LPs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bell::{
    self, chsh_functional, chsh_version, compute_bounds, convex_combination, pr_box,
    saturating_locals, tilted_bound, tilted_functional, Behavior, BellError, BellFunctional,
    BoundsSummary, CELLS, SOLVER_TOL, STRUCT_TOL,
};
use crate::solver::{solve_lp, LinearProgram, LpOutcome, SolverError};

/// Required infeasibility margin for a point to count as verified extreme.
pub const EXTREMALITY_MARGIN: f64 = 1e-9;

/// Tolerance on decomposition weights and reconstruction error.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PolytopeError {
    #[error(transparent)]
    Bell(#[from] BellError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("bound {bound} outside [LB, NSB) = [{lb}, {nsb})")]
    BoundOutOfRange { bound: f64, lb: f64, nsb: f64 },
    #[error("constraint {index} violated: value {value} exceeds bound {bound}")]
    ConstraintViolated {
        index: usize,
        value: f64,
        bound: f64,
    },
    #[error("behavior is not in the polytope (margin {margin:.3e})")]
    NotInPolytope { margin: f64 },
    #[error("cone weights must be nonnegative and sum to 1 (sum = {0})")]
    BadConeWeights(f64),
    #[error("cone decomposition needs a single-bound or double-bound model")]
    ConeFormUnsupported,
    #[error("point {label}: {problem}")]
    InvalidPoint { label: String, problem: String },
    #[error("duplicate extreme-point label {0}")]
    DuplicateLabel(String),
    #[error("model has no extreme points")]
    EmptyModel,
}

/// A half-space `functional . P <= bound` with the bound between the local
/// and no-signaling bounds of the functional.
///
/// The quantum (Tsirelson) bound itself may be unknown; callers are
/// responsible for the lower end `TB <= bound`, which cannot be checked
/// here. What is checked is `LB <= bound < NSB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintJson", into = "ConstraintJson")]
pub struct TsirelsonConstraint {
    functional: BellFunctional,
    bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstraintJson {
    functional: BellFunctional,
    bound: f64,
}

impl TsirelsonConstraint {
    pub fn new(functional: BellFunctional, bound: f64) -> Result<Self, PolytopeError> {
        let BoundsSummary { lb, nsb, .. } = compute_bounds(&functional)?;
        if !bound.is_finite() || bound < lb || bound >= nsb {
            return Err(PolytopeError::BoundOutOfRange { bound, lb, nsb });
        }
        Ok(Self { functional, bound })
    }

    pub fn functional(&self) -> &BellFunctional {
        &self.functional
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `bound - functional . p`; negative means violated.
    pub fn slack(&self, p: &Behavior) -> f64 {
        self.bound - self.functional.evaluate(p)
    }

    pub fn satisfied_by(&self, p: &Behavior, tol: f64) -> bool {
        self.slack(p) >= -tol
    }
}

impl TryFrom<ConstraintJson> for TsirelsonConstraint {
    type Error = PolytopeError;
    fn try_from(j: ConstraintJson) -> Result<Self, PolytopeError> {
        TsirelsonConstraint::new(j.functional, j.bound)
    }
}

impl From<TsirelsonConstraint> for ConstraintJson {
    fn from(c: TsirelsonConstraint) -> ConstraintJson {
        ConstraintJson {
            functional: c.functional,
            bound: c.bound,
        }
    }
}

/// How a model was built; stored alongside the points so that serialized
/// models are self-describing and so cone-form decomposition knows which
/// substitution cycle applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    /// One Tsirelson bound. The E points split the recorded PR box.
    SingleBound { pr_index: usize },
    /// All eight CHSH versions bounded by `2 sqrt 2`.
    EightChsh,
    /// CHSH and the tilted functional at `alpha`, both maximized by PR0.
    DoubleBound { alpha: f64 },
    /// Hand-assembled point set.
    Custom(String),
}

/// A labeled extreme point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremePoint {
    pub label: String,
    #[serde(rename = "values", with = "raw_values")]
    pub behavior: Behavior,
}

/// Points inside a model serialize as bare 16-value arrays in canonical cell
/// order; the table form with its order header would triple the file size.
mod raw_values {
    use super::*;
    use serde::de::Error;

    pub fn serialize<S: serde::Serializer>(b: &Behavior, s: S) -> Result<S::Ok, S::Error> {
        b.values().serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Behavior, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        let array: [f64; CELLS] = values.try_into().map_err(|v: Vec<f64>| {
            D::Error::custom(format!("expected 16 values, got {}", v.len()))
        })?;
        // Lenient on purpose: audits, not parsing, decide validity.
        Ok(Behavior::from_raw(array))
    }
}

/// An extreme-point list together with the constraints that induced it.
///
/// Deserialization is deliberately lenient about the numerical invariants
/// (normalization, no-signaling, constraint satisfaction) so that a model
/// file can always be loaded and then *audited*; [`PolytopeModel::audit`]
/// and [`verify_extremality`] report violations instead of refusing input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeModel {
    constraints: Vec<TsirelsonConstraint>,
    points: Vec<ExtremePoint>,
    provenance: Construction,
}

impl PolytopeModel {
    /// Assembles a model from parts, checking only structure (unique labels,
    /// nonempty point list); numerical invariants are audited on demand.
    pub fn from_parts(
        constraints: Vec<TsirelsonConstraint>,
        points: Vec<ExtremePoint>,
        provenance: Construction,
    ) -> Result<Self, PolytopeError> {
        if points.is_empty() {
            return Err(PolytopeError::EmptyModel);
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &points {
            if !seen.insert(p.label.as_str()) {
                return Err(PolytopeError::DuplicateLabel(p.label.clone()));
            }
        }
        Ok(Self {
            constraints,
            points,
            provenance,
        })
    }

    pub fn constraints(&self) -> &[TsirelsonConstraint] {
        &self.constraints
    }

    pub fn points(&self) -> &[ExtremePoint] {
        &self.points
    }

    pub fn provenance(&self) -> &Construction {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, label: &str) -> Option<&Behavior> {
        self.points
            .iter()
            .find(|p| p.label == label)
            .map(|p| &p.behavior)
    }

    /// Structural audit of every point: normalization, no-signaling, and
    /// all constraints within `STRUCT_TOL`.
    pub fn audit(&self) -> Vec<PointAudit> {
        self.points
            .iter()
            .map(|p| PointAudit {
                label: p.label.clone(),
                normalized: p.behavior.check_normalized().is_ok(),
                no_signaling: p.behavior.is_no_signaling(),
                within_constraints: self
                    .constraints
                    .iter()
                    .all(|c| c.satisfied_by(&p.behavior, STRUCT_TOL)),
            })
            .collect()
    }

    /// First audit failure as an error, or `Ok(())` when the model is sound.
    pub fn validate(&self) -> Result<(), PolytopeError> {
        for a in self.audit() {
            if !a.pass() {
                return Err(PolytopeError::InvalidPoint {
                    label: a.label.clone(),
                    problem: a.problem(),
                });
            }
        }
        Ok(())
    }

    /// Per-constraint count of points saturating it within `SOLVER_TOL`.
    pub fn saturation_counts(&self) -> Vec<usize> {
        self.constraints
            .iter()
            .map(|c| {
                self.points
                    .iter()
                    .filter(|p| c.slack(&p.behavior).abs() <= SOLVER_TOL)
                    .count()
            })
            .collect()
    }
}

/// Result of the structural audit for one point.
#[derive(Debug, Clone, Serialize)]
pub struct PointAudit {
    pub label: String,
    pub normalized: bool,
    pub no_signaling: bool,
    pub within_constraints: bool,
}

impl PointAudit {
    pub fn pass(&self) -> bool {
        self.normalized && self.no_signaling && self.within_constraints
    }

    fn problem(&self) -> String {
        let mut problems = Vec::new();
        if !self.normalized {
            problems.push("row normalization");
        }
        if !self.no_signaling {
            problems.push("no-signaling");
        }
        if !self.within_constraints {
            problems.push("constraint satisfaction");
        }
        problems.join(", ")
    }
}

/// The split points `lambda_i PR + (1 - lambda_i) L_i` for one constraint,
/// over the saturating locals of its maximizing PR box, with
/// `lambda_i = (bound - B.L_i) / (NSB - B.L_i)`. Each saturates the bound
/// exactly. Returned in saturating-local order.
fn split_points(
    constraint: &TsirelsonConstraint,
    summary: &BoundsSummary,
) -> Result<Vec<Behavior>, PolytopeError> {
    let pr = pr_box(summary.max_pr_index)?;
    let locals = saturating_locals(summary.max_pr_index)?;
    let mut out = Vec::with_capacity(locals.len());
    for local in locals {
        let value = constraint.functional().evaluate(&local);
        let lambda = (constraint.bound() - value) / (summary.nsb - value);
        out.push(convex_combination(&[(lambda, &pr), (1.0 - lambda, &local)]));
    }
    Ok(out)
}

/// Extreme points of the polytope cut out of the no-signaling set by a
/// single Tsirelson constraint.
///
/// The 16 local points and the 7 surviving PR boxes stay; the maximizing PR
/// box is replaced by up to 8 mixtures `E_i = lambda_i PR + (1 - lambda_i)
/// L_i` over the saturating locals, each saturating the bound exactly. When
/// the bound equals the local bound some `E_i` coincide with their `L_i`;
/// duplicates are merged, so the count is 31 for a strictly inner bound and
/// 23 at the local bound.
pub fn single_bound_extremes(
    constraint: &TsirelsonConstraint,
) -> Result<PolytopeModel, PolytopeError> {
    let summary = compute_bounds(constraint.functional())?;
    let mut points: Vec<ExtremePoint> = Vec::with_capacity(31);
    for (label, behavior) in bell::ns_extreme_points() {
        if label != format!("PR{}", summary.max_pr_index) {
            points.push(ExtremePoint { label, behavior });
        }
    }
    for (i, point) in split_points(constraint, &summary)?.into_iter().enumerate() {
        let duplicate = points
            .iter()
            .any(|p| p.behavior.max_abs_diff(&point) <= STRUCT_TOL);
        if !duplicate {
            points.push(ExtremePoint {
                label: format!("E{i}"),
                behavior: point,
            });
        }
    }
    PolytopeModel::from_parts(
        vec![constraint.clone()],
        points,
        Construction::SingleBound {
            pr_index: summary.max_pr_index,
        },
    )
}

/// The 80-point polytope obtained by bounding all eight CHSH versions at
/// `2 sqrt 2` simultaneously.
///
/// The bounds do not interact: each version's maximizing PR box splits into
/// its own 8 points with `lambda = sqrt 2 - 1`, and no PR box survives.
pub fn eight_chsh_polytope() -> PolytopeModel {
    let bound = tilted_bound(1.0);
    let mut constraints = Vec::with_capacity(8);
    let mut points: Vec<ExtremePoint> = bell::ns_extreme_points()
        .into_iter()
        .filter(|(label, _)| !label.starts_with("PR"))
        .map(|(label, behavior)| ExtremePoint { label, behavior })
        .collect();
    for k in 0..8 {
        let constraint = TsirelsonConstraint::new(chsh_version(k).expect("valid index"), bound)
            .expect("2 sqrt 2 lies in [2, 4)");
        let summary = compute_bounds(constraint.functional()).expect("CHSH is non-degenerate");
        for (i, point) in split_points(&constraint, &summary)
            .expect("split points exist")
            .into_iter()
            .enumerate()
        {
            points.push(ExtremePoint {
                label: format!("E{k}_{i}"),
                behavior: point,
            });
        }
        constraints.push(constraint);
    }
    PolytopeModel::from_parts(constraints, points, Construction::EightChsh)
        .expect("labels are distinct by construction")
}

/// Coefficients of the doubly-saturating points
/// `lambda_pr PR + lambda_top L_top + lambda_bot L_bot` for the CHSH +
/// tilted pair: the unique solution of saturating both bounds with total
/// weight one. Nonnegative for every `alpha > 1`.
pub fn double_point_coefficients(alpha: f64) -> Result<(f64, f64, f64), PolytopeError> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(BellError::AlphaNotAboveOne(alpha).into());
    }
    let root = (1.0 + alpha * alpha).sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let lambda_pr = sqrt2 - 1.0;
    let lambda_top = 1.0 - (root - sqrt2) / (alpha - 1.0);
    let lambda_bot = 1.0 - (alpha * sqrt2 - root) / (alpha - 1.0);
    Ok((lambda_pr, lambda_top, lambda_bot))
}

/// Extreme points of the polytope bounded by both the CHSH inequality at
/// `2 sqrt 2` and the tilted inequality at `2 sqrt(1 + alpha^2)`.
///
/// Both functionals are maximized by the same PR box, so the bounds
/// interact: besides the 16 locals and 7 surviving PR boxes there are 4
/// points saturating only the CHSH bound (labels `EC*`, over the locals
/// with tilted value 2), 4 saturating only the tilted bound (`ET*`, over
/// the locals with tilted value `2 alpha`), and 16 saturating both
/// (`D{i}_{j}`), for 47 in total.
pub fn double_bound_extremes(alpha: f64) -> Result<PolytopeModel, PolytopeError> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(BellError::AlphaNotAboveOne(alpha).into());
    }
    let chsh = TsirelsonConstraint::new(chsh_functional(), tilted_bound(1.0))?;
    let tilted = TsirelsonConstraint::new(tilted_functional(alpha)?, tilted_bound(alpha))?;
    let chsh_summary = compute_bounds(chsh.functional())?;
    let tilted_summary = compute_bounds(tilted.functional())?;
    debug_assert_eq!(chsh_summary.max_pr_index, tilted_summary.max_pr_index);
    let pr_index = chsh_summary.max_pr_index;
    let pr = pr_box(pr_index)?;
    let locals = saturating_locals(pr_index)?;
    let (top, bot) = bell::classify_top_bottom(&locals, alpha)?;

    let mut points: Vec<ExtremePoint> = bell::ns_extreme_points()
        .into_iter()
        .filter(|(label, _)| label != &format!("PR{pr_index}"))
        .map(|(label, behavior)| ExtremePoint { label, behavior })
        .collect();

    // Singly-saturating points: CHSH quantities over the top locals, tilted
    // quantities over the bottom locals.
    let lambda_chsh = (chsh.bound() - 2.0) / (chsh_summary.nsb - 2.0);
    for (i, local) in top.iter().enumerate() {
        points.push(ExtremePoint {
            label: format!("EC{i}"),
            behavior: convex_combination(&[(lambda_chsh, &pr), (1.0 - lambda_chsh, local)]),
        });
    }
    let bot_value = 2.0 * alpha;
    let lambda_tilted = (tilted.bound() - bot_value) / (tilted_summary.nsb - bot_value);
    for (j, local) in bot.iter().enumerate() {
        points.push(ExtremePoint {
            label: format!("ET{j}"),
            behavior: convex_combination(&[(lambda_tilted, &pr), (1.0 - lambda_tilted, local)]),
        });
    }

    let (lambda_pr, lambda_top, lambda_bot) = double_point_coefficients(alpha)?;
    for (i, top_local) in top.iter().enumerate() {
        for (j, bot_local) in bot.iter().enumerate() {
            points.push(ExtremePoint {
                label: format!("D{i}_{j}"),
                behavior: convex_combination(&[
                    (lambda_pr, &pr),
                    (lambda_top, top_local),
                    (lambda_bot, bot_local),
                ]),
            });
        }
    }

    PolytopeModel::from_parts(
        vec![chsh, tilted],
        points,
        Construction::DoubleBound { alpha },
    )
}

/// Convex weights over a model's extreme points.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionWeights {
    weights: BTreeMap<String, f64>,
}

impl DecompositionWeights {
    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn get(&self, label: &str) -> f64 {
        self.weights.get(label).copied().unwrap_or(0.0)
    }

    /// The behavior this weight vector reconstructs over the model's points.
    pub fn reconstruct(&self, model: &PolytopeModel) -> Result<Behavior, PolytopeError> {
        let mut parts = Vec::with_capacity(self.weights.len());
        for (label, &w) in &self.weights {
            let behavior = model
                .point(label)
                .ok_or_else(|| PolytopeError::InvalidPoint {
                    label: label.clone(),
                    problem: "label not present in model".into(),
                })?;
            parts.push((w, behavior));
        }
        Ok(convex_combination(&parts))
    }

    /// Largest coordinate-wise reconstruction error against a target.
    pub fn reconstruction_error(
        &self,
        model: &PolytopeModel,
        target: &Behavior,
    ) -> Result<f64, PolytopeError> {
        Ok(self.reconstruct(model)?.max_abs_diff(target))
    }

    fn add(&mut self, label: String, weight: f64) {
        if weight != 0.0 {
            *self.weights.entry(label).or_insert(0.0) += weight;
        }
    }

    fn finish(self, model: &PolytopeModel, target: &Behavior) -> Result<Self, PolytopeError> {
        let total = self.total();
        let error = self.reconstruction_error(model, target)?;
        if (total - 1.0).abs() > DECOMPOSITION_TOL || error > DECOMPOSITION_TOL {
            return Err(PolytopeError::NotInPolytope {
                margin: error.max((total - 1.0).abs()),
            });
        }
        Ok(self)
    }
}

fn check_constraints(p: &Behavior, model: &PolytopeModel) -> Result<(), PolytopeError> {
    for (index, c) in model.constraints().iter().enumerate() {
        let value = c.functional().evaluate(p);
        if value > c.bound() + SOLVER_TOL {
            return Err(PolytopeError::ConstraintViolated {
                index,
                value,
                bound: c.bound(),
            });
        }
    }
    Ok(())
}

/// Writes a behavior as a convex combination of the model's extreme points
/// by solving a feasibility LP.
///
/// The behavior must be no-signaling and satisfy the model's constraints;
/// violations are reported as errors rather than infeasibility. The returned
/// weights sum to one and reconstruct the behavior within `1e-10` per
/// coordinate (weight vectors are certificates, not canonical forms: on
/// degenerate inputs many decompositions exist).
pub fn decompose(
    p: &Behavior,
    model: &PolytopeModel,
) -> Result<DecompositionWeights, PolytopeError> {
    p.check_normalized()?;
    p.check_no_signaling()?;
    check_constraints(p, model)?;
    if model.is_empty() {
        return Err(PolytopeError::EmptyModel);
    }

    // Variables: one weight per point. Constraints: 16 coordinates + total.
    let n = model.len();
    let mut rows = Vec::with_capacity(CELLS + 1);
    let mut rhs = Vec::with_capacity(CELLS + 1);
    for cell in 0..CELLS {
        rows.push(
            model
                .points()
                .iter()
                .map(|pt| pt.behavior.values()[cell])
                .collect::<Vec<f64>>(),
        );
        rhs.push(p.values()[cell]);
    }
    rows.push(vec![1.0; n]);
    rhs.push(1.0);

    let lp = LinearProgram {
        objective: vec![0.0; n],
        rows,
        rhs,
    };
    match solve_lp(&lp)? {
        LpOutcome::Optimal { x, .. } => {
            let mut weights = DecompositionWeights {
                weights: BTreeMap::new(),
            };
            for (pt, &w) in model.points().iter().zip(x.iter()) {
                if w > 0.0 {
                    weights.add(pt.label.clone(), w);
                }
            }
            weights.finish(model, p)
        }
        LpOutcome::Infeasible { margin } => Err(PolytopeError::NotInPolytope { margin }),
        LpOutcome::Unbounded => unreachable!("feasibility program has zero objective"),
    }
}

/// Cone-form input for the exact substitution decomposition: weights on the
/// maximizing PR box and on its 8 saturating locals (in
/// [`saturating_locals`] order), summing to one.
#[derive(Debug, Clone, Copy)]
pub struct ConeWeights {
    pub pr: f64,
    pub locals: [f64; 8],
}

impl ConeWeights {
    fn validate(&self) -> Result<(), PolytopeError> {
        let sum = self.pr + self.locals.iter().sum::<f64>();
        let nonneg = self.pr >= 0.0 && self.locals.iter().all(|&w| w >= 0.0);
        if !nonneg || (sum - 1.0).abs() > STRUCT_TOL {
            return Err(PolytopeError::BadConeWeights(sum));
        }
        Ok(())
    }

    fn behavior(&self, pr: &Behavior, locals: &[Behavior]) -> Behavior {
        let mut parts = vec![(self.pr, pr)];
        parts.extend(self.locals.iter().zip(locals.iter()).map(|(&w, l)| (w, l)));
        convex_combination(&parts)
    }
}

/// One substitution step: moves weight from `(PR, L_i)` onto the split point
/// `E_i`. Mirrors the two cases of the constructive hull argument: when the
/// local weight is large enough the PR weight is absorbed outright;
/// otherwise the local weight is exhausted and a reduced PR weight remains.
/// Returns the weight to place on `E_i`.
fn substitution_step(
    pr_weight: &mut f64,
    local_weight: &mut f64,
    local_value: f64,
    bound: f64,
    nsb: f64,
) -> f64 {
    let from_local = bound - local_value;
    let from_bound = nsb - bound;
    if from_local != 0.0 && *local_weight >= (from_bound / from_local) * *pr_weight {
        let placed = *pr_weight * (nsb - local_value) / from_local;
        *local_weight -= (from_bound / from_local) * *pr_weight;
        *pr_weight = 0.0;
        placed
    } else {
        let placed = *local_weight * (nsb - local_value) / from_bound;
        *pr_weight -= (from_local / from_bound) * *local_weight;
        *local_weight = 0.0;
        placed
    }
}

/// Decomposes a behavior given in cone form by the exact substitution
/// procedure instead of an LP.
///
/// For a single-bound model the PR weight is folded into the `E` points by
/// cycling through the saturating locals; the cycle provably terminates
/// before the locals run out whenever the input obeys the bound. For the
/// double-bound model, doubly-saturating `D` points absorb PR weight while
/// both a top and a bottom local still carry weight; once one side is
/// exhausted the remaining PR weight folds into that model's single-bound
/// points. Models of any other provenance are rejected
/// ([`PolytopeError::ConeFormUnsupported`]); use [`decompose`] instead.
pub fn decompose_cone(
    cone: &ConeWeights,
    model: &PolytopeModel,
) -> Result<DecompositionWeights, PolytopeError> {
    cone.validate()?;
    let mut out = DecompositionWeights {
        weights: BTreeMap::new(),
    };
    match *model.provenance() {
        Construction::SingleBound { pr_index } => {
            let [constraint] = model.constraints() else {
                return Err(PolytopeError::ConeFormUnsupported);
            };
            let summary = compute_bounds(constraint.functional())?;
            let pr = pr_box(pr_index)?;
            let locals = saturating_locals(pr_index)?;
            let target = cone.behavior(&pr, &locals);
            check_constraints(&target, model)?;

            let mut pr_weight = cone.pr;
            let mut local_weights = cone.locals;
            for (i, local) in locals.iter().enumerate() {
                if pr_weight <= 0.0 {
                    break;
                }
                let value = constraint.functional().evaluate(local);
                let placed = substitution_step(
                    &mut pr_weight,
                    &mut local_weights[i],
                    value,
                    constraint.bound(),
                    summary.nsb,
                );
                // At the local bound E_i merges into L_i and keeps its label.
                let label = if model.point(&format!("E{i}")).is_some() {
                    format!("E{i}")
                } else {
                    local_label(model, local)?
                };
                out.add(label, placed);
            }
            if pr_weight > DECOMPOSITION_TOL {
                return Err(PolytopeError::NotInPolytope { margin: pr_weight });
            }
            for (i, local) in locals.iter().enumerate() {
                if local_weights[i] > 0.0 {
                    out.add(local_label(model, local)?, local_weights[i]);
                }
            }
            out.finish(model, &target)
        }
        Construction::DoubleBound { alpha } => {
            if model.constraints().len() != 2 {
                return Err(PolytopeError::ConeFormUnsupported);
            }
            let pr = pr_box(0)?;
            let locals = saturating_locals(0)?;
            let target = cone.behavior(&pr, &locals);
            check_constraints(&target, model)?;

            // Split the cone weights by the top/bottom classification.
            let tilted = tilted_functional(alpha)?;
            let mut top: Vec<(usize, f64, &Behavior)> = Vec::new();
            let mut bot: Vec<(usize, f64, &Behavior)> = Vec::new();
            for (i, local) in locals.iter().enumerate() {
                let value = tilted.evaluate(local);
                if (value - 2.0).abs() <= STRUCT_TOL {
                    top.push((top.len(), cone.locals[i], local));
                } else {
                    bot.push((bot.len(), cone.locals[i], local));
                }
            }
            let (lambda_pr, lambda_top, lambda_bot) = double_point_coefficients(alpha)?;

            let mut pr_weight = cone.pr;
            // While possible, place doubly-saturating points over the first
            // top and bottom locals still carrying weight.
            loop {
                if pr_weight <= 0.0 {
                    break;
                }
                let Some(ti) = top.iter().position(|&(_, w, _)| w > 0.0) else {
                    break;
                };
                let Some(bj) = bot.iter().position(|&(_, w, _)| w > 0.0) else {
                    break;
                };
                let step = (pr_weight / lambda_pr)
                    .min(top[ti].1 / lambda_top)
                    .min(bot[bj].1 / lambda_bot);
                out.add(format!("D{}_{}", top[ti].0, bot[bj].0), step);
                pr_weight = (pr_weight - step * lambda_pr).max(0.0);
                top[ti].1 = (top[ti].1 - step * lambda_top).max(0.0);
                bot[bj].1 = (bot[bj].1 - step * lambda_bot).max(0.0);
            }

            // Fallback: single-bound substitution on whichever side remains.
            if pr_weight > 0.0 {
                let top_left = top.iter().any(|&(_, w, _)| w > 0.0);
                let (side, constraint_index, prefix) = if top_left {
                    (&mut top, 0, "EC")
                } else {
                    (&mut bot, 1, "ET")
                };
                let constraint = &model.constraints()[constraint_index];
                let summary = compute_bounds(constraint.functional())?;
                for (idx, weight, local) in side.iter_mut() {
                    if pr_weight <= 0.0 {
                        break;
                    }
                    let value = constraint.functional().evaluate(local);
                    let placed = substitution_step(
                        &mut pr_weight,
                        weight,
                        value,
                        constraint.bound(),
                        summary.nsb,
                    );
                    out.add(format!("{prefix}{idx}"), placed);
                }
            }
            if pr_weight > DECOMPOSITION_TOL {
                return Err(PolytopeError::NotInPolytope { margin: pr_weight });
            }
            for (_, weight, local) in top.iter().chain(bot.iter()) {
                if *weight > 0.0 {
                    out.add(local_label(model, local)?, *weight);
                }
            }
            out.finish(model, &target)
        }
        Construction::EightChsh | Construction::Custom(_) => {
            Err(PolytopeError::ConeFormUnsupported)
        }
    }
}

fn local_label(model: &PolytopeModel, local: &Behavior) -> Result<String, PolytopeError> {
    model
        .points()
        .iter()
        .find(|p| p.behavior.max_abs_diff(local) <= STRUCT_TOL)
        .map(|p| p.label.clone())
        .ok_or_else(|| PolytopeError::InvalidPoint {
            label: "<local>".into(),
            problem: "saturating local missing from model".into(),
        })
}

/// Extremality check for one point of a model.
#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub label: String,
    /// True when the membership LP against the remaining points is
    /// infeasible with margin at least [`EXTREMALITY_MARGIN`].
    pub extreme: bool,
    /// Infeasibility margin of the membership LP (0 when expressible).
    pub margin: f64,
}

/// Per-point extremality report.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalityReport {
    pub checks: Vec<PointCheck>,
}

impl ExtremalityReport {
    pub fn all_extreme(&self) -> bool {
        self.checks.iter().all(|c| c.extreme)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PointCheck> {
        self.checks.iter().filter(|c| !c.extreme)
    }
}

/// Checks, point by point, that no extreme point is a convex combination of
/// the others, via membership LPs. Failures are report entries, not errors.
pub fn verify_extremality(model: &PolytopeModel) -> Result<ExtremalityReport, PolytopeError> {
    let checks = model
        .points()
        .iter()
        .enumerate()
        .map(|(skip, point)| {
            let others: Vec<&Behavior> = model
                .points()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, p)| &p.behavior)
                .collect();
            let (extreme, margin) = match membership(&point.behavior, &others)? {
                LpOutcome::Infeasible { margin } => (margin >= EXTREMALITY_MARGIN, margin),
                LpOutcome::Optimal { .. } => (false, 0.0),
                LpOutcome::Unbounded => unreachable!("membership program is bounded"),
            };
            Ok(PointCheck {
                label: point.label.clone(),
                extreme,
                margin,
            })
        })
        .collect::<Result<Vec<_>, PolytopeError>>()?;
    Ok(ExtremalityReport { checks })
}

/// Feasibility LP: is `target` a convex combination of `points`?
fn membership(target: &Behavior, points: &[&Behavior]) -> Result<LpOutcome, SolverError> {
    let n = points.len();
    let mut rows = Vec::with_capacity(CELLS + 1);
    let mut rhs = Vec::with_capacity(CELLS + 1);
    for cell in 0..CELLS {
        rows.push(points.iter().map(|p| p.values()[cell]).collect());
        rhs.push(target.values()[cell]);
    }
    rows.push(vec![1.0; n]);
    rhs.push(1.0);
    solve_lp(&LinearProgram {
        objective: vec![0.0; n],
        rows,
        rhs,
    })
}
