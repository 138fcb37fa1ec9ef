//! Behaviors, Bell functionals, and the no-signaling polytope generators.
//!
//! A behavior is the vector of 16 conditional probabilities
//! `P(oA oB | sA sB)` of a (2,2,2) Bell experiment, stored row-major over
//! settings `[ab, ab', a'b, a'b']` and outcomes `[++, +0, 0+, 00]`. The
//! no-signaling set is the convex hull of 24 such vectors: 16 local
//! deterministic behaviors and 8 Popescu-Rohrlich (PR) boxes. This module
//! provides those generators together with the local-bound / no-signaling
//! bound machinery for arbitrary Bell functionals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of probability cells in a (2,2,2) behavior.
pub const CELLS: usize = 16;

/// Setting-pair labels in canonical row order.
pub const SETTING_LABELS: [&str; 4] = ["ab", "ab'", "a'b", "a'b'"];

/// Outcome-pair labels in canonical column order.
pub const OUTCOME_LABELS: [&str; 4] = ["++", "+0", "0+", "00"];

/// Absolute tolerance for structural checks on exactly representable data
/// (normalization, no-signaling, saturation of 0/1/half-valued points).
pub const STRUCT_TOL: f64 = 1e-12;

/// Absolute tolerance for checks downstream of iterative solvers.
pub const SOLVER_TOL: f64 = 1e-9;

/// Outcome bits per outcome-pair column, with `+` coded as 1 and `0` as 0.
const OUTCOME_BITS: [(u8, u8); 4] = [(1, 1), (1, 0), (0, 1), (0, 0)];

/// Flat cell index for a setting row and outcome column.
#[inline]
pub fn cell_index(setting: usize, outcome: usize) -> usize {
    debug_assert!(setting < 4 && outcome < 4);
    4 * setting + outcome
}

/// Human-readable label of a flat cell index, e.g. `"++|ab"`.
pub fn cell_label(index: usize) -> String {
    format!(
        "{}|{}",
        OUTCOME_LABELS[index % 4],
        SETTING_LABELS[index / 4]
    )
}

/// The canonical cell-label order used by the JSON table format.
pub fn canonical_order() -> Vec<String> {
    (0..CELLS).map(cell_label).collect()
}

#[derive(Debug, Error)]
pub enum BellError {
    #[error("probability {label} = {value} lies outside [0, 1]")]
    EntryOutOfRange { label: String, value: f64 },
    #[error("probabilities for setting {setting} sum to {sum:?}, expected 1")]
    RowNotNormalized { setting: String, sum: f64 },
    #[error("signaling marginal mismatch for {party} ({lhs} vs {rhs})")]
    Signaling { party: String, lhs: f64, rhs: f64 },
    #[error("non-finite coefficient at {label}")]
    NonFinite { label: String },
    #[error("degenerate Bell functional: LB = NSB = {bound}")]
    Degenerate { bound: f64 },
    #[error("PR box index {0} must lie in 0..8")]
    PrIndex(usize),
    #[error("tilted-functional weight alpha = {0} must be at least 1")]
    AlphaBelowOne(f64),
    #[error("alpha = {0} must exceed 1")]
    AlphaNotAboveOne(f64),
    #[error("local point {index} evaluates to {value}, expected 2 or 2*alpha")]
    UnexpectedSaturation { index: usize, value: f64 },
    #[error("expected {expected} behaviors, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("cell order mismatch at position {position}: {found:?}")]
    OrderMismatch { position: usize, found: String },
    #[error("expected {CELLS} values, got {0}")]
    WrongLength(usize),
}

/// JSON table form shared by [`Behavior`] and [`BellFunctional`]:
/// `{ "order": [...16 cell labels...], "values": [...16 numbers...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableJson {
    pub order: Vec<String>,
    pub values: Vec<f64>,
}

fn values_from_table(table: &TableJson) -> Result<[f64; CELLS], BellError> {
    if table.values.len() != CELLS {
        return Err(BellError::WrongLength(table.values.len()));
    }
    if table.order.len() != CELLS {
        return Err(BellError::OrderMismatch {
            position: table.order.len().min(CELLS),
            found: format!("order list of length {}", table.order.len()),
        });
    }
    for (k, label) in table.order.iter().enumerate() {
        if *label != cell_label(k) {
            return Err(BellError::OrderMismatch {
                position: k,
                found: label.clone(),
            });
        }
    }
    let mut values = [0.0; CELLS];
    values.copy_from_slice(&table.values);
    Ok(values)
}

/// The 16 conditional outcome probabilities of a (2,2,2) Bell experiment,
/// viewed as a point in R^16.
///
/// Public constructors validate entry range and the four row-normalization
/// equations; [`Behavior::no_signaling`] additionally enforces the four
/// marginal equalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableJson", into = "TableJson")]
pub struct Behavior {
    p: [f64; CELLS],
}

impl Behavior {
    /// Builds a behavior, validating entries and row normalization.
    pub fn new(values: [f64; CELLS]) -> Result<Self, BellError> {
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(-STRUCT_TOL..=1.0 + STRUCT_TOL).contains(&v) {
                return Err(BellError::EntryOutOfRange {
                    label: cell_label(k),
                    value: v,
                });
            }
        }
        for s in 0..4 {
            let sum: f64 = (0..4).map(|o| values[cell_index(s, o)]).sum();
            if (sum - 1.0).abs() > STRUCT_TOL {
                return Err(BellError::RowNotNormalized {
                    setting: SETTING_LABELS[s].to_string(),
                    sum,
                });
            }
        }
        Ok(Self { p: values })
    }

    /// [`Behavior::new`] plus the no-signaling marginal equalities.
    pub fn no_signaling(values: [f64; CELLS]) -> Result<Self, BellError> {
        let b = Self::new(values)?;
        b.check_no_signaling()?;
        Ok(b)
    }

    /// Skips validation; only for internal construction of points that are
    /// valid by arithmetic, and for lenient file parsing ahead of an audit.
    pub(crate) fn from_raw(values: [f64; CELLS]) -> Self {
        Self { p: values }
    }

    pub fn values(&self) -> &[f64; CELLS] {
        &self.p
    }

    /// Probability at a setting row (0..4) and outcome column (0..4).
    pub fn get(&self, setting: usize, outcome: usize) -> f64 {
        self.p[cell_index(setting, outcome)]
    }

    /// Checks row normalization and entry range without consuming the value.
    pub fn check_normalized(&self) -> Result<(), BellError> {
        Self::new(self.p).map(|_| ())
    }

    /// Verifies the four marginal equalities: Alice's marginal must not
    /// depend on Bob's setting and vice versa.
    pub fn check_no_signaling(&self) -> Result<(), BellError> {
        // (party, fixed setting, row pair, outcome columns forming the "+")
        // Alice's '+' marginal sums columns ++ and +0; Bob's sums ++ and 0+.
        let checks: [(&str, usize, usize, [usize; 2]); 4] = [
            ("Alice (setting a)", 0, 1, [0, 1]),
            ("Alice (setting a')", 2, 3, [0, 1]),
            ("Bob (setting b)", 0, 2, [0, 2]),
            ("Bob (setting b')", 1, 3, [0, 2]),
        ];
        for (party, s1, s2, cols) in checks {
            let lhs = self.get(s1, cols[0]) + self.get(s1, cols[1]);
            let rhs = self.get(s2, cols[0]) + self.get(s2, cols[1]);
            if (lhs - rhs).abs() > STRUCT_TOL {
                return Err(BellError::Signaling {
                    party: party.to_string(),
                    lhs,
                    rhs,
                });
            }
        }
        Ok(())
    }

    pub fn is_no_signaling(&self) -> bool {
        self.check_no_signaling().is_ok()
    }

    /// Largest coordinate-wise deviation from another behavior.
    pub fn max_abs_diff(&self, other: &Behavior) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<TableJson> for Behavior {
    type Error = BellError;
    fn try_from(table: TableJson) -> Result<Self, BellError> {
        Behavior::new(values_from_table(&table)?)
    }
}

impl From<Behavior> for TableJson {
    fn from(b: Behavior) -> TableJson {
        TableJson {
            order: canonical_order(),
            values: b.p.to_vec(),
        }
    }
}

/// A linear functional on behaviors, given by 16 coefficients in the same
/// cell order as [`Behavior`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableJson", into = "TableJson")]
pub struct BellFunctional {
    b: [f64; CELLS],
}

impl BellFunctional {
    pub fn new(coefficients: [f64; CELLS]) -> Result<Self, BellError> {
        for (k, &v) in coefficients.iter().enumerate() {
            if !v.is_finite() {
                return Err(BellError::NonFinite {
                    label: cell_label(k),
                });
            }
        }
        Ok(Self { b: coefficients })
    }

    pub fn coefficients(&self) -> &[f64; CELLS] {
        &self.b
    }

    /// The defining dot product `B . P`.
    pub fn evaluate(&self, p: &Behavior) -> f64 {
        self.b
            .iter()
            .zip(p.values().iter())
            .map(|(b, p)| b * p)
            .sum()
    }
}

impl TryFrom<TableJson> for BellFunctional {
    type Error = BellError;
    fn try_from(table: TableJson) -> Result<Self, BellError> {
        BellFunctional::new(values_from_table(&table)?)
    }
}

impl From<BellFunctional> for TableJson {
    fn from(b: BellFunctional) -> TableJson {
        TableJson {
            order: canonical_order(),
            values: b.b.to_vec(),
        }
    }
}

/// A single measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Plus,
    Zero,
}

impl Outcome {
    #[inline]
    fn bit(self) -> u8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Zero => 0,
        }
    }

    fn from_bit(bit: u8) -> Self {
        if bit & 1 == 1 {
            Outcome::Plus
        } else {
            Outcome::Zero
        }
    }
}

/// The local deterministic behavior where Alice answers `f_a`/`f_a_prime` on
/// settings a/a' and Bob answers `g_b`/`g_b_prime` on b/b'.
pub fn local_deterministic(
    f_a: Outcome,
    f_a_prime: Outcome,
    g_b: Outcome,
    g_b_prime: Outcome,
) -> Behavior {
    let f = [f_a.bit(), f_a_prime.bit()];
    let g = [g_b.bit(), g_b_prime.bit()];
    let mut p = [0.0; CELLS];
    for (sa, &fa) in f.iter().enumerate() {
        for (sb, &gb) in g.iter().enumerate() {
            let s = 2 * sa + sb;
            for (o, &(oa, ob)) in OUTCOME_BITS.iter().enumerate() {
                if oa == fa && ob == gb {
                    p[cell_index(s, o)] = 1.0;
                }
            }
        }
    }
    Behavior::from_raw(p)
}

/// Local deterministic behavior for a 4-bit index packing
/// `(f(a), f(a'), g(b), g(b'))` with `f(a)` as the most significant bit and
/// `+` coded as 1.
pub fn local_by_index(index: usize) -> Result<Behavior, BellError> {
    if index >= 16 {
        return Err(BellError::WrongCount {
            expected: 16,
            got: index,
        });
    }
    let k = index as u8;
    Ok(local_deterministic(
        Outcome::from_bit(k >> 3),
        Outcome::from_bit(k >> 2),
        Outcome::from_bit(k >> 1),
        Outcome::from_bit(k),
    ))
}

/// All 16 local deterministic behaviors in index order.
pub fn all_locals() -> Vec<Behavior> {
    (0..16).map(|k| local_by_index(k).unwrap()).collect()
}

/// The PR box with index `k` in 0..8.
///
/// Writing settings and outcomes as bits (`a,b,0 -> 0`; `a',b',+ -> 1`), the
/// box puts probability 1/2 on outcome pairs satisfying
/// `oA xor oB = sA.sB xor mu.sA xor nu.sB xor gamma`, where `(mu, nu, gamma)`
/// is the 3-bit expansion of `k` (`mu` most significant). Index 0 is the
/// canonical box correlated on ab, ab', a'b and anti-correlated on a'b'.
pub fn pr_box(k: usize) -> Result<Behavior, BellError> {
    if k >= 8 {
        return Err(BellError::PrIndex(k));
    }
    let (mu, nu, gamma) = ((k >> 2) as u8 & 1, (k >> 1) as u8 & 1, k as u8 & 1);
    let mut p = [0.0; CELLS];
    for sa in 0..2u8 {
        for sb in 0..2u8 {
            let s = (2 * sa + sb) as usize;
            let parity = (sa & sb) ^ (mu & sa) ^ (nu & sb) ^ gamma;
            for (o, &(oa, ob)) in OUTCOME_BITS.iter().enumerate() {
                if oa ^ ob == parity {
                    p[cell_index(s, o)] = 0.5;
                }
            }
        }
    }
    Ok(Behavior::from_raw(p))
}

/// All 8 PR boxes in index order.
pub fn all_pr_boxes() -> Vec<Behavior> {
    (0..8).map(|k| pr_box(k).unwrap()).collect()
}

/// The 24 extreme points of the no-signaling set with their canonical labels
/// `L0..L15` and `PR0..PR7`.
pub fn ns_extreme_points() -> Vec<(String, Behavior)> {
    let mut points: Vec<(String, Behavior)> = all_locals()
        .into_iter()
        .enumerate()
        .map(|(i, b)| (format!("L{i}"), b))
        .collect();
    points.extend(
        all_pr_boxes()
            .into_iter()
            .enumerate()
            .map(|(k, b)| (format!("PR{k}"), b)),
    );
    points
}

/// Crate-internal convex combination; the result is a valid behavior
/// whenever the parts are and the weights are a convex combination.
pub(crate) fn convex_combination(parts: &[(f64, &Behavior)]) -> Behavior {
    let mut p = [0.0; CELLS];
    for (w, b) in parts {
        for (cell, v) in p.iter_mut().zip(b.values().iter()) {
            *cell += w * v;
        }
    }
    debug_assert!({
        let b = Behavior::from_raw(p);
        b.check_normalized().is_ok() && b.is_no_signaling()
    });
    Behavior::from_raw(p)
}

/// The CHSH Bell functional: coefficient `+1` on outcome-agreeing cells and
/// `-1` otherwise for settings ab, ab', a'b, with the signs flipped on a'b'.
pub fn chsh_functional() -> BellFunctional {
    tilted_functional(1.0).unwrap()
}

/// The tilted CHSH functional: the ab and ab' rows of the CHSH coefficients
/// scaled by `alpha` (>= 1; `alpha = 1` reduces to CHSH).
pub fn tilted_functional(alpha: f64) -> Result<BellFunctional, BellError> {
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(BellError::AlphaBelowOne(alpha));
    }
    let mut b = [0.0; CELLS];
    for s in 0..4 {
        let row_sign = if s == 3 { -1.0 } else { 1.0 };
        let row_weight = if s < 2 { alpha } else { 1.0 };
        for (o, &(oa, ob)) in OUTCOME_BITS.iter().enumerate() {
            let agree = if oa == ob { 1.0 } else { -1.0 };
            b[cell_index(s, o)] = row_sign * row_weight * agree;
        }
    }
    BellFunctional::new(b)
}

/// The quantum upper bound `2 sqrt(1 + alpha^2)` of the tilted functional
/// (equal to `2 sqrt 2` at `alpha = 1`).
pub fn tilted_bound(alpha: f64) -> f64 {
    2.0 * (1.0 + alpha * alpha).sqrt()
}

/// The version of the CHSH functional maximized by `pr_box(k)`.
///
/// Obtained by applying to the CHSH coefficients the same local outcome
/// relabeling that maps `pr_box(0)` onto `pr_box(k)`: Alice flips her
/// outcome when `mu.sA xor gamma = 1` and Bob flips when `nu.sB = 1`.
pub fn chsh_version(pr_index: usize) -> Result<BellFunctional, BellError> {
    if pr_index >= 8 {
        return Err(BellError::PrIndex(pr_index));
    }
    let k = pr_index as u8;
    let (mu, nu, gamma) = ((k >> 2) & 1, (k >> 1) & 1, k & 1);
    let chsh = chsh_functional();
    let mut b = [0.0; CELLS];
    for sa in 0..2u8 {
        for sb in 0..2u8 {
            let s = (2 * sa + sb) as usize;
            let flip_a = (mu & sa) ^ gamma;
            let flip_b = nu & sb;
            for (o, &(oa, ob)) in OUTCOME_BITS.iter().enumerate() {
                let relabeled = OUTCOME_BITS
                    .iter()
                    .position(|&(xa, xb)| xa == oa ^ flip_a && xb == ob ^ flip_b)
                    .unwrap();
                b[cell_index(s, o)] = chsh.coefficients()[cell_index(s, relabeled)];
            }
        }
    }
    BellFunctional::new(b)
}

/// Local and no-signaling bounds of a Bell functional, together with the
/// index of the unique PR box attaining the no-signaling bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsSummary {
    pub lb: f64,
    pub nsb: f64,
    pub max_pr_index: usize,
}

/// Maximizes a functional over the local set and the no-signaling set.
///
/// Both maxima are attained at extreme points, so they reduce to scans over
/// the 24 generators. Functionals with `LB = NSB` are rejected as
/// [`BellError::Degenerate`]: no Tsirelson bound can separate anything for
/// them. When `LB < NSB`, exactly one PR box exceeds the local bound and it
/// attains the no-signaling bound.
pub fn compute_bounds(b: &BellFunctional) -> Result<BoundsSummary, BellError> {
    let lb = all_locals()
        .iter()
        .map(|l| b.evaluate(l))
        .fold(f64::NEG_INFINITY, f64::max);
    let pr_values: Vec<f64> = all_pr_boxes().iter().map(|p| b.evaluate(p)).collect();
    let (max_pr_index, &pr_max) = pr_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let nsb = lb.max(pr_max);
    if nsb - lb <= STRUCT_TOL {
        return Err(BellError::Degenerate { bound: lb });
    }
    debug_assert_eq!(
        pr_values.iter().filter(|&&v| v > lb + STRUCT_TOL).count(),
        1,
        "exactly one PR box may exceed the local bound"
    );
    Ok(BoundsSummary {
        lb,
        nsb,
        max_pr_index,
    })
}

/// The 8 local deterministic behaviors saturating the CHSH version maximized
/// by `pr_box(pr_index)`, in increasing local-index order.
///
/// Each of the 8 has its single support cell outside the PR box support in a
/// distinct location.
pub fn saturating_locals(pr_index: usize) -> Result<Vec<Behavior>, BellError> {
    let version = chsh_version(pr_index)?;
    let locals: Vec<Behavior> = all_locals()
        .into_iter()
        .filter(|l| (version.evaluate(l) - 2.0).abs() <= STRUCT_TOL)
        .collect();
    if locals.len() != 8 {
        return Err(BellError::WrongCount {
            expected: 8,
            got: locals.len(),
        });
    }
    Ok(locals)
}

/// Splits the 8 saturating locals by their tilted-functional value: the four
/// at `2` ("top") and the four at `2 alpha` ("bot"). Requires `alpha > 1`.
#[allow(clippy::type_complexity)]
pub fn classify_top_bottom(
    locals: &[Behavior],
    alpha: f64,
) -> Result<(Vec<Behavior>, Vec<Behavior>), BellError> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(BellError::AlphaNotAboveOne(alpha));
    }
    let tilted = tilted_functional(alpha)?;
    let mut top = Vec::new();
    let mut bot = Vec::new();
    for (index, l) in locals.iter().enumerate() {
        let value = tilted.evaluate(l);
        if (value - 2.0).abs() <= STRUCT_TOL {
            top.push(l.clone());
        } else if (value - 2.0 * alpha).abs() <= STRUCT_TOL {
            bot.push(l.clone());
        } else {
            return Err(BellError::UnexpectedSaturation { index, value });
        }
    }
    if top.len() != 4 || bot.len() != 4 {
        return Err(BellError::WrongCount {
            expected: 4,
            got: top.len(),
        });
    }
    Ok((top, bot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_pr() -> [f64; CELLS] {
        [
            0.5, 0.0, 0.0, 0.5, //
            0.5, 0.0, 0.0, 0.5, //
            0.5, 0.0, 0.0, 0.5, //
            0.0, 0.5, 0.5, 0.0,
        ]
    }

    #[test]
    fn chsh_coefficients_match_table() {
        let b = chsh_functional();
        let expected: [f64; CELLS] = [
            1.0, -1.0, -1.0, 1.0, //
            1.0, -1.0, -1.0, 1.0, //
            1.0, -1.0, -1.0, 1.0, //
            -1.0, 1.0, 1.0, -1.0,
        ];
        assert_eq!(b.coefficients(), &expected);
    }

    #[test]
    fn tilted_coefficients_match_table() {
        let b = tilted_functional(2.0).unwrap();
        let expected: [f64; CELLS] = [
            2.0, -2.0, -2.0, 2.0, //
            2.0, -2.0, -2.0, 2.0, //
            1.0, -1.0, -1.0, 1.0, //
            -1.0, 1.0, 1.0, -1.0,
        ];
        assert_eq!(b.coefficients(), &expected);
        assert_eq!(tilted_functional(1.0).unwrap(), chsh_functional());
        assert!(tilted_functional(0.9).is_err());
    }

    #[test]
    fn canonical_pr_box_matches_table() {
        let pr = pr_box(0).unwrap();
        assert_eq!(pr.values(), &table1_pr());
        assert!(pr_box(8).is_err());
    }

    #[test]
    fn evaluate_anchors() {
        let chsh = chsh_functional();
        let pr = pr_box(0).unwrap();
        let all_plus =
            local_deterministic(Outcome::Plus, Outcome::Plus, Outcome::Plus, Outcome::Plus);
        assert_eq!(chsh.evaluate(&pr), 4.0);
        assert_eq!(chsh.evaluate(&all_plus), 2.0);
        let zero = BellFunctional::new([0.0; CELLS]).unwrap();
        assert_eq!(zero.evaluate(&pr), 0.0);
    }

    #[test]
    fn all_plus_local_has_unit_first_column() {
        let b = local_deterministic(Outcome::Plus, Outcome::Plus, Outcome::Plus, Outcome::Plus);
        for s in 0..4 {
            assert_eq!(b.get(s, 0), 1.0);
        }
        let z = local_deterministic(Outcome::Zero, Outcome::Zero, Outcome::Zero, Outcome::Zero);
        for s in 0..4 {
            assert_eq!(z.get(s, 3), 1.0);
        }
    }

    #[test]
    fn generators_are_distinct_and_no_signaling() {
        let mut all = all_locals();
        all.extend(all_pr_boxes());
        assert_eq!(all.len(), 24);
        for (i, a) in all.iter().enumerate() {
            a.check_normalized().unwrap();
            a.check_no_signaling().unwrap();
            for b in &all[i + 1..] {
                assert!(a.max_abs_diff(b) > 0.4);
            }
        }
    }

    #[test]
    fn chsh_values_over_pr_boxes() {
        // Brute force over the 8 boxes: one box at the no-signaling maximum 4,
        // one at -4, the rest at 0.
        let chsh = chsh_functional();
        let mut values: Vec<f64> = all_pr_boxes().iter().map(|p| chsh.evaluate(p)).collect();
        values.sort_by(f64::total_cmp);
        assert_eq!(values, vec![-4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn bounds_for_chsh_and_tilted() {
        let chsh = compute_bounds(&chsh_functional()).unwrap();
        assert_eq!(chsh.lb, 2.0);
        assert_eq!(chsh.nsb, 4.0);
        assert_eq!(chsh.max_pr_index, 0);

        let tilted = compute_bounds(&tilted_functional(2.0).unwrap()).unwrap();
        assert_eq!(tilted.lb, 4.0);
        assert_eq!(tilted.nsb, 6.0);
        assert_eq!(tilted.max_pr_index, 0);

        let zero = BellFunctional::new([0.0; CELLS]).unwrap();
        assert!(matches!(
            compute_bounds(&zero),
            Err(BellError::Degenerate { .. })
        ));
    }

    #[test]
    fn each_version_is_maximized_by_its_box() {
        for k in 0..8 {
            let version = chsh_version(k).unwrap();
            let summary = compute_bounds(&version).unwrap();
            assert_eq!(summary.lb, 2.0);
            assert_eq!(summary.nsb, 4.0);
            assert_eq!(summary.max_pr_index, k);
        }
    }

    #[test]
    fn saturating_locals_have_distinct_extra_cells() {
        for k in 0..8 {
            let version = chsh_version(k).unwrap();
            let pr = pr_box(k).unwrap();
            let locals = saturating_locals(k).unwrap();
            let mut extra_cells = Vec::new();
            for l in &locals {
                assert_eq!(version.evaluate(l), 2.0);
                let cells: Vec<usize> = (0..CELLS)
                    .filter(|&c| l.values()[c] == 1.0 && pr.values()[c] == 0.0)
                    .collect();
                assert_eq!(cells.len(), 1, "one support cell outside the PR box");
                extra_cells.push(cells[0]);
            }
            extra_cells.sort_unstable();
            extra_cells.dedup();
            assert_eq!(extra_cells.len(), 8);
        }
    }

    #[test]
    fn saturating_locals_include_all_plus_for_canonical_box() {
        let all_plus =
            local_deterministic(Outcome::Plus, Outcome::Plus, Outcome::Plus, Outcome::Plus);
        assert!(saturating_locals(0).unwrap().iter().any(|l| l == &all_plus));
    }

    #[test]
    fn top_bottom_partition_at_alpha_two() {
        let locals = saturating_locals(0).unwrap();
        let (top, bot) = classify_top_bottom(&locals, 2.0).unwrap();
        let tilted = tilted_functional(2.0).unwrap();
        let mut values: Vec<f64> = locals.iter().map(|l| tilted.evaluate(l)).collect();
        values.sort_by(f64::total_cmp);
        assert_eq!(values, vec![2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0]);
        assert_eq!(top.len(), 4);
        assert_eq!(bot.len(), 4);
        let all_plus =
            local_deterministic(Outcome::Plus, Outcome::Plus, Outcome::Plus, Outcome::Plus);
        assert!(bot.iter().any(|l| l == &all_plus));
        assert!(classify_top_bottom(&locals, 1.0).is_err());
        // The partition stays well-defined arbitrarily close to alpha = 1.
        let (top, bot) = classify_top_bottom(&locals, 1.0 + 1e-6).unwrap();
        assert_eq!((top.len(), bot.len()), (4, 4));
    }

    #[test]
    fn behavior_validation_errors() {
        let mut values = table1_pr();
        values[0] = 0.6;
        assert!(matches!(
            Behavior::new(values),
            Err(BellError::RowNotNormalized { .. })
        ));
        let mut values = table1_pr();
        values[0] = -0.1;
        assert!(matches!(
            Behavior::new(values),
            Err(BellError::EntryOutOfRange { .. })
        ));
        // signaling: valid rows, mismatched marginals
        let signaling: [f64; CELLS] = [
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        ];
        assert!(Behavior::new(signaling).is_ok());
        assert!(matches!(
            Behavior::no_signaling(signaling),
            Err(BellError::Signaling { .. })
        ));
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let pr = pr_box(3).unwrap();
        let json = serde_json::to_string(&pr).unwrap();
        assert!(json.contains("\"order\""));
        let back: Behavior = serde_json::from_str(&json).unwrap();
        for (a, b) in pr.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let f = tilted_functional(1.5).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: BellFunctional = serde_json::from_str(&json).unwrap();
        assert_eq!(&f, &back);
    }

    #[test]
    fn json_rejects_scrambled_order() {
        let pr = pr_box(0).unwrap();
        let mut table: TableJson = pr.into();
        table.order.swap(0, 1);
        let err = Behavior::try_from(table).unwrap_err();
        assert!(matches!(err, BellError::OrderMismatch { position: 0, .. }));
    }
}
