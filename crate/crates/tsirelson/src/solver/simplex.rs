//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0` on small dense data (the
//! membership queries here have at most 17 rows and ~100 columns). Bland's
//! pivoting rule makes the method cycling-free and deterministic, which
//! matters more than speed at this size.

use super::SolverError;

/// Pivot / feasibility tolerance.
const EPS: f64 = 1e-9;

/// A standard-form linear program: minimize `objective . x` subject to
/// `rows . x = rhs` and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Result of a simplex run. `Infeasible` and `Unbounded` are answers, not
/// failures: membership queries rely on the infeasible case.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// Phase-I optimum: the artificial weight that cannot be eliminated.
    Infeasible {
        margin: f64,
    },
    Unbounded,
}

struct Tableau {
    /// m rows of length n + m + 1 (structural, artificial, rhs).
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row of the same width (rhs slot unused).
    cost: Vec<f64>,
    /// Basic variable per row.
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.cost.len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cost.len();
        let inv = 1.0 / self.rows[row][col];
        for j in 0..width {
            self.rows[row][j] *= inv;
        }
        self.rows[row][col] = 1.0;
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col];
            if factor != 0.0 {
                for j in 0..width {
                    self.rows[i][j] -= factor * self.rows[row][j];
                }
                self.rows[i][col] = 0.0;
            }
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            for j in 0..width {
                self.cost[j] -= factor * self.rows[row][j];
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs simplex on the current cost row, entering only columns < `limit`.
    /// Returns false if an unbounded ray was found.
    fn optimize(&mut self, limit: usize) -> bool {
        let rhs = self.rhs_col();
        loop {
            // Bland: entering column = smallest index with negative reduced cost.
            let Some(col) = (0..limit).find(|&j| self.cost[j] < -EPS) else {
                return true;
            };
            // Ratio test; ties broken by smallest basic-variable index.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rows[i][rhs].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((best_row, best_ratio)) => {
                            ratio < best_ratio - 0.0
                                || (ratio == best_ratio && self.basis[i] < self.basis[best_row])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

/// Solves the program by two-phase simplex. Feasibility is certified to
/// 1e-9: residual artificial weight above that threshold reports
/// [`LpOutcome::Infeasible`] with the weight as margin.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, SolverError> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    if lp.rhs.len() != m {
        return Err(SolverError::DimensionMismatch(format!(
            "{m} rows but {} rhs entries",
            lp.rhs.len()
        )));
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if row.len() != n {
            return Err(SolverError::DimensionMismatch(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    let finite = lp.objective.iter().all(|v| v.is_finite())
        && lp.rhs.iter().all(|v| v.is_finite())
        && lp.rows.iter().flatten().all(|v| v.is_finite());
    if !finite {
        return Err(SolverError::InvalidProgram("non-finite input".into()));
    }

    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width];
        for (j, &v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[n + i] = 1.0;
        t[width - 1] = sign * lp.rhs[i];
        rows.push(t);
    }

    // Phase I: minimize the artificial sum. With the artificial basis, the
    // reduced costs over structural columns are the negated column sums.
    let mut cost = vec![0.0; width];
    for j in 0..n {
        cost[j] = -rows.iter().map(|r| r[j]).sum::<f64>();
    }
    let mut tableau = Tableau {
        rows,
        cost,
        basis: (n..n + m).collect(),
    };
    tableau.optimize(n);
    let rhs = tableau.rhs_col();
    let infeasibility: f64 = tableau
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= n)
        .map(|(i, _)| tableau.rows[i][rhs].max(0.0))
        .sum();
    if infeasibility > EPS {
        return Ok(LpOutcome::Infeasible {
            margin: infeasibility,
        });
    }

    // Drive remaining zero-level artificials out of the basis; rows that
    // offer no structural pivot are redundant and dropped.
    let mut row = 0;
    while row < tableau.rows.len() {
        if tableau.basis[row] >= n {
            match (0..n).find(|&j| tableau.rows[row][j].abs() > EPS) {
                Some(col) => tableau.pivot(row, col),
                None => {
                    tableau.rows.remove(row);
                    tableau.basis.remove(row);
                    continue;
                }
            }
        }
        row += 1;
    }

    // Phase II: reduced costs of the original objective for the current basis.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.objective);
    for (row, &basic) in tableau.rows.iter().zip(&tableau.basis) {
        let cb = lp.objective[basic];
        if cb != 0.0 {
            for (c, v) in cost.iter_mut().zip(row) {
                *c -= cb * v;
            }
        }
    }
    for b in &tableau.basis {
        cost[*b] = 0.0;
    }
    tableau.cost = cost;
    if !tableau.optimize(n) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (i, &b) in tableau.basis.iter().enumerate() {
        if b < n {
            x[b] = tableau.rows[i][rhs].max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, objective })
}
