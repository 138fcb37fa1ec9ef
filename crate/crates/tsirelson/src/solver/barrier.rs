//! Log-barrier path following for weighted log-sum maximization.
//!
//! Maximizes `sum_i q_i ln(x_i)` over `x >= 0`, `A x <= 1` with `q >= 0`
//! summing to one and `A` nonnegative. The barrier subproblem at parameter
//! `t` maximizes
//!
//! ```text
//! phi_t(x) = t * sum_i q_i ln(x_i) + sum_i ln(x_i) + sum_j ln(1 - a_j . x)
//! ```
//!
//! by damped Newton steps with an exact line search, then multiplies `t` by
//! 10 and re-centers, warm-starting from the previous iterate. Every centering
//! as well as the schedule is deterministic, so identical inputs produce
//! bit-identical solutions. The Newton systems are solved through a QR
//! factorization of the stacked scaled matrix rather than by forming the
//! Hessian, which keeps the solve stable when active-constraint slacks get
//! tiny near convergence.

use std::io::Write;

use super::SolverError;

/// Problem dimension: one value per behavior cell.
pub const DIM: usize = 16;

/// When set to a writable path, every solve appends its iterate trace there
/// as CSV (`outer,t,newton_step,objective,decrement_sq,step`).
pub const TRACE_ENV: &str = "TSIRELSON_SOLVER_TRACE";

const T_MULTIPLIER: f64 = 10.0;
const MAX_OUTER: usize = 60;
const MAX_NEWTON: usize = 100;
/// Newton decrement threshold (squared) for ending a centering.
const NEWTON_DECREMENT_SQ: f64 = 2e-10;
/// Fraction of the distance to the barrier boundary the line search may take.
const BOUNDARY_FRACTION: f64 = 0.995;
/// Strictly feasible start: `A . 1 <= 1` row-wise, so shrinking a little
/// clears every constraint.
const START_VALUE: f64 = 1.0 - 1e-3;

/// Maximize `sum q_i ln(x_i)` subject to `rows . x <= 1`, `x >= 0`.
#[derive(Debug, Clone)]
pub struct ConcaveProgram {
    weights: [f64; DIM],
    rows: Vec<[f64; DIM]>,
}

impl ConcaveProgram {
    /// Validates: weights nonnegative and summing to 1, rows nonnegative and
    /// finite, and every coordinate with positive weight constrained by at
    /// least one row (otherwise the objective is unbounded).
    pub fn new(weights: [f64; DIM], rows: Vec<[f64; DIM]>) -> Result<Self, SolverError> {
        let mut sum = 0.0;
        for (i, &q) in weights.iter().enumerate() {
            if !q.is_finite() || q < 0.0 {
                return Err(SolverError::InvalidProgram(format!(
                    "objective weight {i} = {q}"
                )));
            }
            sum += q;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SolverError::InvalidProgram(format!(
                "objective weights sum to {sum}, expected 1"
            )));
        }
        for (j, row) in rows.iter().enumerate() {
            for (i, &a) in row.iter().enumerate() {
                if !a.is_finite() || a < 0.0 {
                    return Err(SolverError::InvalidProgram(format!(
                        "constraint entry ({j}, {i}) = {a}"
                    )));
                }
            }
        }
        for i in 0..DIM {
            let covered = rows.iter().any(|row| row[i] > 0.0);
            if !covered && weights[i] > 0.0 {
                return Err(SolverError::InvalidProgram(format!(
                    "coordinate {i} has positive weight but no constraint touches it; \
                     the objective is unbounded"
                )));
            }
        }
        Ok(Self { weights, rows })
    }

    pub fn weights(&self) -> &[f64; DIM] {
        &self.weights
    }

    pub fn rows(&self) -> &[[f64; DIM]] {
        &self.rows
    }

    /// Coordinates that appear in some constraint; the rest are fixed at 1.
    fn active_mask(&self) -> [bool; DIM] {
        let mut mask = [false; DIM];
        for (i, m) in mask.iter_mut().enumerate() {
            *m = self.rows.iter().any(|row| row[i] > 0.0);
        }
        mask
    }

    pub fn objective(&self, x: &[f64; DIM]) -> f64 {
        self.weights
            .iter()
            .zip(x.iter())
            .filter(|(&q, _)| q > 0.0)
            .map(|(&q, &v)| q * v.ln())
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct ConcaveSolution {
    pub x: [f64; DIM],
    pub objective: f64,
    /// Multipliers for the `rows . x <= 1` constraints at the final barrier
    /// parameter; dual-feasible up to Newton tolerance.
    pub dual: Vec<f64>,
    /// Value of the Lagrangian dual at `dual`; an upper bound on the optimum.
    pub dual_objective: f64,
    /// Certified optimality gap `dual_objective - objective`.
    pub gap: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
}

struct Workspace {
    active: Vec<usize>,
    /// QR staging matrix, (m + n_active) x n_active, row-major.
    g: Vec<f64>,
    h: Vec<f64>,
    slack: Vec<f64>,
    row_dot_d: Vec<f64>,
    trace: Option<std::fs::File>,
}

/// Debug iterate trace, enabled by the `TSIRELSON_SOLVER_TRACE` env var.
fn trace_file() -> Option<std::fs::File> {
    let path = std::env::var_os(TRACE_ENV)?;
    if path.is_empty() {
        return None;
    }
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .ok()
}

/// Householder QR least squares: minimizes `|G d - h|` for row-major `G`
/// with `rows >= cols`. Overwrites both arguments.
fn lstsq(g: &mut [f64], h: &mut [f64], rows: usize, cols: usize) -> Option<Vec<f64>> {
    for k in 0..cols {
        let mut norm_sq = 0.0;
        for r in k..rows {
            let v = g[r * cols + k];
            norm_sq += v * v;
        }
        if !(norm_sq.is_finite() && norm_sq > 0.0) {
            return None;
        }
        let norm = norm_sq.sqrt();
        let pivot = g[k * cols + k];
        let alpha = if pivot >= 0.0 { -norm } else { norm };
        // Householder vector v = column - alpha e_k, applied implicitly.
        let vk = pivot - alpha;
        let mut vnorm_sq = vk * vk;
        for r in k + 1..rows {
            let v = g[r * cols + k];
            vnorm_sq += v * v;
        }
        if vnorm_sq == 0.0 {
            continue;
        }
        g[k * cols + k] = vk;
        for j in k + 1..cols {
            let mut dot = 0.0;
            for r in k..rows {
                dot += g[r * cols + k] * g[r * cols + j];
            }
            let scale = 2.0 * dot / vnorm_sq;
            for r in k..rows {
                g[r * cols + j] -= scale * g[r * cols + k];
            }
        }
        let mut dot = 0.0;
        for r in k..rows {
            dot += g[r * cols + k] * h[r];
        }
        let scale = 2.0 * dot / vnorm_sq;
        for r in k..rows {
            h[r] -= scale * g[r * cols + k];
        }
        g[k * cols + k] = alpha;
    }
    // Back-substitute R d = h[0..cols].
    let mut d = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut v = h[k];
        for j in k + 1..cols {
            v -= g[k * cols + j] * d[j];
        }
        let r = g[k * cols + k];
        if r == 0.0 || !r.is_finite() {
            return None;
        }
        d[k] = v / r;
        if !d[k].is_finite() {
            return None;
        }
    }
    Some(d)
}

/// Solves the program by barrier path following.
///
/// `tol` bounds both the per-constraint complementary slackness and the
/// certified duality gap at exit; the default used by the PEF optimizer is
/// 1e-8. Errors with [`SolverError::MaxIterations`] carrying the residual
/// gap when the schedule is exhausted, and [`SolverError::NumericalBreakdown`]
/// if a Newton system stops being solvable.
pub fn solve_concave(prog: &ConcaveProgram, tol: f64) -> Result<ConcaveSolution, SolverError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SolverError::InvalidProgram(format!("tolerance {tol}")));
    }
    let m = prog.rows.len();
    let mask = prog.active_mask();
    let active: Vec<usize> = (0..DIM).filter(|&i| mask[i]).collect();
    let n = active.len();
    if n == 0 {
        // Nothing is constrained, so nothing carries weight either.
        return Ok(ConcaveSolution {
            x: [1.0; DIM],
            objective: 0.0,
            dual: vec![],
            dual_objective: 0.0,
            gap: 0.0,
            outer_iterations: 0,
            newton_steps: 0,
        });
    }

    let mut ws = Workspace {
        active,
        g: vec![0.0; (m + n) * n],
        h: vec![0.0; m + n],
        slack: vec![0.0; m],
        row_dot_d: vec![0.0; m],
        trace: trace_file(),
    };
    if let Some(file) = &mut ws.trace {
        let _ = writeln!(file, "outer,t,newton_step,objective,decrement_sq,step");
    }

    let mut x = [1.0; DIM];
    for &i in &ws.active {
        x[i] = START_VALUE;
    }
    let mut t = 1.0;
    let mut newton_steps = 0;
    let barrier_count = (m + n) as f64;

    for outer in 0..MAX_OUTER {
        center(prog, &mut x, t, outer, &mut ws, &mut newton_steps)?;
        if barrier_count / t <= tol && 1.0 / t <= tol {
            let (dual, dual_objective) = dual_point(prog, &x, t);
            let objective = prog.objective(&x);
            return Ok(ConcaveSolution {
                x,
                objective,
                gap: dual_objective - objective,
                dual,
                dual_objective,
                outer_iterations: outer + 1,
                newton_steps,
            });
        }
        t *= T_MULTIPLIER;
    }
    Err(SolverError::MaxIterations {
        gap: barrier_count / t,
        outer: MAX_OUTER,
    })
}

fn slacks(prog: &ConcaveProgram, x: &[f64; DIM], out: &mut [f64]) {
    for (j, row) in prog.rows.iter().enumerate() {
        let mut dot = 0.0;
        for i in 0..DIM {
            dot += row[i] * x[i];
        }
        out[j] = 1.0 - dot;
    }
}

/// Newton-centers `phi_t` at fixed `t`, in place.
fn center(
    prog: &ConcaveProgram,
    x: &mut [f64; DIM],
    t: f64,
    outer: usize,
    ws: &mut Workspace,
    newton_steps: &mut usize,
) -> Result<(), SolverError> {
    let m = prog.rows.len();
    let n = ws.active.len();
    for _ in 0..MAX_NEWTON {
        slacks(prog, x, &mut ws.slack);

        // Gradient over active coordinates.
        let mut grad = vec![0.0; n];
        for (k, &i) in ws.active.iter().enumerate() {
            let mut g = (t * prog.weights[i] + 1.0) / x[i];
            for (j, row) in prog.rows.iter().enumerate() {
                if row[i] != 0.0 {
                    g -= row[i] / ws.slack[j];
                }
            }
            grad[k] = g;
        }

        // Stacked scaled matrix: H = G^T G with
        //   G = [ diag(sqrt(t q + 1) / x) ; rows / slack ].
        ws.g.iter_mut().for_each(|v| *v = 0.0);
        for (k, &i) in ws.active.iter().enumerate() {
            ws.g[k * n + k] = (t * prog.weights[i] + 1.0).sqrt() / x[i];
        }
        for (j, row) in prog.rows.iter().enumerate() {
            for (k, &i) in ws.active.iter().enumerate() {
                ws.g[(n + j) * n + k] = row[i] / ws.slack[j];
            }
        }
        // Right-hand side [ D^{-1/2} grad ; 0 ] solves G^T (G d) = grad.
        for (k, &i) in ws.active.iter().enumerate() {
            ws.h[k] = grad[k] * x[i] / (t * prog.weights[i] + 1.0).sqrt();
        }
        ws.h[n..n + m].iter_mut().for_each(|v| *v = 0.0);

        let d = lstsq(&mut ws.g, &mut ws.h[..n + m], n + m, n)
            .ok_or_else(|| SolverError::NumericalBreakdown("Newton solve failed".into()))?;

        let decrement_sq: f64 = grad.iter().zip(d.iter()).map(|(g, d)| g * d).sum();
        if !decrement_sq.is_finite() {
            return Err(SolverError::NumericalBreakdown(
                "non-finite Newton decrement".into(),
            ));
        }
        if decrement_sq <= NEWTON_DECREMENT_SQ {
            return Ok(());
        }

        // Maximum step keeping x > 0 and all slacks > 0.
        for (j, row) in prog.rows.iter().enumerate() {
            let mut dot = 0.0;
            for (k, &i) in ws.active.iter().enumerate() {
                dot += row[i] * d[k];
            }
            ws.row_dot_d[j] = dot;
        }
        let mut step_max = f64::INFINITY;
        for (k, &i) in ws.active.iter().enumerate() {
            if d[k] < 0.0 {
                step_max = step_max.min(-x[i] / d[k]);
            }
        }
        for j in 0..m {
            if ws.row_dot_d[j] > 0.0 {
                step_max = step_max.min(ws.slack[j] / ws.row_dot_d[j]);
            }
        }
        let hi = if step_max.is_finite() {
            BOUNDARY_FRACTION * step_max
        } else {
            1.0
        };
        let step = line_search(prog, x, t, ws, &d, hi);
        if let Some(file) = &mut ws.trace {
            let _ = writeln!(
                file,
                "{outer},{t:e},{newton_steps},{:e},{decrement_sq:e},{step:e}",
                prog.objective(x)
            );
        }
        if step <= 0.0 {
            return Ok(());
        }
        for (k, &i) in ws.active.iter().enumerate() {
            x[i] += step * d[k];
        }
        *newton_steps += 1;
    }
    Ok(())
}

/// Exact line search: the directional derivative of `phi_t` along `d` is
/// strictly decreasing, so bisect on its sign over `(0, hi]`.
fn line_search(
    prog: &ConcaveProgram,
    x: &[f64; DIM],
    t: f64,
    ws: &Workspace,
    d: &[f64],
    hi: f64,
) -> f64 {
    let dphi = |step: f64| -> f64 {
        let mut v = 0.0;
        for (k, &i) in ws.active.iter().enumerate() {
            v += (t * prog.weights[i] + 1.0) * d[k] / (x[i] + step * d[k]);
        }
        for j in 0..prog.rows.len() {
            v -= ws.row_dot_d[j] / (ws.slack[j] - step * ws.row_dot_d[j]);
        }
        v
    };
    if dphi(hi) >= 0.0 {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Dual multipliers on the central path and the Lagrangian dual value
/// (`sum_i q_i ln(q_i / (A^T y)_i) + sum_j y_j - 1`), an upper bound on the
/// primal optimum for any `y >= 0`.
fn dual_point(prog: &ConcaveProgram, x: &[f64; DIM], t: f64) -> (Vec<f64>, f64) {
    let mut slack = vec![0.0; prog.rows.len()];
    slacks(prog, x, &mut slack);
    let dual: Vec<f64> = slack.iter().map(|s| 1.0 / (t * s)).collect();
    let mut value: f64 = dual.iter().sum::<f64>() - 1.0;
    for i in 0..DIM {
        let q = prog.weights[i];
        if q > 0.0 {
            let mut aty = 0.0;
            for (j, row) in prog.rows.iter().enumerate() {
                aty += row[i] * dual[j];
            }
            value += q * (q / aty).ln();
        }
    }
    (dual, value)
}
