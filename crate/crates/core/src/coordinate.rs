//! Block-coordinate methods over one row/column at a time.
//!
//! Both methods partition around column `j`:
//!
//! ```text
//!     Sigma = [A  b]    U = [V  u]    X = [Z  x]
//!             [b' c]        [u' w]        [x' y]
//! ```
//!
//! *Descent* works on the dual `min -log det(Sigma + U) - n, |U_ij| <= rho`.
//! With `w = rho` the column subproblem is the box QP
//! `min (b + u)' (A + V)^-1 (b + u)`. The full inverse `W = (Sigma + U)^-1`
//! is maintained with a rank-two Sherman-Morrison-Woodbury correction per
//! column, and `(A + V)^-1` is read off `W` by a rank-one Schur downdate.
//!
//! *Ascent* works on the primal. For fixed `Z` the column subproblem has the
//! dual box QP `min (b + u)' Z (b + u)` and the primal column is recovered as
//! `x = -Z (b + u) / (c + rho)`, `y = 1/(c + rho) + (b + u)' Z (b + u) / (c + rho)^2`.

use std::ops::ControlFlow;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::boxqp::{self, BoxQP};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::model::{
    auto_bounds, certify, ray_scale, Bounds, Certificate, Certified, IterationRecord, Observer,
    ProblemInstance, Solution, SolverConfig, SolverKind,
};

/// Relative size of the 2x2 SMW determinant below which the inverse is rebuilt.
const SMW_BREAKDOWN: f64 = 1e-12;
/// Relative slack on the ascent monotone check, absorbing rounding in the
/// block objective when the column is already optimal.
const MONOTONE_SLACK: f64 = 1e-13;

fn others(n: usize, j: usize) -> Vec<usize> {
    (0..n).filter(|&i| i != j).collect()
}

fn sub_column(m: &DMatrix<f64>, idx: &[usize], j: usize) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| m[(i, j)]))
}

fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Inverse of `M` with row/column `j` removed, given `w = M^-1`:
/// `W[-j,-j] - W[-j,j] W[j,-j] / W[j,j]`.
pub fn principal_inverse(w: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    let idx = others(w.nrows(), j);
    let col = sub_column(w, &idx, j);
    let mut out = principal_submatrix(w, &idx);
    out.ger(-1.0 / w[(j, j)], &col, &col, 1.0);
    out
}

fn fresh_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(SymMatrix::symmetrized(m.clone()).inverse_pd()?.into_matrix())
}

/// Result of a single column update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStep {
    /// Whether the column was changed.
    pub applied: bool,
    pub qp_certified: bool,
    /// Column-subproblem objective before and after (QP value for descent,
    /// block primal objective for ascent).
    pub before: f64,
    pub after: f64,
}

// ---------------------------------------------------------------------------
// Descent

/// Dual iterate of block-coordinate descent.
#[derive(Debug, Clone)]
pub struct DescentState {
    sigma: DMatrix<f64>,
    rho: f64,
    u: DMatrix<f64>,
    /// Maintained `(Sigma + U)^-1`.
    w: DMatrix<f64>,
    pub sweep: usize,
    /// Number of rank-two updates that fell back to a full re-inversion.
    pub refactorizations: usize,
}

impl DescentState {
    /// Starts at `U = rho I`, which is dual feasible and keeps `Sigma + U`
    /// positive definite for any PSD `Sigma` when `rho > 0`.
    pub fn new(sigma: &SymMatrix, rho: f64) -> Result<Self> {
        let u = DMatrix::identity(sigma.n(), sigma.n()) * rho;
        let sum = sigma.as_matrix() + &u;
        let w = fresh_inverse(&sum)?;
        Ok(Self {
            sigma: sigma.as_matrix().clone(),
            rho,
            u,
            w,
            sweep: 0,
            refactorizations: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn u(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.u.clone())
    }

    /// The maintained inverse of `Sigma + U`.
    pub fn maintained_inverse(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `(Sigma + U)^-1` recomputed from scratch.
    pub fn fresh_inverse(&self) -> Result<DMatrix<f64>> {
        fresh_inverse(&(&self.sigma + &self.u))
    }

    /// Replaces the maintained inverse with a fresh one.
    pub fn refactor(&mut self) -> Result<()> {
        self.w = self.fresh_inverse()?;
        Ok(())
    }

    /// `-log det(Sigma + U)`.
    pub fn dual_objective(&self) -> Result<f64> {
        Ok(-SymMatrix::symmetrized(&self.sigma + &self.u).log_det()?)
    }

    /// `(A + V)^-1` for column `j` from the maintained inverse.
    pub fn inv_av(&self, j: usize) -> DMatrix<f64> {
        principal_inverse(&self.w, j)
    }
}

/// Applies the change `delta` (zero at index `j_out`) to row/column `j_out`
/// of `U`, corrects the maintained inverse with a rank-two SMW update, and
/// returns `(A + V)^-1` for column `j_in`.
///
/// When the 2x2 capacitance matrix is nearly singular the inverse is rebuilt
/// from scratch instead.
pub fn smw_maintain(
    state: &mut DescentState,
    j_out: usize,
    delta: &DVector<f64>,
    j_in: usize,
) -> Result<DMatrix<f64>> {
    let n = state.n();
    debug_assert_eq!(delta.len(), n);
    debug_assert_eq!(delta[j_out], 0.0);
    if delta.iter().any(|&d| d != 0.0) {
        for i in 0..n {
            state.u[(i, j_out)] += delta[i];
            state.u[(j_out, i)] += delta[i];
        }
        // Sigma + U changes by e d' + d e' = P C P', P = [e, d], C = [[0,1],[1,0]].
        let we = state.w.column(j_out).into_owned();
        let wd = &state.w * delta;
        let k11 = state.w[(j_out, j_out)];
        let k12 = 1.0 + wd[j_out];
        let k22 = delta.dot(&wd);
        let det = k11 * k22 - k12 * k12;
        let scale = (k11 * k22).abs() + k12 * k12;
        if det.abs() <= SMW_BREAKDOWN * scale {
            state.refactor()?;
            state.refactorizations += 1;
        } else {
            // W -= [we wd] K^-1 [we wd]'
            let (i11, i12, i22) = (k22 / det, -k12 / det, k11 / det);
            state.w.ger(-i11, &we, &we, 1.0);
            state.w.ger(-i12, &we, &wd, 1.0);
            state.w.ger(-i12, &wd, &we, 1.0);
            state.w.ger(-i22, &wd, &wd, 1.0);
        }
    }
    Ok(state.inv_av(j_in))
}

/// One descent column update: solves the box QP for column `j`, writes the
/// result into `U` with `U_jj = rho` and updates the maintained inverse.
pub fn descent_column_step(
    state: &mut DescentState,
    j: usize,
    qp_epsilon: f64,
    qp_max_iterations: usize,
) -> Result<ColumnStep> {
    let n = state.n();
    let idx = others(n, j);
    let rho = state.rho;
    let inv_av = state.inv_av(j);
    let b = sub_column(&state.sigma, &idx, j);
    let u_old = sub_column(&state.u, &idx, j);

    let quad = |u: &DVector<f64>| {
        let v = &b + u;
        v.dot(&(&inv_av * &v))
    };
    let before = quad(&u_old);

    let linear = &inv_av * &b * 2.0;
    let qp = BoxQP::from_parts(inv_av.clone(), linear, rho);
    // Column tolerance scaled by the Schur complement 1 / W_jj so that the
    // resulting change in -log det(Sigma + U) is at most qp_epsilon.
    let tol = qp_epsilon / state.w[(j, j)];
    let sol = boxqp::solve_boxqp_from(&qp, tol, Some(u_old.as_slice()), qp_max_iterations);
    let u_new = DVector::from_vec(sol.x);
    let after = quad(&u_new);

    let mut delta = DVector::zeros(n);
    if after <= before {
        for (a, &i) in idx.iter().enumerate() {
            delta[i] = u_new[a] - u_old[a];
        }
    }
    let applied = delta.iter().any(|&d| d != 0.0);
    smw_maintain(state, j, &delta, j)?;
    state.u[(j, j)] = rho;
    Ok(ColumnStep {
        applied,
        qp_certified: sol.certified,
        before,
        after: if applied { after } else { before },
    })
}

fn block_bounds(problem: &ProblemInstance) -> Result<(f64, f64)> {
    match problem.bounds() {
        Bounds::Explicit { .. } => Err(Error::InvalidBounds(
            "block-coordinate solvers handle automatic or no eigenvalue bounds only".into(),
        )),
        Bounds::Auto => auto_bounds(problem.sigma(), problem.rho()),
        Bounds::Unbounded => Ok((0.0, f64::INFINITY)),
    }
}

pub fn solve_descent(problem: &ProblemInstance, config: &SolverConfig) -> Result<Solution> {
    solve_descent_observed(problem, config, &mut |_| ControlFlow::Continue(()))
}

/// Block-coordinate descent on the dual; one observer record per sweep
/// (sweep 0 is the starting point). The reported primal point is
/// `(Sigma + U)^-1` rescaled by [`ray_scale`].
pub fn solve_descent_observed(
    problem: &ProblemInstance,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let (alpha, beta) = block_bounds(problem)?;
    let sigma = problem.sigma();
    let rho = problem.rho();
    let n = problem.n();

    let mut state = DescentState::new(sigma, rho)?;
    let evaluate = |state: &DescentState| -> Result<(SymMatrix, SymMatrix, Certified)> {
        let x = SymMatrix::symmetrized(state.fresh_inverse()?);
        let x = x.scale(ray_scale(&x, sigma, rho, 0.0, f64::INFINITY));
        let u = state.u();
        let cert = certify(sigma, rho, &x, &u, Certificate::Unbounded)?;
        Ok((x, u, cert))
    };

    let mut current = evaluate(&state)?;
    let mut converged = current.2.gap <= config.epsilon;
    let mut stop = observer(&record(0, &current.2, &start)).is_break();

    while !converged && !stop && state.sweep < config.max_iterations {
        for j in 0..n {
            descent_column_step(&mut state, j, config.subqp_epsilon, config.subqp_max_iterations)?;
        }
        state.sweep += 1;
        if state.sweep % config.refactor_every == 0 {
            state.refactor()?;
        }
        current = evaluate(&state)?;
        converged = current.2.gap <= config.epsilon;
        stop = observer(&record(state.sweep, &current.2, &start)).is_break();
    }

    let (x, u, cert) = current;
    Ok(Solution {
        solver: SolverKind::BlockDescent,
        x,
        u,
        rho,
        alpha,
        beta,
        certificate: Certificate::Unbounded,
        primal_objective: cert.primal,
        dual_objective: cert.dual,
        gap: cert.gap,
        iterations: state.sweep,
        converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn record(k: usize, cert: &Certified, start: &Instant) -> IterationRecord {
    IterationRecord {
        k,
        primal: cert.primal,
        dual: cert.dual,
        gap: cert.gap,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// Ascent

/// Primal iterate of block-coordinate ascent.
#[derive(Debug, Clone)]
pub struct AscentState {
    sigma: DMatrix<f64>,
    rho: f64,
    x: DMatrix<f64>,
    /// Maintained `X^-1`.
    w: DMatrix<f64>,
    /// Dual certificate assembled from the column QP multipliers.
    u: DMatrix<f64>,
    pub sweep: usize,
}

impl AscentState {
    /// Starts at `X = diag(1 / (Sigma_jj + rho))`.
    pub fn new(sigma: &SymMatrix, rho: f64) -> Result<Self> {
        let n = sigma.n();
        let diag: Vec<f64> = sigma.diagonal().iter().map(|d| d + rho).collect();
        if diag.iter().any(|&d| d <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let x = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / diag[i] } else { 0.0 });
        let w = DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 });
        Ok(Self {
            sigma: sigma.as_matrix().clone(),
            rho,
            x,
            w,
            u: DMatrix::identity(n, n) * rho,
            sweep: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.x.clone())
    }

    pub fn u(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.u.clone())
    }

    pub fn maintained_inverse(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn refactor(&mut self) -> Result<()> {
        self.w = fresh_inverse(&self.x)?;
        Ok(())
    }
}

/// One ascent column update. The column is left unchanged when the block
/// primal objective would decrease (possible only for an inexact QP).
pub fn ascent_column_step(
    state: &mut AscentState,
    j: usize,
    qp_epsilon: f64,
    qp_max_iterations: usize,
) -> Result<ColumnStep> {
    let n = state.n();
    let idx = others(n, j);
    let rho = state.rho;
    let z = principal_submatrix(&state.x, &idx);
    let z_inv = principal_inverse(&state.w, j);
    let b = sub_column(&state.sigma, &idx, j);
    let c = state.sigma[(j, j)];
    let cr = c + rho;

    // log(y - x' Z^-1 x) - 2 b'x - (c + rho) y - 2 rho ||x||_1
    let block_objective = |x: &DVector<f64>, y: f64| {
        let schur = y - x.dot(&(&z_inv * x));
        if schur <= 0.0 {
            return f64::NEG_INFINITY;
        }
        schur.ln() - 2.0 * b.dot(x) - cr * y - 2.0 * rho * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let x_old = sub_column(&state.x, &idx, j);
    let before = block_objective(&x_old, state.x[(j, j)]);

    let u_old = sub_column(&state.u, &idx, j);
    let linear = &z * &b * 2.0;
    let qp = BoxQP::from_parts(z.clone(), linear, rho);
    // The block objective moves by QP error / (c + rho).
    let sol = boxqp::solve_boxqp_from(&qp, qp_epsilon * cr, Some(u_old.as_slice()), qp_max_iterations);
    let u_new = DVector::from_vec(sol.x);
    let v = &b + &u_new;
    let zv = &z * &v;
    let x_new = &zv * (-1.0 / cr);
    let y_new = 1.0 / cr + v.dot(&zv) / (cr * cr);
    let after = block_objective(&x_new, y_new);

    // The multiplier is a valid dual block either way.
    for (a, &i) in idx.iter().enumerate() {
        state.u[(i, j)] = u_new[a];
        state.u[(j, i)] = u_new[a];
    }
    if !(after >= before - MONOTONE_SLACK * before.abs().max(1.0)) {
        return Ok(ColumnStep {
            applied: false,
            qp_certified: sol.certified,
            before,
            after: before,
        });
    }
    for (a, &i) in idx.iter().enumerate() {
        state.x[(i, j)] = x_new[a];
        state.x[(j, i)] = x_new[a];
    }
    state.x[(j, j)] = y_new;
    state.u[(j, j)] = rho;
    // New inverse in block form: [Z^-1 + v v'/(c+rho), v; v', c+rho].
    let mut z_inv = z_inv;
    z_inv.ger(1.0 / cr, &v, &v, 1.0);
    for (a, &i) in idx.iter().enumerate() {
        for (bb, &k) in idx.iter().enumerate() {
            state.w[(i, k)] = z_inv[(a, bb)];
        }
        state.w[(i, j)] = v[a];
        state.w[(j, i)] = v[a];
    }
    state.w[(j, j)] = cr;
    Ok(ColumnStep {
        applied: true,
        qp_certified: sol.certified,
        before,
        after,
    })
}

pub fn solve_ascent(problem: &ProblemInstance, config: &SolverConfig) -> Result<Solution> {
    solve_ascent_observed(problem, config, &mut |_| ControlFlow::Continue(()))
}

/// Block-coordinate ascent on the primal; one observer record per sweep.
/// The reported primal point is the iterate rescaled by [`ray_scale`].
pub fn solve_ascent_observed(
    problem: &ProblemInstance,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let (alpha, beta) = block_bounds(problem)?;
    let sigma = problem.sigma();
    let rho = problem.rho();
    let n = problem.n();

    let mut state = AscentState::new(sigma, rho)?;
    let evaluate = |state: &AscentState| -> Result<(SymMatrix, SymMatrix, Certified)> {
        let x = state.x();
        let x = x.scale(ray_scale(&x, sigma, rho, 0.0, f64::INFINITY));
        let u = state.u();
        let cert = certify(sigma, rho, &x, &u, Certificate::Unbounded)?;
        Ok((x, u, cert))
    };

    let mut current = evaluate(&state)?;
    let mut converged = current.2.gap <= config.epsilon;
    let mut stop = observer(&record(0, &current.2, &start)).is_break();

    while !converged && !stop && state.sweep < config.max_iterations {
        for j in 0..n {
            ascent_column_step(&mut state, j, config.subqp_epsilon, config.subqp_max_iterations)?;
        }
        state.sweep += 1;
        if state.sweep % config.refactor_every == 0 {
            state.refactor()?;
        }
        current = evaluate(&state)?;
        converged = current.2.gap <= config.epsilon;
        stop = observer(&record(state.sweep, &current.2, &start)).is_break();
    }

    let (x, u, cert) = current;
    Ok(Solution {
        solver: SolverKind::BlockAscent,
        x,
        u,
        rho,
        alpha,
        beta,
        certificate: Certificate::Unbounded,
        primal_objective: cert.primal,
        dual_objective: cert.dual,
        gap: cert.gap,
        iterations: state.sweep,
        converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}
