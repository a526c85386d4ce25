//! Box-constrained convex quadratic programs
//!
//! ```text
//!     minimize    x^T Q x + b^T x
//!     subject to  ||x||_inf <= rho
//! ```
//!
//! solved by accelerated projected gradient: each iteration is one
//! matrix-vector product and one projection onto the box. Suboptimality is
//! certified by the Frank-Wolfe gap `<g, x> + rho ||g||_1 >= f(x) - f*`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::spectral;

const LIPSCHITZ_SAFETY: f64 = 1.05;
const POWER_ITERATIONS: usize = 60;
pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;
pub const ORACLE_MAX_DIM: usize = 8;

/// A box QP instance.
#[derive(Debug, Clone)]
pub struct BoxQP {
    q: DMatrix<f64>,
    b: DVector<f64>,
    rho: f64,
}

impl BoxQP {
    /// Checks that `q` is positive semidefinite (`lambda_min >= -1e-8 ||q||_2`).
    /// A tiny ridge is added when `q` is numerically singular.
    pub fn new(q: SymMatrix, b: Vec<f64>, rho: f64) -> Result<Self> {
        if b.len() != q.n() {
            return Err(Error::DimensionMismatch {
                expected: q.n(),
                got: b.len(),
            });
        }
        if !(rho >= 0.0 && rho.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("box radius and linear term must be finite, rho >= 0".into()));
        }
        let (lo, hi) = spectral::extreme_eigenvalues(&q)?;
        let norm = lo.abs().max(hi.abs());
        if lo < -1e-8 * norm {
            return Err(Error::NotPositiveSemidefinite { min_eig: lo });
        }
        let q = if lo <= 0.0 && norm > 0.0 {
            q.add_diagonal(1e-12 * norm)
        } else {
            q
        };
        Ok(Self::from_parts(q.into_matrix(), DVector::from_vec(b), rho))
    }

    /// No PSD check; the caller guarantees it.
    pub(crate) fn from_parts(q: DMatrix<f64>, b: DVector<f64>, rho: f64) -> Self {
        Self { q, b, rho }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        x.dot(&(&self.q * &x)) + self.b.dot(&x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.q * &x * 2.0 + &self.b).as_slice().to_vec()
    }
}

/// Outcome of [`solve_boxqp`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Frank-Wolfe gap of `x`, an upper bound on `objective - optimum`.
    pub suboptimality_bound: f64,
    /// `false` when the iteration cap was hit before reaching the tolerance.
    pub certified: bool,
}

/// Entrywise `clamp(x_i, -rho, rho)`.
pub fn project_box(x: &[f64], rho: f64) -> Vec<f64> {
    x.iter().map(|v| v.clamp(-rho, rho)).collect()
}

/// `||x - project_box(x - grad f(x))||_inf`; zero exactly at the minimizer.
pub fn kkt_residual(p: &BoxQP, x: &[f64]) -> f64 {
    let g = p.gradient(x);
    x.iter()
        .zip(&g)
        .map(|(xi, gi)| (xi - (xi - gi).clamp(-p.rho, p.rho)).abs())
        .fold(0.0, f64::max)
}

fn frank_wolfe_gap(x: &DVector<f64>, g: &DVector<f64>, rho: f64) -> f64 {
    g.dot(x) + rho * g.iter().map(|v| v.abs()).sum::<f64>()
}

fn project_in_place(x: &mut DVector<f64>, rho: f64) {
    x.apply(|v| *v = v.clamp(-rho, rho));
}

/// Rayleigh-quotient estimate of `lambda_max(q)` by power iteration.
fn power_lambda_max(q: &DMatrix<f64>) -> f64 {
    let m = q.nrows();
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = q * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - estimate).abs() <= 1e-4 * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.max(0.0)
}

/// Solves from `x0 = 0` to objective accuracy `epsilon`.
pub fn solve_boxqp(p: &BoxQP, epsilon: f64) -> BoxQpSolution {
    solve_boxqp_from(p, epsilon, None, DEFAULT_MAX_ITERATIONS)
}

/// Accelerated projected gradient with function-value restarts, started from
/// `x0` (projected onto the box) or the origin.
pub fn solve_boxqp_from(
    p: &BoxQP,
    epsilon: f64,
    x0: Option<&[f64]>,
    max_iterations: usize,
) -> BoxQpSolution {
    let m = p.dim();
    let rho = p.rho;
    let mut x = match x0 {
        Some(start) => DVector::from_column_slice(start),
        None => DVector::zeros(m),
    };
    project_in_place(&mut x, rho);

    let eval = |qx: &DVector<f64>, x: &DVector<f64>| x.dot(qx) + p.b.dot(x);
    let mut qx = &p.q * &x;
    let mut fx = eval(&qx, &x);

    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut g = &qx * 2.0 + &p.b;
    let mut bound = frank_wolfe_gap(&x, &g, rho);
    if bound <= epsilon || m == 0 {
        return finish(p, best_x, best_f, 0, bound, true);
    }

    let mut lipschitz = (2.0 * LIPSCHITZ_SAFETY * power_lambda_max(&p.q)).max(f64::MIN_POSITIVE);
    let mut y = x.clone();
    let mut qy = qx.clone();
    let mut t = 1.0f64;

    for it in 1..=max_iterations {
        let gy = &qy * 2.0 + &p.b;
        let mut x_new = &y - &gy / lipschitz;
        project_in_place(&mut x_new, rho);
        let qx_new = &p.q * &x_new;

        // Exact curvature along the step; grow the step constant if exceeded.
        let d = &x_new - &y;
        let dd = d.norm_squared();
        let dqd = d.dot(&(&qx_new - &qy));
        if dd > 0.0 && 2.0 * dqd > lipschitz * dd * (1.0 + 1e-12) {
            lipschitz = 2.0 * LIPSCHITZ_SAFETY * dqd / dd;
            continue;
        }

        let f_new = eval(&qx_new, &x_new);
        if f_new > fx && t > 1.0 {
            // Function-value restart: drop momentum and retry from x.
            y.copy_from(&x);
            qy.copy_from(&qx);
            t = 1.0;
            continue;
        }
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_new;
        y = &x_new + (&x_new - &x) * momentum;
        qy = &qx_new + (&qx_new - &qx) * momentum;
        x = x_new;
        qx = qx_new;
        fx = f_new;
        t = t_new;

        if fx < best_f {
            best_f = fx;
            best_x.copy_from(&x);
        }
        g = &qx * 2.0 + &p.b;
        bound = frank_wolfe_gap(&x, &g, rho);
        if bound <= epsilon {
            // f(best) <= f(x) <= optimum + bound
            return finish(p, best_x, best_f, it, bound, true);
        }
    }
    finish(p, best_x, best_f, max_iterations, bound, false)
}

/// Re-solves the free coordinates of `x` exactly with the active bounds held
/// fixed. Returns the clamped candidate and its objective.
fn polish(p: &BoxQP, x: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let rho = p.rho;
    if rho == 0.0 {
        return None;
    }
    let free: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() < rho * (1.0 - 1e-12)).collect();
    if free.is_empty() {
        return None;
    }
    // Q_FF z = -b_F / 2 - Q_FA x_A
    let mut fixed = x.clone();
    for &i in &free {
        fixed[i] = 0.0;
    }
    let qa = &p.q * &fixed;
    let q_ff = DMatrix::from_fn(free.len(), free.len(), |a, c| p.q[(free[a], free[c])]);
    let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -0.5 * p.b[i] - qa[i]));
    let z = q_ff.cholesky()?.solve(&rhs);
    let mut candidate = fixed;
    for (a, &i) in free.iter().enumerate() {
        candidate[i] = z[a].clamp(-rho, rho);
    }
    let f = candidate.dot(&(&p.q * &candidate)) + p.b.dot(&candidate);
    f.is_finite().then_some((candidate, f))
}

fn finish(
    p: &BoxQP,
    mut x: DVector<f64>,
    mut objective: f64,
    iterations: usize,
    mut bound: f64,
    certified: bool,
) -> BoxQpSolution {
    if let Some((candidate, f)) = polish(p, &x) {
        if f <= objective {
            let g = &p.q * &candidate * 2.0 + &p.b;
            bound = bound.min(frank_wolfe_gap(&candidate, &g, p.rho).max(0.0));
            x = candidate;
            objective = f;
        }
    }
    BoxQpSolution {
        x: x.as_slice().to_vec(),
        objective,
        iterations,
        suboptimality_bound: bound,
        certified,
    }
}

/// Exact minimizer by enumerating all `3^m` active sets; `m <= 8`.
pub fn oracle_boxqp(p: &BoxQP) -> Result<(Vec<f64>, f64)> {
    let m = p.dim();
    if m > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge(m));
    }
    let rho = p.rho;
    let tol = 1e-9 * (1.0 + p.q.amax() * rho + p.b.amax());
    let mut best_kkt: Option<(Vec<f64>, f64)> = None;
    let mut best_feasible: Option<(Vec<f64>, f64)> = None;

    let total = 3usize.pow(m as u32);
    for code in 0..total {
        // digit 0: free, 1: at -rho, 2: at +rho
        let mut state = vec![0u8; m];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut x = vec![0.0; m];
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 0).collect();
        for i in 0..m {
            match state[i] {
                1 => x[i] = -rho,
                2 => x[i] = rho,
                _ => {}
            }
        }
        if !free.is_empty() {
            let k = free.len();
            let qff = DMatrix::from_fn(k, k, |a, b| p.q[(free[a], free[b])]);
            // 2 Q_FF x_F = -(b_F + 2 Q_FN x_N)
            let rhs = DVector::from_fn(k, |a, _| {
                let i = free[a];
                let coupling: f64 = (0..m)
                    .filter(|&j| state[j] != 0)
                    .map(|j| p.q[(i, j)] * x[j])
                    .sum();
                -(p.b[i] + 2.0 * coupling) / 2.0
            });
            let Some(sol) = qff.lu().solve(&rhs) else {
                continue;
            };
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > rho * (1.0 + 1e-12) + 1e-15) {
            continue;
        }
        let x: Vec<f64> = project_box(&x, rho);
        let f = p.objective(&x);
        let g = p.gradient(&x);
        let kkt = (0..m).all(|i| match state[i] {
            0 => g[i].abs() <= tol,
            1 => g[i] >= -tol,
            _ => g[i] <= tol,
        });
        let slot = if kkt { &mut best_kkt } else { &mut best_feasible };
        if slot.as_ref().is_none_or(|(_, bf)| f < *bf) {
            *slot = Some((x, f));
        }
    }
    best_kkt
        .or(best_feasible)
        .ok_or_else(|| Error::InvalidInput("no feasible active set found".into()))
}
