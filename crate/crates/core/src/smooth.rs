//! Smoothed optimal first-order method.
//!
//! The nonsmooth penalty `rho * sum|X_ij|` is replaced by its Huber
//! smoothing with width `mu`, whose uniform error over `n^2` entries is
//! `epsilon / 2`. The smoothed objective `f_eps` has a Lipschitz gradient and
//! is minimized over `Q1` by an accelerated scheme whose two subproblems per
//! iteration (gradient mapping and estimate-sequence minimizer) are solved in
//! closed form from one eigendecomposition each. An averaged dual iterate is
//! maintained alongside and the loop stops on a certified duality gap.

use std::ops::ControlFlow;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::{log_det_from_cholesky, SymMatrix};
use crate::model::{
    certify, ray_scale, Certificate, IterationRecord, Observer, ProblemInstance, Solution, SolverConfig,
    SolverKind,
};
use crate::spectral;

/// Derived constants of the smoothing scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub epsilon: f64,
    /// Huber width; `+inf` when `rho == 0` (no penalty to smooth).
    pub mu: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `max d1 = n log(beta / alpha)` over `Q1`.
    pub d1_max: f64,
    /// `max d2 = n^2 / 2` over the unit dual box.
    pub d2_max: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Gradient Lipschitz constant of `-log det X + <Sigma, X>` on `Q1`.
    pub lipschitz_m: f64,
    pub op_norm_a: f64,
    pub lipschitz_l: f64,
}

pub fn make_params(alpha: f64, beta: f64, rho: f64, n: usize, epsilon: f64) -> Result<SmoothingParams> {
    if !(alpha > 0.0 && alpha < beta && beta.is_finite()) {
        return Err(Error::InvalidBounds(format!(
            "need 0 < alpha < beta < inf, got alpha={alpha}, beta={beta}"
        )));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidPenalty(format!("rho must be nonnegative, got {rho}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    let nf = n as f64;
    let lipschitz_m = 1.0 / (alpha * alpha);
    let (mu, lipschitz_l) = if rho > 0.0 {
        let mu = epsilon / (nf * nf * rho * rho);
        (mu, lipschitz_m + 1.0 / mu)
    } else {
        (f64::INFINITY, lipschitz_m)
    };
    Ok(SmoothingParams {
        epsilon,
        mu,
        rho,
        alpha,
        beta,
        d1_max: nf * (beta / alpha).ln(),
        d2_max: nf * nf / 2.0,
        sigma1: 1.0 / (beta * beta),
        sigma2: 1.0,
        lipschitz_m,
        op_norm_a: rho,
        lipschitz_l,
    })
}

/// Huber smoothing of `rho |x|` with width `mu`.
pub fn psi(x: f64, mu: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let a = x.abs();
    if a >= mu * rho {
        rho * a - mu * rho * rho / 2.0
    } else {
        x * x / (2.0 * mu)
    }
}

/// Entrywise `clamp(x_ij / mu, -rho, rho)`, the maximizing dual point.
pub fn u_star(x: &SymMatrix, mu: f64, rho: f64) -> SymMatrix {
    if rho == 0.0 {
        return SymMatrix::zeros(x.n());
    }
    x.map(|v| (v / mu).clamp(-rho, rho))
}

/// Value, gradient and maximizing dual point of the smoothed objective.
#[derive(Debug, Clone)]
pub struct SmoothEval {
    pub value: f64,
    pub grad: SymMatrix,
    pub u_star: SymMatrix,
}

/// `f_eps(x) = -log det x + <sigma, x> + sum psi(x_ij)` and its gradient
/// `-x^-1 + sigma + U*(x)`.
pub fn f_eps_and_grad(x: &SymMatrix, sigma: &SymMatrix, params: &SmoothingParams) -> Result<SmoothEval> {
    let chol = x.cholesky()?;
    let log_det = log_det_from_cholesky(&chol);
    let inv = SymMatrix::symmetrized(chol.inverse());
    let penalty: f64 = x
        .as_matrix()
        .iter()
        .map(|&v| psi(v, params.mu, params.rho))
        .sum();
    let value = -log_det + sigma.inner(x) + penalty;
    let u = u_star(x, params.mu, params.rho);
    let grad = sigma.sub(&inv).add(&u);
    Ok(SmoothEval {
        value,
        grad,
        u_star: u,
    })
}

/// A-priori iteration count to reach accuracy `epsilon`.
pub fn iteration_bound(params: &SmoothingParams) -> u64 {
    let p = params;
    let first = 4.0 * p.op_norm_a / p.epsilon * (p.d1_max * p.d2_max / (p.sigma1 * p.sigma2)).sqrt();
    let second = (p.lipschitz_m * p.d1_max / (p.sigma1 * p.epsilon)).sqrt();
    (first + second).ceil() as u64
}

/// Iteration state; owns everything a step needs besides the problem data.
#[derive(Debug, Clone)]
pub struct SmoothState {
    pub k: usize,
    pub x: SymMatrix,
    pub y: SymMatrix,
    pub z: SymMatrix,
    /// `sum_i (i + 1) / 2 * grad f_eps(X_i)`.
    pub grad_accum: SymMatrix,
    pub u_hat: SymMatrix,
    pub best_gap: f64,
}

impl SmoothState {
    pub fn new(n: usize, params: &SmoothingParams) -> Self {
        let x0 = SymMatrix::identity(n).scale(params.beta);
        Self {
            k: 0,
            y: x0.clone(),
            z: x0.clone(),
            x: x0,
            grad_accum: SymMatrix::zeros(n),
            u_hat: SymMatrix::zeros(n),
            best_gap: f64::INFINITY,
        }
    }

    /// One full iteration; afterwards `y` and `u_hat` hold `Y_k` and `U_k`.
    pub fn step(&mut self, sigma: &SymMatrix, params: &SmoothingParams) -> Result<()> {
        let k = self.k as f64;
        let SmoothEval { grad, u_star, .. } = f_eps_and_grad(&self.x, sigma, params)?;

        let g = SymMatrix::lincomb(1.0, &self.x, -1.0 / params.lipschitz_l, &grad);
        self.y = spectral::project_box_spectrum(&g, params.alpha, params.beta)?;

        self.grad_accum = SymMatrix::lincomb(1.0, &self.grad_accum, (k + 1.0) / 2.0, &grad);
        let s = self.grad_accum.scale(params.sigma1 / params.lipschitz_l);
        self.z = spectral::entropic_min(&s, params.alpha, params.beta)?;

        self.u_hat = SymMatrix::lincomb(k / (k + 2.0), &self.u_hat, 2.0 / (k + 2.0), &u_star);
        self.x = SymMatrix::lincomb(2.0 / (k + 3.0), &self.z, (k + 1.0) / (k + 3.0), &self.y);
        self.k += 1;
        Ok(())
    }
}

/// `y` moved along its ray to the best primal scale that keeps the spectrum
/// inside `[alpha, beta]`.
fn rescaled(y: &SymMatrix, sigma: &SymMatrix, params: &SmoothingParams) -> Result<SymMatrix> {
    let (lo, hi) = spectral::extreme_eigenvalues(y)?;
    let t_lo = (params.alpha / lo).min(1.0);
    let t_hi = (params.beta / hi).max(1.0);
    Ok(y.scale(ray_scale(y, sigma, params.rho, t_lo, t_hi)))
}

pub fn solve_smooth(problem: &ProblemInstance, config: &SolverConfig) -> Result<Solution> {
    solve_smooth_observed(problem, config, &mut |_| ControlFlow::Continue(()))
}

/// Runs the smoothed method, reporting each gap evaluation to `observer`.
pub fn solve_smooth_observed(
    problem: &ProblemInstance,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let (alpha, beta) = problem.effective_bounds()?;
    if !beta.is_finite() {
        return Err(Error::InvalidBounds(
            "the smooth method needs finite eigenvalue bounds (explicit or automatic)".into(),
        ));
    }
    let sigma = problem.sigma();
    let rho = problem.rho();
    let params = make_params(alpha, beta, rho, problem.n(), config.epsilon)?;
    let certificate = Certificate::Bounded { alpha, beta };

    let mut state = SmoothState::new(problem.n(), &params);
    let mut best: Option<(SymMatrix, SymMatrix, crate::model::Certified)> = None;
    let mut converged = false;

    while state.k < config.max_iterations {
        state.step(sigma, &params)?;
        let last = state.k == config.max_iterations;
        if (state.k - 1) % config.gap_check_every != 0 && !last {
            continue;
        }
        let y = rescaled(&state.y, sigma, &params)?;
        let cert = certify(sigma, rho, &y, &state.u_hat, certificate)?;
        if cert.gap < state.best_gap {
            state.best_gap = cert.gap;
            best = Some((y, state.u_hat.clone(), cert));
        }
        let record = IterationRecord {
            k: state.k,
            primal: cert.primal,
            dual: cert.dual,
            gap: cert.gap,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        if cert.gap <= config.epsilon {
            converged = true;
            let _ = observer(&record);
            break;
        }
        if observer(&record).is_break() {
            break;
        }
    }

    let (x, u, cert) = match best {
        Some(b) => b,
        None => {
            let cert = certify(sigma, rho, &state.y, &state.u_hat, certificate)?;
            (state.y.clone(), state.u_hat.clone(), cert)
        }
    };
    Ok(Solution {
        solver: SolverKind::Smooth,
        x,
        u,
        rho,
        alpha,
        beta,
        certificate,
        primal_objective: cert.primal,
        dual_objective: cert.dual,
        gap: cert.gap,
        iterations: state.k,
        converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}
