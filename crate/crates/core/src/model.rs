//! Problem and solution data model, objective and gap evaluation.
//!
//! The estimation problem is
//!
//! ```text
//!     maximize    log det X - <Sigma, X> - rho * sum_ij |X_ij|
//!     subject to  alpha I <= X <= beta I
//! ```
//!
//! and a dual point is any symmetric `U` with `|U_ij| <= rho`. Every solver
//! returns a primal/dual pair whose gap is recomputed by [`certify`].

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::spectral;

/// Relative threshold below which `Sigma` counts as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;
/// Relative slack allowed on the smallest eigenvalue of a "PSD" covariance.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// Absolute slack on `|U_ij| <= rho` when checking dual feasibility.
pub const DUAL_FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Eigenvalue bound policy for the primal variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bounds {
    /// User-chosen `0 < alpha < beta < inf`.
    Explicit { alpha: f64, beta: f64 },
    /// `alpha(n)`, `beta(n)` from [`auto_bounds`]; equivalent to no bounds at the optimum.
    Auto,
    /// `alpha = 0`, `beta = inf`. Only the block-coordinate solvers accept it.
    Unbounded,
}

/// A covariance-selection instance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    sigma: SymMatrix,
    rho: f64,
    bounds: Bounds,
}

impl ProblemInstance {
    pub fn new(sigma: SymMatrix, rho: f64, bounds: Bounds) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::InvalidPenalty(format!(
                "rho must be finite and nonnegative, got {rho}"
            )));
        }
        let (lo, hi) = spectral::extreme_eigenvalues(&sigma)?;
        let norm = lo.abs().max(hi.abs());
        if lo < -PSD_TOLERANCE * norm {
            return Err(Error::NotPositiveSemidefinite { min_eig: lo });
        }
        match bounds {
            Bounds::Explicit { alpha, beta } => {
                if !(alpha > 0.0 && alpha < beta && beta.is_finite()) {
                    return Err(Error::InvalidBounds(format!(
                        "need 0 < alpha < beta < inf, got alpha={alpha}, beta={beta}"
                    )));
                }
            }
            Bounds::Auto => {
                if rho == 0.0 {
                    return Err(Error::InvalidPenalty(
                        "automatic bounds require rho > 0".into(),
                    ));
                }
            }
            Bounds::Unbounded => {
                if rho == 0.0 && lo <= SINGULAR_THRESHOLD * norm {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        Ok(Self { sigma, rho, bounds })
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    /// Numeric `(alpha, beta)`; `(0, inf)` when unbounded.
    pub fn effective_bounds(&self) -> Result<(f64, f64)> {
        match self.bounds {
            Bounds::Explicit { alpha, beta } => Ok((alpha, beta)),
            Bounds::Auto => auto_bounds(&self.sigma, self.rho),
            Bounds::Unbounded => Ok((0.0, f64::INFINITY)),
        }
    }
}

/// Which algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Smooth,
    BlockDescent,
    BlockAscent,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [Self::Smooth, Self::BlockDescent, Self::BlockAscent];

    pub fn name(self) -> &'static str {
        match self {
            Self::Smooth => "smooth",
            Self::BlockDescent => "block-descent",
            Self::BlockAscent => "block-ascent",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown solver '{s}'")))
    }
}

/// Column visiting order of the block-coordinate methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnRule {
    #[default]
    Cyclic,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target duality gap.
    pub epsilon: f64,
    /// Iterations (smooth) or sweeps (block-coordinate).
    pub max_iterations: usize,
    pub solver: SolverKind,
    /// Accuracy of each box-QP subproblem; at most `epsilon / 10`.
    pub subqp_epsilon: f64,
    pub subqp_max_iterations: usize,
    /// Sweeps between full re-inversions of the maintained inverse.
    pub refactor_every: usize,
    /// Smooth method: evaluate the gap every this many iterations.
    pub gap_check_every: usize,
    pub column_rule: ColumnRule,
    /// Reserved for randomized tie-breaking; no current solver consumes it.
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(solver: SolverKind, epsilon: f64) -> Self {
        let max_iterations = match solver {
            SolverKind::Smooth => 200_000,
            SolverKind::BlockDescent | SolverKind::BlockAscent => 500,
        };
        Self {
            epsilon,
            max_iterations,
            solver,
            subqp_epsilon: epsilon / 100.0,
            subqp_max_iterations: 20_000,
            refactor_every: 5,
            gap_check_every: 1,
            column_rule: ColumnRule::Cyclic,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.subqp_epsilon > 0.0 && self.subqp_epsilon <= self.epsilon / 10.0) {
            return Err(Error::InvalidConfig(format!(
                "subqp_epsilon must lie in (0, epsilon/10], got {}",
                self.subqp_epsilon
            )));
        }
        if self.max_iterations == 0
            || self.refactor_every == 0
            || self.gap_check_every == 0
            || self.subqp_max_iterations == 0
        {
            return Err(Error::InvalidConfig(
                "iteration limits and cadences must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How the dual value of a primal/dual pair is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Certificate {
    /// Dual value `-phi(U)` over `Q1 = [alpha, beta]`.
    Bounded { alpha: f64, beta: f64 },
    /// Dual value `-log det(Sigma + U) - n`; falls back to `-phi(U)` under
    /// automatic bounds when `Sigma + U` is not positive definite.
    Unbounded,
}

/// Primal value (to maximize), dual upper bound, and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Result of a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub solver: SolverKind,
    /// Estimated inverse covariance.
    pub x: SymMatrix,
    /// Dual certificate, `|U_ij| <= rho`.
    pub u: SymMatrix,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub certificate: Certificate,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_seconds: f64,
}

impl Solution {
    /// Re-derives the certified gap from `x`, `u` and `sigma`.
    pub fn recompute(&self, sigma: &SymMatrix) -> Result<Certified> {
        certify(sigma, self.rho, &self.x, &self.u, self.certificate)
    }
}

/// One line of solver progress, emitted per iteration (smooth) or sweep (block).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub elapsed_seconds: f64,
}

/// Progress callback; returning `Break` stops the solver early.
pub type Observer<'a> = &'a mut dyn FnMut(&IterationRecord) -> ControlFlow<()>;

/// `log det x - <sigma, x> - rho * sum|x_ij|`.
pub fn primal_objective(x: &SymMatrix, sigma: &SymMatrix, rho: f64) -> Result<f64> {
    check_dims(x, sigma)?;
    Ok(x.log_det()? - sigma.inner(x) - rho * x.abs_sum())
}

/// `alpha(n) = 1 / (||Sigma||_2 + n rho)`, `beta(n) = n min(1/rho, ||Sigma^-1||_2)`.
/// Multiple `t` maximizing the primal objective along the ray `t x`:
/// `n / (<sigma, x> + rho * sum|x_ij|)`, clamped to `[t_lo, t_hi]`.
///
/// The objective is concave in `t`, so for any interval containing 1 the
/// scaled point is at least as good as `x`. Unclamped, the scaled point
/// satisfies `<sigma, t x> + rho * sum|t x_ij| = n` exactly.
pub fn ray_scale(x: &SymMatrix, sigma: &SymMatrix, rho: f64, t_lo: f64, t_hi: f64) -> f64 {
    let linear = x.as_matrix().dot(sigma.as_matrix()) + rho * x.abs_sum();
    if !(linear > 0.0) || !linear.is_finite() || !(t_lo <= t_hi) {
        return 1.0;
    }
    (x.n() as f64 / linear).clamp(t_lo, t_hi)
}

pub fn auto_bounds(sigma: &SymMatrix, rho: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidPenalty(format!(
            "automatic bounds require rho > 0, got {rho}"
        )));
    }
    let n = sigma.n() as f64;
    let (lo, hi) = spectral::extreme_eigenvalues(sigma)?;
    let norm = lo.abs().max(hi.abs());
    let alpha = 1.0 / (norm + n * rho);
    let inv_norm = if lo <= SINGULAR_THRESHOLD * norm {
        f64::INFINITY
    } else {
        1.0 / lo
    };
    let beta = n * (1.0 / rho).min(inv_norm);
    debug_assert!(alpha < beta);
    Ok((alpha, beta))
}

/// `<sigma, x> - n + rho * sum|x_ij|`, the gap of `x = (sigma + U)^-1`.
pub fn gap_block(x: &SymMatrix, sigma: &SymMatrix, rho: f64) -> Result<f64> {
    check_dims(x, sigma)?;
    let gap = sigma.inner(x) - x.n() as f64 + rho * x.abs_sum();
    if !gap.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(gap)
}

/// `(-log det y + <sigma, y> + rho sum|y_ij|) - phi(u_hat)` for feasible iterates.
pub fn gap_smooth(
    y: &SymMatrix,
    u_hat: &SymMatrix,
    sigma: &SymMatrix,
    rho: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_dims(y, sigma)?;
    check_dims(u_hat, sigma)?;
    let (lo, hi) = spectral::extreme_eigenvalues(y)?;
    let tol = 1e-8 * beta.max(1.0);
    if lo < alpha - tol || hi > beta + tol {
        return Err(Error::InfeasibleIterate(format!(
            "spectrum [{lo:e}, {hi:e}] outside [{alpha:e}, {beta:e}]"
        )));
    }
    check_dual_feasible(u_hat, rho)?;
    Ok(bounded_certificate(y, u_hat, sigma, rho, alpha, beta)?.gap)
}

pub(crate) fn check_dual_feasible(u: &SymMatrix, rho: f64) -> Result<()> {
    let worst = u.max_abs();
    if worst > rho + DUAL_FEASIBILITY_TOLERANCE {
        return Err(Error::InfeasibleIterate(format!(
            "dual entry {worst:e} exceeds rho = {rho:e}"
        )));
    }
    Ok(())
}

/// Penalty level from an information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationCriterion {
    Aic,
    Bic,
}

/// `2/N` (AIC) or `2 log(N/2) / N` (BIC).
pub fn rho_information_criterion(criterion: InformationCriterion, sample_size: usize) -> Result<f64> {
    let n = sample_size as f64;
    match criterion {
        InformationCriterion::Aic if sample_size >= 1 => Ok(2.0 / n),
        InformationCriterion::Bic if sample_size >= 3 => Ok(2.0 * (n / 2.0).ln() / n),
        _ => Err(Error::InvalidSampleSize(sample_size)),
    }
}

/// Number of entries (diagonal included) with `|x_ij| > threshold`.
pub fn card(x: &SymMatrix, threshold: f64) -> usize {
    x.as_matrix().iter().filter(|v| v.abs() > threshold).count()
}

/// Evaluates the primal objective, a dual upper bound and the gap of `(x, u)`.
pub fn certify(
    sigma: &SymMatrix,
    rho: f64,
    x: &SymMatrix,
    u: &SymMatrix,
    certificate: Certificate,
) -> Result<Certified> {
    check_dims(x, sigma)?;
    check_dims(u, sigma)?;
    match certificate {
        Certificate::Bounded { alpha, beta } => {
            bounded_certificate(x, u, sigma, rho, alpha, beta)
        }
        Certificate::Unbounded => {
            let primal = primal_objective(x, sigma, rho)?;
            let dual = unbounded_dual(sigma, rho, u)?;
            Ok(Certified {
                primal,
                dual,
                gap: dual - primal,
            })
        }
    }
}

fn bounded_certificate(
    x: &SymMatrix,
    u: &SymMatrix,
    sigma: &SymMatrix,
    rho: f64,
    alpha: f64,
    beta: f64,
) -> Result<Certified> {
    let primal = primal_objective(x, sigma, rho)?;
    let dual = -spectral::phi(u, sigma, alpha, beta)?;
    Ok(Certified {
        primal,
        dual,
        gap: dual - primal,
    })
}

/// Upper bound on the optimal primal value from a dual-feasible `u`.
pub(crate) fn unbounded_dual(sigma: &SymMatrix, rho: f64, u: &SymMatrix) -> Result<f64> {
    match sigma.add(u).log_det() {
        Ok(ld) => Ok(-ld - sigma.n() as f64),
        Err(Error::NotPositiveDefinite) if rho > 0.0 => {
            let (alpha, beta) = auto_bounds(sigma, rho)?;
            Ok(-spectral::phi(u, sigma, alpha, beta)?)
        }
        Err(e) => Err(e),
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: b.n(),
            got: a.n(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primal_objective_examples() {
        let i2 = SymMatrix::identity(2);
        assert!((primal_objective(&i2, &i2, 0.0).unwrap() + 2.0).abs() < 1e-14);

        let x = SymMatrix::from_diagonal(&[0.5, 0.25]);
        let s = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let v = primal_objective(&x, &s, 0.0).unwrap();
        assert!((v - (0.125f64.ln() - 2.0)).abs() < 1e-14);
        assert!((v + 4.0794).abs() < 1e-4);

        let x = SymMatrix::from_diagonal(&[2.0, 1.0]);
        let v = primal_objective(&x, &i2, 0.1).unwrap();
        assert!((v - (2f64.ln() - 3.3)).abs() < 1e-14);
        assert!((v + 2.6069).abs() < 1e-4);
    }

    #[test]
    fn primal_objective_requires_pd() {
        let x = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert_eq!(
            primal_objective(&x, &SymMatrix::identity(2), 0.0),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn auto_bounds_examples() {
        let i2 = SymMatrix::identity(2);
        let (a, b) = auto_bounds(&i2, 0.5).unwrap();
        assert!((a - 0.5).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
        let (a, b) = auto_bounds(&i2, 4.0).unwrap();
        assert!((a - 1.0 / 9.0).abs() < 1e-14 && (b - 0.5).abs() < 1e-14);
        let (a, b) = auto_bounds(&SymMatrix::from_diagonal(&[1.0, 0.0]), 1.0).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
        assert!(matches!(auto_bounds(&i2, 0.0), Err(Error::InvalidPenalty(_))));
    }

    #[test]
    fn gap_block_examples() {
        let s = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let x = SymMatrix::from_diagonal(&[0.5, 0.25]);
        assert!(gap_block(&x, &s, 0.0).unwrap().abs() < 1e-15);
        let i2 = SymMatrix::identity(2);
        assert!((gap_block(&i2, &i2, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let i3 = SymMatrix::identity(3);
        assert_eq!(gap_block(&i3, &i3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gap_smooth_examples() {
        let one = SymMatrix::identity(1);
        let g = gap_smooth(&one, &SymMatrix::zeros(1), &one, 0.0, 0.1, 10.0).unwrap();
        assert!(g.abs() < 1e-14);

        let g = gap_smooth(&one, &SymMatrix::from_diagonal(&[0.5]), &one, 0.5, 0.1, 10.0).unwrap();
        let want = 1.5 - (1.0 + 1.5f64.ln());
        assert!((g - want).abs() < 1e-14);
        assert!((g - 0.0945).abs() < 1e-4);
    }

    #[test]
    fn gap_smooth_rejects_infeasible() {
        let one = SymMatrix::identity(1);
        let far = SymMatrix::from_diagonal(&[20.0]);
        assert!(matches!(
            gap_smooth(&far, &SymMatrix::zeros(1), &one, 0.5, 0.1, 10.0),
            Err(Error::InfeasibleIterate(_))
        ));
        let big_u = SymMatrix::from_diagonal(&[0.6]);
        assert!(matches!(
            gap_smooth(&one, &big_u, &one, 0.5, 0.1, 10.0),
            Err(Error::InfeasibleIterate(_))
        ));
    }

    #[test]
    fn information_criteria() {
        use InformationCriterion::*;
        assert!((rho_information_criterion(Aic, 100).unwrap() - 0.02).abs() < 1e-15);
        let bic = rho_information_criterion(Bic, 100).unwrap();
        assert!((bic - 2.0 * 50f64.ln() / 100.0).abs() < 1e-15);
        assert!((bic - 0.078240).abs() < 1e-6);
        assert_eq!(rho_information_criterion(Aic, 2).unwrap(), 1.0);
        assert_eq!(rho_information_criterion(Bic, 2), Err(Error::InvalidSampleSize(2)));
    }

    #[test]
    fn card_examples() {
        assert_eq!(card(&SymMatrix::identity(3), 0.5), 3);
        assert_eq!(card(&SymMatrix::zeros(4), 0.0), 0);
        let x = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        assert_eq!(card(&x, 0.1), 4);
    }

    #[test]
    fn problem_validation() {
        let i2 = SymMatrix::identity(2);
        assert!(ProblemInstance::new(i2.clone(), -1.0, Bounds::Auto).is_err());
        assert!(ProblemInstance::new(i2.clone(), 0.0, Bounds::Auto).is_err());
        assert!(ProblemInstance::new(
            i2.clone(),
            0.1,
            Bounds::Explicit { alpha: 2.0, beta: 1.0 }
        )
        .is_err());
        let indefinite = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(
            ProblemInstance::new(indefinite, 0.1, Bounds::Auto),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        let singular = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(ProblemInstance::new(singular.clone(), 0.0, Bounds::Unbounded).is_err());
        assert!(ProblemInstance::new(singular, 0.3, Bounds::Auto).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::new(SolverKind::Smooth, 1e-3);
        assert!(c.validate().is_ok());
        c.subqp_epsilon = 1e-3;
        assert!(c.validate().is_err());
        c.subqp_epsilon = 1e-4;
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn solver_kind_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
        assert!("newton".parse::<SolverKind>().is_err());
    }
}
