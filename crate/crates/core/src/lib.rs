//! Sparse inverse covariance estimation.
//!
//! Given a sample covariance `Sigma` and a penalty `rho >= 0`, estimate a
//! sparse precision matrix by solving
//!
//! ```text
//!     maximize    log det X - <Sigma, X> - rho * sum_ij |X_ij|
//!     subject to  alpha I <= X <= beta I
//! ```
//!
//! with one of three solvers: a smoothed first-order method ([`smooth`]) and
//! block-coordinate descent or ascent ([`coordinate`]). Every solve returns a
//! primal/dual pair and a recomputable duality gap.
//!
//! ```
//! use covsel::{solve, Bounds, ProblemInstance, SolverConfig, SolverKind, SymMatrix};
//!
//! let sigma = SymMatrix::identity(1);
//! let problem = ProblemInstance::new(sigma, 0.5, Bounds::Auto).unwrap();
//! let sol = solve(&problem, &SolverConfig::new(SolverKind::BlockDescent, 1e-8)).unwrap();
//! assert!((sol.x.get(0, 0) - 2.0 / 3.0).abs() < 1e-8);
//! ```

use std::ops::ControlFlow;

pub mod boxqp;
pub mod cli;
pub mod coordinate;
pub mod error;
pub mod io;
pub mod matrix;
pub mod model;
pub mod smooth;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::SymMatrix;
pub use model::{
    Bounds, Certificate, IterationRecord, Observer, ProblemInstance, Solution, SolverConfig,
    SolverKind,
};

/// Runs the solver selected by `config.solver`.
pub fn solve(problem: &ProblemInstance, config: &SolverConfig) -> Result<Solution> {
    solve_observed(problem, config, &mut |_| ControlFlow::Continue(()))
}

pub fn solve_observed(
    problem: &ProblemInstance,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<Solution> {
    match config.solver {
        SolverKind::Smooth => smooth::solve_smooth_observed(problem, config, observer),
        SolverKind::BlockDescent => coordinate::solve_descent_observed(problem, config, observer),
        SolverKind::BlockAscent => coordinate::solve_ascent_observed(problem, config, observer),
    }
}
