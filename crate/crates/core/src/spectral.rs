//! Symmetric eigendecomposition and the closed-form spectral subproblems
//! over `Q1 = {X : alpha I <= X <= beta I}`.
//!
//! All three subproblems are rotation invariant, so they reduce to scalar
//! problems on the eigenvalues of a single symmetric matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

const MAX_EIG_SWEEPS: usize = 10_000;

/// Orthonormal eigenvectors (columns of `vectors`) with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl EigenPair {
    /// `V diag(values) V^T` for replacement eigenvalues.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymMatrix {
        assert_eq!(values.len(), self.values.len());
        let mut scaled = self.vectors.clone();
        for (mut col, &v) in scaled.column_iter_mut().zip(values) {
            col *= v;
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(&self.values)
    }
}

/// Full symmetric eigendecomposition, eigenvalues sorted ascending.
pub fn sym_eig(s: &SymMatrix) -> Result<EigenPair> {
    let eig = SymmetricEigen::try_new(s.as_matrix().clone(), f64::EPSILON, MAX_EIG_SWEEPS)
        .ok_or(Error::EigenFailure)?;
    let n = s.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(EigenPair { vectors, values })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(s: &SymMatrix) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = s
        .as_matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, MAX_EIG_SWEEPS)
        .ok_or(Error::EigenFailure)?
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `(lambda_min, lambda_max)`.
pub fn extreme_eigenvalues(s: &SymMatrix) -> Result<(f64, f64)> {
    let values = eigenvalues(s)?;
    Ok((values[0], values[values.len() - 1]))
}

pub fn spectral_norm(s: &SymMatrix) -> Result<f64> {
    let (lo, hi) = extreme_eigenvalues(s)?;
    Ok(lo.abs().max(hi.abs()))
}

fn check_bounds(alpha: f64, beta: f64) {
    assert!(
        alpha < beta,
        "eigenvalue bounds must satisfy alpha < beta (got {alpha}, {beta})"
    );
}

/// Frobenius projection of `g` onto `Q1`: eigenvalues clamped to `[alpha, beta]`.
pub fn project_box_spectrum(g: &SymMatrix, alpha: f64, beta: f64) -> Result<SymMatrix> {
    Ok(project_box_spectrum_with_values(g, alpha, beta)?.0)
}

/// As [`project_box_spectrum`], also returning the clamped eigenvalues.
pub(crate) fn project_box_spectrum_with_values(
    g: &SymMatrix,
    alpha: f64,
    beta: f64,
) -> Result<(SymMatrix, Vec<f64>)> {
    check_bounds(alpha, beta);
    let eig = sym_eig(g)?;
    let clamped: Vec<f64> = eig.values.iter().map(|&v| v.clamp(alpha, beta)).collect();
    Ok((eig.reconstruct_with(&clamped), clamped))
}

/// Minimizer of `s * lambda - log(lambda)` over `[alpha, beta]`.
///
/// For `s <= 0` the objective is decreasing, so the upper bound is optimal.
pub fn entropic_eigenvalue(s: f64, alpha: f64, beta: f64) -> f64 {
    if s > 0.0 {
        (1.0 / s).clamp(alpha, beta)
    } else {
        beta
    }
}

/// `argmin_{X in Q1} <s, X> - log det X`.
pub fn entropic_min(s: &SymMatrix, alpha: f64, beta: f64) -> Result<SymMatrix> {
    check_bounds(alpha, beta);
    assert!(alpha > 0.0, "entropic_min requires alpha > 0");
    let eig = sym_eig(s)?;
    let lambdas: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| entropic_eigenvalue(v, alpha, beta))
        .collect();
    Ok(eig.reconstruct_with(&lambdas))
}

/// `phi(U) = min_{X in Q1} -log det X + <sigma + U, X>`.
pub fn phi(u: &SymMatrix, sigma: &SymMatrix, alpha: f64, beta: f64) -> Result<f64> {
    check_bounds(alpha, beta);
    assert!(alpha > 0.0, "phi requires alpha > 0");
    let values = eigenvalues(&sigma.add(u))?;
    Ok(values
        .iter()
        .map(|&s| {
            let lambda = entropic_eigenvalue(s, alpha, beta);
            s * lambda - lambda.ln()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
        a.sub(b).max_abs() <= tol
    }

    #[test]
    fn eig_identity_reconstructs() {
        let s = SymMatrix::identity(3);
        let e = sym_eig(&s).unwrap();
        assert_eq!(e.values.len(), 3);
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(close(&e.reconstruct(), &s, 1e-14));
    }

    #[test]
    fn eig_diagonal_sorted() {
        let e = sym_eig(&SymMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        for (got, want) in e.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn eig_two_by_two_closed_form() {
        let s = SymMatrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let e = sym_eig(&s).unwrap();
        assert!((e.values[0] + 2.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let p = project_box_spectrum(&SymMatrix::from_diagonal(&[0.1, 5.0, 100.0]), 1.0, 10.0)
            .unwrap();
        assert!(close(&p, &SymMatrix::from_diagonal(&[1.0, 5.0, 10.0]), 1e-12));

        let g = SymMatrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let p = project_box_spectrum(&g, 1.0, 10.0).unwrap();
        let want = SymMatrix::from_rows(&[vec![1.5, 0.5], vec![0.5, 1.5]]).unwrap();
        assert!(close(&p, &want, 1e-12));

        let inside = SymMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 4.0]]).unwrap();
        assert!(close(&project_box_spectrum(&inside, 1.0, 10.0).unwrap(), &inside, 1e-12));
    }

    #[test]
    fn entropic_examples() {
        let e = entropic_min(&SymMatrix::from_diagonal(&[2.0, 0.01]), 0.1, 10.0).unwrap();
        assert!(close(&e, &SymMatrix::from_diagonal(&[0.5, 10.0]), 1e-12));
        let e = entropic_min(&SymMatrix::from_diagonal(&[-1.0]), 0.1, 10.0).unwrap();
        assert!((e.get(0, 0) - 10.0).abs() < 1e-12);
        let e = entropic_min(&SymMatrix::from_diagonal(&[1.0]), 0.1, 10.0).unwrap();
        assert!((e.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_examples() {
        let v = phi(&SymMatrix::zeros(2), &SymMatrix::identity(2), 0.1, 10.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = phi(&SymMatrix::zeros(1), &SymMatrix::from_diagonal(&[0.05]), 0.1, 10.0).unwrap();
        assert!((v - (0.5 - 10f64.ln())).abs() < 1e-12);
        assert!((v + 1.8026).abs() < 1e-4);
        let v = phi(&SymMatrix::zeros(1), &SymMatrix::identity(1), 0.1, 10.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn projection_rejects_inverted_bounds() {
        let _ = project_box_spectrum(&SymMatrix::identity(2), 2.0, 1.0);
    }
}
