//! Dense real symmetric matrices.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymMatrix::new`] before the input is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

/// A dense, exactly symmetric `n x n` matrix with finite entries.
///
/// Every constructor symmetrizes its input as `(S + S^T) / 2`, so
/// `get(i, j) == get(j, i)` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates and symmetrizes a square matrix.
    ///
    /// Inputs whose max-norm asymmetry exceeds `1e-6 * max|S_ij|` are rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.amax();
        let asymmetry = (&m - m.transpose()).amax();
        if asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::Asymmetric { asymmetry });
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds from full dense rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Builds from `n * n` row-major values.
    pub fn from_row_major(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            inner: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        }
    }

    /// Averages `m` with its transpose without validation; for results of
    /// internal computations that are symmetric up to rounding.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        let mut inner = m;
        inner += t;
        inner *= 0.5;
        Self { inner }
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.inner.diagonal().iter().copied().collect()
    }

    /// Row-major copy of all `n^2` entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    /// Trace inner product `<self, other> = sum_ij self_ij * other_ij`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }

    /// `sum_ij |x_ij|`, the l1 norm over all entries.
    pub fn abs_sum(&self) -> f64 {
        self.inner.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.amax()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        Self {
            inner: &self.inner + &other.inner,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        Self {
            inner: &self.inner * c,
        }
    }

    /// `a * self + b * other`.
    pub fn lincomb(a: f64, x: &SymMatrix, b: f64, y: &SymMatrix) -> SymMatrix {
        Self {
            inner: &x.inner * a + &y.inner * b,
        }
    }

    /// Applies `f` to every entry. `f` must map symmetric pairs identically.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        Self {
            inner: self.inner.map(f),
        }
    }

    pub fn add_diagonal(&self, shift: f64) -> SymMatrix {
        let mut inner = self.inner.clone();
        for i in 0..self.n() {
            inner[(i, i)] += shift;
        }
        Self { inner }
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.inner.clone()).ok_or(Error::NotPositiveDefinite)
    }

    /// `log det` via Cholesky; fails unless positive definite.
    pub fn log_det(&self) -> Result<f64> {
        Ok(log_det_from_cholesky(&self.cholesky()?))
    }

    /// Inverse via Cholesky; fails unless positive definite.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        Ok(Self::symmetrized(self.cholesky()?.inverse()))
    }
}

pub(crate) fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_symmetrizes_small_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-9, 1.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
        assert!((s.get(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn constructor_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn constructor_rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert_eq!(SymMatrix::new(m), Err(Error::NonFinite));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 0.0], vec![0.0]];
        assert!(SymMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn log_det_and_inverse() {
        let s = SymMatrix::from_diagonal(&[2.0, 4.0]);
        assert!((s.log_det().unwrap() - 8f64.ln()).abs() < 1e-14);
        let inv = s.inverse_pd().unwrap();
        assert!((inv.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((inv.get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(
            SymMatrix::from_diagonal(&[1.0, -1.0]).log_det(),
            Err(Error::NotPositiveDefinite)
        );
    }
}
