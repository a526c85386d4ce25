//! Synthetic sparse-precision instances and structure-recovery metrics.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::spectral;

/// Smallest eigenvalue enforced on the ground-truth precision matrix.
pub const PRECISION_MIN_EIG: f64 = 0.1;
/// Eigenvalue floor of the noisy covariance.
pub const COVARIANCE_MIN_EIG: f64 = 1e-2;
pub const DEFAULT_DENSITY: f64 = 0.05;

const PATTERN_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A ground-truth precision matrix and the noisy covariance built from it.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub a_true: SymMatrix,
    pub b_noisy: SymMatrix,
    pub sigma_noise: f64,
    pub seed: u64,
    pub density: f64,
}

impl SynthInstance {
    pub fn generate(n: usize, density: f64, sigma_noise: f64, seed: u64) -> Result<Self> {
        let a_true = gen_sparse_precision(n, density, seed)?;
        let b_noisy = gen_noisy_covariance(&a_true, sigma_noise, seed)?;
        Ok(Self {
            a_true,
            b_noisy,
            sigma_noise,
            seed,
            density,
        })
    }
}

/// Off-diagonal pair count placed for a given density.
pub fn pair_count(n: usize, density: f64) -> usize {
    (density * (n * (n - 1) / 2) as f64).round() as usize
}

/// Unit-diagonal sparse precision matrix with a random `+-` off-diagonal pattern.
///
/// `round(density * n(n-1)/2)` distinct pairs receive `+1` or `-1`. A unit
/// diagonal with any `+-1` pair is at best singular, so the matrix is then
/// shifted and rescaled, `(A + sI) / (1 + s)`, which keeps the unit diagonal,
/// the sign pattern and equal off-diagonal magnitudes while lifting the
/// smallest eigenvalue to [`PRECISION_MIN_EIG`].
pub fn gen_sparse_precision(n: usize, density: f64, seed: u64) -> Result<SymMatrix> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::InvalidInput(format!(
            "density must lie in (0, 1), got {density}"
        )));
    }
    let mut rng = rng_for(seed, PATTERN_STREAM);
    let total = n * (n - 1) / 2;
    let count = pair_count(n, density);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();

    let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
    for k in index::sample(&mut rng, total, count).into_iter() {
        let (i, j) = pairs[k];
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        a[(i, j)] = sign;
        a[(j, i)] = sign;
    }
    let a = SymMatrix::symmetrized(a);
    let (lo, _) = spectral::extreme_eigenvalues(&a)?;
    if lo >= PRECISION_MIN_EIG {
        return Ok(a);
    }
    // (lo + s) / (1 + s) = PRECISION_MIN_EIG
    let shift = (PRECISION_MIN_EIG - lo) / (1.0 - PRECISION_MIN_EIG);
    Ok(a.add_diagonal(shift).scale(1.0 / (1.0 + shift)))
}

/// `B = A^-1 + sigma_noise * V` with `V` symmetric uniform on `[-1, 1]`,
/// shifted so that `lambda_min(B) >= 1e-2`.
pub fn gen_noisy_covariance(a: &SymMatrix, sigma_noise: f64, seed: u64) -> Result<SymMatrix> {
    if !(sigma_noise >= 0.0 && sigma_noise.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise level must be nonnegative, got {sigma_noise}"
        )));
    }
    let n = a.n();
    let a_inv = a.inverse_pd()?;
    let mut rng = rng_for(seed, NOISE_STREAM);
    let mut v = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let draw: f64 = rng.random_range(-1.0..=1.0);
            v[(i, j)] = draw;
            v[(j, i)] = draw;
        }
    }
    let b = a_inv.add(&SymMatrix::symmetrized(v).scale(sigma_noise));
    let (lo, _) = spectral::extreme_eigenvalues(&b)?;
    if lo < COVARIANCE_MIN_EIG {
        Ok(b.add_diagonal(COVARIANCE_MIN_EIG - lo))
    } else {
        Ok(b)
    }
}

/// Off-diagonal support recovery rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub f1: f64,
}

/// Compares the off-diagonal support of `x_est` (entries above `threshold`)
/// against the nonzero pattern of `a_true`.
pub fn recovery_metrics(a_true: &SymMatrix, x_est: &SymMatrix, threshold: f64) -> Result<RecoveryMetrics> {
    if a_true.n() != x_est.n() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a_true.n(),
            x_est.n()
        )));
    }
    let n = a_true.n();
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let actual = a_true.get(i, j).abs() > 0.0;
            let predicted = x_est.get(i, j).abs() > threshold;
            match (actual, predicted) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
    }
    let ratio = |num: usize, den: usize, empty: f64| {
        if den == 0 {
            empty
        } else {
            num as f64 / den as f64
        }
    };
    Ok(RecoveryMetrics {
        tpr: ratio(tp, tp + fn_, 1.0),
        fpr: ratio(fp, fp + tn, 0.0),
        f1: ratio(2 * tp, 2 * tp + fp + fn_, 1.0),
    })
}
