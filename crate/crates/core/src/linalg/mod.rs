//! Dense symmetric eigendecomposition and spectral-measure arithmetic.

mod jacobi;
mod matrix;
mod spectrum;

pub use jacobi::{symmetric_eigenvalues, DEFAULT_EIG_TOL};
pub use matrix::{dilation, wishart, DataMatrix, SymMatrix};
pub use spectrum::{kolmogorov_distance, spectral_cdf, spectral_functional, Spectrum};

use crate::rng::{stream, StreamKey};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("iteration did not converge: {what}")]
    NonConvergence { what: &'static str },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix dimension must be at least 1")]
    EmptyDimension,
    #[error("non-finite entry")]
    NonFinite,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("tolerance must be positive and finite, got {tol}")]
    InvalidTolerance { tol: f64 },
    #[error("eigenvalue {value} outside function domain ({:?}, {:?})", domain.0, domain.1)]
    DomainViolation { value: f64, domain: (f64, f64) },
}

/// Singular values of X/√m: square roots of the eigenvalues of XᵀX/m.
pub fn singular_values(x: &DataMatrix) -> Result<Spectrum, LinalgError> {
    let s = symmetric_eigenvalues(&wishart(x), DEFAULT_EIG_TOL)?;
    // covariance eigenvalues can round to tiny negatives
    Spectrum::from_unsorted(s.values().iter().map(|&v| v.max(0.0).sqrt()).collect())
}

const OPERATOR_NORM_SEED: u64 = 0x6f70_6e6f_726d; // start-vector stream tag
const OPERATOR_NORM_BUDGET: usize = 20_000;

/// Largest singular value via power iteration on AᵀA.
///
/// The start vector comes from a fixed stream, so results are
/// deterministic; the zero matrix short-circuits without iterating.
pub fn operator_norm(a: &DataMatrix, tol: f64) -> Result<f64, LinalgError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LinalgError::InvalidTolerance { tol });
    }
    if a.max_abs_entry() == 0.0 {
        return Ok(0.0);
    }

    'restart: for variant in 0..4u64 {
        let mut rng = stream(StreamKey::new(OPERATOR_NORM_SEED, 0, 0).with_variant(variant));
        let mut v: Vec<f64> = (0..a.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if !normalize(&mut v) {
            continue 'restart;
        }
        let mut sigma_prev = f64::NAN;
        for _ in 0..OPERATOR_NORM_BUDGET {
            let y = a.mul_vec(&v);
            let sigma = norm(&y);
            let mut z = a.tr_mul_vec(&y);
            if !normalize(&mut z) {
                // v landed in the null space; try the next start vector
                continue 'restart;
            }
            v = z;
            if (sigma - sigma_prev).abs() <= tol * sigma.max(f64::MIN_POSITIVE) {
                return Ok(sigma);
            }
            sigma_prev = sigma;
        }
        return Err(LinalgError::NonConvergence {
            what: "operator norm power iteration",
        });
    }
    Err(LinalgError::NonConvergence {
        what: "operator norm start vector selection",
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_scaled_identity() {
        let x = DataMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = singular_values(&x).unwrap();
        let expect = 1.0 / (2.0f64).sqrt();
        for &v in s.values() {
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let x = DataMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(x.rows(), 1);
        let d = DataMatrix::new(2, 2, vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        // m = 2 here, so rescale by √m to read off the plain singular values
        let s = singular_values(&d).unwrap();
        let scaled: Vec<f64> = s.values().iter().map(|v| v * (2.0f64).sqrt()).collect();
        assert!((scaled[0] - 3.0).abs() < 1e-9);
        assert!((scaled[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn operator_norm_known_cases() {
        let id = DataMatrix::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((operator_norm(&id, 1e-12).unwrap() - 1.0).abs() < 1e-9);

        let shift = DataMatrix::new(2, 2, vec![0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!((operator_norm(&shift, 1e-12).unwrap() - 2.0).abs() < 1e-9);

        let zero = DataMatrix::zeros(3, 2).unwrap();
        assert_eq!(operator_norm(&zero, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn operator_norm_handles_rank_one_sign_pattern() {
        // Top eigenvector is (1, -1)/√2; a fixed naive start like the
        // all-ones vector would be orthogonal to it.
        let a = DataMatrix::new(2, 2, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((operator_norm(&a, 1e-12).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dilation_spectrum_is_signed_singular_values() {
        let x = DataMatrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        // m = 1: dilation spectrum is {-5, 0, 5} since X has rank 1
        let d = dilation(&x);
        let s = symmetric_eigenvalues(&d, DEFAULT_EIG_TOL).unwrap();
        let got = s.values();
        assert!((got[0] + 5.0).abs() < 1e-9);
        assert!(got[1].abs() < 1e-9);
        assert!((got[2] - 5.0).abs() < 1e-9);
    }
}
