//! Cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Plane rotations annihilate one off-diagonal element at a time; a
//! sweep visits every (p, q) pair in row order. Convergence is declared
//! when the off-diagonal Frobenius norm drops below `tol * ||A||_F`.
//! Unconditionally stable for real symmetric input, which is all this
//! crate ever feeds it.

use super::matrix::SymMatrix;
use super::spectrum::Spectrum;
use super::LinalgError;

/// Relative off-diagonal norm threshold used when callers do not pick one.
pub const DEFAULT_EIG_TOL: f64 = 1e-12;

/// Cyclic sweeps allowed before giving up.
const SWEEP_BUDGET: usize = 64;

/// All eigenvalues of `a`, sorted nondecreasing.
pub fn symmetric_eigenvalues(a: &SymMatrix, tol: f64) -> Result<Spectrum, LinalgError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LinalgError::InvalidTolerance { tol });
    }
    jacobi_eigenvalues(a, tol, SWEEP_BUDGET)
}

pub(crate) fn jacobi_eigenvalues(
    a: &SymMatrix,
    tol: f64,
    sweep_budget: usize,
) -> Result<Spectrum, LinalgError> {
    let n = a.dim();
    if n == 1 {
        return Spectrum::from_unsorted(vec![a.get(0, 0)]);
    }

    let mut w = a.to_full();
    let threshold = tol * frobenius(&w, n);
    // Elements at or below this cannot keep the off-diagonal norm above
    // the threshold even if every pair sits exactly there.
    let skip = threshold / n as f64;

    let diag = |w: &[f64]| (0..n).map(|i| w[i * n + i]).collect::<Vec<_>>();
    for _ in 0..sweep_budget {
        if off_diagonal_norm(&w, n) <= threshold {
            return Spectrum::from_unsorted(diag(&w));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut w, n, p, q, skip);
            }
        }
    }

    if off_diagonal_norm(&w, n) <= threshold {
        return Spectrum::from_unsorted(diag(&w));
    }
    Err(LinalgError::NonConvergence {
        what: "jacobi eigenvalue sweeps",
    })
}

// Only the upper triangle is maintained during sweeps; entry (i, j)
// with i <= j lives at w[i*n + j].
#[inline]
fn rotate(w: &mut [f64], n: usize, p: usize, q: usize, skip: f64) {
    let apq = w[p * n + q];
    if apq.abs() <= skip {
        return;
    }
    let app = w[p * n + p];
    let aqq = w[q * n + q];
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        1.0 / (tau - (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for k in 0..p {
        let akp = w[k * n + p];
        let akq = w[k * n + q];
        w[k * n + p] = c * akp - s * akq;
        w[k * n + q] = s * akp + c * akq;
    }
    for k in p + 1..q {
        let apk = w[p * n + k];
        let akq = w[k * n + q];
        w[p * n + k] = c * apk - s * akq;
        w[k * n + q] = s * apk + c * akq;
    }
    for k in q + 1..n {
        let apk = w[p * n + k];
        let aqk = w[q * n + k];
        w[p * n + k] = c * apk - s * aqk;
        w[q * n + k] = s * apk + c * aqk;
    }
    w[p * n + p] = app - t * apq;
    w[q * n + q] = aqq + t * apq;
    w[p * n + q] = 0.0;
}

fn frobenius(w: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in i..n {
            let v = w[i * n + j];
            sum += if i == j { v * v } else { 2.0 * v * v };
        }
    }
    sum.sqrt()
}

fn off_diagonal_norm(w: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = w[i * n + j];
            sum += 2.0 * v * v;
        }
    }
    sum.sqrt()
}
