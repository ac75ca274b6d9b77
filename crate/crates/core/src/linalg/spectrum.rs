use super::LinalgError;
use crate::functionals::TestFunction;

/// Sorted eigenvalues of a symmetric matrix, the carrier of the
/// empirical spectral distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    // nondecreasing, all finite
    values: Vec<f64>,
}

impl Spectrum {
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self, LinalgError> {
        if values.is_empty() {
            return Err(LinalgError::EmptyDimension);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        values.sort_by(f64::total_cmp);
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Number of eigenvalues at or below `lambda` (multiplicity counts).
    pub fn count_le(&self, lambda: f64) -> usize {
        self.values.partition_point(|&v| v <= lambda)
    }
}

/// Spectral CDF: fraction of eigenvalues at or below `lambda`.
///
/// Right-continuous by the closed comparison.
pub fn spectral_cdf(s: &Spectrum, lambda: f64) -> f64 {
    s.count_le(lambda) as f64 / s.len() as f64
}

/// Linear spectral statistic: mean of `f` over the eigenvalues.
pub fn spectral_functional(s: &Spectrum, f: &TestFunction) -> Result<f64, LinalgError> {
    let (a, b) = f.domain();
    let mut acc = 0.0;
    for &v in s.values() {
        if !(a < v && v < b) {
            return Err(LinalgError::DomainViolation {
                value: v,
                domain: (a, b),
            });
        }
        acc += f.eval(v);
    }
    Ok(acc / s.len() as f64)
}

/// Exact sup-norm distance between two spectral CDFs.
///
/// Both CDFs are step functions, so the supremum is attained on the
/// merged set of jump points; the scan below evaluates the count gap at
/// every one of them in integer arithmetic.
pub fn kolmogorov_distance(s1: &Spectrum, s2: &Spectrum) -> Result<f64, LinalgError> {
    if s1.len() != s2.len() {
        return Err(LinalgError::DimensionMismatch {
            left: s1.len(),
            right: s2.len(),
        });
    }
    let n = s1.len();
    let a = s1.values();
    let b = s2.values();
    let (mut i, mut j) = (0usize, 0usize);
    let mut max_gap = 0usize;
    while i < n || j < n {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < n && b[j] <= v {
            j += 1;
        }
        max_gap = max_gap.max(i.abs_diff(j));
    }
    Ok(max_gap as f64 / n as f64)
}
