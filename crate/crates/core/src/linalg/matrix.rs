use super::LinalgError;

/// Symmetric matrix with packed upper-triangle storage.
///
/// Only entries with `i <= j` are stored, so symmetry holds by
/// construction rather than by numerical accident.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    // row-major packed upper triangle, n*(n+1)/2 entries
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        Ok(SymMatrix {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        })
    }

    /// Build from a function of the upper-triangle index pair (i <= j).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, LinalgError> {
        let mut m = SymMatrix::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite);
                }
                m.upper[pack(n, i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Build from a full row-major matrix, requiring exact symmetry.
    pub fn from_full(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                left: data.len(),
                right: n * n,
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        SymMatrix::from_fn(n, |i, j| data[i * n + j])
    }

    pub fn diagonal(values: &[f64]) -> Result<Self, LinalgError> {
        SymMatrix::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.upper[pack(self.n, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.upper[pack(self.n, i, j)] = v;
    }

    /// Expand to a full row-major matrix.
    pub fn to_full(&self) -> Vec<f64> {
        let n = self.n;
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.upper[pack(n, i, j)];
                full[i * n + j] = v;
                full[j * n + i] = v;
            }
        }
        full
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm of the full matrix (off-diagonal entries counted twice).
    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                let w = if i == j { 1.0 } else { 2.0 };
                sum += w * v * v;
            }
        }
        sum.sqrt()
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        if self.n != other.n {
            return Err(LinalgError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        SymMatrix::from_fn(self.n, |i, j| self.get(i, j) - other.get(i, j))
    }
}

#[inline]
fn pack(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

/// Dense rectangular data matrix, rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    m: usize,
    n: usize,
    // row-major
    entries: Vec<f64>,
}

impl DataMatrix {
    pub fn new(m: usize, n: usize, entries: Vec<f64>) -> Result<Self, LinalgError> {
        if m == 0 || n == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if entries.len() != m * n {
            return Err(LinalgError::DimensionMismatch {
                left: entries.len(),
                right: m * n,
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(DataMatrix { m, n, entries })
    }

    pub fn zeros(m: usize, n: usize) -> Result<Self, LinalgError> {
        DataMatrix::new(m, n, vec![0.0; m * n])
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.m)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// y = Aᵀ x
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.m);
        let mut y = vec![0.0; self.n];
        for (row, &xi) in self.entries.chunks_exact(self.n).zip(x) {
            for (yj, aij) in y.iter_mut().zip(row) {
                *yj += aij * xi;
            }
        }
        y
    }
}

/// Sample covariance S = XᵀX/m, symmetric PSD by construction.
pub fn wishart(x: &DataMatrix) -> SymMatrix {
    let m = x.rows() as f64;
    SymMatrix::from_fn(x.cols(), |i, j| {
        let mut acc = 0.0;
        for k in 0..x.rows() {
            acc += x.get(k, i) * x.get(k, j);
        }
        acc / m
    })
    .expect("covariance of a finite matrix is finite")
}

/// Symmetric dilation [[0, Xᵀ],[X, 0]] / √m of size (m+n) × (m+n).
///
/// Its spectrum is ±σ_i(X/√m) padded with |m−n| zeros, so spectral
/// statistics of XᵀX/m can be cross-checked through an independent
/// eigendecomposition.
pub fn dilation(x: &DataMatrix) -> SymMatrix {
    let (m, n) = (x.rows(), x.cols());
    let scale = (m as f64).sqrt();
    SymMatrix::from_fn(n + m, |i, j| {
        if i < n && j >= n {
            x.get(j - n, i) / scale
        } else {
            0.0
        }
    })
    .expect("dilation of a finite matrix is finite")
}
