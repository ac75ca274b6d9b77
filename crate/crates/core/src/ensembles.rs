//! Seeded, reproducible random-matrix ensembles.
//!
//! Every ensemble is sampled block by block, where a block is one of
//! the independent quantities the matrix is built from (a row, an
//! innovation vector, a sign). Each block draws from its own counter
//! stream keyed by (master seed, replication, block), so a replication
//! is bit-identical no matter the execution order or thread count, and
//! any single block can be redrawn independently for bounded-difference
//! experiments.

use crate::linalg::{wishart, DataMatrix, LinalgError, Spectrum, SymMatrix};
use crate::rng::{stream, StreamKey};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("walsh order k = {k} exceeds the supported maximum {max}")]
    DimensionTooLarge { k: u32, max: u32 },
    #[error(
        "block {block} produced out-of-range entry {value}; bounded ensembles require |x| <= 1"
    )]
    BoundViolation { value: f64, block: usize },
    #[error("block index {index} out of range, ensemble has {count} blocks")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("invalid ensemble parameter: {what}")]
    InvalidParameter { what: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

const MAX_WALSH_ORDER: u32 = 16;

/// Fills a block with draws from its dedicated stream. Values must land
/// in [-1, 1]; anything else aborts the sample rather than being
/// clamped, since clamping would change the law being verified.
pub type BlockSampler = Arc<dyn Fn(&mut ChaCha8Rng, &mut [f64]) + Send + Sync>;

fn uniform_sampler() -> BlockSampler {
    Arc::new(|rng, out| {
        for v in out.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
    })
}

fn bernoulli_sampler(q: f64) -> BlockSampler {
    Arc::new(move |rng, out| {
        for v in out.iter_mut() {
            *v = if rng.gen::<f64>() < q { 1.0 } else { 0.0 };
        }
    })
}

enum Kind {
    WalshBernoulli {
        k: u32,
    },
    DiagonalBernoulli {
        n: usize,
    },
    IndependentRows {
        n: usize,
        m: usize,
        row: BlockSampler,
    },
    Ma2 {
        n: usize,
        m: usize,
        b: Arc<DataMatrix>,
        innovation: BlockSampler,
    },
    Ma2Factor {
        n: usize,
        m: usize,
        b: Arc<DataMatrix>,
        u: Arc<DataMatrix>,
        entry: BlockSampler,
    },
    SequentialGraph {
        n: usize,
        row: BlockSampler,
    },
}

/// One of the supported random-matrix laws plus its dimensions.
pub struct EnsembleSpec {
    kind: Kind,
}

impl fmt::Debug for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "EnsembleSpec({}, n={}, m={})",
            self.kind_name(),
            self.dim(),
            self.rows()
        )
    }
}

/// A sampled matrix: data kinds produce the rectangular X, the graph
/// kind produces the symmetric adjacency matrix directly.
#[derive(Debug, Clone)]
pub enum SampleOutput {
    Data(DataMatrix),
    Sym(SymMatrix),
}

impl EnsembleSpec {
    /// Rows R_i v_i' built from the order-2^k Walsh matrix with fair
    /// Bernoulli signs.
    pub fn walsh_bernoulli(k: u32) -> Result<Self, EnsembleError> {
        if k > MAX_WALSH_ORDER {
            return Err(EnsembleError::DimensionTooLarge {
                k,
                max: MAX_WALSH_ORDER,
            });
        }
        Ok(EnsembleSpec {
            kind: Kind::WalshBernoulli { k },
        })
    }

    /// diag(R_1, ..., R_n) with fair Bernoulli entries.
    pub fn diagonal_bernoulli(n: usize) -> Result<Self, EnsembleError> {
        check_dim("n", n)?;
        Ok(EnsembleSpec {
            kind: Kind::DiagonalBernoulli { n },
        })
    }

    /// m independent rows filled by `row`, entries constrained to [-1, 1].
    pub fn independent_rows(n: usize, m: usize, row: BlockSampler) -> Result<Self, EnsembleError> {
        check_dim("n", n)?;
        check_dim("m", m)?;
        Ok(EnsembleSpec {
            kind: Kind::IndependentRows { n, m, row },
        })
    }

    /// Independent rows with i.i.d. uniform [-1, 1] entries.
    pub fn independent_rows_uniform(n: usize, m: usize) -> Result<Self, EnsembleError> {
        EnsembleSpec::independent_rows(n, m, uniform_sampler())
    }

    /// Order-2 moving average rows X_i = Y_{i+1} + B Y_i over m+1
    /// independent innovations confined to [-1, 1]^n.
    pub fn ma2(
        n: usize,
        m: usize,
        b: DataMatrix,
        innovation: BlockSampler,
    ) -> Result<Self, EnsembleError> {
        check_dim("n", n)?;
        check_dim("m", m)?;
        check_square("B", &b, n)?;
        Ok(EnsembleSpec {
            kind: Kind::Ma2 {
                n,
                m,
                b: Arc::new(b),
                innovation,
            },
        })
    }

    /// MA(2) with the default i.i.d. uniform innovation coordinates.
    pub fn ma2_uniform(n: usize, m: usize, b: DataMatrix) -> Result<Self, EnsembleError> {
        EnsembleSpec::ma2(n, m, b, uniform_sampler())
    }

    /// MA(2) with factor innovations Y_i = U Z_i, where the Z entries
    /// are independent and confined to [-1, 1].
    pub fn ma2_factor(
        n: usize,
        m: usize,
        b: DataMatrix,
        u: DataMatrix,
        entry: BlockSampler,
    ) -> Result<Self, EnsembleError> {
        check_dim("n", n)?;
        check_dim("m", m)?;
        check_square("B", &b, n)?;
        check_square("U", &u, n)?;
        Ok(EnsembleSpec {
            kind: Kind::Ma2Factor {
                n,
                m,
                b: Arc::new(b),
                u: Arc::new(u),
                entry,
            },
        })
    }

    pub fn ma2_factor_uniform(
        n: usize,
        m: usize,
        b: DataMatrix,
        u: DataMatrix,
    ) -> Result<Self, EnsembleError> {
        EnsembleSpec::ma2_factor(n, m, b, u, uniform_sampler())
    }

    /// Adjacency matrix of a graph whose entities join one at a time;
    /// entity i draws its connections to the i earlier members from
    /// `row`, independently across entities. Zero diagonal.
    pub fn sequential_graph(n: usize, row: BlockSampler) -> Result<Self, EnsembleError> {
        check_dim("n", n)?;
        Ok(EnsembleSpec {
            kind: Kind::SequentialGraph { n, row },
        })
    }

    /// Sequential graph with independent Bernoulli(q) edges.
    pub fn sequential_graph_bernoulli(n: usize, q: f64) -> Result<Self, EnsembleError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(EnsembleError::InvalidParameter {
                what: format!("edge probability {q} outside [0, 1]"),
            });
        }
        EnsembleSpec::sequential_graph(n, bernoulli_sampler(q))
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::WalshBernoulli { .. } => "walsh_bernoulli",
            Kind::DiagonalBernoulli { .. } => "diagonal_bernoulli",
            Kind::IndependentRows { .. } => "independent_rows",
            Kind::Ma2 { .. } => "ma2",
            Kind::Ma2Factor { .. } => "ma2_factor",
            Kind::SequentialGraph { .. } => "sequential_graph",
        }
    }

    /// Dimension of the spectrum under study.
    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::WalshBernoulli { k } => 1 << k,
            Kind::DiagonalBernoulli { n } => *n,
            Kind::IndependentRows { n, .. } => *n,
            Kind::Ma2 { n, .. } => *n,
            Kind::Ma2Factor { n, .. } => *n,
            Kind::SequentialGraph { n, .. } => *n,
        }
    }

    /// Row count m entering the 1/m (or 1/√m) normalization.
    pub fn rows(&self) -> usize {
        match &self.kind {
            Kind::WalshBernoulli { k } => 1 << k,
            Kind::DiagonalBernoulli { n } => *n,
            Kind::IndependentRows { m, .. } => *m,
            Kind::Ma2 { m, .. } => *m,
            Kind::Ma2Factor { m, .. } => *m,
            Kind::SequentialGraph { n, .. } => *n,
        }
    }

    /// Number of independent blocks a sample is built from.
    pub fn block_count(&self) -> usize {
        match &self.kind {
            Kind::WalshBernoulli { k } => 1 << k,
            Kind::DiagonalBernoulli { n } => *n,
            Kind::IndependentRows { m, .. } => *m,
            // innovations Y_1 ..= Y_{m+1}
            Kind::Ma2 { m, .. } | Kind::Ma2Factor { m, .. } => *m + 1,
            Kind::SequentialGraph { n, .. } => *n,
        }
    }
}

fn check_dim(what: &str, v: usize) -> Result<(), EnsembleError> {
    if v == 0 {
        return Err(EnsembleError::InvalidParameter {
            what: format!("{what} must be at least 1"),
        });
    }
    Ok(())
}

fn check_square(what: &str, m: &DataMatrix, n: usize) -> Result<(), EnsembleError> {
    if m.rows() != n || m.cols() != n {
        return Err(EnsembleError::InvalidParameter {
            what: format!("{what} must be {n}x{n}, got {}x{}", m.rows(), m.cols()),
        });
    }
    Ok(())
}

/// Sylvester construction: n = 2^k rows of ±1 entries, pairwise
/// orthogonal with row_i · row_j = n 1{i = j}.
pub fn walsh_rows(k: u32) -> Result<DataMatrix, EnsembleError> {
    if k > MAX_WALSH_ORDER {
        return Err(EnsembleError::DimensionTooLarge {
            k,
            max: MAX_WALSH_ORDER,
        });
    }
    let n = 1usize << k;
    let mut h = vec![0.0f64; n * n];
    h[0] = 1.0;
    let mut size = 1;
    while size < n {
        for i in 0..size {
            for j in 0..size {
                let v = h[i * n + j];
                h[i * n + (j + size)] = v;
                h[(i + size) * n + j] = v;
                h[(i + size) * n + (j + size)] = -v;
            }
        }
        size *= 2;
    }
    Ok(DataMatrix::new(n, n, h).expect("walsh entries are ±1"))
}

/// Addressable replication of an ensemble.
#[derive(Debug, Clone, Copy)]
pub struct SampleHandle<'a> {
    spec: &'a EnsembleSpec,
    master_seed: u64,
    replication: u64,
}

impl<'a> SampleHandle<'a> {
    pub fn new(spec: &'a EnsembleSpec, master_seed: u64, replication: u64) -> Self {
        SampleHandle {
            spec,
            master_seed,
            replication,
        }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        self.spec
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    fn block_rng(&self, block: usize, redrawn: Option<usize>) -> ChaCha8Rng {
        let variant = u64::from(redrawn == Some(block));
        stream(
            StreamKey::new(self.master_seed, self.replication, block as u64).with_variant(variant),
        )
    }

    /// Draw the matrix for this replication.
    pub fn sample(&self) -> Result<SampleOutput, EnsembleError> {
        self.sample_with(None)
    }

    /// Draw the matrix and a copy with independent block `block`; every
    /// other block is bit-identical between the pair.
    pub fn replace_block(
        &self,
        block: usize,
    ) -> Result<(SampleOutput, SampleOutput), EnsembleError> {
        let count = self.spec.block_count();
        if block >= count {
            return Err(EnsembleError::IndexOutOfRange {
                index: block,
                count,
            });
        }
        Ok((self.sample_with(None)?, self.sample_with(Some(block))?))
    }

    /// The symmetric matrix whose spectrum the ensemble studies:
    /// XᵀX/m for data kinds, M/√m for the graph kind.
    pub fn spectral_matrix(&self) -> Result<SymMatrix, EnsembleError> {
        Ok(to_spectral(self.spec, self.sample()?))
    }

    /// Spectral matrices for the pair returned by
    /// [`replace_block`](Self::replace_block).
    pub fn spectral_matrix_pair(
        &self,
        block: usize,
    ) -> Result<(SymMatrix, SymMatrix), EnsembleError> {
        let (a, b) = self.replace_block(block)?;
        Ok((to_spectral(self.spec, a), to_spectral(self.spec, b)))
    }

    /// Raw draw of one independent block (signs, a row, or an
    /// innovation vector, depending on the kind).
    pub fn block_values(&self, block: usize) -> Result<Vec<f64>, EnsembleError> {
        let count = self.spec.block_count();
        if block >= count {
            return Err(EnsembleError::IndexOutOfRange {
                index: block,
                count,
            });
        }
        let mut rng = self.block_rng(block, None);
        Ok(match &self.spec.kind {
            Kind::WalshBernoulli { .. } | Kind::DiagonalBernoulli { .. } => {
                vec![draw_sign(&mut rng)]
            }
            Kind::IndependentRows { n, row, .. } => {
                let mut out = vec![0.0; *n];
                row(&mut rng, &mut out);
                out
            }
            Kind::Ma2 { n, innovation, .. } => {
                let mut out = vec![0.0; *n];
                innovation(&mut rng, &mut out);
                out
            }
            Kind::Ma2Factor { n, entry, .. } => {
                let mut out = vec![0.0; *n];
                entry(&mut rng, &mut out);
                out
            }
            Kind::SequentialGraph { row, .. } => {
                let mut out = vec![0.0; block];
                if block > 0 {
                    row(&mut rng, &mut out);
                }
                out
            }
        })
    }

    /// Closed-form spectrum for kinds whose eigenvalues are known
    /// without an eigensolve: the squared signs for the Walsh rows, the
    /// squared signs over n for the diagonal kind. `None` elsewhere.
    ///
    /// A fast path for large sweeps; the eigensolver route stays the
    /// reference and the two must agree, which the tests pin down.
    pub fn analytic_spectrum(&self) -> Result<Option<Spectrum>, EnsembleError> {
        let draw_sq = |count: usize| -> Vec<f64> {
            (0..count)
                .map(|b| {
                    let sign = draw_sign(&mut self.block_rng(b, None));
                    sign * sign
                })
                .collect()
        };
        Ok(match &self.spec.kind {
            Kind::WalshBernoulli { k } => {
                let n = 1usize << k;
                Some(Spectrum::from_unsorted(draw_sq(n))?)
            }
            Kind::DiagonalBernoulli { n } => {
                let scale = *n as f64;
                let values = draw_sq(*n).into_iter().map(|v| v / scale).collect();
                Some(Spectrum::from_unsorted(values)?)
            }
            _ => None,
        })
    }

    fn sample_with(&self, redrawn: Option<usize>) -> Result<SampleOutput, EnsembleError> {
        match &self.spec.kind {
            Kind::WalshBernoulli { k } => {
                let n = 1usize << k;
                let walsh = walsh_rows(*k)?;
                let mut entries = Vec::with_capacity(n * n);
                for i in 0..n {
                    let sign = draw_sign(&mut self.block_rng(i, redrawn));
                    entries.extend(walsh.row(i).iter().map(|v| sign * v));
                }
                Ok(SampleOutput::Data(
                    DataMatrix::new(n, n, entries).expect("walsh rows are finite"),
                ))
            }
            Kind::DiagonalBernoulli { n } => {
                let mut x = DataMatrix::zeros(*n, *n)?;
                for i in 0..*n {
                    x.set(i, i, draw_sign(&mut self.block_rng(i, redrawn)));
                }
                Ok(SampleOutput::Data(x))
            }
            Kind::IndependentRows { n, m, row } => {
                let mut x = DataMatrix::zeros(*m, *n)?;
                for i in 0..*m {
                    let mut rng = self.block_rng(i, redrawn);
                    row(&mut rng, x.row_mut(i));
                    check_bounded(x.row(i), i)?;
                }
                Ok(SampleOutput::Data(x))
            }
            Kind::Ma2 {
                n,
                m,
                b,
                innovation,
            } => {
                let innovations =
                    self.draw_blocks(*m + 1, *n, innovation, redrawn, /*bounded=*/ true)?;
                Ok(SampleOutput::Data(ma_rows(*n, *m, b, &innovations)))
            }
            Kind::Ma2Factor { n, m, b, u, entry } => {
                let z = self.draw_blocks(*m + 1, *n, entry, redrawn, /*bounded=*/ true)?;
                let innovations: Vec<Vec<f64>> = z.iter().map(|zi| u.mul_vec(zi)).collect();
                Ok(SampleOutput::Data(ma_rows(*n, *m, b, &innovations)))
            }
            Kind::SequentialGraph { n, row } => {
                let mut rows: Vec<Vec<f64>> = Vec::with_capacity(*n);
                for i in 0..*n {
                    let mut out = vec![0.0; i];
                    if i > 0 {
                        let mut rng = self.block_rng(i, redrawn);
                        row(&mut rng, &mut out);
                        check_bounded(&out, i)?;
                    }
                    rows.push(out);
                }
                let adj = SymMatrix::from_fn(*n, |a, b| {
                    if a == b {
                        0.0
                    } else {
                        // a < b here: entity b chose its link to the earlier entity a
                        rows[b][a]
                    }
                })?;
                Ok(SampleOutput::Sym(adj))
            }
        }
    }

    fn draw_blocks(
        &self,
        count: usize,
        len: usize,
        sampler: &BlockSampler,
        redrawn: Option<usize>,
        bounded: bool,
    ) -> Result<Vec<Vec<f64>>, EnsembleError> {
        let mut blocks = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = self.block_rng(i, redrawn);
            let mut out = vec![0.0; len];
            sampler(&mut rng, &mut out);
            if bounded {
                check_bounded(&out, i)?;
            }
            blocks.push(out);
        }
        Ok(blocks)
    }
}

fn draw_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        0.0
    }
}

fn check_bounded(values: &[f64], block: usize) -> Result<(), EnsembleError> {
    for &v in values {
        if v.is_nan() || v.abs() > 1.0 {
            return Err(EnsembleError::BoundViolation { value: v, block });
        }
    }
    Ok(())
}

fn ma_rows(n: usize, m: usize, b: &DataMatrix, innovations: &[Vec<f64>]) -> DataMatrix {
    let mut entries = Vec::with_capacity(m * n);
    for i in 0..m {
        let lagged = b.mul_vec(&innovations[i]);
        entries.extend(
            innovations[i + 1]
                .iter()
                .zip(&lagged)
                .map(|(next, lag)| next + lag),
        );
    }
    DataMatrix::new(m, n, entries).expect("MA rows of finite blocks are finite")
}

fn to_spectral(spec: &EnsembleSpec, sample: SampleOutput) -> SymMatrix {
    match sample {
        SampleOutput::Data(x) => wishart(&x),
        SampleOutput::Sym(m) => {
            let scale = 1.0 / (spec.rows() as f64).sqrt();
            SymMatrix::from_fn(m.dim(), |i, j| m.get(i, j) * scale)
                .expect("scaling preserves finiteness")
        }
    }
}
