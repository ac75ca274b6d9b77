//! Monte Carlo tail verification and property suites.
//!
//! Replications are independent jobs keyed by replication index;
//! results are collected in index order, so output is identical for any
//! worker count, with a single worker as the reference configuration.

mod checks;
mod stats;
mod tail;

pub use checks::{
    binomial_exact_law_test, check_bounded_difference, check_dilation_identity,
    check_rank_inequalities, check_trace_lipschitz, BoundedDifferenceReport, DilationReport,
    RankCheckReport, TraceLipschitzReport, CHECK_TOL,
};
pub use stats::{binomial_half_pmf, chi_square_gof, clopper_pearson, GofReport};
pub use tail::{
    count_violations, estimate_center, estimate_tail, tail_reports_to_csv, BoundCheck,
    CenterEstimate, TailReport, TIE_TOL,
};

use crate::bounds::BoundError;
use crate::ensembles::{EnsembleError, EnsembleSpec, SampleHandle};
use crate::functionals::{FunctionError, TestFunction};
use crate::linalg::{
    spectral_cdf, spectral_functional, symmetric_eigenvalues, LinalgError, Spectrum,
    DEFAULT_EIG_TOL,
};
use rayon::prelude::*;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("worker pool: {0}")]
    ThreadPool(String),
    #[error(
        "spectral statistic {value} is off the integer lattice; the sampling pipeline is broken"
    )]
    NonLatticeStatistic { value: f64 },
}

/// The scalar read off each replication's spectrum.
#[derive(Debug, Clone)]
pub enum Statistic {
    /// Mean of a test function over the eigenvalues.
    Functional(TestFunction),
    /// Spectral CDF evaluated at a fixed point.
    CdfAt(f64),
}

impl Statistic {
    pub fn evaluate(&self, spectrum: &Spectrum) -> Result<f64, LinalgError> {
        match self {
            Statistic::Functional(f) => spectral_functional(spectrum, f),
            Statistic::CdfAt(lambda) => Ok(spectral_cdf(spectrum, *lambda)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Statistic::Functional(f) => format!("F({})", f.name()),
            Statistic::CdfAt(lambda) => format!("cdf@{lambda}"),
        }
    }
}

impl From<TestFunction> for Statistic {
    fn from(f: TestFunction) -> Self {
        Statistic::Functional(f)
    }
}

/// Sample one replication, eigensolve, and read off the statistic.
pub fn replication_statistic(
    spec: &EnsembleSpec,
    master_seed: u64,
    replication: u64,
    stat: &Statistic,
) -> Result<f64, VerifyError> {
    let matrix = SampleHandle::new(spec, master_seed, replication).spectral_matrix()?;
    let spectrum = symmetric_eigenvalues(&matrix, DEFAULT_EIG_TOL)?;
    Ok(stat.evaluate(&spectrum)?)
}

/// Evaluate the statistic over a replication index range on a dedicated
/// pool, returning values in index order.
pub(crate) fn collect_statistics(
    spec: &EnsembleSpec,
    stat: &Statistic,
    master_seed: u64,
    replications: Range<u64>,
    workers: usize,
) -> Result<Vec<f64>, VerifyError> {
    if workers == 0 {
        return Err(VerifyError::InvalidParameter(
            "workers must be at least 1".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| VerifyError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        replications
            .into_par_iter()
            .map(|rep| replication_statistic(spec, master_seed, rep, stat))
            .collect()
    })
}
