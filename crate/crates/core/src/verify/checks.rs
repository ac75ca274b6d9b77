//! Randomized property suites for the inequalities and identities the
//! tail bounds rest on. Every suite returns a report whose violation
//! count must be zero on a correct build.

use super::stats::{binomial_half_pmf, chi_square_gof, GofReport};
use super::{collect_statistics, Statistic, VerifyError};
use crate::ensembles::{EnsembleSpec, SampleHandle, SampleOutput};
use crate::functionals::{make_sqrt_abs, TestFunction};
use crate::linalg::{
    dilation, kolmogorov_distance, spectral_functional, symmetric_eigenvalues, wishart, DataMatrix,
    SymMatrix, DEFAULT_EIG_TOL,
};
use crate::rng::{stream, StreamKey};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Numerical slack on inequality checks, absorbing eigensolver residue.
pub const CHECK_TOL: f64 = 1e-9;

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0)).expect("finite entries")
}

fn random_data(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DataMatrix {
    DataMatrix::new(
        m,
        n,
        (0..m * n).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
    )
    .expect("finite entries")
}

#[derive(Debug, Clone, Copy)]
pub struct RankCheckReport {
    pub trials: u64,
    pub violations: u64,
    /// Smallest observed margin `rank/n − distance`; never negative on
    /// a correct build.
    pub worst_slack: f64,
}

/// Spectral-CDF sensitivity to low-rank perturbations, in both the
/// symmetric form (A vs A + low-rank) and the covariance form
/// (XᵀX vs YᵀY with a few rows replaced).
pub fn check_rank_inequalities(
    trials: u64,
    master_seed: u64,
    n_max: usize,
) -> Result<RankCheckReport, VerifyError> {
    if trials == 0 || n_max < 2 {
        return Err(VerifyError::InvalidParameter(
            "rank check needs trials >= 1 and n_max >= 2".into(),
        ));
    }
    let mut violations = 0;
    let mut worst_slack = f64::INFINITY;
    for t in 0..trials {
        let mut rng = stream(StreamKey::new(master_seed, t, 0));
        let n = rng.gen_range(2..=n_max);
        let k = rng.gen_range(0..=3.min(n));

        // symmetric route: sum of k outer products has rank at most k
        let a = random_symmetric(&mut rng, n);
        let directions: Vec<(f64, Vec<f64>)> = (0..k)
            .map(|_| {
                let scale = rng.gen_range(-2.0..=2.0);
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                (scale, v)
            })
            .collect();
        let b = SymMatrix::from_fn(n, |i, j| {
            a.get(i, j) + directions.iter().map(|(s, v)| s * v[i] * v[j]).sum::<f64>()
        })?;
        let d_sym = kolmogorov_distance(
            &symmetric_eigenvalues(&a, DEFAULT_EIG_TOL)?,
            &symmetric_eigenvalues(&b, DEFAULT_EIG_TOL)?,
        )?;
        let bound = k as f64 / n as f64;
        worst_slack = worst_slack.min(bound - d_sym);
        if d_sym > bound + CHECK_TOL {
            violations += 1;
        }

        // covariance route: replacing k rows changes X by rank at most k.
        // m >= n keeps XᵀX generically full rank; rank-deficient pairs
        // share an exact zero eigenvalue cluster that round-off splits
        // into interleaved values, which would corrupt the count gap.
        let m = rng.gen_range(n..=n + n_max);
        let x = random_data(&mut rng, m, n);
        let mut y = x.clone();
        let replaced = k.min(m);
        for row in 0..replaced {
            for col in 0..n {
                y.set(row, col, rng.gen_range(-1.0..=1.0));
            }
        }
        let d_cov = kolmogorov_distance(
            &symmetric_eigenvalues(&wishart(&x), DEFAULT_EIG_TOL)?,
            &symmetric_eigenvalues(&wishart(&y), DEFAULT_EIG_TOL)?,
        )?;
        let bound = replaced as f64 / n as f64;
        worst_slack = worst_slack.min(bound - d_cov);
        if d_cov > bound + CHECK_TOL {
            violations += 1;
        }
    }
    Ok(RankCheckReport {
        trials,
        violations,
        worst_slack,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BoundedDifferenceReport {
    pub trials: u64,
    pub violations: u64,
    pub max_kolmogorov: f64,
    pub kolmogorov_bound: f64,
    pub max_functional_diff: f64,
    pub functional_bound: f64,
}

/// Replacing one independent block moves the spectral CDF by at most
/// r/n in sup norm and any bounded-variation statistic by at most
/// r·V/n. Blocks are cycled so every index is exercised.
pub fn check_bounded_difference(
    spec: &EnsembleSpec,
    f: &TestFunction,
    trials: u64,
    master_seed: u64,
    r_claimed: u64,
) -> Result<BoundedDifferenceReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::InvalidParameter("trials must be >= 1".into()));
    }
    let variation = f.variation().ok_or_else(|| {
        VerifyError::InvalidParameter(format!("function {} declares no variation bound", f.name()))
    })?;
    let n = spec.dim() as f64;
    let kolmogorov_bound = r_claimed as f64 / n;
    let functional_bound = r_claimed as f64 * variation / n;

    let mut violations = 0;
    let mut max_kolmogorov = 0.0f64;
    let mut max_functional_diff = 0.0f64;
    for t in 0..trials {
        let block = (t % spec.block_count() as u64) as usize;
        let (s1, s2) = SampleHandle::new(spec, master_seed, t).spectral_matrix_pair(block)?;
        let e1 = symmetric_eigenvalues(&s1, DEFAULT_EIG_TOL)?;
        let e2 = symmetric_eigenvalues(&s2, DEFAULT_EIG_TOL)?;
        let kd = kolmogorov_distance(&e1, &e2)?;
        let fd = (spectral_functional(&e1, f)? - spectral_functional(&e2, f)?).abs();
        max_kolmogorov = max_kolmogorov.max(kd);
        max_functional_diff = max_functional_diff.max(fd);
        if kd > kolmogorov_bound + CHECK_TOL || fd > functional_bound + CHECK_TOL {
            violations += 1;
        }
    }
    Ok(BoundedDifferenceReport {
        trials,
        violations,
        max_kolmogorov,
        kolmogorov_bound,
        max_functional_diff,
        functional_bound,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DilationReport {
    pub trials: u64,
    pub violations: u64,
    pub max_discrepancy: f64,
    pub tol: f64,
}

/// The spectral statistic of XᵀX/m and of the scaled dilation agree
/// through f̃(x) = f(x²) up to the f(0) correction for rectangular
/// shapes. Both sides come from independent eigendecompositions.
pub fn check_dilation_identity(
    spec: &EnsembleSpec,
    f: &TestFunction,
    trials: u64,
    master_seed: u64,
    tol: f64,
) -> Result<DilationReport, VerifyError> {
    if trials == 0 || tol.is_nan() || tol <= 0.0 {
        return Err(VerifyError::InvalidParameter(
            "dilation check needs trials >= 1 and tol > 0".into(),
        ));
    }
    let (dom_a, dom_b) = f.domain();
    if !(dom_a < 0.0 && 0.0 < dom_b) {
        return Err(VerifyError::InvalidParameter(
            "dilation check needs f evaluable at 0".into(),
        ));
    }
    let mut violations = 0;
    let mut max_discrepancy = 0.0f64;
    for t in 0..trials {
        let x = match SampleHandle::new(spec, master_seed, t).sample()? {
            SampleOutput::Data(x) => x,
            SampleOutput::Sym(_) => {
                return Err(VerifyError::InvalidParameter(
                    "dilation identity applies to data ensembles only".into(),
                ))
            }
        };
        let (m, n) = (x.rows() as f64, x.cols() as f64);
        let nt = m + n;

        let cov_spectrum = symmetric_eigenvalues(&wishart(&x), DEFAULT_EIG_TOL)?;
        let rhs =
            (2.0 * n / nt) * spectral_functional(&cov_spectrum, f)? + ((m - n) / nt) * f.eval(0.0);

        let dil_spectrum = symmetric_eigenvalues(&dilation(&x), DEFAULT_EIG_TOL)?;
        let mut lhs = 0.0;
        for &lambda in dil_spectrum.values() {
            let sq = lambda * lambda;
            if !(dom_a < sq && sq < dom_b) {
                return Err(VerifyError::Linalg(
                    crate::linalg::LinalgError::DomainViolation {
                        value: sq,
                        domain: (dom_a, dom_b),
                    },
                ));
            }
            lhs += f.eval(sq);
        }
        lhs /= nt;

        let discrepancy = (lhs - rhs).abs();
        max_discrepancy = max_discrepancy.max(discrepancy);
        if discrepancy > tol {
            violations += 1;
        }
    }
    Ok(DilationReport {
        trials,
        violations,
        max_discrepancy,
        tol,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct TraceLipschitzReport {
    pub trials: u64,
    pub violations: u64,
    /// Largest observed |ΔF| / (√(2/n)·L·‖A−B‖_F); at most 1 on a
    /// correct build.
    pub max_ratio: f64,
}

/// The map A ↦ F_A(u) is Lipschitz with constant √(2/n)·‖u‖_L, checked
/// on random symmetric pairs against the Frobenius distance.
pub fn check_trace_lipschitz(
    trials: u64,
    master_seed: u64,
    n_max: usize,
    u: &TestFunction,
) -> Result<TraceLipschitzReport, VerifyError> {
    if trials == 0 || n_max == 0 {
        return Err(VerifyError::InvalidParameter(
            "trace check needs trials >= 1 and n_max >= 1".into(),
        ));
    }
    let lip = u.lip().ok_or_else(|| {
        VerifyError::InvalidParameter(format!(
            "function {} declares no Lipschitz constant",
            u.name()
        ))
    })?;
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for t in 0..trials {
        let mut rng = stream(StreamKey::new(master_seed, t, 0));
        let n = rng.gen_range(1..=n_max);
        let a = random_symmetric(&mut rng, n);
        let b = random_symmetric(&mut rng, n);
        let fa = spectral_functional(&symmetric_eigenvalues(&a, DEFAULT_EIG_TOL)?, u)?;
        let fb = spectral_functional(&symmetric_eigenvalues(&b, DEFAULT_EIG_TOL)?, u)?;
        let lhs = (fa - fb).abs();
        let rhs = (2.0 / n as f64).sqrt() * lip * a.sub(&b)?.frobenius_norm();
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        if lhs > rhs + CHECK_TOL {
            violations += 1;
        }
    }
    Ok(TraceLipschitzReport {
        trials,
        violations,
        max_ratio,
    })
}

/// Sign-count law of the Walsh/Bernoulli ensemble: n·F_S over the full
/// sampling and eigensolve pipeline is Binomial(n, 1/2), checked by
/// chi-square goodness of fit.
pub fn binomial_exact_law_test(
    k: u32,
    reps: u64,
    master_seed: u64,
    significance: f64,
    workers: usize,
) -> Result<GofReport, VerifyError> {
    if k > 6 {
        return Err(VerifyError::InvalidParameter(
            "exact cell probabilities are tabulated for k <= 6 (n <= 64)".into(),
        ));
    }
    let n = 1u64 << k;
    if reps < 10 * n {
        return Err(VerifyError::InvalidParameter(format!(
            "need at least {} replications for n = {n}",
            10 * n
        )));
    }
    let spec = EnsembleSpec::walsh_bernoulli(k)?;
    let stat = Statistic::Functional(make_sqrt_abs());
    let values = collect_statistics(&spec, &stat, master_seed, 0..reps, workers)?;

    // square-root noise on the zero eigenvalue cluster can reach ~1e-4
    // on the scaled statistic; anything past this guard is a real bug
    const LATTICE_GUARD: f64 = 1e-3;
    let mut observed = vec![0u64; n as usize + 1];
    for v in values {
        let scaled = v * n as f64;
        let cell = scaled.round();
        if (scaled - cell).abs() > LATTICE_GUARD || !(0.0..=n as f64).contains(&cell) {
            return Err(VerifyError::NonLatticeStatistic { value: scaled });
        }
        observed[cell as usize] += 1;
    }
    chi_square_gof(&observed, &binomial_half_pmf(n), significance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{make_identity, make_indicator};
    use crate::linalg::Spectrum;

    #[test]
    fn rank_inequalities_hold_on_small_matrices() {
        let report = check_rank_inequalities(200, 11, 8).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.worst_slack >= -CHECK_TOL);
    }

    #[test]
    fn rank_equality_is_attained_by_a_rank_one_diagonal() {
        let a = Spectrum::from_unsorted(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = Spectrum::from_unsorted(vec![0.0; 4]).unwrap();
        assert_eq!(kolmogorov_distance(&a, &b).unwrap(), 0.25);
    }

    #[test]
    fn row_replacement_respects_rank_one_in_covariance() {
        let spec = EnsembleSpec::independent_rows_uniform(8, 8).unwrap();
        let report = check_bounded_difference(&spec, &make_indicator(0.5), 100, 3, 1).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.max_kolmogorov <= 1.0 / 8.0 + CHECK_TOL);
    }

    #[test]
    fn graph_row_replacement_respects_rank_two() {
        let spec = EnsembleSpec::sequential_graph_bernoulli(8, 0.5).unwrap();
        let report = check_bounded_difference(&spec, &make_indicator(0.0), 100, 5, 2).unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn deterministic_ensemble_has_zero_differences() {
        use crate::ensembles::BlockSampler;
        use std::sync::Arc;
        let constant: BlockSampler = Arc::new(|_, out| out.fill(0.25));
        let spec = EnsembleSpec::independent_rows(4, 4, constant).unwrap();
        let report = check_bounded_difference(&spec, &make_indicator(0.1), 10, 0, 1).unwrap();
        assert_eq!(report.max_kolmogorov, 0.0);
        assert_eq!(report.max_functional_diff, 0.0);
    }

    #[test]
    fn dilation_identity_holds_for_rectangular_samples() {
        // sqrt is not Lipschitz at 0, so pair it with full-rank shapes
        // (m >= n); wide shapes get functions that are stable at the
        // exact zero eigenvalues their covariance carries.
        for (n, m) in [(4, 6), (5, 5), (1, 3)] {
            let spec = EnsembleSpec::independent_rows_uniform(n, m).unwrap();
            let report = check_dilation_identity(&spec, &make_sqrt_abs(), 50, 9, 1e-9).unwrap();
            assert_eq!(report.violations, 0, "sqrt_abs n={n} m={m}");
        }
        for (n, m) in [(6, 4), (3, 1)] {
            let spec = EnsembleSpec::independent_rows_uniform(n, m).unwrap();
            for f in [make_indicator(0.5), make_identity()] {
                let report = check_dilation_identity(&spec, &f, 50, 9, 1e-9).unwrap();
                assert_eq!(report.violations, 0, "{} n={n} m={m}", f.name());
            }
        }
    }

    #[test]
    fn dilation_identity_rejects_graph_ensembles() {
        let spec = EnsembleSpec::sequential_graph_bernoulli(4, 0.5).unwrap();
        assert!(check_dilation_identity(&spec, &make_sqrt_abs(), 1, 0, 1e-9).is_err());
    }

    #[test]
    fn trace_functional_is_lipschitz_in_frobenius_distance() {
        let report = check_trace_lipschitz(300, 17, 12, &make_identity()).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.max_ratio <= 1.0 + CHECK_TOL);
    }

    #[test]
    fn hand_case_trace_bound() {
        // A = diag(1, 0), B = 0: |ΔF| = 1/2, bound = √(2/2)·1·1 = 1
        let a = SymMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let b = SymMatrix::zeros(2).unwrap();
        let u = make_identity();
        let fa = spectral_functional(&symmetric_eigenvalues(&a, 1e-12).unwrap(), &u).unwrap();
        let fb = spectral_functional(&symmetric_eigenvalues(&b, 1e-12).unwrap(), &u).unwrap();
        let bound = (2.0f64 / 2.0).sqrt() * 1.0 * a.sub(&b).unwrap().frobenius_norm();
        assert!((fa - fb).abs() <= bound);
        assert_eq!((fa - fb).abs(), 0.5);
        assert_eq!(bound, 1.0);
    }

    #[test]
    fn binomial_law_passes_at_small_order() {
        let report = binomial_exact_law_test(3, 2000, 42, 0.001, 2).unwrap();
        assert!(report.passed, "p = {}", report.p_value);
    }

    #[test]
    fn binomial_law_rejects_unsupported_order() {
        assert!(binomial_exact_law_test(7, 100000, 0, 0.001, 1).is_err());
        assert!(binomial_exact_law_test(3, 10, 0, 0.001, 1).is_err());
    }
}
