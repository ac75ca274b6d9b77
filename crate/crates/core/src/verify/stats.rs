//! Exact binomial confidence intervals and goodness-of-fit testing.

use super::VerifyError;
use serde::Serialize;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

/// Exact two-sided binomial confidence interval by beta-quantile
/// inversion. Valid at any count, including 0 and `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> Result<(f64, f64), VerifyError> {
    if trials == 0 || successes > trials {
        return Err(VerifyError::InvalidParameter(format!(
            "confidence interval needs 0 <= successes <= trials, got {successes}/{trials}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(VerifyError::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let alpha = 1.0 - level;
    let (k, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        beta_quantile(k, n - k + 1.0, alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0)
    };
    Ok((low, high))
}

// Bisection on the regularized incomplete beta; the library's generic
// quantile search is too coarse for the interval precision tested here.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let dist = Beta::new(a, b).expect("valid beta shapes");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Probabilities of Binomial(n, 1/2) for counts 0..=n, by the exact
/// multiplicative recurrence.
pub fn binomial_half_pmf(n: u64) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(n as usize + 1);
    let mut p = 0.5f64.powi(n as i32);
    for j in 0..=n {
        pmf.push(p);
        // C(n, j+1) = C(n, j) (n - j) / (j + 1)
        p *= (n - j) as f64 / (j + 1) as f64;
    }
    pmf
}

#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub significance: f64,
    pub passed: bool,
    /// Cell count after merging sparse tail cells.
    pub cells: usize,
}

const MIN_EXPECTED_PER_CELL: f64 = 5.0;

/// Pearson chi-square goodness of fit of observed counts against cell
/// probabilities. Cells are merged greedily left to right until each
/// carries an expected count of at least five, with a sparse remainder
/// folded into the last cell.
pub fn chi_square_gof(
    observed: &[u64],
    probabilities: &[f64],
    significance: f64,
) -> Result<GofReport, VerifyError> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return Err(VerifyError::InvalidParameter(
            "observed counts and cell probabilities must have equal nonzero length".into(),
        ));
    }
    if !(0.0 < significance && significance < 1.0) {
        return Err(VerifyError::InvalidParameter(format!(
            "significance must lie in (0, 1), got {significance}"
        )));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(VerifyError::InvalidParameter(
            "observed counts are all zero".into(),
        ));
    }
    let n = total as f64;

    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (&o, &p) in observed.iter().zip(probabilities) {
        acc_obs += o as f64;
        acc_exp += n * p;
        if acc_exp >= MIN_EXPECTED_PER_CELL {
            cells.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = cells.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            cells.push((acc_obs, acc_exp));
        }
    }
    if cells.len() < 2 {
        return Err(VerifyError::InvalidParameter(
            "fewer than two cells carry the minimum expected count; increase replications".into(),
        ));
    }

    let statistic: f64 = cells
        .iter()
        .map(|(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let degrees_of_freedom = cells.len() - 1;
    let chi = ChiSquared::new(degrees_of_freedom as f64)
        .map_err(|e| VerifyError::InvalidParameter(e.to_string()))?;
    let p_value = 1.0 - chi.cdf(statistic);
    Ok(GofReport {
        statistic,
        degrees_of_freedom,
        p_value,
        significance,
        passed: p_value >= significance,
        cells: cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_brackets_the_estimate() {
        let (lo, hi) = clopper_pearson(25, 100, 0.99).unwrap();
        assert!(lo < 0.25 && 0.25 < hi);
        assert!(lo > 0.1 && hi < 0.45);
    }

    #[test]
    fn clopper_pearson_extreme_counts() {
        let (lo, hi) = clopper_pearson(0, 50, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
        let (lo, hi) = clopper_pearson(50, 50, 0.99).unwrap();
        assert!(lo > 0.8 && lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn clopper_pearson_matches_reference_values() {
        // scipy: beta.ppf(0.025, 18, 83), beta.ppf(0.975, 19, 82)
        let (lo, hi) = clopper_pearson(18, 100, 0.95).unwrap();
        assert!((lo - 0.11031122915326058).abs() < 1e-9, "lo {lo}");
        assert!((hi - 0.26947708596681186).abs() < 1e-9, "hi {hi}");
    }

    #[test]
    fn clopper_pearson_contains_the_point_estimate() {
        for (k, n) in [
            (0u64, 20u64),
            (1, 20),
            (7, 20),
            (19, 20),
            (20, 20),
            (500, 1000),
        ] {
            let (lo, hi) = clopper_pearson(k, n, 0.99).unwrap();
            let estimate = k as f64 / n as f64;
            assert!(lo <= estimate && estimate <= hi, "{k}/{n}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn clopper_pearson_rejects_bad_inputs() {
        assert!(clopper_pearson(5, 0, 0.99).is_err());
        assert!(clopper_pearson(5, 4, 0.99).is_err());
        assert!(clopper_pearson(1, 4, 1.0).is_err());
    }

    #[test]
    fn binomial_half_pmf_small_cases() {
        let pmf = binomial_half_pmf(8);
        assert_eq!(pmf.len(), 9);
        assert!((pmf[0] - 1.0 / 256.0).abs() < 1e-15);
        assert!((pmf[2] - 28.0 / 256.0).abs() < 1e-15);
        assert!((pmf[4] - 70.0 / 256.0).abs() < 1e-15);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_accepts_matching_counts() {
        // counts drawn to match Binomial(4, 1/2) closely
        let pmf = binomial_half_pmf(4);
        let observed = [62, 250, 380, 244, 64];
        let report = chi_square_gof(&observed, &pmf, 0.001).unwrap();
        assert!(report.passed, "p = {}", report.p_value);
    }

    #[test]
    fn chi_square_rejects_shifted_counts() {
        let pmf = binomial_half_pmf(4);
        let observed = [500, 250, 150, 80, 20];
        let report = chi_square_gof(&observed, &pmf, 0.001).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn chi_square_merges_sparse_tails() {
        let pmf = binomial_half_pmf(16);
        // 100 draws leave the extreme cells far below the minimum
        let mut observed = vec![0u64; 17];
        observed[8] = 30;
        observed[7] = 25;
        observed[9] = 25;
        observed[6] = 10;
        observed[10] = 10;
        let report = chi_square_gof(&observed, &pmf, 0.001).unwrap();
        assert!(report.cells < 17);
    }
}
