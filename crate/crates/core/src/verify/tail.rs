//! Monte Carlo estimation of tail probabilities with exact intervals.

use super::stats::clopper_pearson;
use super::{collect_statistics, Statistic, VerifyError};
use crate::bounds::{BoundKind, CenterKind};
use crate::ensembles::EnsembleSpec;
use serde::Serialize;

/// Closed-comparison slack for the exceedance event |x − c| ≥ ε.
///
/// The tail event uses ≥, but a lattice statistic can drift below an ε
/// sitting exactly on the lattice: square-root statistics map the
/// eigensolver's near-zero residues to noise of order √residue, up to
/// ~1e-6 at desk scale. The margin sits above that drift and far below
/// any lattice spacing 1/n, and it only ever rounds the count upward,
/// so it cannot hide a bound violation.
pub const TIE_TOL: f64 = 1e-5;

/// Estimated center of a spectral statistic, from a pilot stream
/// disjoint (by replication index range) from any later estimation run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CenterEstimate {
    pub kind: CenterKind,
    pub value: f64,
    pub pilot_reps: u64,
    /// Rough scale of the center's own sampling error; tail reports
    /// inherit this uncertainty.
    pub standard_error_proxy: f64,
}

impl CenterEstimate {
    /// Wrap an externally known exact center. Estimation replications
    /// then start at index 0.
    pub fn exact(kind: CenterKind, value: f64) -> Self {
        CenterEstimate {
            kind,
            value,
            pilot_reps: 0,
            standard_error_proxy: 0.0,
        }
    }
}

/// Sample mean or lower sample median of the statistic over a pilot
/// stream of `pilot_reps` replications.
pub fn estimate_center(
    spec: &EnsembleSpec,
    stat: &Statistic,
    pilot_reps: u64,
    master_seed: u64,
    kind: CenterKind,
    workers: usize,
) -> Result<CenterEstimate, VerifyError> {
    if pilot_reps < 100 {
        return Err(VerifyError::InvalidParameter(format!(
            "pilot_reps must be at least 100, got {pilot_reps}"
        )));
    }
    let mut values = collect_statistics(spec, stat, master_seed, 0..pilot_reps, workers)?;
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let value = match kind {
        CenterKind::Mean => mean,
        CenterKind::Median => {
            values.sort_by(f64::total_cmp);
            // lower median for even counts
            values[(values.len() - 1) / 2]
        }
    };
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0).max(1.0);
    let sd = var.sqrt();
    let standard_error_proxy = match kind {
        CenterKind::Mean => sd / k.sqrt(),
        // asymptotic efficiency factor of the sample median under
        // approximate normality; a proxy, not a guarantee
        CenterKind::Median => 1.2533141373155003 * sd / k.sqrt(),
    };
    Ok(CenterEstimate {
        kind,
        value,
        pilot_reps,
        standard_error_proxy,
    })
}

/// One bound evaluated at one ε, compared against the estimated tail.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub tag: String,
    pub exponent: f64,
    pub value: f64,
    /// Center the bound is formulated around.
    pub centering: String,
    /// True when the configured center differs from the bound's own;
    /// such comparisons are annotations, not soundness checks.
    pub center_mismatch: bool,
    /// Statistically significant exceedance: the lower confidence limit
    /// lies above the bound.
    pub violated: bool,
}

/// Empirical tail at one ε with its exact confidence interval and every
/// attached bound.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub epsilon: f64,
    pub reps: u64,
    pub exceed_count: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub center_kind: String,
    pub center_value: f64,
    pub bounds: Vec<BoundCheck>,
}

/// Estimate P(|F − center| ≥ ε) over an ε grid.
///
/// Replication indices start where the pilot stream ended, every ε
/// reuses the same replications, and the result depends only on
/// (spec, seed, index range), never on the worker count.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tail(
    spec: &EnsembleSpec,
    stat: &Statistic,
    center: &CenterEstimate,
    eps_grid: &[f64],
    reps: u64,
    master_seed: u64,
    ci_level: f64,
    bounds: &[BoundKind],
    workers: usize,
) -> Result<Vec<TailReport>, VerifyError> {
    if reps < 1000 {
        return Err(VerifyError::InvalidParameter(format!(
            "reps must be at least 1000, got {reps}"
        )));
    }
    if eps_grid.is_empty() {
        return Err(VerifyError::InvalidParameter(
            "epsilon grid must not be empty".into(),
        ));
    }
    if eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(VerifyError::InvalidParameter(
            "epsilon grid values must be finite and nonnegative".into(),
        ));
    }
    for w in eps_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(VerifyError::InvalidParameter(format!(
                "epsilon grid must be strictly ascending: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(0.0 < ci_level && ci_level < 1.0) {
        return Err(VerifyError::InvalidParameter(format!(
            "ci_level must lie in (0, 1), got {ci_level}"
        )));
    }

    let offset = center.pilot_reps;
    let values = collect_statistics(spec, stat, master_seed, offset..offset + reps, workers)?;

    let mut reports = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let exceed_count = values
            .iter()
            .filter(|&&v| (v - center.value).abs() >= eps - TIE_TOL)
            .count() as u64;
        let (ci_low, ci_high) = clopper_pearson(exceed_count, reps, ci_level)?;
        let checks = bounds
            .iter()
            .map(|kind| {
                let eval = kind.evaluate(eps)?;
                Ok(BoundCheck {
                    tag: kind.tag().to_string(),
                    exponent: eval.exponent,
                    value: eval.value,
                    centering: kind.center().name().to_string(),
                    center_mismatch: kind.center() != center.kind,
                    violated: ci_low > eval.value,
                })
            })
            .collect::<Result<Vec<_>, VerifyError>>()?;
        reports.push(TailReport {
            epsilon: eps,
            reps,
            exceed_count,
            estimate: exceed_count as f64 / reps as f64,
            ci_low,
            ci_high,
            center_kind: center.kind.name().to_string(),
            center_value: center.value,
            bounds: checks,
        });
    }
    Ok(reports)
}

/// Total number of VIOLATED flags across a report list.
pub fn count_violations(reports: &[TailReport]) -> u64 {
    reports
        .iter()
        .flat_map(|r| &r.bounds)
        .filter(|b| b.violated)
        .count() as u64
}

/// Render reports in the fixed CSV schema, one row per (ε, bound) pair;
/// rows carry empty bound columns when no bound is attached.
pub fn tail_reports_to_csv(kind_label: &str, reports: &[TailReport]) -> String {
    let mut out = String::from(
        "kind,epsilon,reps,exceed_count,estimate,ci_low,ci_high,bound_tag,bound_value,violated\n",
    );
    for r in reports {
        let prefix = format!(
            "{},{},{},{},{},{},{}",
            kind_label, r.epsilon, r.reps, r.exceed_count, r.estimate, r.ci_low, r.ci_high
        );
        if r.bounds.is_empty() {
            out.push_str(&prefix);
            out.push_str(",,,\n");
        } else {
            for b in &r.bounds {
                out.push_str(&prefix);
                out.push_str(&format!(",{},{},{}\n", b.tag, b.value, b.violated));
            }
        }
    }
    out
}
