//! End-to-end flows through sampling, eigensolving, tail estimation,
//! and the experiment runner.

use specmeasure::bounds::{BoundKind, CenterKind};
use specmeasure::ensembles::EnsembleSpec;
use specmeasure::experiment::{resolve, run, run_experiment_file, ExperimentConfig, Overrides};
use specmeasure::functionals::{make_custom, make_indicator, make_sqrt_abs, Metadata};
use specmeasure::verify::{
    estimate_center, estimate_tail, tail_reports_to_csv, CenterEstimate, Statistic,
};
use std::path::Path;

/// Exact tail of the fair-coin proportion: P(|B(n,1/2)/n − 1/2| ≥ ε),
/// by full enumeration of the binomial distribution.
fn exact_binomial_tail(n: u64, eps: f64) -> f64 {
    let mut coeff = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; coeff.len() + 1];
        for (i, c) in coeff.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c;
        }
        coeff = next;
    }
    let total = 2.0f64.powi(n as i32);
    (0..=n)
        .filter(|&j| (j as f64 / n as f64 - 0.5).abs() >= eps - 1e-12)
        .map(|j| coeff[j as usize] / total)
        .sum()
}

#[test]
fn enumeration_oracle_matches_hand_arithmetic() {
    // P(|B(8,1/2)/8 − 1/2| ≥ 1/4) = 2·(1 + 8 + 28)/256
    assert!((exact_binomial_tail(8, 0.25) - 74.0 / 256.0).abs() < 1e-15);
    assert_eq!(exact_binomial_tail(8, 0.0), 1.0);
    assert!((exact_binomial_tail(8, 0.5) - 2.0 / 256.0).abs() < 1e-15);
}

#[test]
fn walsh_tail_brackets_the_exact_binomial_law() {
    let spec = EnsembleSpec::walsh_bernoulli(3).unwrap();
    let stat = Statistic::Functional(make_sqrt_abs());
    let center = estimate_center(&spec, &stat, 400, 2024, CenterKind::Median, 1).unwrap();
    // the sign-count median sits on the lattice point 1/2, up to the
    // square-root noise of the zero eigenvalue cluster
    assert!((center.value - 0.5).abs() < 1e-6, "center {}", center.value);

    let grid = [0.125, 0.25, 0.375, 0.5];
    let reports = estimate_tail(&spec, &stat, &center, &grid, 4000, 2024, 0.99, &[], 1).unwrap();
    for report in &reports {
        let exact = exact_binomial_tail(8, report.epsilon);
        assert!(
            report.ci_low <= exact && exact <= report.ci_high,
            "ε = {}: exact {exact} outside [{}, {}]",
            report.epsilon,
            report.ci_low,
            report.ci_high
        );
    }
}

#[test]
fn diagonal_bernoulli_zero_count_centers_at_half() {
    let spec = EnsembleSpec::diagonal_bernoulli(8).unwrap();
    let stat = Statistic::Functional(make_indicator(0.0));
    let center = estimate_center(&spec, &stat, 2000, 5, CenterKind::Mean, 1).unwrap();
    assert!((center.value - 0.5).abs() < 0.05, "center {}", center.value);
}

#[test]
fn tail_reports_are_identical_across_worker_counts() {
    let spec = EnsembleSpec::sequential_graph_bernoulli(16, 0.5).unwrap();
    let stat = Statistic::CdfAt(0.0);
    let bounds = vec![BoundKind::t3(16, 16, 2, 1.0).unwrap()];
    let mut rendered = Vec::new();
    for workers in [1, 8] {
        let center = estimate_center(&spec, &stat, 200, 99, CenterKind::Mean, workers).unwrap();
        let reports = estimate_tail(
            &spec,
            &stat,
            &center,
            &[0.05, 0.1, 0.2],
            1000,
            99,
            0.99,
            &bounds,
            workers,
        )
        .unwrap();
        rendered.push(tail_reports_to_csv(spec.kind_name(), &reports));
    }
    assert_eq!(rendered[0], rendered[1]);
}

#[test]
fn graph_tail_respects_the_quasi_convex_route_with_a_sharp_function() {
    // |x| is convex and Lipschitz-1, so the linear-map bound applies
    // with C_M = 1 on the graph; unlike the trace statistic it is not
    // degenerate.
    let abs = make_custom(
        "abs",
        f64::abs,
        (f64::NEG_INFINITY, f64::INFINITY),
        Metadata {
            lip: Some(1.0),
            convex: true,
            convex_sq: true,
            ..Default::default()
        },
    )
    .unwrap();
    let n = 32;
    let spec = EnsembleSpec::sequential_graph_bernoulli(n, 0.5).unwrap();
    let stat = Statistic::Functional(abs);
    let bounds = vec![BoundKind::t2(n as u64, n as u64, n as u64, 1.0, 1.0).unwrap()];
    let center = estimate_center(&spec, &stat, 300, 7, CenterKind::Median, 1).unwrap();
    let reports = estimate_tail(
        &spec,
        &stat,
        &center,
        &[0.05, 0.1, 0.2, 0.4],
        2000,
        7,
        0.99,
        &bounds,
        1,
    )
    .unwrap();
    for report in &reports {
        for check in &report.bounds {
            assert!(!check.violated, "ε = {}", report.epsilon);
            assert!(!check.center_mismatch);
        }
    }
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn experiment_round_trip_reproduces_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = write_config(
        tmp.path(),
        "exp.toml",
        r#"
[ensemble]
kind = "walsh_bernoulli"
k = 3

[function]
name = "sqrt_abs"

[center]
kind = "median"
pilot_reps = 200

[run]
epsilons = [0.125, 0.25, 0.375]
reps = 1000
seed = 31
workers = 2

[[bounds]]
kind = "T1_LIP"

[[bounds]]
kind = "T1_BV"
variation = 1.0
"#,
    );
    let out_a = tmp.path().join("a");
    let overrides = Overrides {
        out_dir: Some(out_a.display().to_string()),
        ..Default::default()
    };
    let (outcome_a, written) = run_experiment_file(&config_path, &overrides).unwrap();
    assert_eq!(outcome_a.violations, 0);
    assert!(written.iter().any(|p| p.ends_with("report.csv")));

    // feed the echoed config back in, pointing at a fresh directory
    let echoed = out_a.join("resolved_config.toml");
    let out_b = tmp.path().join("b");
    let overrides_b = Overrides {
        out_dir: Some(out_b.display().to_string()),
        ..Default::default()
    };
    run_experiment_file(&echoed, &overrides_b).unwrap();

    let csv_a = std::fs::read(out_a.join("report.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("report.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn failed_validation_writes_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = write_config(
        tmp.path(),
        "bad.toml",
        r#"
[ensemble]
kind = "walsh_bernoulli"
k = 3

[function]
name = "sqrt_abs"

[center]
kind = "median"
pilot_reps = 200

[run]
epsilons = []
reps = 1000
seed = 31
"#,
    );
    let out = tmp.path().join("never");
    let overrides = Overrides {
        out_dir: Some(out.display().to_string()),
        ..Default::default()
    };
    let err = run_experiment_file(&config_path, &overrides).unwrap_err();
    assert!(err.to_string().contains("run.epsilons"));
    assert!(!out.exists());
}

#[test]
fn ma2_with_zero_b_derives_unit_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let zeros = "0,0,0,0\n".repeat(4);
    write_config(tmp.path(), "B.csv", &zeros);
    let config_path = write_config(
        tmp.path(),
        "ma2.toml",
        r#"
[ensemble]
kind = "ma2"
n = 4
m = 4
b_path = "B.csv"

[function]
name = "sqrt_abs"

[center]
kind = "median"
pilot_reps = 100

[run]
epsilons = [0.2]
reps = 1000
seed = 1

[[bounds]]
kind = "MA_LIP"
c_b = "compute"
"#,
    );
    let config = ExperimentConfig::load(&config_path).unwrap();
    let resolved = resolve(&config, tmp.path()).unwrap();
    match resolved.bounds[0] {
        BoundKind::MaLip { c_b, .. } => assert_eq!(c_b, 1.0),
        ref other => panic!("unexpected bound {other:?}"),
    }
    let echoed = resolved.config.to_toml_string();
    assert!(echoed.contains("c_b = 1.0"), "echo: {echoed}");

    let outcome = run(&resolved).unwrap();
    assert_eq!(outcome.violations, 0);
}

#[test]
fn center_annotation_marks_mismatched_bound_centering() {
    // a mean-centered run compared against the median-centered bound
    // carries the annotation and is never a soundness statement
    let spec = EnsembleSpec::walsh_bernoulli(3).unwrap();
    let stat = Statistic::Functional(make_sqrt_abs());
    let bounds = vec![BoundKind::t1_lip(8, 8, 1.0).unwrap()];
    let center = CenterEstimate::exact(CenterKind::Mean, 0.5);
    let reports = estimate_tail(&spec, &stat, &center, &[0.25], 1000, 3, 0.99, &bounds, 1).unwrap();
    assert!(reports[0].bounds[0].center_mismatch);
}

#[test]
fn spectra_escaping_a_confined_domain_abort_the_run() {
    // a window-restricted function asserts spectral confinement; any
    // replication whose spectrum leaves the window is a hard error, not
    // a silently skipped sample
    let windowed = make_custom(
        "unit-window",
        |x| x,
        (0.2, 0.8),
        Metadata {
            lip: Some(1.0),
            convex: true,
            ..Default::default()
        },
    )
    .unwrap();
    let spec = EnsembleSpec::walsh_bernoulli(3).unwrap();
    let stat = Statistic::Functional(windowed);
    let err = estimate_center(&spec, &stat, 100, 0, CenterKind::Mean, 1).unwrap_err();
    assert!(
        err.to_string().contains("outside function domain"),
        "got: {err}"
    );
}

#[test]
fn diagonal_zero_count_follows_the_fair_binomial_law() {
    // the step statistic at zero counts the off signs, so n·F over the
    // pipeline is Binomial(n, 1/2); checked by chi-square like the
    // Walsh law but on the diagonal ensemble
    let n = 8u64;
    let spec = EnsembleSpec::diagonal_bernoulli(n as usize).unwrap();
    let stat = Statistic::Functional(make_indicator(0.0));
    let mut observed = vec![0u64; n as usize + 1];
    for rep in 0..3000 {
        let v = specmeasure::verify::replication_statistic(&spec, 77, rep, &stat).unwrap();
        let cell = (v * n as f64).round();
        assert!((v * n as f64 - cell).abs() < 1e-9);
        observed[cell as usize] += 1;
    }
    let report = specmeasure::verify::chi_square_gof(
        &observed,
        &specmeasure::verify::binomial_half_pmf(n),
        0.001,
    )
    .unwrap();
    assert!(report.passed, "p = {}", report.p_value);
}

#[test]
fn bounded_uniform_rows_respect_both_covariance_bounds() {
    // independent bounded rows are the base case both tail bounds
    // cover; neither may be violated at any grid point
    let n = 16u64;
    let spec = EnsembleSpec::independent_rows_uniform(n as usize, n as usize).unwrap();
    let grid = [0.05, 0.1, 0.2, 0.4];

    let stat = Statistic::Functional(make_sqrt_abs());
    let center = estimate_center(&spec, &stat, 300, 13, CenterKind::Median, 1).unwrap();
    let bounds = vec![BoundKind::t1_lip(n, n, 1.0).unwrap()];
    let reports = estimate_tail(&spec, &stat, &center, &grid, 2000, 13, 0.99, &bounds, 1).unwrap();
    assert_eq!(specmeasure::verify::count_violations(&reports), 0);

    let stat = Statistic::Functional(make_indicator(0.5));
    let center = estimate_center(&spec, &stat, 300, 13, CenterKind::Mean, 1).unwrap();
    let bounds = vec![BoundKind::t1_bv(n, n, 1.0).unwrap()];
    let reports = estimate_tail(&spec, &stat, &center, &grid, 2000, 13, 0.99, &bounds, 1).unwrap();
    assert_eq!(specmeasure::verify::count_violations(&reports), 0);
}
