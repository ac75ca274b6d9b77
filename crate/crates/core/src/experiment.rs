//! Config-driven experiment orchestration.
//!
//! An experiment file names an ensemble, a test function, a center, an
//! ε grid, and the bounds to compare against. Resolution validates
//! everything and loads referenced matrices before any sampling starts;
//! bound dimensions come from the ensemble and missing constants are
//! pulled from the function's certified metadata, so a config cannot
//! pair a bound with dimensions it was not derived for.

use crate::bounds::{BoundKind, BoundParams, CenterKind};
use crate::ensembles::EnsembleSpec;
use crate::functionals::{make_identity, make_indicator, make_sqrt_abs, TestFunction};
use crate::io::{matrix_to_csv, read_matrix_csv, write_text, IoError};
use crate::linalg::{operator_norm, DataMatrix};
use crate::verify::{
    count_violations, estimate_center, estimate_tail, tail_reports_to_csv, CenterEstimate,
    Statistic, TailReport, VerifyError,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config {key}: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn config_err(key: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Tolerance used when deriving operator norms for bound constants.
const NORM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// config schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSection,
    pub function: FunctionSection,
    pub center: CenterSection,
    pub run: RunSection,
    #[serde(default)]
    pub bounds: Vec<BoundSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSection {
    pub kind: String,
    pub pilot_reps: u64,
}

fn default_workers() -> usize {
    1
}

fn default_ci_level() -> f64 {
    0.99
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub epsilons: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// A constant that is either given or derived from the referenced
/// matrices via the operator norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Computable {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_b: Option<Computable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Computable>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(config_err(
                "output.format",
                format!("expected csv, json, or both, got {other:?}"),
            )),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| config_err("parse", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("path", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

// ---------------------------------------------------------------------------
// resolution

/// Fully validated experiment, ready to run. `config` is the resolved
/// echo: derived constants substituted, matrix paths made absolute.
#[derive(Debug)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub spec: EnsembleSpec,
    pub function: TestFunction,
    pub center_kind: CenterKind,
    pub bounds: Vec<BoundKind>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

struct LoadedMatrices {
    b: Option<DataMatrix>,
    u: Option<DataMatrix>,
}

/// Validate a config and build the runtime objects. `base_dir` anchors
/// relative matrix paths, normally the config file's directory.
pub fn resolve(
    config: &ExperimentConfig,
    base_dir: &Path,
) -> Result<ResolvedExperiment, ExperimentError> {
    let mut echo = config.clone();

    let (spec, matrices) = resolve_ensemble(&mut echo.ensemble, base_dir)?;
    let function = resolve_function(&echo.function)?;
    let center_kind = match echo.center.kind.as_str() {
        "mean" => CenterKind::Mean,
        "median" => CenterKind::Median,
        other => {
            return Err(config_err(
                "center.kind",
                format!("expected mean or median, got {other:?}"),
            ))
        }
    };
    if echo.center.pilot_reps < 100 {
        return Err(config_err("center.pilot_reps", "must be at least 100"));
    }

    let run = &echo.run;
    if run.epsilons.is_empty() {
        return Err(config_err("run.epsilons", "must not be empty"));
    }
    if run.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(config_err(
            "run.epsilons",
            "values must be finite and positive",
        ));
    }
    if run.epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err("run.epsilons", "must be strictly ascending"));
    }
    if run.reps < 1000 {
        return Err(config_err("run.reps", "must be at least 1000"));
    }
    if !(0.0 < run.ci_level && run.ci_level < 1.0) {
        return Err(config_err("run.ci_level", "must lie in (0, 1)"));
    }
    if run.workers == 0 {
        return Err(config_err("run.workers", "must be at least 1"));
    }

    let mut bounds = Vec::with_capacity(echo.bounds.len());
    for section in &mut echo.bounds {
        bounds.push(resolve_bound(section, &spec, &function, &matrices)?);
    }

    let out_dir = PathBuf::from(echo.output.dir.clone().unwrap_or_else(|| "out".into()));
    let format = OutputFormat::parse(echo.output.format.as_deref().unwrap_or("both"))?;
    echo.output.dir = Some(out_dir.display().to_string());
    echo.output.format = Some(
        match format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Both => "both",
        }
        .to_string(),
    );

    Ok(ResolvedExperiment {
        config: echo,
        spec,
        function,
        center_kind,
        bounds,
        out_dir,
        format,
    })
}

fn resolve_ensemble(
    section: &mut EnsembleSection,
    base_dir: &Path,
) -> Result<(EnsembleSpec, LoadedMatrices), ExperimentError> {
    let kind = section.kind.as_str();
    let need_n = || {
        section
            .n
            .ok_or_else(|| config_err("ensemble.n", format!("required for kind {kind}")))
    };
    let need_m = || {
        section
            .m
            .ok_or_else(|| config_err("ensemble.m", format!("required for kind {kind}")))
    };

    let mut matrices = LoadedMatrices { b: None, u: None };
    let spec = match kind {
        "walsh_bernoulli" => {
            let k = section
                .k
                .ok_or_else(|| config_err("ensemble.k", "required for kind walsh_bernoulli"))?;
            EnsembleSpec::walsh_bernoulli(k).map_err(|e| config_err("ensemble.k", e.to_string()))?
        }
        "diagonal_bernoulli" => EnsembleSpec::diagonal_bernoulli(need_n()?)
            .map_err(|e| config_err("ensemble.n", e.to_string()))?,
        "independent_rows" => EnsembleSpec::independent_rows_uniform(need_n()?, need_m()?)
            .map_err(|e| config_err("ensemble", e.to_string()))?,
        "sequential_graph" => {
            let q = section.edge_prob.unwrap_or(0.5);
            section.edge_prob = Some(q);
            EnsembleSpec::sequential_graph_bernoulli(need_n()?, q)
                .map_err(|e| config_err("ensemble.edge_prob", e.to_string()))?
        }
        "ma2" => {
            let n = need_n()?;
            let b = load_square(section.b_path.as_mut(), "ensemble.b_path", base_dir, n)?;
            matrices.b = Some(b.clone());
            EnsembleSpec::ma2_uniform(n, need_m()?, b)
                .map_err(|e| config_err("ensemble", e.to_string()))?
        }
        "ma2_factor" => {
            let n = need_n()?;
            let b = load_square(section.b_path.as_mut(), "ensemble.b_path", base_dir, n)?;
            let u = load_square(section.u_path.as_mut(), "ensemble.u_path", base_dir, n)?;
            matrices.b = Some(b.clone());
            matrices.u = Some(u.clone());
            EnsembleSpec::ma2_factor_uniform(n, need_m()?, b, u)
                .map_err(|e| config_err("ensemble", e.to_string()))?
        }
        other => {
            return Err(config_err(
                "ensemble.kind",
                format!("unknown ensemble kind {other:?}"),
            ))
        }
    };
    Ok((spec, matrices))
}

fn load_square(
    path_field: Option<&mut String>,
    key: &str,
    base_dir: &Path,
    n: usize,
) -> Result<DataMatrix, ExperimentError> {
    let field = path_field.ok_or_else(|| config_err(key, "required for this ensemble kind"))?;
    let raw = PathBuf::from(&*field);
    let joined = if raw.is_absolute() {
        raw
    } else {
        base_dir.join(raw)
    };
    let matrix = read_matrix_csv(&joined).map_err(|e| config_err(key, e.to_string()))?;
    if matrix.rows() != n || matrix.cols() != n {
        return Err(config_err(
            key,
            format!(
                "expected a {n}x{n} matrix, got {}x{}",
                matrix.rows(),
                matrix.cols()
            ),
        ));
    }
    // echo an absolute path so the resolved config replays from anywhere
    let canonical = joined.canonicalize().unwrap_or(joined);
    *field = canonical.display().to_string();
    Ok(matrix)
}

fn resolve_function(section: &FunctionSection) -> Result<TestFunction, ExperimentError> {
    match section.name.as_str() {
        "indicator" => {
            let lambda = section.lambda.ok_or_else(|| {
                config_err("function.lambda", "required for the indicator function")
            })?;
            if !lambda.is_finite() {
                return Err(config_err("function.lambda", "must be finite"));
            }
            Ok(make_indicator(lambda))
        }
        "sqrt_abs" => Ok(make_sqrt_abs()),
        "identity" => Ok(make_identity()),
        other => Err(config_err(
            "function.name",
            format!("unknown function {other:?} (built-ins: indicator, sqrt_abs, identity)"),
        )),
    }
}

/// Bound tags admissible per ensemble kind. Attaching a bound to an
/// ensemble outside its hypotheses would compare the tail against a
/// formula that does not cover it.
fn allowed_tags(kind: &str) -> &'static [&'static str] {
    match kind {
        "walsh_bernoulli" | "diagonal_bernoulli" | "independent_rows" => &["T1_LIP", "T1_BV", "T3"],
        "sequential_graph" => &["T2", "T3"],
        "ma2" => &["MA_LIP", "MA_BV", "T3"],
        "ma2_factor" => &["GZ_GEN", "MA_BV", "T3"],
        _ => &[],
    }
}

fn default_replacement_rank(kind: &str) -> u64 {
    match kind {
        // one resampled row moves X by rank one
        "walsh_bernoulli" | "diagonal_bernoulli" | "independent_rows" => 1,
        // a graph row touches a row and a column; an innovation feeds
        // two adjacent MA rows
        _ => 2,
    }
}

fn resolve_bound(
    section: &mut BoundSection,
    spec: &EnsembleSpec,
    function: &TestFunction,
    matrices: &LoadedMatrices,
) -> Result<BoundKind, ExperimentError> {
    let tag = section.kind.clone();
    let ensemble_kind = spec.kind_name();
    if !allowed_tags(ensemble_kind).contains(&tag.as_str()) {
        return Err(config_err(
            "bounds.kind",
            format!(
                "bound {tag} does not cover ensemble {ensemble_kind}; admissible: {:?}",
                allowed_tags(ensemble_kind)
            ),
        ));
    }

    let meta = function.metadata();
    if matches!(tag.as_str(), "T1_LIP" | "MA_LIP" | "GZ_GEN") && !meta.convex_sq {
        return Err(config_err(
            "bounds.kind",
            format!(
                "bound {tag} needs x ↦ f(x²) convex; function {} is not certified",
                function.name()
            ),
        ));
    }
    if tag == "T2" && !meta.convex {
        return Err(config_err(
            "bounds.kind",
            format!(
                "bound T2 needs a convex function; {} is not certified",
                function.name()
            ),
        ));
    }

    let n = spec.dim() as u64;
    let m = match tag.as_str() {
        // block-replacement bounds count independent blocks
        "T2" | "T3" => spec.block_count() as u64,
        _ => spec.rows() as u64,
    };

    let c_b = resolve_computable(section.c_b.as_mut(), "bounds.c_b", || {
        let b = matrices
            .b
            .as_ref()
            .ok_or_else(|| config_err("bounds.c_b", "no B matrix to derive from"))?;
        Ok(1.0 + operator_norm(b, NORM_TOL).map_err(VerifyError::from)?)
    })?;
    let c = resolve_computable(section.c.as_mut(), "bounds.c", || {
        let b = matrices
            .b
            .as_ref()
            .ok_or_else(|| config_err("bounds.c", "no B matrix to derive from"))?;
        let u = matrices
            .u
            .as_ref()
            .ok_or_else(|| config_err("bounds.c", "no U matrix to derive from"))?;
        let norm_b = operator_norm(b, NORM_TOL).map_err(VerifyError::from)?;
        let norm_u = operator_norm(u, NORM_TOL).map_err(VerifyError::from)?;
        Ok((1.0 + norm_b) * norm_u)
    })?;

    if tag == "T3" && section.r.is_none() {
        section.r = Some(default_replacement_rank(ensemble_kind));
    }
    if tag == "T2" {
        if section.p.is_none() {
            // graph blocks are n-vectors
            section.p = Some(n);
        }
        if section.c_m.is_none() && ensemble_kind == "sequential_graph" {
            // adjacency assembly is a coordinate selection
            section.c_m = Some(1.0);
        }
    }

    let params = BoundParams {
        n: Some(n),
        m: Some(m),
        p: section.p,
        lip_sq: section.lip_sq.or(meta.lip_sq),
        variation: section.variation.or(meta.variation),
        lip: section.lip.or(meta.lip),
        c_m: section.c_m,
        c_b,
        c,
        r: section.r,
    };
    let kind =
        BoundKind::from_tag(&tag, &params).map_err(|e| config_err("bounds", e.to_string()))?;

    // echo the constants actually used
    match kind {
        BoundKind::T1Lip { lip_sq, .. } => section.lip_sq = Some(lip_sq),
        BoundKind::T1Bv { variation, .. } => section.variation = Some(variation),
        BoundKind::T2 { c_m, lip, p, .. } => {
            section.c_m = Some(c_m);
            section.lip = Some(lip);
            section.p = Some(p);
        }
        BoundKind::T3 { r, variation, .. } => {
            section.r = Some(r);
            section.variation = Some(variation);
        }
        BoundKind::MaLip { c_b, lip_sq, .. } => {
            section.c_b = Some(Computable::Value(c_b));
            section.lip_sq = Some(lip_sq);
        }
        BoundKind::MaBv { variation, .. } => section.variation = Some(variation),
        BoundKind::GzGen { c, lip_sq, .. } => {
            section.c = Some(Computable::Value(c));
            section.lip_sq = Some(lip_sq);
        }
    }
    Ok(kind)
}

fn resolve_computable(
    field: Option<&mut Computable>,
    key: &str,
    derive: impl FnOnce() -> Result<f64, ExperimentError>,
) -> Result<Option<f64>, ExperimentError> {
    match field {
        None => Ok(None),
        Some(Computable::Value(v)) => Ok(Some(*v)),
        Some(slot @ Computable::Keyword(_)) => {
            let Computable::Keyword(word) = &*slot else {
                unreachable!()
            };
            if word != "compute" {
                return Err(config_err(
                    key,
                    format!("expected a number or \"compute\", got {word:?}"),
                ));
            }
            let derived = derive()?;
            *slot = Computable::Value(derived);
            Ok(Some(derived))
        }
    }
}

// ---------------------------------------------------------------------------
// running

#[derive(Debug)]
pub struct RunOutcome {
    pub center: CenterEstimate,
    pub reports: Vec<TailReport>,
    pub violations: u64,
}

/// Pilot the center, estimate the tails, compare bounds. Writes nothing.
pub fn run(resolved: &ResolvedExperiment) -> Result<RunOutcome, ExperimentError> {
    let stat = Statistic::Functional(resolved.function.clone());
    let run_cfg = &resolved.config.run;
    let center = estimate_center(
        &resolved.spec,
        &stat,
        resolved.config.center.pilot_reps,
        run_cfg.seed,
        resolved.center_kind,
        run_cfg.workers,
    )?;
    let reports = estimate_tail(
        &resolved.spec,
        &stat,
        &center,
        &run_cfg.epsilons,
        run_cfg.reps,
        run_cfg.seed,
        run_cfg.ci_level,
        &resolved.bounds,
        run_cfg.workers,
    )?;
    let violations = count_violations(&reports);
    Ok(RunOutcome {
        center,
        reports,
        violations,
    })
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    config: &'a ExperimentConfig,
    statistic: String,
    center: &'a CenterEstimate,
    violations: u64,
    reports: &'a [TailReport],
}

/// Render the structured JSON result document (config echo included).
pub fn outcome_to_json(resolved: &ResolvedExperiment, outcome: &RunOutcome) -> String {
    let doc = JsonDocument {
        config: &resolved.config,
        statistic: format!("F({})", resolved.function.name()),
        center: &outcome.center,
        violations: outcome.violations,
        reports: &outcome.reports,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("reports serialize");
    text.push('\n');
    text
}

/// Write reports and the resolved config echo into the output
/// directory. Nothing is written on the error paths before this call.
pub fn write_outputs(
    resolved: &ResolvedExperiment,
    outcome: &RunOutcome,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(&resolved.out_dir).map_err(|e| {
        config_err(
            "output.dir",
            format!("cannot create {}: {e}", resolved.out_dir.display()),
        )
    })?;
    let mut written = Vec::new();

    if matches!(resolved.format, OutputFormat::Csv | OutputFormat::Both) {
        let path = resolved.out_dir.join("report.csv");
        write_text(
            &path,
            &tail_reports_to_csv(resolved.spec.kind_name(), &outcome.reports),
        )?;
        written.push(path);
    }
    if matches!(resolved.format, OutputFormat::Json | OutputFormat::Both) {
        let path = resolved.out_dir.join("report.json");
        write_text(&path, &outcome_to_json(resolved, outcome))?;
        written.push(path);
    }
    let echo_path = resolved.out_dir.join("resolved_config.toml");
    write_text(&echo_path, &resolved.config.to_toml_string())?;
    written.push(echo_path);
    Ok(written)
}

/// Load, resolve, run, and write in one step: the `run` subcommand.
pub fn run_experiment_file(
    config_path: &Path,
    overrides: &Overrides,
) -> Result<(RunOutcome, Vec<PathBuf>), ExperimentError> {
    let mut config = ExperimentConfig::load(config_path)?;
    overrides.apply(&mut config);
    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolved = resolve(&config, base)?;
    let outcome = run(&resolved)?;
    let written = write_outputs(&resolved, &outcome)?;
    Ok((outcome, written))
}

/// Command-line overrides applied before resolution, so the echoed
/// config records what actually ran.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<String>,
    pub format: Option<String>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.run.workers = workers;
        }
        if let Some(dir) = &self.out_dir {
            config.output.dir = Some(dir.clone());
        }
        if let Some(format) = &self.format {
            config.output.format = Some(format.clone());
        }
    }
}

/// Emit one sampled matrix as CSV: the `gen` subcommand.
pub fn generate_sample(
    config_path: &Path,
    replication: u64,
    seed_override: Option<u64>,
) -> Result<String, ExperimentError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        config.run.seed = seed;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolved = resolve(&config, base)?;
    let handle =
        crate::ensembles::SampleHandle::new(&resolved.spec, resolved.config.run.seed, replication);
    Ok(match handle.sample().map_err(VerifyError::from)? {
        crate::ensembles::SampleOutput::Data(x) => matrix_to_csv(&x),
        crate::ensembles::SampleOutput::Sym(m) => crate::io::sym_matrix_to_csv(&m),
    })
}
