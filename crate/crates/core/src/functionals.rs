//! Test functions with certified metadata.
//!
//! A [`TestFunction`] pairs an evaluator with the analytic facts the
//! tail bounds consume: the Lipschitz constant of `x ↦ f(x²)`, the
//! total variation of `f`, plain Lipschitz/convexity flags, and the
//! domain. Total variation and Lipschitz constants are not computable
//! from an evaluator alone, so custom functions declare them and the
//! constructor audits the claims on a probe grid and random point
//! pairs, rejecting any declaration with a concrete counterexample.

use crate::rng::{stream, StreamKey};
use rand::Rng;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Absolute slack separating genuine metadata violations from round-off.
pub const AUDIT_TOL: f64 = 1e-9;

const AUDIT_GRID_POINTS: usize = 1025;
const AUDIT_PAIRS: usize = 2048;
// Probe region for audits on unbounded domains. Declared constants
// certify the whole domain; audits can only witness violations inside
// a bounded window.
const AUDIT_WINDOW: f64 = 16.0;
const AUDIT_SEED: u64 = 0x6675_6e63_7464; // audit pair stream tag

#[derive(Debug, Error)]
pub enum FunctionError {
    #[error("declared {constant} = {declared} contradicted by witness {witnessed}")]
    InconsistentMetadata {
        constant: &'static str,
        declared: f64,
        witnessed: f64,
    },
    #[error("metadata must include a variation bound, or a Lipschitz constant with convexity (plain or squared-argument)")]
    NoApplicableMetadata,
    #[error("{constant} must be nonnegative and finite, got {value}")]
    InvalidConstant { constant: &'static str, value: f64 },
    #[error("domain must satisfy a < b, got ({0}, {1})")]
    InvalidDomain(f64, f64),
    #[error("grid point {0} outside the open domain ({:?}, {:?})", domain.0, domain.1)]
    GridOutsideDomain { point: f64, domain: (f64, f64) },
    #[error("grid must be ascending: {prev} followed by {next}")]
    GridNotAscending { prev: f64, next: f64 },
}

/// Declared analytic facts about a test function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metadata {
    /// Lipschitz constant of `x ↦ f(x²)`, when finite.
    pub lip_sq: Option<f64>,
    /// Whether `x ↦ f(x²)` is convex.
    pub convex_sq: bool,
    /// Total variation of `f` over its domain, when finite.
    pub variation: Option<f64>,
    /// Lipschitz constant of `f`, when finite.
    pub lip: Option<f64>,
    /// Whether `f` is convex.
    pub convex: bool,
}

/// Evaluable real function with certified metadata.
///
/// Evaluators must be pure: verification replays them across threads
/// and replications and assumes identical outputs for identical inputs.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    domain: (f64, f64),
    meta: Metadata,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("meta", &self.meta)
            .finish()
    }
}

impl TestFunction {
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn metadata(&self) -> Metadata {
        self.meta
    }

    pub fn lip_sq(&self) -> Option<f64> {
        self.meta.lip_sq
    }

    pub fn variation(&self) -> Option<f64> {
        self.meta.variation
    }

    pub fn lip(&self) -> Option<f64> {
        self.meta.lip
    }
}

/// Step indicator `x ↦ 1{x ≤ λ}`, total variation 1 on ℝ.
pub fn make_indicator(lambda: f64) -> TestFunction {
    assert!(lambda.is_finite(), "indicator threshold must be finite");
    TestFunction {
        name: format!("indicator({lambda})"),
        eval: Arc::new(move |x| if x <= lambda { 1.0 } else { 0.0 }),
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        meta: Metadata {
            variation: Some(1.0),
            ..Default::default()
        },
    }
}

/// `x ↦ √|x|`; the squared-argument form is |x|, convex with Lipschitz
/// constant 1.
pub fn make_sqrt_abs() -> TestFunction {
    TestFunction {
        name: "sqrt_abs".to_string(),
        eval: Arc::new(|x| x.abs().sqrt()),
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        meta: Metadata {
            lip_sq: Some(1.0),
            convex_sq: true,
            ..Default::default()
        },
    }
}

/// `x ↦ x`, convex with Lipschitz constant 1.
pub fn make_identity() -> TestFunction {
    TestFunction {
        name: "identity".to_string(),
        eval: Arc::new(|x| x),
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        meta: Metadata {
            lip: Some(1.0),
            convex: true,
            convex_sq: true,
            ..Default::default()
        },
    }
}

/// Wrap a caller-supplied evaluator with declared metadata.
///
/// The declaration is audited before acceptance: a probe grid checks
/// the variation bound and random point pairs check the Lipschitz
/// constants, each allowing [`AUDIT_TOL`] of slack.
pub fn make_custom(
    name: &str,
    eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    domain: (f64, f64),
    meta: Metadata,
) -> Result<TestFunction, FunctionError> {
    let (a, b) = domain;
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(FunctionError::InvalidDomain(a, b));
    }
    for (constant, value) in [
        ("lip_sq", meta.lip_sq),
        ("variation", meta.variation),
        ("lip", meta.lip),
    ] {
        if let Some(v) = value {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(FunctionError::InvalidConstant { constant, value: v });
            }
        }
    }
    let applicable = (meta.lip_sq.is_some() && meta.convex_sq)
        || meta.variation.is_some()
        || (meta.lip.is_some() && meta.convex);
    if !applicable {
        return Err(FunctionError::NoApplicableMetadata);
    }

    let f = TestFunction {
        name: name.to_string(),
        eval: Arc::new(eval),
        domain,
        meta,
    };
    audit(&f)?;
    Ok(f)
}

/// Re-run the metadata audits of [`make_custom`] against a function.
pub fn audit(f: &TestFunction) -> Result<(), FunctionError> {
    let (lo, hi) = probe_window(f.domain);

    if let Some(declared) = f.meta.variation {
        let grid: Vec<f64> = (0..AUDIT_GRID_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (AUDIT_GRID_POINTS - 1) as f64)
            .collect();
        let witnessed = verify_variation(f, &grid)?;
        if witnessed > declared + AUDIT_TOL {
            return Err(FunctionError::InconsistentMetadata {
                constant: "variation",
                declared,
                witnessed,
            });
        }
    }

    let mut rng = stream(StreamKey::new(AUDIT_SEED, 0, 0));
    let pairs: Vec<(f64, f64)> = (0..AUDIT_PAIRS)
        .map(|_| (rng.gen_range(lo..hi), rng.gen_range(lo..hi)))
        .collect();

    if let Some(declared) = f.meta.lip {
        let witnessed = verify_lip(f, &pairs)?;
        if witnessed > declared + AUDIT_TOL {
            return Err(FunctionError::InconsistentMetadata {
                constant: "lip",
                declared,
                witnessed,
            });
        }
    }
    if let Some(declared) = f.meta.lip_sq {
        // probe points whose squares stay inside the domain
        if let Some((mlo, mhi)) = squared_probe_window(f.domain) {
            let sq_pairs: Vec<(f64, f64)> = (0..AUDIT_PAIRS)
                .map(|_| {
                    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                        let mag = rng.gen_range(mlo..mhi);
                        if rng.gen::<bool>() {
                            mag
                        } else {
                            -mag
                        }
                    };
                    (draw(&mut rng), draw(&mut rng))
                })
                .collect();
            let witnessed = verify_lip_sq(f, &sq_pairs)?;
            if witnessed > declared + AUDIT_TOL {
                return Err(FunctionError::InconsistentMetadata {
                    constant: "lip_sq",
                    declared,
                    witnessed,
                });
            }
        }
    }
    Ok(())
}

/// Magnitude interval whose squares land strictly inside the domain,
/// clipped to the audit window; `None` when no such points exist.
fn squared_probe_window(domain: (f64, f64)) -> Option<(f64, f64)> {
    let (a, b) = domain;
    if b <= 0.0 {
        return None;
    }
    let hi = b.min(AUDIT_WINDOW);
    let lo = a.max(0.0);
    if lo >= hi {
        return None;
    }
    let inset = (hi - lo) * 1e-9;
    Some(((lo + inset).sqrt(), (hi - inset).sqrt()))
}

/// Summed absolute increments of `f` over an ascending grid: a certified
/// lower bound on the total variation.
pub fn verify_variation(f: &TestFunction, grid: &[f64]) -> Result<f64, FunctionError> {
    check_grid(f.domain, grid)?;
    Ok(grid
        .windows(2)
        .map(|w| (f.eval(w[1]) - f.eval(w[0])).abs())
        .sum())
}

/// Largest observed slope of `f` over point pairs: a certified lower
/// bound on the Lipschitz constant.
pub fn verify_lip(f: &TestFunction, pairs: &[(f64, f64)]) -> Result<f64, FunctionError> {
    let mut worst = 0.0f64;
    for &(x, y) in pairs {
        for p in [x, y] {
            check_in_domain(f.domain, p)?;
        }
        if x != y {
            worst = worst.max((f.eval(x) - f.eval(y)).abs() / (x - y).abs());
        }
    }
    Ok(worst)
}

/// Largest observed slope of `x ↦ f(x²)` over point pairs.
pub fn verify_lip_sq(f: &TestFunction, pairs: &[(f64, f64)]) -> Result<f64, FunctionError> {
    let mut worst = 0.0f64;
    for &(x, y) in pairs {
        for p in [x, y] {
            check_in_domain(f.domain, p * p)?;
        }
        if x != y {
            worst = worst.max((f.eval(x * x) - f.eval(y * y)).abs() / (x - y).abs());
        }
    }
    Ok(worst)
}

fn probe_window(domain: (f64, f64)) -> (f64, f64) {
    let lo = domain.0.max(-AUDIT_WINDOW);
    let hi = domain.1.min(AUDIT_WINDOW);
    // inset so open-endpoint domains stay strictly respected
    let inset = (hi - lo) * 1e-9;
    (lo + inset, hi - inset)
}

fn check_grid(domain: (f64, f64), grid: &[f64]) -> Result<(), FunctionError> {
    for w in grid.windows(2) {
        if w[1] < w[0] {
            return Err(FunctionError::GridNotAscending {
                prev: w[0],
                next: w[1],
            });
        }
    }
    for &p in grid {
        check_in_domain(domain, p)?;
    }
    Ok(())
}

fn check_in_domain(domain: (f64, f64), p: f64) -> Result<(), FunctionError> {
    if !(domain.0 < p && p < domain.1) {
        return Err(FunctionError::GridOutsideDomain { point: p, domain });
    }
    Ok(())
}
