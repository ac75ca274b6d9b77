//! Spectral-measure concentration toolkit.
//!
//! The crate has three layers:
//!
//! * numerical primitives: symmetric eigensolve, spectral CDFs and
//!   functionals, Kolmogorov distance, sample-covariance and dilation
//!   construction ([`linalg`]), and test functions with certified
//!   variation/Lipschitz metadata ([`functionals`]);
//! * seeded random-matrix ensembles with counter-based streams so any
//!   replication is addressable independently of execution order
//!   ([`ensembles`]);
//! * closed-form tail bounds ([`bounds`]) and Monte Carlo tail
//!   estimation with exact binomial confidence intervals plus property
//!   suites for the inequalities the bounds rest on ([`verify`]).
//!
//! [`experiment`] ties the layers together behind a TOML config for the
//! `specmeasure` CLI.

pub mod bounds;
pub mod ensembles;
pub mod experiment;
pub mod functionals;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod verify;
