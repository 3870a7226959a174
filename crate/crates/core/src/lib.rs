//! Streaming estimation of the leading principal component.
//!
//! The crate is organised around Oja's projected stochastic-approximation
//! update `u <- normalize(u + beta * x * (x . u))`:
//!
//! - [`model`]: spectral covariance models, angle metrics, eigenbasis rescaling.
//! - [`sampling`]: seeded subgaussian data streams, sphere sampling, and
//!   empirical subgaussian / subexponential norm checks.
//! - [`oja`]: the O(d) update, stepsize schedules, and a product-form oracle.
//! - [`diagnostics`]: regions, stopping times, rescaled times and the
//!   one-step increment decompositions.
//! - [`oracle`]: batch PCA baseline and reference bound curves.
//! - [`harness`]: seeded Monte-Carlo replication, sweeps, rate fits and
//!   property-suite verification behind the `ojapca` CLI.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod oja;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use model::{AngleReport, SpectralModel, Tan2, UnitVector};
pub use oja::{OjaState, StepsizeSchedule};
