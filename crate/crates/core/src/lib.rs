//! Toolkit for detecting calendar anomalies tied to the 24 Chinese solar
//! terms in daily return series.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`jieqi`] computes solar-term instants from the sun's apparent
//!    ecliptic longitude and aligns them with a trading calendar.
//! 2. [`ingest`] parses daily price data, derives returns, and builds the
//!    labeled design matrix (term dummies, normal-day indicator, lags).
//! 3. [`descstats`] produces per-term descriptive statistics with mean and
//!    normality tests.
//! 4. [`dummyreg`] runs the reference-term OLS panels with collinearity
//!    diagnostics and HC3-based extreme-bounds robustness classification.
//! 5. [`igarch`] fits the AR(1) mean equation and IGARCH(1,1) variance
//!    equation with term dummies under Normal, Student-t, and GED errors,
//!    including backward pruning and turn-of-term windows.
//! 6. [`pipeline`] orchestrates everything into a reproducible report
//!    bundle; [`synth`] generates seeded synthetic datasets with known
//!    injected anomalies for validating the estimators.

pub mod descstats;
pub mod dummyreg;
mod error;
pub mod igarch;
pub mod ingest;
pub mod jieqi;
pub mod pipeline;
pub mod prob;
pub mod report;
mod rng;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
pub use rng::seed_stream;

/// Version string embedded in report manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
