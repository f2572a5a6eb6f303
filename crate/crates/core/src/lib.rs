//! ANOVA for high-dimensional, temporally dependent and possibly
//! non-stationary vector time series.
//!
//! The test compares the mean vectors of `K` groups with a banded
//! U-statistic that only pairs observations whose time lag lies in
//! `[B, B1]`, and calibrates it with a second-order wild bootstrap.

pub mod bandwidth;
pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod panel;
pub mod rng;
pub mod statistic;
pub mod variance;

pub use bootstrap::{run_test, TestConfig, TestReport};
pub use error::{AnovaError, Result};
pub use panel::Panel;
pub use statistic::BandConfig;
