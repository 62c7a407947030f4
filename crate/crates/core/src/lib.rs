//! Continuous implicit authentication from phone and watch motion sensors.
//!
//! Raw accelerometer and gyroscope streams are cut into fixed windows,
//! summarised by time and frequency statistics, routed through a
//! Stationary/Moving context detector and scored by a per-context kernel
//! ridge regression model. The crate also ships the feature-selection
//! analysis, a synthetic population generator and an evaluation harness.

pub mod config;
pub mod context;
pub mod eval;
pub mod error;
pub mod features;
pub mod forest;
pub mod krr;
pub mod pipeline;
pub mod selection;
pub mod sensor;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
