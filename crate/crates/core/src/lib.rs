//! Vibration-aware route recommendation for ambulance telemetry.
//!
//! 1 Hz accelerometer/GPS registers are classified into three mobility
//! areas (A1 smooth, A2 regular, A3 rough) by a Gaussian probabilistic
//! neural network over windowed standard deviations. Classified trips are
//! stored by endpoint; candidate routes between the same endpoints are
//! ranked by severity-weighted travel time.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod features;
pub mod routestore;
pub mod scoring;
pub mod telemetry;
pub mod trip;

pub use error::{Error, Result};
