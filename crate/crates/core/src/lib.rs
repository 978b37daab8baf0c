//! Multi-object tracking by detection: Kalman-filtered box tracks, a
//! cascaded appearance/IoU association, and MOTChallenge evaluation.

pub mod assignment;
pub mod association;
pub mod cli;
pub mod error;
pub mod kalman;
pub mod metrics;
pub mod model;
pub mod motio;
pub mod tracker;

pub use error::{Error, Result};
