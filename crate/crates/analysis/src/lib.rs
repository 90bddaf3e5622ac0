//! Offline analysis: physiological features, questionnaire scoring and the
//! small-sample statistics used to compare conditions.

pub mod eda;
pub mod error;
pub mod features;
pub mod instruments;
pub mod peaks;
pub mod stats;

pub use error::{Error, Result};
