//! Experiment orchestration for closed-loop heart-rate biofeedback.
//!
//! A block runs on one microsecond clock owned by [`block::BlockSession`],
//! which wires the ECG renderer, the streaming R-peak detector, the vibration
//! scheduler, the pattern game and the auditory probe together. Blocks run
//! headless against simulated participants or live through [`serve`]; every
//! block is persisted as a versioned JSONL log that replays bit-identically.

pub mod block;
pub mod config;
pub mod contrast;
pub mod error;
pub mod experiment;
pub mod log;
pub mod population;
pub mod serve;
pub mod store;
pub mod table;

pub use error::{Error, Result};
