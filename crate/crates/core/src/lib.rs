//! Real-time building blocks for closed-loop heart-rate biofeedback experiments.
//!
//! The crate covers the streaming side of the apparatus: synthetic participants
//! ([`sim`]), R-peak detection ([`rpeak`]), the lowered-rate vibration scheduler
//! ([`biofeedback`]), the pattern-memory stress game ([`game`]) and the auditory
//! probe task ([`probe`]). Offline feature extraction and statistics live in
//! `slowbeat-analysis`; orchestration lives in `slowbeat-session`.

pub mod biofeedback;
pub mod eda;
pub mod error;
pub mod filter;
pub mod game;
pub mod probe;
pub mod rng;
pub mod rpeak;
pub mod signal;
pub mod sim;
pub mod time;

pub use error::{Error, Result};
pub use signal::{ChannelKind, Signal};
