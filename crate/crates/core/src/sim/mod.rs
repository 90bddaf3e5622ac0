//! Synthetic participants.
//!
//! Every generator is a pure function of its parameters and seed, so a block
//! can be regenerated exactly and the analysis pipeline checked against the
//! ground truth it was built from.

mod ecg;
mod eda;
mod heart;
mod player;
mod resp;

use serde::{Deserialize, Serialize};

pub use ecg::{
    add_baseline_wander, band_limited_noise, noise_rms_for_snr, synth_ecg, synth_ecg_beats, EcgMorphology,
    EcgSynth, NoiseSource, Wave,
};
pub use eda::{gen_scrs, synth_eda, Scr};
pub use heart::{gen_ibi_series, HeartModel, HeartParams, NaturalRhythm};
pub use player::{simulate_player, AccuracyCurve, PlayerAction, PlayerModel, TimedAction};
pub use resp::{inspiration_times, synth_respiration};

/// Everything a generated block was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundTruth {
    /// R-peak times, seconds, strictly increasing.
    pub beat_times: Vec<f64>,
    pub scr_onsets: Vec<Scr>,
    pub inspiration_times: Vec<f64>,
    /// Tonic skin conductance, µS.
    pub tonic_level: f64,
}

impl GroundTruth {
    pub fn validate(&self) -> crate::Result<()> {
        crate::error::require(
            self.beat_times.windows(2).all(|w| w[1] > w[0]),
            "beat_times",
            || "must be strictly increasing".into(),
        )?;
        crate::error::require(
            self.scr_onsets.iter().all(|s| s.amplitude >= 0.0),
            "scr_onsets",
            || "amplitudes must be nonnegative".into(),
        )?;
        crate::error::require(self.tonic_level >= 0.0, "tonic_level", || {
            format!("{} µS is negative", self.tonic_level)
        })
    }
}
