use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eda::BatemanIrf;
use crate::error::{require, Result};
use crate::rng::rng_from_seed;
use crate::signal::{ChannelKind, Signal};

use super::GroundTruth;

/// Skin-conductance response: impulse time and peak amplitude (µS).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scr {
    pub onset: f64,
    pub amplitude: f64,
}

/// SCR onsets spread over `[2 s, duration - 8 s]` at least `min_gap` apart;
/// amplitudes Gaussian, floored at 5 nS.
pub fn gen_scrs(count: usize, duration: f64, amp_mean: f64, amp_sd: f64, min_gap: f64, seed: u64) -> Result<Vec<Scr>> {
    require(amp_mean.is_finite() && amp_mean >= 0.0, "amp_mean", || format!("{amp_mean} µS"))?;
    require(amp_sd.is_finite() && amp_sd >= 0.0, "amp_sd", || format!("{amp_sd} µS"))?;
    let (lo, hi) = (2.0, duration - 8.0);
    require(hi > lo || count == 0, "duration", || format!("{duration} s is too short for SCRs"))?;
    require(count == 0 || (count as f64 - 1.0) * min_gap < hi - lo, "count", || {
        format!("{count} SCRs cannot be {min_gap} s apart in {duration} s")
    })?;
    let mut rng = rng_from_seed(seed);
    // place onsets on the slack left after reserving the gaps
    let slack = hi - lo - (count as f64 - 1.0).max(0.0) * min_gap;
    let mut u: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..=slack)).collect();
    u.sort_by(f64::total_cmp);
    let amp = Normal::new(amp_mean, amp_sd).expect("validated above");
    Ok(u
        .iter()
        .enumerate()
        .map(|(k, &x)| Scr {
            onset: lo + x + k as f64 * min_gap,
            amplitude: amp.sample(&mut rng).max(0.005),
        })
        .collect())
}

/// Tonic level plus every SCR convolved with the unit-peak response.
pub fn synth_eda(ground: &GroundTruth, fs: f64, duration: f64) -> Result<Signal> {
    synth_eda_with(ground, fs, duration, &BatemanIrf::default())
}

pub fn synth_eda_with(ground: &GroundTruth, fs: f64, duration: f64, irf: &BatemanIrf) -> Result<Signal> {
    require(ground.tonic_level.is_finite() && ground.tonic_level >= 0.0, "tonic_level", || {
        format!("{} µS is negative", ground.tonic_level)
    })?;
    require(fs.is_finite() && fs >= 10.0, "fs", || format!("{fs} Hz is below 10 Hz"))?;
    require(duration.is_finite() && duration > 0.0, "duration", || format!("{duration} s"))?;
    require(ground.scr_onsets.iter().all(|s| s.amplitude >= 0.0), "scr_onsets", || {
        "amplitudes must be nonnegative".into()
    })?;
    let n = (duration * fs).round() as usize;
    let mut x = vec![ground.tonic_level; n];
    let span = irf.support(1e-6);
    for s in &ground.scr_onsets {
        let i0 = ((s.onset * fs).floor().max(0.0)) as usize;
        let i1 = (((s.onset + span) * fs).ceil() as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(i1).skip(i0) {
            *v += s.amplitude * irf.eval(i as f64 / fs - s.onset);
        }
    }
    Ok(Signal::new(ChannelKind::Eda, fs, x))
}
