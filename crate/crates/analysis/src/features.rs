//! Per-block physiological and behavioral features.

use serde::{Deserialize, Serialize};
use slowbeat_core::filter::{Biquad, Cascade};
use slowbeat_core::game::{OutcomeKind, TrialRecord};
use slowbeat_core::rpeak::{detect_batch, IbiSeries};
use slowbeat_core::{ChannelKind, Signal};

use crate::error::{Error, Result};
use crate::peaks::find_peaks;

/// One block's feature row. Column order of the CSV export follows field order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub hr_bpm: f64,
    pub rmssd_ms: f64,
    pub rr_cpm: f64,
    pub n_scrs: usize,
    /// `None` when no SCR passed the threshold.
    pub scr_amp_mean: Option<f64>,
    pub tonic_mean: f64,
    pub game_indicator: f64,
    pub timeout_indicator: f64,
    /// `None` when every beep was missed.
    pub rt_mean_ms: Option<f64>,
    pub omissions: usize,
}

impl FeatureSet {
    pub const COLUMNS: [&'static str; 10] = [
        "hr_bpm",
        "rmssd_ms",
        "rr_cpm",
        "n_scrs",
        "scr_amp_mean",
        "tonic_mean",
        "game_indicator",
        "timeout_indicator",
        "rt_mean_ms",
        "omissions",
    ];

    /// Values in column order; undefined means are `None`.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            Some(self.hr_bpm),
            Some(self.rmssd_ms),
            Some(self.rr_cpm),
            Some(self.n_scrs as f64),
            self.scr_amp_mean,
            Some(self.tonic_mean),
            Some(self.game_indicator),
            Some(self.timeout_indicator),
            self.rt_mean_ms,
            Some(self.omissions as f64),
        ]
    }

    /// Looks a column up by name; `None` for unknown columns and undefined values.
    pub fn get(&self, column: &str) -> Option<f64> {
        Self::COLUMNS.iter().position(|c| *c == column).and_then(|i| self.values()[i])
    }
}

pub fn mean_hr(ibi: &IbiSeries) -> Result<f64> {
    if ibi.len() < 2 {
        return Err(Error::InsufficientData(format!("mean HR needs 2 intervals, got {}", ibi.len())));
    }
    Ok(ibi.intervals.iter().map(|v| 60_000.0 / v).sum::<f64>() / ibi.len() as f64)
}

/// Successive differences that straddle a rejected interval are skipped.
pub fn rmssd(ibi: &IbiSeries) -> Result<f64> {
    if ibi.len() < 3 {
        return Err(Error::InsufficientData(format!("RMSSD needs 3 intervals, got {}", ibi.len())));
    }
    let anchored = ibi.anchor_times.len() == ibi.len();
    let mut acc = 0.0;
    let mut n = 0usize;
    for k in 1..ibi.len() {
        if anchored {
            let start = ibi.anchor_times[k] - ibi.intervals[k] / 1000.0;
            if (start - ibi.anchor_times[k - 1]).abs() > 1e-6 {
                continue;
            }
        }
        acc += (ibi.intervals[k] - ibi.intervals[k - 1]).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData("no adjacent interval pairs".into()));
    }
    Ok((acc / n as f64).sqrt())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// 5th to 95th percentile spread.
pub(crate) fn robust_amplitude(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    percentile(&s, 0.95) - percentile(&s, 0.05)
}

/// Breathing rate from inspiration peaks, cycles/min.
pub fn respiration_rate(signal: &Signal) -> Result<f64> {
    signal.expect_kind(ChannelKind::Respiration)?;
    if signal.duration() < 30.0 {
        return Err(Error::InsufficientData(format!("{:.1} s of respiration, need 30", signal.duration())));
    }
    let sig = if signal.fs > 50.0 { signal.downsample(25.0)? } else { signal.clone() };
    let smooth = Cascade(vec![Biquad::lowpass(sig.fs, 1.0), Biquad::lowpass(sig.fs, 1.0)]).filtfilt(&sig.samples);
    let amp = robust_amplitude(&smooth);
    if amp <= 1e-12 {
        return Err(Error::InsufficientData("respiration signal is flat".into()));
    }
    let distance = (1.2 * sig.fs).ceil() as usize;
    let peaks = find_peaks(&smooth, 0.25 * amp, distance);
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!("{} inspiration peaks found", peaks.len())));
    }
    let first = sig.time_at(peaks[0]);
    let last = sig.time_at(*peaks.last().unwrap());
    Ok(60.0 * (peaks.len() - 1) as f64 / (last - first))
}

/// Relative change from the baseline block.
pub fn normalize(value: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok((value - baseline) / baseline)
}

/// Unnormalized behavioral performance of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawBehavior {
    /// Success rate × mean pattern length / mean completion time (1/s).
    pub game: f64,
    pub timeout_rate: f64,
}

pub fn raw_behavior(trials: &[TrialRecord]) -> Result<RawBehavior> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("block has no completed trials".into()));
    }
    let n = trials.len() as f64;
    let success = trials.iter().filter(|t| t.outcome.kind == OutcomeKind::Success).count() as f64 / n;
    let timeouts = trials.iter().filter(|t| t.outcome.kind == OutcomeKind::Timeout).count() as f64 / n;
    let mean_len = trials.iter().map(|t| t.trial.len() as f64).sum::<f64>() / n;
    let mean_s = trials.iter().map(|t| t.outcome.completion_ms).sum::<f64>() / n / 1000.0;
    let game = if mean_s > 0.0 { success * mean_len / mean_s } else { 0.0 };
    Ok(RawBehavior { game, timeout_rate: timeouts })
}

/// `(game, timeout)` indicators of one block relative to the cohort mean.
/// A cohort without any timeouts yields a timeout indicator of 0.
pub fn behavioral_indicators(block: &RawBehavior, cohort: &[RawBehavior]) -> Result<(f64, f64)> {
    if cohort.is_empty() {
        return Err(Error::InsufficientData("empty cohort".into()));
    }
    let n = cohort.len() as f64;
    let game_mean = cohort.iter().map(|c| c.game).sum::<f64>() / n;
    let to_mean = cohort.iter().map(|c| c.timeout_rate).sum::<f64>() / n;
    let game = if game_mean > 0.0 { block.game / game_mean } else { 0.0 };
    let timeout = if to_mean > 0.0 { block.timeout_rate / to_mean } else { 0.0 };
    Ok((game, timeout))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityRule {
    TooShort,
    OutOfBand,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub min_duration_s: f64,
    pub max_out_of_band: f64,
    /// Bound on |mean of last tenth − mean of first tenth| / robust amplitude.
    pub max_drift_ecg: f64,
    pub max_drift_respiration: f64,
    pub max_drift_eda: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            min_duration_s: 480.0,
            max_out_of_band: 0.5,
            max_drift_ecg: 0.5,
            max_drift_respiration: 0.5,
            max_drift_eda: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub kind: ChannelKind,
    pub duration_s: f64,
    pub out_of_band_fraction: f64,
    pub drift_ratio: f64,
    pub triggered: Vec<QualityRule>,
}

impl QualityReport {
    pub fn accepted(&self) -> bool {
        self.triggered.is_empty()
    }
}

/// Frequency bands (Hz) the channel's useful content is expected in.
pub fn nominal_band(kind: ChannelKind) -> (f64, f64) {
    match kind {
        ChannelKind::Ecg => (0.8, 3.0),
        ChannelKind::Respiration => (0.1, 0.8),
        ChannelKind::Eda => (0.1, 0.3),
    }
}

/// ECG: power not explained by the beat-locked template, with the rhythm
/// itself required to sit in the cardiac band.
fn ecg_out_of_band(signal: &Signal) -> f64 {
    let (lo, hi) = nominal_band(ChannelKind::Ecg);
    let Ok(beats) = detect_batch(signal) else { return 1.0 };
    if beats.len() < 10 {
        return 1.0;
    }
    let mut ibis: Vec<f64> = beats.windows(2).map(|w| w[1].t - w[0].t).collect();
    ibis.sort_by(f64::total_cmp);
    let m = ibis[ibis.len() / 2];
    if !(lo..=hi).contains(&(1.0 / m)) {
        return 1.0;
    }
    let mean = signal.samples.iter().sum::<f64>() / signal.len() as f64;
    let before = (0.3 * m * signal.fs) as isize;
    let after = (0.65 * m * signal.fs) as isize;
    let width = (before + after) as usize;
    let starts: Vec<usize> = beats
        .iter()
        .map(|b| ((b.t - signal.t0) * signal.fs).round() as isize - before)
        .filter(|&s| s >= 0 && (s as usize + width) <= signal.len())
        .map(|s| s as usize)
        .collect();
    if starts.len() < 10 {
        return 1.0;
    }
    let mut template = vec![0.0; width];
    for &s in &starts {
        for (k, v) in template.iter_mut().enumerate() {
            *v += signal.samples[s + k] - mean;
        }
    }
    template.iter_mut().for_each(|v| *v /= starts.len() as f64);
    let mut resid: Vec<f64> = signal.samples.iter().map(|v| v - mean).collect();
    let total: f64 = resid.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return 1.0;
    }
    for &s in &starts {
        for (k, v) in template.iter().enumerate() {
            resid[s + k] -= v;
        }
    }
    (resid.iter().map(|v| v * v).sum::<f64>() / total).min(1.0)
}

/// Fraction of AC power above the upper band edge.
fn power_above(signal: &Signal, edge: f64) -> Result<f64> {
    let sig = if signal.fs > 50.0 { signal.downsample(25.0)? } else { signal.clone() };
    let mean = sig.samples.iter().sum::<f64>() / sig.len().max(1) as f64;
    let ac: Vec<f64> = sig.samples.iter().map(|v| v - mean).collect();
    let total: f64 = ac.iter().map(|v| v * v).sum();
    if total <= 1e-18 {
        return Ok(0.0);
    }
    let hp = Cascade(vec![Biquad::highpass(sig.fs, edge), Biquad::highpass(sig.fs, edge)]).filtfilt(&ac);
    Ok((hp.iter().map(|v| v * v).sum::<f64>() / total).min(1.0))
}

fn drift_ratio(x: &[f64]) -> f64 {
    let tenth = (x.len() / 10).max(1);
    if x.len() < 2 {
        return 0.0;
    }
    let head = x[..tenth].iter().sum::<f64>() / tenth as f64;
    let tail = x[x.len() - tenth..].iter().sum::<f64>() / tenth as f64;
    let amp = robust_amplitude(x);
    let d = (tail - head).abs();
    if d == 0.0 {
        0.0
    } else if amp <= 0.0 {
        f64::INFINITY
    } else {
        d / amp
    }
}

pub fn quality_screen(signal: &Signal, cfg: &QualityConfig) -> QualityReport {
    let mut triggered = Vec::new();
    let duration_s = signal.duration();
    if duration_s < cfg.min_duration_s {
        triggered.push(QualityRule::TooShort);
    }
    let out_of_band_fraction = if signal.len() < 2 {
        1.0
    } else {
        match signal.kind {
            ChannelKind::Ecg => ecg_out_of_band(signal),
            kind => power_above(signal, nominal_band(kind).1).unwrap_or(1.0),
        }
    };
    if out_of_band_fraction > cfg.max_out_of_band {
        triggered.push(QualityRule::OutOfBand);
    }
    let drift = drift_ratio(&signal.samples);
    let bound = match signal.kind {
        ChannelKind::Ecg => cfg.max_drift_ecg,
        ChannelKind::Respiration => cfg.max_drift_respiration,
        ChannelKind::Eda => cfg.max_drift_eda,
    };
    if drift > bound {
        triggered.push(QualityRule::Drift);
    }
    QualityReport { kind: signal.kind, duration_s, out_of_band_fraction, drift_ratio: drift, triggered }
}
