//! R-peak detection on single-lead ECG.
//!
//! The detector is causal. Each sample goes through a 5–25 Hz band-pass; the
//! slope of the filtered trace is squared and averaged over 20 ms, and the
//! square root of that energy forms the detection envelope. An envelope peak
//! becomes a candidate once it has stayed the maximum of a ±60 ms
//! neighbourhood. A candidate is accepted when its prominence clears half of
//! a reference level and it falls outside the 250 ms refractory period. The
//! reference level tracks accepted prominences and decays once no beat has
//! been accepted for a while. The reported time is the raw-signal maximum
//! around the candidate, which removes the filter group delay.

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::filter::Cascade;
use crate::signal::{ChannelKind, Signal};

pub const IBI_MIN_MS: f64 = 250.0;
pub const IBI_MAX_MS: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatEvent {
    /// Seconds on the stream clock.
    pub t: f64,
    /// Raw ECG value at the peak, mV.
    #[serde(rename = "amp")]
    pub amplitude: f64,
    /// Prominence of the band-passed QRS, mV.
    #[serde(rename = "prom", default)]
    pub prominence: f64,
}

/// Inter-beat intervals with the time of the beat closing each interval.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IbiSeries {
    /// Milliseconds.
    pub intervals: Vec<f64>,
    /// Seconds.
    pub anchor_times: Vec<f64>,
}

impl IbiSeries {
    /// Successive differences of `times`, dropping intervals outside
    /// [250, 2000] ms together with their anchors.
    pub fn from_beat_times(times: &[f64]) -> IbiSeries {
        let mut s = IbiSeries::default();
        for w in times.windows(2) {
            let ms = (w[1] - w[0]) * 1000.0;
            if (IBI_MIN_MS..=IBI_MAX_MS).contains(&ms) {
                s.intervals.push(ms);
                s.anchor_times.push(w[1]);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Beat times of a contiguous series (no dropped intervals).
    pub fn beat_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        if let (Some(&a), Some(&iv)) = (self.anchor_times.first(), self.intervals.first()) {
            out.push(a - iv / 1000.0);
        }
        out.extend_from_slice(&self.anchor_times);
        out
    }
}

pub fn ibi_from_beats(beats: &[BeatEvent]) -> IbiSeries {
    let times: Vec<f64> = beats.iter().map(|b| b.t).collect();
    IbiSeries::from_beat_times(&times)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// Averaging span of the slope energy.
    pub envelope_window_s: f64,
    /// Half-width of the local-maximum neighbourhood; also the decision delay.
    pub decision_window_s: f64,
    pub refractory_s: f64,
    /// Fraction of the reference level a candidate must reach.
    pub threshold_fraction: f64,
    /// The reference level holds this long after the last accepted beat...
    pub level_hold_s: f64,
    /// ...then decays with this time constant.
    pub level_decay_s: f64,
    /// Initial span used only to learn the reference level.
    pub warmup_s: f64,
    /// Absolute envelope-prominence floor, mV/s.
    pub min_prominence: f64,
    /// Raw-signal search span around the candidate, seconds before/after.
    pub refine_before_s: f64,
    pub refine_after_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            band_low_hz: 5.0,
            band_high_hz: 25.0,
            envelope_window_s: 0.02,
            decision_window_s: 0.06,
            refractory_s: 0.25,
            threshold_fraction: 0.5,
            level_hold_s: 1.5,
            level_decay_s: 5.0,
            warmup_s: 1.0,
            min_prominence: 1.0,
            refine_before_s: 0.06,
            refine_after_s: 0.02,
        }
    }
}

#[derive(Debug, Clone)]
struct Ring {
    t: Vec<f64>,
    raw: Vec<f64>,
    filt: Vec<f64>,
    env: Vec<f64>,
}

impl Ring {
    fn new(cap: usize) -> Self {
        Ring { t: vec![0.0; cap], raw: vec![0.0; cap], filt: vec![0.0; cap], env: vec![0.0; cap] }
    }

    #[inline]
    fn slot(&self, index: u64) -> usize {
        (index % self.t.len() as u64) as usize
    }
}

/// Streaming detector state. Single owner, advanced strictly in sample order.
#[derive(Debug, Clone)]
pub struct RPeakDetector {
    cfg: DetectorConfig,
    fs: f64,
    filter: Cascade,
    ring: Ring,
    // running mean of the squared slope
    energy: Vec<f64>,
    energy_sum: f64,
    prev_filt: f64,
    half: u64,
    refine_before: u64,
    refine_after: u64,
    history: u64,
    n: u64,
    t_first: Option<f64>,
    last_t: Option<f64>,
    level: f64,
    level_t: f64,
    warmup_max: f64,
    refractory_until: f64,
    last_beat: Option<BeatEvent>,
}

impl RPeakDetector {
    pub fn new(fs: f64) -> Result<Self> {
        Self::with_config(fs, DetectorConfig::default())
    }

    pub fn with_config(fs: f64, cfg: DetectorConfig) -> Result<Self> {
        require(fs.is_finite() && fs >= 250.0, "fs", || format!("{fs} Hz is below 250 Hz"))?;
        require(cfg.band_high_hz < fs / 2.0 && cfg.band_low_hz < cfg.band_high_hz, "band", || {
            format!("{}–{} Hz at fs {fs}", cfg.band_low_hz, cfg.band_high_hz)
        })?;
        require(cfg.threshold_fraction > 0.0 && cfg.min_prominence > 0.0, "threshold", || {
            "threshold must be positive".into()
        })?;
        require(cfg.decision_window_s > 0.0 && cfg.envelope_window_s > 0.0, "window", || {
            "windows must be positive".into()
        })?;
        let half = (cfg.decision_window_s * fs).round().max(1.0) as u64;
        let refine_before = (cfg.refine_before_s * fs).round() as u64;
        let refine_after = (cfg.refine_after_s * fs).round() as u64;
        let history = (2 * half).max(half + refine_before);
        let cap = (2 * half + refine_before + refine_after + 4) as usize;
        let w = (cfg.envelope_window_s * fs).round().max(1.0) as usize;
        Ok(RPeakDetector {
            cfg,
            fs,
            filter: Cascade::bandpass(fs, cfg.band_low_hz, cfg.band_high_hz),
            ring: Ring::new(cap),
            energy: vec![0.0; w],
            energy_sum: 0.0,
            prev_filt: 0.0,
            half,
            refine_before,
            refine_after,
            history,
            n: 0,
            t_first: None,
            last_t: None,
            level: 0.0,
            level_t: 0.0,
            warmup_max: 0.0,
            refractory_until: f64::NEG_INFINITY,
            last_beat: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn last_beat(&self) -> Option<BeatEvent> {
        self.last_beat
    }

    fn level_at(&self, t: f64) -> f64 {
        let idle = (t - self.level_t - self.cfg.level_hold_s).max(0.0);
        self.level * (-idle / self.cfg.level_decay_s).exp()
    }

    /// Current acceptance threshold on the envelope at time `t`, mV/s.
    pub fn threshold_at(&self, t: f64) -> f64 {
        (self.cfg.threshold_fraction * self.level_at(t)).max(self.cfg.min_prominence)
    }

    /// Feeds one sample. Returns a beat once its decision window has elapsed.
    pub fn push_sample(&mut self, sample: f64, t: f64) -> Result<Option<BeatEvent>> {
        if let Some(prev) = self.last_t {
            if !(t > prev) {
                return Err(Error::StreamOrder { t, prev });
            }
        }
        if !sample.is_finite() {
            return Err(Error::NonFiniteSample { t });
        }
        if self.t_first.is_none() {
            self.t_first = Some(t);
            self.filter.settle_to(sample);
            self.prev_filt = self.filter.process(sample);
            self.filter.settle_to(sample);
        }
        self.last_t = Some(t);

        let y = self.filter.process(sample);
        let slope = (y - self.prev_filt) * self.fs;
        self.prev_filt = y;
        let w = self.energy.len();
        let k = (self.n % w as u64) as usize;
        self.energy_sum += slope * slope - self.energy[k];
        self.energy[k] = slope * slope;
        if k == w - 1 {
            // resynchronise the running sum once per window
            self.energy_sum = self.energy.iter().sum();
        }
        let env = (self.energy_sum.max(0.0) / w as f64).sqrt();

        let slot = self.ring.slot(self.n);
        self.ring.t[slot] = t;
        self.ring.raw[slot] = sample;
        self.ring.filt[slot] = y;
        self.ring.env[slot] = env;
        let newest = self.n;
        self.n += 1;

        if newest < self.history {
            return Ok(None);
        }
        Ok(self.evaluate(newest - self.half, newest))
    }

    fn evaluate(&mut self, c: u64, newest: u64) -> Option<BeatEvent> {
        let ring = &self.ring;
        let peak = ring.env[ring.slot(c)];
        if peak <= 0.0 {
            return None;
        }
        let mut min_right = f64::INFINITY;
        for k in c + 1..=newest {
            let v = ring.env[ring.slot(k)];
            if v >= peak {
                return None;
            }
            min_right = min_right.min(v);
        }
        let mut min_left = f64::INFINITY;
        for k in c - self.half..c {
            let v = ring.env[ring.slot(k)];
            if v > peak {
                return None;
            }
            min_left = min_left.min(v);
        }
        let prominence = peak - min_left.max(min_right);
        let tc = ring.t[ring.slot(c)];

        let t_first = self.t_first.unwrap_or(tc);
        if tc < t_first + self.cfg.warmup_s {
            self.warmup_max = self.warmup_max.max(prominence);
            return None;
        }
        if self.level == 0.0 {
            self.level = self.warmup_max;
            self.level_t = tc;
        }
        if prominence < self.threshold_at(tc) {
            return None;
        }

        // raw maximum and band-passed prominence around the candidate
        let lo = c - self.refine_before;
        let hi = (c + self.refine_after).min(newest);
        let (mut best, mut fbest) = (lo, lo);
        for k in lo..=hi {
            if ring.raw[ring.slot(k)] > ring.raw[ring.slot(best)] {
                best = k;
            }
            if ring.filt[ring.slot(k)] > ring.filt[ring.slot(fbest)] {
                fbest = k;
            }
        }
        let t_peak = ring.t[ring.slot(best)];
        if t_peak < self.refractory_until {
            return None;
        }
        let fpeak = ring.filt[ring.slot(fbest)];
        let left = (fbest.saturating_sub(self.half)..fbest).map(|k| ring.filt[ring.slot(k)]).fold(fpeak, f64::min);
        let right = (fbest + 1..=newest).map(|k| ring.filt[ring.slot(k)]).fold(fpeak, f64::min);
        let qrs_prominence = (fpeak - left.max(right)).max(f64::MIN_POSITIVE);

        let current = self.level_at(tc);
        self.level = if prominence > 2.0 * current { prominence } else { 0.75 * current + 0.25 * prominence };
        self.level_t = tc;
        self.refractory_until = t_peak + self.cfg.refractory_s;
        let beat = BeatEvent { t: t_peak, amplitude: ring.raw[ring.slot(best)], prominence: qrs_prominence };
        self.last_beat = Some(beat);
        Some(beat)
    }
}

/// Offline detection: the streaming detector driven over a whole recording.
pub fn detect_batch(signal: &Signal) -> Result<Vec<BeatEvent>> {
    detect_batch_with(signal, DetectorConfig::default())
}

pub fn detect_batch_with(signal: &Signal, cfg: DetectorConfig) -> Result<Vec<BeatEvent>> {
    signal.expect_kind(ChannelKind::Ecg)?;
    if signal.duration() < 2.0 {
        return Err(Error::InsufficientData(format!(
            "ECG of {:.3} s is shorter than 2 s",
            signal.duration()
        )));
    }
    let mut det = RPeakDetector::with_config(signal.fs, cfg)?;
    let mut beats = Vec::new();
    for (i, &x) in signal.samples.iter().enumerate() {
        if let Some(b) = det.push_sample(x, signal.time_at(i))? {
            beats.push(b);
        }
    }
    Ok(beats)
}

/// Live heart-period estimate: the last accepted interval, with a guard that
/// holds the previous estimate across a single interval jumping by more than
/// `max_jump`. Two consecutive consistent jumps are taken as a real change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveIbiEstimator {
    pub max_jump: f64,
    last_beat: Option<f64>,
    estimate: Option<f64>,
    pending: Option<f64>,
}

impl Default for LiveIbiEstimator {
    fn default() -> Self {
        LiveIbiEstimator { max_jump: 0.35, last_beat: None, estimate: None, pending: None }
    }
}

impl LiveIbiEstimator {
    pub fn estimate_ms(&self) -> Option<f64> {
        self.estimate
    }

    /// Returns the new estimate when this beat changed it.
    pub fn on_beat(&mut self, t: f64) -> Option<f64> {
        let prev = self.last_beat.replace(t)?;
        let ibi = (t - prev) * 1000.0;
        if !(IBI_MIN_MS..=IBI_MAX_MS).contains(&ibi) {
            self.pending = None;
            return None;
        }
        let accept = match (self.estimate, self.pending) {
            (None, _) => true,
            (Some(est), _) if ((ibi - est) / est).abs() <= self.max_jump => true,
            (_, Some(p)) if ((ibi - p) / p).abs() <= self.max_jump => true,
            _ => false,
        };
        if accept {
            self.estimate = Some(ibi);
            self.pending = None;
            Some(ibi)
        } else {
            self.pending = Some(ibi);
            None
        }
    }
}

/// Agreement between detected and reference beat times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    /// Detected minus reference, seconds, for every matched pair.
    pub timing_errors: Vec<f64>,
}

impl DetectionScore {
    pub fn sensitivity(&self) -> f64 {
        let d = self.true_positives + self.false_negatives;
        if d == 0 { 1.0 } else { self.true_positives as f64 / d as f64 }
    }

    pub fn positive_predictivity(&self) -> f64 {
        let d = self.true_positives + self.false_positives;
        if d == 0 { 1.0 } else { self.true_positives as f64 / d as f64 }
    }

    pub fn max_abs_error(&self) -> f64 {
        self.timing_errors.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// One-to-one matching of sorted time lists within `tolerance` seconds,
/// nearest pairs first in time order.
pub fn score_detections(reference: &[f64], detected: &[f64], tolerance: f64) -> DetectionScore {
    let mut s = DetectionScore::default();
    let (mut i, mut j) = (0, 0);
    while i < reference.len() && j < detected.len() {
        let d = detected[j] - reference[i];
        if d.abs() <= tolerance {
            s.true_positives += 1;
            s.timing_errors.push(d);
            i += 1;
            j += 1;
        } else if d < 0.0 {
            s.false_positives += 1;
            j += 1;
        } else {
            s.false_negatives += 1;
            i += 1;
        }
    }
    s.false_negatives += reference.len() - i;
    s.false_positives += detected.len() - j;
    s
}
