//! Single-lead ECG synthesis from beat times.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::filter::Biquad;
use crate::rng::{derive_named, rng_from_seed, SimRng};
use crate::rpeak::IbiSeries;
use crate::signal::{ChannelKind, Signal};

/// Emulated acquisition low-pass on additive noise.
const NOISE_CUTOFF_HZ: f64 = 35.0;

/// One Gaussian deflection relative to the R peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    /// Seconds from the R peak.
    pub offset_s: f64,
    /// mV.
    pub amplitude: f64,
    /// Standard deviation, seconds.
    pub width_s: f64,
}

impl Wave {
    #[inline]
    fn eval(&self, dt: f64, offset: f64) -> f64 {
        let z = (dt - offset) / self.width_s;
        if z.abs() > 6.0 {
            0.0
        } else {
            self.amplitude * (-0.5 * z * z).exp()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgMorphology {
    pub p: Wave,
    pub q: Wave,
    pub r: Wave,
    pub s: Wave,
    /// Offset given at an 800 ms interval, stretched with the square root of
    /// the preceding interval.
    pub t: Wave,
    /// Beat-to-beat relative amplitude variation (uniform half-width).
    pub gain_jitter: f64,
}

impl Default for EcgMorphology {
    fn default() -> Self {
        EcgMorphology {
            p: Wave { offset_s: -0.18, amplitude: 0.15, width_s: 0.025 },
            q: Wave { offset_s: -0.03, amplitude: -0.12, width_s: 0.008 },
            r: Wave { offset_s: 0.0, amplitude: 1.0, width_s: 0.010 },
            s: Wave { offset_s: 0.03, amplitude: -0.25, width_s: 0.009 },
            t: Wave { offset_s: 0.25, amplitude: 0.30, width_s: 0.045 },
            gain_jitter: 0.05,
        }
    }
}

impl EcgMorphology {
    fn waves(&self) -> [&Wave; 5] {
        [&self.p, &self.q, &self.r, &self.s, &self.t]
    }

    /// Lead before the R peak at which a beat starts contributing.
    pub fn lead_s(&self) -> f64 {
        self.waves().iter().map(|w| 6.0 * w.width_s - w.offset_s).fold(0.0, f64::max)
    }

    fn tail_s(&self, ibi_s: f64) -> f64 {
        self.t.offset_s * (ibi_s / 0.8).sqrt() + 6.0 * self.t.width_s
    }

    /// Value of one beat at `dt` seconds from its R peak.
    pub fn beat_value(&self, dt: f64, ibi_s: f64) -> f64 {
        let t_off = self.t.offset_s * (ibi_s / 0.8).sqrt();
        self.p.eval(dt, self.p.offset_s)
            + self.q.eval(dt, self.q.offset_s)
            + self.r.eval(dt, self.r.offset_s)
            + self.s.eval(dt, self.s.offset_s)
            + self.t.eval(dt, t_off)
    }
}

/// White Gaussian noise through the acquisition low-pass, scaled to a target
/// RMS at the filter output.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: SimRng,
    filter: Option<Biquad>,
    scale: f64,
}

impl NoiseSource {
    pub fn new(fs: f64, rms: f64, seed: u64) -> Self {
        let filter = (fs > 2.0 * NOISE_CUTOFF_HZ * 1.05).then(|| Biquad::lowpass(fs, NOISE_CUTOFF_HZ));
        let gain = match &filter {
            Some(f) => crate::filter::Cascade(vec![f.clone()]).noise_power_gain((fs * 2.0) as usize),
            None => 1.0,
        };
        NoiseSource { rng: rng_from_seed(seed), filter, scale: rms / gain.sqrt() }
    }

    #[inline]
    pub fn next_value(&mut self) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        let y = match &mut self.filter {
            Some(f) => f.process(z),
            None => z,
        };
        self.scale * y
    }
}

pub fn band_limited_noise(n: usize, fs: f64, rms: f64, seed: u64) -> Vec<f64> {
    let mut src = NoiseSource::new(fs, rms, seed);
    (0..n).map(|_| src.next_value()).collect()
}

/// Noise RMS giving `snr_db` against the mean power of `clean`.
pub fn noise_rms_for_snr(clean: &[f64], snr_db: f64) -> f64 {
    if clean.is_empty() {
        return 0.0;
    }
    let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
    (power / 10f64.powf(snr_db / 10.0)).sqrt()
}

pub fn add_baseline_wander(signal: &mut Signal, freq_hz: f64, amplitude: f64, phase: f64) {
    let w = 2.0 * std::f64::consts::PI * freq_hz;
    let (t0, fs) = (signal.t0, signal.fs);
    for (i, v) in signal.samples.iter_mut().enumerate() {
        *v += amplitude * (w * (t0 + i as f64 / fs) + phase).sin();
    }
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    t: f64,
    ibi_s: f64,
    gain: f64,
}

/// Streaming ECG renderer. Beats must be scheduled before the renderer
/// reaches their onset (`lead_s` ahead of the R peak) to be drawn in full.
#[derive(Debug, Clone)]
pub struct EcgSynth {
    fs: f64,
    morph: EcgMorphology,
    gain_rng: SimRng,
    noise: NoiseSource,
    beats: VecDeque<Scheduled>,
    last_scheduled: Option<f64>,
    n: u64,
}

impl EcgSynth {
    pub fn new(fs: f64, noise_rms: f64, seed: u64) -> Result<Self> {
        Self::with_morphology(fs, noise_rms, seed, EcgMorphology::default())
    }

    pub fn with_morphology(fs: f64, noise_rms: f64, seed: u64, morph: EcgMorphology) -> Result<Self> {
        require(fs.is_finite() && fs >= 250.0, "fs", || format!("{fs} Hz is below 250 Hz"))?;
        require(noise_rms.is_finite() && noise_rms >= 0.0, "noise_rms", || format!("{noise_rms} mV"))?;
        Ok(EcgSynth {
            fs,
            morph,
            gain_rng: rng_from_seed(derive_named(seed, "ecg-gain")),
            noise: NoiseSource::new(fs, noise_rms, derive_named(seed, "ecg-noise")),
            beats: VecDeque::new(),
            last_scheduled: None,
            n: 0,
        })
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn morphology(&self) -> &EcgMorphology {
        &self.morph
    }

    /// Time of the next sample to be rendered.
    pub fn next_time(&self) -> f64 {
        self.n as f64 / self.fs
    }

    pub fn schedule_beat(&mut self, t: f64) {
        let ibi_s = match self.last_scheduled {
            Some(prev) => t - prev,
            None => 0.8,
        };
        self.last_scheduled = Some(t);
        let j = self.morph.gain_jitter;
        let gain = if j > 0.0 { 1.0 + self.gain_rng.random_range(-j..=j) } else { 1.0 };
        self.beats.push_back(Scheduled { t, ibi_s, gain });
    }

    /// Renders one sample and returns `(t, value)`.
    pub fn next_sample(&mut self) -> (f64, f64) {
        let t = self.next_time();
        self.n += 1;
        while let Some(b) = self.beats.front() {
            if t - b.t > self.morph.tail_s(b.ibi_s) {
                self.beats.pop_front();
            } else {
                break;
            }
        }
        let lead = self.morph.lead_s();
        let mut v = 0.0;
        for b in &self.beats {
            let dt = t - b.t;
            if dt < -lead {
                break;
            }
            v += b.gain * self.morph.beat_value(dt, b.ibi_s);
        }
        (t, v + self.noise.next_value())
    }
}

/// ECG for explicit beat times over `[0, duration)`.
pub fn synth_ecg_beats(beat_times: &[f64], duration: f64, fs: f64, noise_rms: f64, seed: u64) -> Result<Signal> {
    require(duration.is_finite() && duration >= 0.0, "duration", || format!("{duration} s"))?;
    let mut synth = EcgSynth::new(fs, noise_rms, seed)?;
    for &t in beat_times {
        synth.schedule_beat(t);
    }
    let n = (duration * fs).round() as usize;
    let samples = (0..n).map(|_| synth.next_sample().1).collect();
    Ok(Signal::new(ChannelKind::Ecg, fs, samples))
}

/// ECG for the beats of an interval series. The recording ends 600 ms after
/// the last beat; an empty series yields an empty signal.
pub fn synth_ecg(ibi: &IbiSeries, fs: f64, noise_rms: f64, seed: u64) -> Result<Signal> {
    let beats = ibi.beat_times();
    let duration = beats.last().map_or(0.0, |&t| t + 0.6);
    synth_ecg_beats(&beats, duration, fs, noise_rms, seed)
}
