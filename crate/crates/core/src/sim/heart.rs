use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::rng::{rng_from_seed, SimRng};
use crate::rpeak::{IbiSeries, IBI_MAX_MS, IBI_MIN_MS};

/// Lag-one coefficient of the IBI deviation process.
const AR_COEFF: f64 = 0.5;
/// First beat sits this fraction of a mean interval after t = 0.
const FIRST_BEAT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeartParams {
    /// Mean heart rate, beats/min.
    pub mean_hr: f64,
    /// Target RMSSD, ms.
    pub rmssd_target: f64,
    /// Per-beat coupling toward the stimulus interval, in [0, 1].
    pub entrainment_kappa: f64,
    /// Added to `mean_hr` in stressful blocks, beats/min.
    pub stress_hr_offset: f64,
    /// Largest per-beat displacement as a fraction of the natural interval.
    /// `None` leaves the coupling unconstrained.
    pub entrainment_cap: Option<f64>,
}

impl Default for HeartParams {
    fn default() -> Self {
        HeartParams {
            mean_hr: 77.56,
            rmssd_target: 75.96,
            entrainment_kappa: 0.0,
            stress_hr_offset: 0.0,
            entrainment_cap: Some(0.15),
        }
    }
}

impl HeartParams {
    pub fn validate(&self) -> Result<()> {
        require(
            self.mean_hr.is_finite() && (40.0..=180.0).contains(&self.mean_hr),
            "mean_hr",
            || format!("{} bpm outside [40, 180]", self.mean_hr),
        )?;
        require(
            self.rmssd_target.is_finite() && self.rmssd_target >= 0.0,
            "rmssd_target",
            || format!("{} ms", self.rmssd_target),
        )?;
        require(
            self.entrainment_kappa.is_finite() && (0.0..=1.0).contains(&self.entrainment_kappa),
            "entrainment_kappa",
            || format!("{} outside [0, 1]", self.entrainment_kappa),
        )?;
        require(self.stress_hr_offset.is_finite(), "stress_hr_offset", || {
            format!("{}", self.stress_hr_offset)
        })?;
        if let Some(cap) = self.entrainment_cap {
            require(cap.is_finite() && cap > 0.0, "entrainment_cap", || format!("{cap}"))?;
        }
        Ok(())
    }

    /// Parameters in force for a block, with the stress offset applied.
    pub fn for_block(&self, stress: bool) -> HeartParams {
        let mut p = *self;
        if stress {
            p.mean_hr = (p.mean_hr + p.stress_hr_offset).clamp(40.0, 180.0);
        }
        p
    }

    pub fn mean_ibi_ms(&self) -> f64 {
        60_000.0 / self.mean_hr
    }

    /// Interval after coupling a natural interval toward `stimulus_ms`.
    pub fn entrain(&self, natural_ms: f64, stimulus_ms: Option<f64>) -> f64 {
        let Some(stim) = stimulus_ms else {
            return natural_ms;
        };
        let mut nudge = self.entrainment_kappa * (stim - natural_ms);
        if let Some(cap) = self.entrainment_cap {
            nudge = nudge.clamp(-cap * natural_ms, cap * natural_ms);
        }
        (natural_ms + nudge).clamp(IBI_MIN_MS, IBI_MAX_MS)
    }
}

/// The unstimulated rhythm of one block: an AR(1) deviation process around a
/// base interval, rescaled so that the in-block RMSSD and mean HR hit their
/// targets exactly.
#[derive(Debug, Clone)]
pub struct NaturalRhythm {
    first_beat: f64,
    intervals: Vec<f64>,
    cursor: usize,
    // continuation past the calibrated prefix
    base: f64,
    scale: f64,
    state: f64,
    rng: SimRng,
}

impl NaturalRhythm {
    pub fn new(params: &HeartParams, duration: f64, seed: u64) -> Result<Self> {
        params.validate()?;
        require(duration.is_finite() && duration > 0.0, "duration", || format!("{duration} s"))?;
        let mut rng = rng_from_seed(seed);
        let base0 = params.mean_ibi_ms();
        let first_beat = FIRST_BEAT_FRACTION * base0 / 1000.0;
        // room for entrainment shortening intervals by the cap
        let n = ((duration * 1000.0 / base0) * 1.4).ceil() as usize + 16;

        let innov = (1.0 - AR_COEFF * AR_COEFF).sqrt();
        let mut x = Vec::with_capacity(n);
        let mut state: f64 = rng.sample(StandardNormal);
        for _ in 0..n {
            x.push(state);
            let z: f64 = rng.sample(StandardNormal);
            state = AR_COEFF * state + innov * z;
        }

        let mut base = base0;
        let mut scale = 0.0;
        if params.rmssd_target > 0.0 {
            // successive differences of the unit process have variance 2(1 - phi)
            scale = params.rmssd_target / (2.0 * (1.0 - AR_COEFF)).sqrt();
            for _ in 0..6 {
                let ibis: Vec<f64> = x.iter().map(|v| base + scale * v).collect();
                let n_in = count_within(first_beat, &ibis, duration);
                if n_in < 3 {
                    break;
                }
                let win = &ibis[..n_in];
                let rm = rmssd_of(win);
                if rm > 0.0 {
                    scale *= params.rmssd_target / rm;
                }
                base = solve_base(base, scale, &x[..n_in], params.mean_hr);
            }
        }
        let intervals = x
            .iter()
            .map(|v| (base + scale * v).clamp(IBI_MIN_MS, IBI_MAX_MS))
            .collect();
        Ok(NaturalRhythm {
            first_beat,
            intervals,
            cursor: 0,
            base,
            scale,
            state,
            rng,
        })
    }

    pub fn first_beat(&self) -> f64 {
        self.first_beat
    }

    pub fn next_interval(&mut self) -> f64 {
        if let Some(&v) = self.intervals.get(self.cursor) {
            self.cursor += 1;
            return v;
        }
        let innov = (1.0 - AR_COEFF * AR_COEFF).sqrt();
        let z: f64 = self.rng.sample(StandardNormal);
        self.state = AR_COEFF * self.state + innov * z;
        (self.base + self.scale * self.state).clamp(IBI_MIN_MS, IBI_MAX_MS)
    }
}

fn count_within(first_beat: f64, ibis: &[f64], duration: f64) -> usize {
    let mut t = first_beat;
    let mut n = 0;
    for &v in ibis {
        t += v / 1000.0;
        if t > duration {
            break;
        }
        n += 1;
    }
    n
}

fn rmssd_of(ibis: &[f64]) -> f64 {
    let n = ibis.len() - 1;
    (ibis.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Newton iteration for `mean(60000 / (base + scale * x)) == hr`.
fn solve_base(mut base: f64, scale: f64, x: &[f64], hr: f64) -> f64 {
    let n = x.len() as f64;
    for _ in 0..50 {
        let (mut f, mut df) = (0.0, 0.0);
        for &v in x {
            let ibi = base + scale * v;
            f += 60_000.0 / ibi;
            df -= 60_000.0 / (ibi * ibi);
        }
        let step = (f / n - hr) / (df / n);
        base -= step;
        if step.abs() < 1e-10 {
            break;
        }
    }
    base
}

/// Incremental heart: decides each next beat at the moment of the current one,
/// using the stimulus rhythm observed so far.
#[derive(Debug, Clone)]
pub struct HeartModel {
    params: HeartParams,
    rhythm: NaturalRhythm,
    last_beat: Option<f64>,
    trig_prev: Option<f64>,
    trig_last: Option<f64>,
    last_interval: Option<f64>,
}

impl HeartModel {
    pub fn new(params: HeartParams, duration: f64, seed: u64) -> Result<Self> {
        let rhythm = NaturalRhythm::new(&params, duration, seed)?;
        Ok(HeartModel {
            params,
            rhythm,
            last_beat: None,
            trig_prev: None,
            trig_last: None,
            last_interval: None,
        })
    }

    pub fn params(&self) -> &HeartParams {
        &self.params
    }

    /// Registers a delivered stimulus (vibration) at time `t`.
    pub fn on_trigger(&mut self, t: f64) {
        self.trig_prev = self.trig_last;
        self.trig_last = Some(t);
    }

    /// Most recent completed inter-stimulus interval, ms.
    pub fn stimulus_interval_ms(&self) -> Option<f64> {
        match (self.trig_prev, self.trig_last) {
            (Some(a), Some(b)) => Some((b - a) * 1000.0),
            _ => None,
        }
    }

    /// Interval closed by the latest beat, ms.
    pub fn last_interval_ms(&self) -> Option<f64> {
        self.last_interval
    }

    /// Time of the next beat, seconds.
    pub fn next_beat(&mut self) -> f64 {
        let t = match self.last_beat {
            None => self.rhythm.first_beat(),
            Some(prev) => {
                let natural = self.rhythm.next_interval();
                let ibi = self.params.entrain(natural, self.stimulus_interval_ms());
                self.last_interval = Some(ibi);
                prev + ibi / 1000.0
            }
        };
        self.last_beat = Some(t);
        t
    }
}

/// Generates the inter-beat intervals of one block.
///
/// `stimulus` holds vibration times; each interval is decided at the beat
/// that opens it, from the stimulus intervals completed by then.
pub fn gen_ibi_series(params: &HeartParams, duration: f64, stimulus: Option<&[f64]>, seed: u64) -> Result<IbiSeries> {
    let mut heart = HeartModel::new(*params, duration, seed)?;
    let triggers = stimulus.unwrap_or(&[]);
    let mut next_trig = 0;
    let mut out = IbiSeries::default();
    let mut t = heart.next_beat();
    while t <= duration {
        if let Some(ibi) = heart.last_interval_ms() {
            out.intervals.push(ibi);
            out.anchor_times.push(t);
        }
        while next_trig < triggers.len() && triggers[next_trig] <= t {
            heart.on_trigger(triggers[next_trig]);
            next_trig += 1;
        }
        t = heart.next_beat();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_hr(s: &IbiSeries) -> f64 {
        s.intervals.iter().map(|v| 60_000.0 / v).sum::<f64>() / s.len() as f64
    }

    fn rmssd(s: &IbiSeries) -> f64 {
        rmssd_of(&s.intervals)
    }

    #[test]
    fn zero_variability_is_exact() {
        let p = HeartParams { mean_hr: 75.0, rmssd_target: 0.0, ..Default::default() };
        let s = gen_ibi_series(&p, 10.0, None, 1).unwrap();
        assert!(s.len() >= 10);
        assert!(s.intervals.iter().all(|&v| v == 800.0));
    }

    #[test]
    fn table_scale_targets_are_hit() {
        let p = HeartParams { mean_hr: 77.56, rmssd_target: 75.96, ..Default::default() };
        for seed in 0..20 {
            let s = gen_ibi_series(&p, 480.0, None, seed).unwrap();
            assert!((mean_hr(&s) - 77.56).abs() / 77.56 < 0.01, "seed {seed}: {}", mean_hr(&s));
            assert!((rmssd(&s) - 75.96).abs() / 75.96 < 0.05, "seed {seed}: {}", rmssd(&s));
        }
    }

    #[test]
    fn full_coupling_takes_stimulus_interval() {
        let p = HeartParams {
            mean_hr: 75.0,
            rmssd_target: 0.0,
            entrainment_kappa: 1.0,
            entrainment_cap: None,
            ..Default::default()
        };
        let triggers: Vec<f64> = (0..20).map(|k| k as f64 * 1.2).collect();
        let s = gen_ibi_series(&p, 10.0, Some(&triggers), 3).unwrap();
        assert_eq!(s.intervals[0], 800.0);
        assert!((s.intervals[1] - 1200.0).abs() < 1e-9, "{}", s.intervals[1]);
    }

    #[test]
    fn cap_limits_per_beat_nudge() {
        let p = HeartParams { entrainment_kappa: 1.0, ..Default::default() };
        assert!((p.entrain(800.0, Some(1200.0)) - 920.0).abs() < 1e-9);
        assert!((p.entrain(800.0, Some(700.0)) - 700.0).abs() < 1e-9);
        assert_eq!(p.entrain(800.0, None), 800.0);
    }

    #[test]
    fn rejects_non_finite() {
        let p = HeartParams { mean_hr: f64::NAN, ..Default::default() };
        assert!(gen_ibi_series(&p, 10.0, None, 0).is_err());
        let p = HeartParams { entrainment_kappa: 1.5, ..Default::default() };
        assert!(gen_ibi_series(&p, 10.0, None, 0).is_err());
        assert!(gen_ibi_series(&HeartParams::default(), 0.0, None, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let p = HeartParams::default();
        let a = gen_ibi_series(&p, 60.0, None, 9).unwrap();
        let b = gen_ibi_series(&p, 60.0, None, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_ibi_series(&p, 60.0, None, 10).unwrap();
        assert_ne!(a, c);
    }
}
