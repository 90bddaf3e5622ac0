//! Lowered-rate haptic heartbeat: vibration triggers spaced at a fixed
//! multiple of the live inter-beat interval.

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::rpeak::{BeatEvent, LiveIbiEstimator};

pub const DEFAULT_FACTOR: f64 = 1.5;
pub const DEFAULT_TICK_S: f64 = 0.005;
pub const MOTORS: u8 = 3;

/// Double impulse: pulse, pause, pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationPattern {
    pub p1_ms: f64,
    pub gap_ms: f64,
    pub p2_ms: f64,
}

impl Default for VibrationPattern {
    fn default() -> Self {
        VibrationPattern { p1_ms: 60.0, gap_ms: 80.0, p2_ms: 60.0 }
    }
}

impl VibrationPattern {
    pub fn total_ms(&self) -> f64 {
        self.p1_ms + self.gap_ms + self.p2_ms
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        require(ok(self.p1_ms) && ok(self.gap_ms) && ok(self.p2_ms), "pattern", || {
            format!("{self:?} has a non-positive duration")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationTrigger {
    pub t: f64,
    pub pattern: VibrationPattern,
    pub motors: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub factor: f64,
    pub tick_s: f64,
    pub pattern: VibrationPattern,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig { factor: DEFAULT_FACTOR, tick_s: DEFAULT_TICK_S, pattern: VibrationPattern::default() }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.factor.is_finite() && self.factor > 1.0, "factor", || {
            format!("{} must exceed 1", self.factor)
        })?;
        require(self.tick_s.is_finite() && self.tick_s > 0.0 && self.tick_s <= 0.01, "tick_s", || {
            format!("{} s; ticks must run at 100 Hz or faster", self.tick_s)
        })?;
        self.pattern.validate()?;
        // fastest legal interval is factor × 250 ms
        require(self.pattern.total_ms() < self.factor * crate::rpeak::IBI_MIN_MS, "pattern", || {
            format!("{} ms does not fit the shortest interval", self.pattern.total_ms())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiofeedbackScheduler {
    cfg: SchedulerConfig,
    estimator: LiveIbiEstimator,
    current_ibi_estimate: Option<f64>,
    next_fire_at: Option<f64>,
    last_fire: Option<f64>,
    enabled: bool,
}

impl BiofeedbackScheduler {
    pub fn new(cfg: SchedulerConfig, enabled: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(BiofeedbackScheduler {
            cfg,
            estimator: LiveIbiEstimator::default(),
            current_ibi_estimate: None,
            next_fire_at: None,
            last_fire: None,
            enabled,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn set_enabled(&mut self, enabled: bool) {
        self.enabled = enabled;
    }

    pub fn current_ibi_estimate(&self) -> Option<f64> {
        self.current_ibi_estimate
    }

    pub fn next_fire_at(&self) -> Option<f64> {
        self.next_fire_at
    }

    pub fn last_fire(&self) -> Option<f64> {
        self.last_fire
    }

    /// Feeds a detected beat. Returns the new estimate (ms) when it changed.
    ///
    /// A pending fire time is never moved; a new estimate only shapes the
    /// interval opened by the next trigger.
    pub fn on_beat(&mut self, beat: &BeatEvent) -> Option<f64> {
        let est = self.estimator.on_beat(beat.t)?;
        self.current_ibi_estimate = Some(est);
        if self.next_fire_at.is_none() {
            self.next_fire_at = Some(beat.t + self.cfg.factor * est / 1000.0);
        }
        Some(est)
    }

    /// Clock tick; fires once `now` has reached the scheduled time.
    pub fn tick(&mut self, now: f64) -> Option<VibrationTrigger> {
        if !self.enabled {
            return None;
        }
        let due = self.next_fire_at?;
        if now + 1e-9 < due {
            return None;
        }
        let est = self.current_ibi_estimate?;
        self.last_fire = Some(now);
        self.next_fire_at = Some(now + self.cfg.factor * est / 1000.0);
        Some(VibrationTrigger { t: now, pattern: self.cfg.pattern, motors: MOTORS })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VibeFrame {
    #[serde(rename = "type")]
    kind: String,
    t: f64,
    p1_ms: f64,
    gap_ms: f64,
    p2_ms: f64,
}

pub fn encode_trigger(trigger: &VibrationTrigger) -> String {
    let frame = VibeFrame {
        kind: "vibe".into(),
        t: trigger.t,
        p1_ms: trigger.pattern.p1_ms,
        gap_ms: trigger.pattern.gap_ms,
        p2_ms: trigger.pattern.p2_ms,
    };
    serde_json::to_string(&frame).expect("frame fields are plain numbers")
}

pub fn decode_trigger(frame: &str) -> Result<VibrationTrigger> {
    let f: VibeFrame = serde_json::from_str(frame).map_err(|e| Error::Frame(e.to_string()))?;
    if f.kind != "vibe" {
        return Err(Error::Frame(format!("expected type \"vibe\", got {:?}", f.kind)));
    }
    if !f.t.is_finite() {
        return Err(Error::Frame("non-finite time".into()));
    }
    let pattern = VibrationPattern { p1_ms: f.p1_ms, gap_ms: f.gap_ms, p2_ms: f.p2_ms };
    pattern.validate().map_err(|e| Error::Frame(e.to_string()))?;
    Ok(VibrationTrigger { t: f.t, pattern, motors: MOTORS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beat(t: f64) -> BeatEvent {
        BeatEvent { t, amplitude: 1.0, prominence: 1.0 }
    }

    fn run(sched: &mut BiofeedbackScheduler, beats: &[f64], until: f64) -> Vec<f64> {
        let mut fires = Vec::new();
        let mut bi = 0;
        let mut k = 0u64;
        loop {
            let now = k as f64 * 0.005;
            if now > until {
                break;
            }
            while bi < beats.len() && beats[bi] <= now {
                sched.on_beat(&beat(beats[bi]));
                bi += 1;
            }
            if let Some(tr) = sched.tick(now) {
                fires.push(tr.t);
            }
            k += 1;
        }
        fires
    }

    #[test]
    fn first_trigger_after_first_estimate() {
        let mut s = BiofeedbackScheduler::new(SchedulerConfig::default(), true).unwrap();
        assert_eq!(s.on_beat(&beat(1.2)), None);
        assert_eq!(s.on_beat(&beat(2.0)).map(f64::round), Some(800.0));
        assert!((s.next_fire_at().unwrap() - 3.2).abs() < 1e-9);
        assert!(s.tick(3.19).is_none());
        let tr = s.tick(3.2).unwrap();
        assert_eq!(tr.motors, 3);
        assert!((s.next_fire_at().unwrap() - 4.4).abs() < 1e-9);
    }

    #[test]
    fn no_retroaction() {
        let mut s = BiofeedbackScheduler::new(SchedulerConfig::default(), true).unwrap();
        s.on_beat(&beat(0.0));
        s.on_beat(&beat(0.8));
        s.tick(2.0).unwrap();
        // 1000 ms estimate arrives with 400 ms remaining before the 3.2 s fire
        s.on_beat(&beat(1.8));
        s.on_beat(&beat(2.8));
        assert!((s.next_fire_at().unwrap() - 3.2).abs() < 1e-9);
        s.tick(3.2).unwrap();
        assert!((s.next_fire_at().unwrap() - 4.7).abs() < 1e-9);
    }

    #[test]
    fn constant_rate_count() {
        let beats: Vec<f64> = (0..700).map(|k| 0.4 + 0.8 * k as f64).collect();
        let mut s = BiofeedbackScheduler::new(SchedulerConfig::default(), true).unwrap();
        let fires = run(&mut s, &beats, 480.0);
        assert!((fires.len() as i64 - 400).abs() <= 1, "{}", fires.len());
    }

    #[test]
    fn disabled_never_fires() {
        let beats: Vec<f64> = (0..100).map(|k| 0.8 * k as f64).collect();
        let mut s = BiofeedbackScheduler::new(SchedulerConfig::default(), false).unwrap();
        assert!(run(&mut s, &beats, 80.0).is_empty());
    }

    #[test]
    fn frame_round_trip() {
        let tr = VibrationTrigger { t: 12.345, pattern: VibrationPattern::default(), motors: 3 };
        let f = encode_trigger(&tr);
        assert_eq!(f, r#"{"type":"vibe","t":12.345,"p1_ms":60.0,"gap_ms":80.0,"p2_ms":60.0}"#);
        assert_eq!(decode_trigger(&f).unwrap(), tr);
        assert!(matches!(decode_trigger(&f[..f.len() - 5]), Err(Error::Frame(_))));
        assert!(decode_trigger(r#"{"type":"beep","t":1,"p1_ms":1,"gap_ms":1,"p2_ms":1}"#).is_err());
        assert!(decode_trigger(r#"{"type":"vibe","t":1,"p1_ms":0,"gap_ms":1,"p2_ms":1}"#).is_err());
    }

    #[test]
    fn rejects_factor_at_most_one() {
        let cfg = SchedulerConfig { factor: 1.0, ..Default::default() };
        assert!(BiofeedbackScheduler::new(cfg, true).is_err());
    }
}
