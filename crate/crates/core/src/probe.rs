//! Auditory detection task: beep scheduling and footswitch matching.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::rng::SimRng;

pub const RESPONSE_WINDOW_S: f64 = 3.0;
pub const DEBOUNCE_S: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeepEvent {
    pub t: f64,
    pub dur_ms: f64,
    pub freq_hz: f64,
    /// Presentation level over the background noise; metadata for the console.
    pub level_db: f64,
    pub noise_db: f64,
}

impl BeepEvent {
    pub fn at(t: f64) -> Self {
        BeepEvent { t, dur_ms: 100.0, freq_hz: 1000.0, level_db: 75.0, noise_db: 65.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub beep_t: f64,
    pub press_t: Option<f64>,
    pub rt_ms: Option<f64>,
    pub omitted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub detections: Vec<Detection>,
    /// Presses that answered no beep.
    pub false_alarms: Vec<f64>,
    /// Presses dropped by the debounce rule.
    pub debounced: Vec<f64>,
}

impl MatchReport {
    pub fn omissions(&self) -> usize {
        self.detections.iter().filter(|d| d.omitted).count()
    }

    pub fn mean_rt_ms(&self) -> Option<f64> {
        let rts: Vec<f64> = self.detections.iter().filter_map(|d| d.rt_ms).collect();
        (!rts.is_empty()).then(|| rts.iter().sum::<f64>() / rts.len() as f64)
    }

    /// `beep_t,rt_ms,omitted` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beep_t,rt_ms,omitted\n");
        for d in &self.detections {
            let rt = d.rt_ms.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", d.beep_t, rt, d.omitted));
        }
        out
    }
}

/// Beep times over a block: the first after one uniform gap, then i.i.d.
/// uniform gaps. Beeps that would leave less than the response window
/// before the block end are not scheduled.
pub fn schedule_beeps(block_dur: f64, min_gap: f64, max_gap: f64, rng: &mut SimRng) -> Result<Vec<BeepEvent>> {
    require(min_gap > 0.0 && min_gap <= max_gap && max_gap.is_finite(), "gap", || {
        format!("need 0 < min_gap <= max_gap, got [{min_gap}, {max_gap}]")
    })?;
    let horizon = block_dur - RESPONSE_WINDOW_S;
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let gap = if min_gap == max_gap { min_gap } else { rng.random_range(min_gap..=max_gap) };
        t += gap;
        if t > horizon {
            break;
        }
        out.push(BeepEvent::at(t));
    }
    Ok(out)
}

/// Pairs beeps with footswitch presses.
///
/// Presses within 300 ms of the previous raw press are dropped. Presses at or
/// before the first beep cannot answer anything and are ignored entirely, so
/// they never influence the debounce of later presses. Each beep then takes
/// the earliest unconsumed press in `(beep, beep + window]`.
pub fn match_responses(beeps: &[BeepEvent], presses: &[f64], window: f64) -> MatchReport {
    let mut report = MatchReport::default();
    let Some(first) = beeps.first().map(|b| b.t) else {
        report.false_alarms = presses.to_vec();
        return report;
    };

    let mut kept = Vec::with_capacity(presses.len());
    let mut prev: Option<f64> = None;
    for &p in presses.iter().filter(|&&p| p > first) {
        match prev {
            Some(q) if p - q < DEBOUNCE_S => report.debounced.push(p),
            _ => kept.push(p),
        }
        prev = Some(p);
    }

    let mut used = vec![false; kept.len()];
    let mut cursor = 0;
    for b in beeps {
        while cursor < kept.len() && (used[cursor] || kept[cursor] <= b.t) {
            cursor += 1;
        }
        let hit = (cursor < kept.len() && kept[cursor] <= b.t + window).then_some(cursor);
        let det = match hit {
            Some(i) => {
                used[i] = true;
                Detection {
                    beep_t: b.t,
                    press_t: Some(kept[i]),
                    rt_ms: Some((kept[i] - b.t) * 1000.0),
                    omitted: false,
                }
            }
            None => Detection { beep_t: b.t, press_t: None, rt_ms: None, omitted: true },
        };
        report.detections.push(det);
    }
    let early: Vec<f64> = presses.iter().copied().filter(|&p| p <= first).collect();
    report.false_alarms = early;
    report
        .false_alarms
        .extend(kept.iter().zip(&used).filter(|(_, &u)| !u).map(|(&p, _)| p));
    report
}
