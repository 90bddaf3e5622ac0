use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::game::{Cell, Trial, GRID};
use crate::rng::rng_from_seed;

/// Per-button accuracy falling linearly with pattern length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub at_len1: f64,
    /// Loss per extra button.
    pub slope: f64,
}

impl AccuracyCurve {
    pub fn constant(p: f64) -> Self {
        AccuracyCurve { at_len1: p, slope: 0.0 }
    }

    pub fn at(&self, len: usize) -> f64 {
        (self.at_len1 - self.slope * (len.max(1) - 1) as f64).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerModel {
    pub accuracy: AccuracyCurve,
    /// Mean time between successive presses, ms.
    pub press_interval_ms: f64,
    pub press_jitter_ms: f64,
    /// Under stress, accuracy is scaled by `1 - penalty` and intervals by
    /// `1 + penalty`.
    pub stress_penalty: f64,
}

impl Default for PlayerModel {
    fn default() -> Self {
        PlayerModel {
            accuracy: AccuracyCurve { at_len1: 0.995, slope: 0.006 },
            press_interval_ms: 450.0,
            press_jitter_ms: 120.0,
            stress_penalty: 0.03,
        }
    }
}

impl PlayerModel {
    pub fn validate(&self) -> Result<()> {
        let a = self.accuracy;
        require((0.0..=1.0).contains(&a.at_len1) && a.slope.is_finite(), "accuracy", || format!("{a:?}"))?;
        require(self.press_interval_ms.is_finite() && self.press_interval_ms > 0.0, "press_interval_ms", || {
            format!("{}", self.press_interval_ms)
        })?;
        require(self.press_jitter_ms.is_finite() && self.press_jitter_ms >= 0.0, "press_jitter_ms", || {
            format!("{}", self.press_jitter_ms)
        })?;
        require((0.0..1.0).contains(&self.stress_penalty), "stress_penalty", || {
            format!("{} outside [0, 1)", self.stress_penalty)
        })
    }

    pub fn press_accuracy(&self, len: usize, stress: bool) -> f64 {
        let p = self.accuracy.at(len);
        if stress {
            p * (1.0 - self.stress_penalty)
        } else {
            p
        }
    }

    pub fn mean_interval_ms(&self, stress: bool) -> f64 {
        if stress {
            self.press_interval_ms * (1.0 + self.stress_penalty)
        } else {
            self.press_interval_ms
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerAction {
    Press(Cell),
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    /// Seconds after reproduction opens.
    pub dt: f64,
    pub action: PlayerAction,
}

/// Shortest gap between two actions, ms.
const MIN_INTERVAL_MS: f64 = 80.0;

/// Press script for one trial: the pattern in display order, each button
/// right with the length-dependent accuracy and otherwise replaced by a
/// fresh wrong cell, then the validation press.
pub fn simulate_player(model: &PlayerModel, trial: &Trial, stress: bool, seed: u64) -> Vec<TimedAction> {
    let mut rng = rng_from_seed(seed);
    let p = model.press_accuracy(trial.len(), stress);
    let mean = model.mean_interval_ms(stress);
    let jitter = model.press_jitter_ms * if stress { 1.0 + model.stress_penalty } else { 1.0 };
    let interval = |rng: &mut crate::rng::SimRng| {
        let z: f64 = rng.sample(StandardNormal);
        (mean + jitter * z).max(MIN_INTERVAL_MS) / 1000.0
    };

    let mut used: Vec<Cell> = trial.pattern.clone();
    let mut out = Vec::with_capacity(trial.len() + 1);
    let mut t = 0.0;
    for &cell in &trial.pattern {
        t += interval(&mut rng);
        let hit = rng.random::<f64>() < p;
        let pressed = if hit {
            cell
        } else {
            let n = (GRID as usize).pow(2);
            loop {
                let i = rng.random_range(0..n);
                let c = Cell((i / GRID as usize) as u8, (i % GRID as usize) as u8);
                if !used.contains(&c) {
                    used.push(c);
                    break c;
                }
            }
        };
        out.push(TimedAction { dt: t, action: PlayerAction::Press(pressed) });
    }
    t += interval(&mut rng);
    out.push(TimedAction { dt: t, action: PlayerAction::Validate });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameConfig, GameState, Mode, OutcomeKind};

    fn play(model: &PlayerModel, len: usize, seed: u64) -> OutcomeKind {
        let cfg = GameConfig { initial_difficult_length: len, ..Default::default() };
        let mut st = GameState::new(if len < 7 { Mode::Easy } else { Mode::Difficult }, false, &cfg);
        st.length = len;
        let trial = st.new_trial(&mut rng_from_seed(seed ^ 0xabc), 0, 0.0);
        let script = simulate_player(model, &trial, false, seed);
        let mut last = 0.0;
        for a in &script {
            assert!(a.dt > last);
            last = a.dt;
            if let PlayerAction::Press(c) = a.action {
                st.handle_press(c);
            }
        }
        assert_eq!(script.last().unwrap().action, PlayerAction::Validate);
        st.validate(&trial, 0.0, last, vec![]).kind
    }

    #[test]
    fn perfect_and_hopeless() {
        let good = PlayerModel { accuracy: AccuracyCurve::constant(1.0), ..Default::default() };
        let bad = PlayerModel { accuracy: AccuracyCurve::constant(0.0), ..Default::default() };
        for seed in 0..50 {
            assert_eq!(play(&good, 5, seed), OutcomeKind::Success);
            assert_eq!(play(&bad, 5, seed), OutcomeKind::Failure);
        }
    }

    #[test]
    fn deterministic() {
        let m = PlayerModel::default();
        let trial = Trial { index: 0, pattern: vec![Cell(1, 2), Cell(3, 4)], shown_at: 0.0 };
        assert_eq!(simulate_player(&m, &trial, true, 5), simulate_player(&m, &trial, true, 5));
    }

    #[test]
    fn intervals_follow_model() {
        let m = PlayerModel { press_jitter_ms: 0.0, ..Default::default() };
        let trial = Trial { index: 0, pattern: vec![Cell(0, 0); 1], shown_at: 0.0 };
        let s = simulate_player(&m, &trial, false, 1);
        assert!((s[0].dt - 0.45).abs() < 1e-12);
        assert!((s[1].dt - 0.90).abs() < 1e-12);
    }
}
