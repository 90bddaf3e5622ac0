//! Block and experiment configuration.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use slowbeat_core::biofeedback::SchedulerConfig;
use slowbeat_core::game::{GameConfig, Mode};
use slowbeat_core::rng::SimRng;
use slowbeat_core::rpeak::DetectorConfig;

use crate::error::{Error, Result};

pub const BLOCK_DURATION_S: f64 = 480.0;
pub const TRAINING_DURATION_S: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Easy game, the normalization baseline.
    EG,
    /// Difficult game.
    DG,
    /// Difficult stressful game.
    DSG,
    /// Difficult stressful game with biofeedback regulation.
    DSGR,
    #[serde(rename = "training")]
    Training,
}

impl Condition {
    pub const ANALYZED: [Condition; 4] = [Condition::EG, Condition::DG, Condition::DSG, Condition::DSGR];

    pub fn mode(self) -> Mode {
        match self {
            Condition::EG | Condition::Training => Mode::Easy,
            _ => Mode::Difficult,
        }
    }

    pub fn stress(self) -> bool {
        matches!(self, Condition::DSG | Condition::DSGR)
    }

    pub fn biofeedback(self) -> bool {
        self == Condition::DSGR
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::EG => "EG",
            Condition::DG => "DG",
            Condition::DSG => "DSG",
            Condition::DSGR => "DSGR",
            Condition::Training => "training",
        }
    }

    pub fn parse(s: &str) -> Option<Condition> {
        match s {
            "EG" => Some(Condition::EG),
            "DG" => Some(Condition::DG),
            "DSG" => Some(Condition::DSG),
            "DSGR" => Some(Condition::DSGR),
            "training" => Some(Condition::Training),
            _ => None,
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// How the cardiac channel reaches the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Sample-by-sample ECG through the streaming detector.
    #[default]
    Waveform,
    /// Ground-truth beats delivered after a fixed detection latency with
    /// a small timing jitter; no waveform is rendered.
    BeatLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockDefaults {
    pub duration_s: f64,
    pub training_duration_s: f64,
    /// Bounds of the uniform gap between auditory probes, seconds.
    pub probe_gap_s: (f64, f64),
    pub fidelity: Fidelity,
    pub ecg_fs: f64,
    pub ecg_noise_rms: f64,
    pub resp_fs: f64,
    pub eda_fs: f64,
    pub beat_latency_s: f64,
    pub beat_jitter_s: f64,
    pub game: GameConfig,
    pub scheduler: SchedulerConfig,
    pub detector: DetectorConfig,
}

impl Default for BlockDefaults {
    fn default() -> Self {
        BlockDefaults {
            duration_s: BLOCK_DURATION_S,
            training_duration_s: TRAINING_DURATION_S,
            probe_gap_s: (25.0, 45.0),
            fidelity: Fidelity::Waveform,
            ecg_fs: 1000.0,
            ecg_noise_rms: 0.02,
            resp_fs: 100.0,
            eda_fs: 100.0,
            beat_latency_s: 0.09,
            beat_jitter_s: 0.001,
            game: GameConfig::default(),
            scheduler: SchedulerConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub condition: Condition,
    pub duration_s: f64,
    pub mode: Mode,
    pub stress: bool,
    pub bf_enabled: bool,
    /// Root of every engine-side random stream of the block.
    pub seed: u64,
    pub probe_gap_s: (f64, f64),
    pub fidelity: Fidelity,
    pub ecg_fs: f64,
    pub ecg_noise_rms: f64,
    pub resp_fs: f64,
    pub eda_fs: f64,
    pub beat_latency_s: f64,
    pub beat_jitter_s: f64,
    pub game: GameConfig,
    pub scheduler: SchedulerConfig,
    pub detector: DetectorConfig,
}

impl BlockConfig {
    pub fn new(condition: Condition, seed: u64, d: &BlockDefaults) -> BlockConfig {
        BlockConfig {
            condition,
            duration_s: if condition == Condition::Training { d.training_duration_s } else { d.duration_s },
            mode: condition.mode(),
            stress: condition.stress(),
            bf_enabled: condition.biofeedback(),
            seed,
            probe_gap_s: d.probe_gap_s,
            fidelity: d.fidelity,
            ecg_fs: d.ecg_fs,
            ecg_noise_rms: d.ecg_noise_rms,
            resp_fs: d.resp_fs,
            eda_fs: d.eda_fs,
            beat_latency_s: d.beat_latency_s,
            beat_jitter_s: d.beat_jitter_s,
            game: d.game,
            scheduler: d.scheduler,
            detector: d.detector,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration {} s", self.duration_s));
        }
        if self.mode != self.condition.mode() {
            return bad(format!("{} runs in {:?} mode", self.condition, self.condition.mode()));
        }
        if self.bf_enabled && !self.stress {
            return bad("biofeedback requires the stress manipulation".into());
        }
        if self.condition != Condition::Training
            && (self.stress != self.condition.stress() || self.bf_enabled != self.condition.biofeedback())
        {
            return bad(format!("stress/biofeedback flags do not match {}", self.condition));
        }
        let (lo, hi) = self.probe_gap_s;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("probe gap bounds [{lo}, {hi}]"));
        }
        if self.fidelity == Fidelity::Waveform && !(self.ecg_fs >= 250.0 && self.ecg_fs.is_finite()) {
            return bad(format!("ECG rate {} Hz", self.ecg_fs));
        }
        if !(self.beat_latency_s >= 0.0 && self.beat_jitter_s >= 0.0) {
            return bad("negative beat latency or jitter".into());
        }
        self.scheduler.validate()?;
        Ok(())
    }
}

/// Block order of one participant: the easy game first, then the three
/// difficult conditions in a uniformly drawn order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub participant: u32,
    pub training: bool,
    pub order: [Condition; 4],
}

impl ExperimentPlan {
    pub fn draw(participant: u32, training: bool, rng: &mut SimRng) -> ExperimentPlan {
        let mut rest = [Condition::DG, Condition::DSG, Condition::DSGR];
        rest.shuffle(rng);
        ExperimentPlan { participant, training, order: [Condition::EG, rest[0], rest[1], rest[2]] }
    }

    /// Every block to run, the training preset first when enabled.
    pub fn blocks(&self) -> Vec<Condition> {
        let mut out = Vec::with_capacity(5);
        if self.training {
            out.push(Condition::Training);
        }
        out.extend(self.order);
        out
    }

    /// Position of the condition among the analyzed blocks (0 = EG).
    pub fn position(&self, c: Condition) -> Option<usize> {
        self.order.iter().position(|&x| x == c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use slowbeat_core::rng::rng_from_seed;

    #[test]
    fn conditions_map_to_flags() {
        let d = BlockDefaults::default();
        for c in Condition::ANALYZED {
            let cfg = BlockConfig::new(c, 1, &d);
            cfg.validate().unwrap();
            assert_eq!(cfg.bf_enabled, c == Condition::DSGR);
            assert_eq!(cfg.stress, matches!(c, Condition::DSG | Condition::DSGR));
            assert_eq!(cfg.mode == Mode::Easy, c == Condition::EG);
            assert_eq!(cfg.duration_s, 480.0);
        }
        assert_eq!(BlockConfig::new(Condition::Training, 1, &d).duration_s, 180.0);
    }

    #[test]
    fn rejects_inconsistent_flags() {
        let d = BlockDefaults::default();
        let mut cfg = BlockConfig::new(Condition::DG, 1, &d);
        cfg.bf_enabled = true;
        assert!(cfg.validate().is_err());
        let mut cfg = BlockConfig::new(Condition::EG, 1, &d);
        cfg.mode = Mode::Difficult;
        assert!(cfg.validate().is_err());
        let mut cfg = BlockConfig::new(Condition::Training, 1, &d);
        cfg.bf_enabled = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn plan_starts_with_easy_game() {
        let mut rng = rng_from_seed(3);
        for p in 0..50 {
            let plan = ExperimentPlan::draw(p, true, &mut rng);
            assert_eq!(plan.order[0], Condition::EG);
            let mut rest = plan.order[1..].to_vec();
            rest.sort();
            assert_eq!(rest, vec![Condition::DG, Condition::DSG, Condition::DSGR]);
            assert_eq!(plan.blocks()[0], Condition::Training);
        }
    }

    #[test]
    fn condition_serde_names() {
        assert_eq!(serde_json::to_string(&Condition::DSGR).unwrap(), "\"DSGR\"");
        assert_eq!(serde_json::to_string(&Condition::Training).unwrap(), "\"training\"");
        assert_eq!(Condition::parse("DSG"), Some(Condition::DSG));
    }
}
