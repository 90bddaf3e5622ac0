//! 8×8 pattern-memory game with adaptive difficulty and stress gauges.
//!
//! [`GameState`] holds the adaptive rules as plain functions. [`GameEngine`]
//! drives them through the trial timeline (fixation, pattern display, hold,
//! reproduction, feedback) on an integer microsecond clock and records every
//! input and outcome in an event outbox.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};
use crate::time::{from_micros, ms_to_micros, Micros};

pub const GRID: u8 = 8;
pub const FIXATION_MS: f64 = 500.0;
pub const CELL_DISPLAY_MS: f64 = 250.0;
pub const HOLD_MS: f64 = 500.0;
pub const EASY_MAX_LEN: usize = 7;
pub const DIFFICULT_MIN_LEN: usize = 7;
pub const LED_COUNT: u8 = 8;

/// Grid cell as `(row, col)`, each in `0..8`. Serialized as `[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub u8, pub u8);

impl Cell {
    /// Converts raw coordinates, rejecting anything off the grid.
    pub fn from_coords(row: i64, col: i64) -> Option<Cell> {
        let ok = |v: i64| (0..GRID as i64).contains(&v);
        (ok(row) && ok(col)).then(|| Cell(row as u8, col as u8))
    }

    fn from_index(i: usize) -> Cell {
        Cell((i / GRID as usize) as u8, (i % GRID as usize) as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Easy,
    Difficult,
}

impl Mode {
    pub fn length_bounds(self, max_len: usize) -> (usize, usize) {
        match self {
            Mode::Easy => (1, EASY_MAX_LEN),
            Mode::Difficult => (DIFFICULT_MIN_LEN, max_len),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Success,
    Failure,
    Timeout,
}

impl OutcomeKind {
    pub fn is_success(self) -> bool {
        self == OutcomeKind::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: u32,
    pub pattern: Vec<Cell>,
    /// Start of the pattern display, seconds.
    pub shown_at: f64,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn display_ms(&self) -> f64 {
        CELL_DISPLAY_MS * self.pattern.len() as f64
    }

    /// Reproduction opens after the display and the hold.
    pub fn reproduction_start(&self) -> f64 {
        self.shown_at + (self.display_ms() + HOLD_MS) / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPress {
    pub t: f64,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub kind: OutcomeKind,
    /// Time from reproduction start to validation (or to the timeout), ms.
    pub completion_ms: f64,
    pub presses: Vec<TimedPress>,
    /// Lit set equalled the pattern at the end of the trial.
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub initial_easy_length: usize,
    pub initial_difficult_length: usize,
    pub max_length: usize,
    pub feedback_ms: f64,
    pub score_start: i32,
    pub objective: i32,
    pub score_max: i32,
    /// Initial time limit allowance per button on top of the display time.
    pub limit_per_button_ms: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            initial_easy_length: 3,
            initial_difficult_length: DIFFICULT_MIN_LEN,
            max_length: 64,
            feedback_ms: 1000.0,
            score_start: 8,
            objective: 12,
            score_max: 16,
            limit_per_button_ms: 600.0,
        }
    }
}

/// Adaptive state carried across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub mode: Mode,
    pub stress: bool,
    pub length: usize,
    pub lit: BTreeSet<Cell>,
    /// Last two outcomes, oldest first.
    pub history: VecDeque<OutcomeKind>,
    pub score: i32,
    pub objective: i32,
    pub score_max: i32,
    pub max_length: usize,
    /// Present iff `stress`.
    pub time_limit_ms: Option<f64>,
    pub last_completion_ms: Option<f64>,
}

impl GameState {
    pub fn new(mode: Mode, stress: bool, cfg: &GameConfig) -> Self {
        let length = match mode {
            Mode::Easy => cfg.initial_easy_length.clamp(1, EASY_MAX_LEN),
            Mode::Difficult => cfg.initial_difficult_length.clamp(DIFFICULT_MIN_LEN, cfg.max_length),
        };
        let time_limit_ms = stress.then(|| {
            let l = length as f64;
            CELL_DISPLAY_MS * l + HOLD_MS + cfg.limit_per_button_ms * l
        });
        GameState {
            mode,
            stress,
            length,
            lit: BTreeSet::new(),
            history: VecDeque::with_capacity(2),
            score: cfg.score_start,
            objective: cfg.objective,
            score_max: cfg.score_max,
            max_length: cfg.max_length,
            time_limit_ms,
            last_completion_ms: None,
        }
    }

    /// Draws a pattern of `self.length` distinct cells.
    pub fn new_trial(&self, rng: &mut SimRng, index: u32, shown_at: f64) -> Trial {
        let n = (GRID as usize).pow(2);
        let pattern = sample(rng, n, self.length.min(n)).into_iter().map(Cell::from_index).collect();
        Trial { index, pattern, shown_at }
    }

    /// Toggles `cell`; returns whether it is now lit.
    pub fn handle_press(&mut self, cell: Cell) -> bool {
        if self.lit.remove(&cell) {
            false
        } else {
            self.lit.insert(cell);
            true
        }
    }

    /// Judges the trial at `t`, reproduction having opened at
    /// `reproduction_start` (both seconds).
    pub fn validate(&self, trial: &Trial, reproduction_start: f64, t: f64, presses: Vec<TimedPress>) -> TrialOutcome {
        let elapsed_ms = (t - reproduction_start) * 1000.0;
        let target: BTreeSet<Cell> = trial.pattern.iter().copied().collect();
        let correct = self.lit == target;
        let kind = match self.time_limit_ms {
            Some(limit) if elapsed_ms > limit => OutcomeKind::Timeout,
            _ if correct => OutcomeKind::Success,
            _ => OutcomeKind::Failure,
        };
        TrialOutcome { kind, completion_ms: elapsed_ms, presses, correct }
    }

    /// Two consecutive successes lengthen the pattern, two consecutive
    /// failures shorten it. The window slides by one trial.
    pub fn update_difficulty(&mut self, kind: OutcomeKind) {
        if self.history.len() == 2 {
            self.history.pop_front();
        }
        self.history.push_back(kind);
        if self.history.len() < 2 {
            return;
        }
        let (lo, hi) = self.mode.length_bounds(self.max_length);
        let wins = self.history.iter().filter(|k| k.is_success()).count();
        if wins == 2 {
            self.length = (self.length + 1).min(hi);
        } else if wins == 0 {
            self.length = self.length.saturating_sub(1).max(lo);
        }
        self.length = self.length.clamp(lo, hi);
    }

    pub fn update_time_constraint(&mut self, outcome: &TrialOutcome) -> Result<()> {
        let Some(limit) = self.time_limit_ms else {
            return Err(Error::Contract("time constraint updated outside a stress block".into()));
        };
        self.time_limit_ms = Some(match outcome.kind {
            OutcomeKind::Success => outcome.completion_ms + 100.0,
            OutcomeKind::Failure | OutcomeKind::Timeout => limit + 1000.0,
        });
        Ok(())
    }

    pub fn update_score(&mut self, kind: OutcomeKind) {
        let delta = if kind.is_success() { 1 } else { -2 };
        self.score = (self.score + delta).clamp(0, self.score_max);
    }

    /// Applies every adaptive rule for one finished trial and clears the grid.
    pub fn apply_outcome(&mut self, outcome: &TrialOutcome) {
        self.update_difficulty(outcome.kind);
        if self.stress {
            self.update_time_constraint(outcome).expect("stress state carries a time limit");
            self.update_score(outcome.kind);
        }
        self.last_completion_ms = Some(outcome.completion_ms);
        self.lit.clear();
    }
}

/// LEDs lit on the temporal gauge.
pub fn time_gauge_fill(remaining_ms: f64, limit_ms: f64) -> u8 {
    if limit_ms <= 0.0 {
        return 0;
    }
    let frac = (remaining_ms / limit_ms).clamp(0.0, 1.0);
    (LED_COUNT as f64 * frac - 1e-9).ceil().max(0.0) as u8
}

/// Score gauge: two points per LED.
pub fn score_leds(score: i32) -> u8 {
    ((score.max(0) + 1) / 2) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Fixation,
    Display,
    Hold,
    Reproduce,
    Feedback,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Glyph {
    None,
    Fixation,
    Circle,
    Cross,
}

/// Render model for the participant console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeView {
    pub phase: Phase,
    pub mode: Mode,
    pub length: usize,
    /// Cell currently shown during the display phase.
    pub shown: Option<Cell>,
    pub lit: Vec<Cell>,
    pub glyph: Glyph,
    /// Temporal gauge, 0..=8 LEDs; absent without stress.
    pub time_fill: Option<u8>,
    pub score_leds: Option<u8>,
    pub objective_leds: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressEffect {
    Lit,
    Unlit,
    /// Off-grid, or outside the reproduction phase.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GameEvent {
    TrialStart {
        t: f64,
        trial: u32,
        pattern: Vec<Cell>,
        time_limit_ms: Option<f64>,
    },
    ReproductionStart {
        t: f64,
        trial: u32,
    },
    Press {
        t: f64,
        cell: [i64; 2],
        effect: PressEffect,
    },
    Validate {
        t: f64,
        accepted: bool,
    },
    TrialEnd {
        t: f64,
        trial: u32,
        kind: OutcomeKind,
        completion_ms: f64,
        correct: bool,
        score: i32,
        length: usize,
        time_limit_ms: Option<f64>,
    },
}

impl GameEvent {
    pub fn t(&self) -> f64 {
        match self {
            GameEvent::TrialStart { t, .. }
            | GameEvent::ReproductionStart { t, .. }
            | GameEvent::Press { t, .. }
            | GameEvent::Validate { t, .. }
            | GameEvent::TrialEnd { t, .. } => *t,
        }
    }
}

/// One finished trial with the state it was played under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: Trial,
    pub reproduction_start: f64,
    pub time_limit_ms: Option<f64>,
    pub outcome: TrialOutcome,
    pub score_after: i32,
}

#[derive(Debug, Clone)]
pub struct GameEngine {
    cfg: GameConfig,
    state: GameState,
    rng: SimRng,
    phase: Phase,
    phase_start: Micros,
    trial: Option<Trial>,
    repro_start: Micros,
    presses: Vec<TimedPress>,
    last_kind: Option<OutcomeKind>,
    next_index: u32,
    records: Vec<TrialRecord>,
    outbox: Vec<GameEvent>,
    now: Micros,
}

impl GameEngine {
    pub fn new(mode: Mode, stress: bool, cfg: GameConfig, seed: u64) -> Self {
        GameEngine {
            state: GameState::new(mode, stress, &cfg),
            cfg,
            rng: rng_from_seed(seed),
            phase: Phase::Idle,
            phase_start: 0,
            trial: None,
            repro_start: 0,
            presses: Vec::new(),
            last_kind: None,
            next_index: 0,
            records: Vec::new(),
            outbox: Vec::new(),
            now: Micros::MIN,
        }
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn current_trial(&self) -> Option<&Trial> {
        self.trial.as_ref()
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TrialRecord> {
        self.records
    }

    pub fn drain_events(&mut self) -> Vec<GameEvent> {
        std::mem::take(&mut self.outbox)
    }

    /// Starts the first trial at `t`.
    pub fn start(&mut self, t: Micros) {
        if self.phase == Phase::Idle {
            self.now = t;
            self.begin_trial(t);
        }
    }

    /// Time of the next internal transition, if any.
    pub fn next_deadline(&self) -> Option<Micros> {
        let trial_len = self.trial.as_ref().map_or(0, Trial::len) as f64;
        match self.phase {
            Phase::Idle | Phase::Finished => None,
            Phase::Fixation => Some(self.phase_start + ms_to_micros(FIXATION_MS)),
            Phase::Display => Some(self.phase_start + ms_to_micros(CELL_DISPLAY_MS * trial_len)),
            Phase::Hold => Some(self.phase_start + ms_to_micros(HOLD_MS)),
            // first instant at which the elapsed time exceeds the limit
            Phase::Reproduce => self.state.time_limit_ms.map(|l| self.repro_start + ms_to_micros(l) + 1),
            Phase::Feedback => Some(self.phase_start + ms_to_micros(self.cfg.feedback_ms)),
        }
    }

    /// Runs every transition due at or before `t`.
    pub fn advance(&mut self, t: Micros) {
        while let Some(d) = self.next_deadline() {
            if d > t {
                break;
            }
            self.now = d;
            match self.phase {
                Phase::Fixation => self.enter(Phase::Display, d),
                Phase::Display => self.enter(Phase::Hold, d),
                Phase::Hold => {
                    self.enter(Phase::Reproduce, d);
                    self.repro_start = d;
                    let trial = self.trial.as_ref().map_or(0, |tr| tr.index);
                    self.outbox.push(GameEvent::ReproductionStart { t: from_micros(d), trial });
                }
                Phase::Reproduce => self.finish_trial(d),
                Phase::Feedback => self.begin_trial(d),
                Phase::Idle | Phase::Finished => unreachable!("no deadline in this phase"),
            }
        }
        self.now = self.now.max(t);
    }

    /// Participant presses the button at `(row, col)`.
    pub fn press(&mut self, t: Micros, row: i64, col: i64) -> PressEffect {
        self.advance(t);
        let effect = match (self.phase, Cell::from_coords(row, col)) {
            (Phase::Reproduce, Some(cell)) => {
                self.presses.push(TimedPress { t: from_micros(t), cell });
                if self.state.handle_press(cell) {
                    PressEffect::Lit
                } else {
                    PressEffect::Unlit
                }
            }
            _ => PressEffect::Ignored,
        };
        self.outbox.push(GameEvent::Press { t: from_micros(t), cell: [row, col], effect });
        effect
    }

    /// Participant presses the validation button.
    pub fn validate(&mut self, t: Micros) -> Option<OutcomeKind> {
        self.advance(t);
        let accepted = self.phase == Phase::Reproduce;
        self.outbox.push(GameEvent::Validate { t: from_micros(t), accepted });
        if !accepted {
            return None;
        }
        self.finish_trial(t);
        self.last_kind
    }

    /// Ends the block; a trial still in progress is discarded.
    pub fn stop(&mut self, t: Micros) {
        self.advance(t);
        self.phase = Phase::Finished;
        self.trial = None;
        self.presses.clear();
        self.state.lit.clear();
    }

    pub fn view(&self, now: Micros) -> GaugeView {
        let shown = match (self.phase, &self.trial) {
            (Phase::Display, Some(tr)) => {
                let k = ((now - self.phase_start).max(0) / ms_to_micros(CELL_DISPLAY_MS)) as usize;
                tr.pattern.get(k).copied()
            }
            _ => None,
        };
        let glyph = match (self.phase, self.last_kind) {
            (Phase::Fixation, _) => Glyph::Fixation,
            (Phase::Feedback, Some(OutcomeKind::Success)) => Glyph::Circle,
            (Phase::Feedback, Some(_)) => Glyph::Cross,
            _ => Glyph::None,
        };
        let time_fill = self.state.time_limit_ms.map(|limit| match self.phase {
            Phase::Reproduce => {
                let elapsed = (now - self.repro_start) as f64 / 1000.0;
                time_gauge_fill(limit - elapsed, limit)
            }
            _ => LED_COUNT,
        });
        let stress = self.state.stress;
        GaugeView {
            phase: self.phase,
            mode: self.state.mode,
            length: self.state.length,
            shown,
            lit: self.state.lit.iter().copied().collect(),
            glyph,
            time_fill,
            score_leds: stress.then(|| score_leds(self.state.score)),
            objective_leds: stress.then(|| score_leds(self.state.objective)),
        }
    }

    fn enter(&mut self, phase: Phase, t: Micros) {
        self.phase = phase;
        self.phase_start = t;
    }

    fn begin_trial(&mut self, t: Micros) {
        let index = self.next_index;
        self.next_index += 1;
        let shown_at = from_micros(t + ms_to_micros(FIXATION_MS));
        let trial = self.state.new_trial(&mut self.rng, index, shown_at);
        self.outbox.push(GameEvent::TrialStart {
            t: from_micros(t),
            trial: index,
            pattern: trial.pattern.clone(),
            time_limit_ms: self.state.time_limit_ms,
        });
        self.trial = Some(trial);
        self.presses.clear();
        self.state.lit.clear();
        self.enter(Phase::Fixation, t);
    }

    fn finish_trial(&mut self, t: Micros) {
        let Some(trial) = self.trial.take() else {
            return;
        };
        let limit = self.state.time_limit_ms;
        let repro = from_micros(self.repro_start);
        let presses = std::mem::take(&mut self.presses);
        let mut outcome = self.state.validate(&trial, repro, from_micros(t), presses);
        // elapsed is measured on the integer clock
        outcome.completion_ms = (t - self.repro_start) as f64 / 1000.0;
        self.state.apply_outcome(&outcome);
        self.last_kind = Some(outcome.kind);
        self.outbox.push(GameEvent::TrialEnd {
            t: from_micros(t),
            trial: trial.index,
            kind: outcome.kind,
            completion_ms: outcome.completion_ms,
            correct: outcome.correct,
            score: self.state.score,
            length: self.state.length,
            time_limit_ms: self.state.time_limit_ms,
        });
        self.records.push(TrialRecord {
            trial,
            reproduction_start: repro,
            time_limit_ms: limit,
            outcome,
            score_after: self.state.score,
        });
        self.enter(Phase::Feedback, t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GameConfig {
        GameConfig::default()
    }

    fn outcome(kind: OutcomeKind, completion_ms: f64) -> TrialOutcome {
        TrialOutcome { kind, completion_ms, presses: vec![], correct: kind.is_success() }
    }

    #[test]
    fn easy_length_one_gives_one_cell() {
        let c = GameConfig { initial_easy_length: 1, ..cfg() };
        let s = GameState::new(Mode::Easy, false, &c);
        let tr = s.new_trial(&mut rng_from_seed(1), 0, 0.0);
        assert_eq!(tr.len(), 1);
        let d = GameState::new(Mode::Difficult, true, &cfg());
        assert_eq!(d.new_trial(&mut rng_from_seed(1), 0, 0.0).len(), 7);
    }

    #[test]
    fn toggle_semantics() {
        let mut s = GameState::new(Mode::Easy, false, &cfg());
        let (a, b, c) = (Cell(0, 0), Cell(1, 1), Cell(2, 2));
        assert!(s.handle_press(a));
        assert!(!s.handle_press(a));
        assert!(s.lit.is_empty());
        s.handle_press(a);
        s.handle_press(b);
        s.handle_press(b);
        s.handle_press(c);
        assert_eq!(s.lit, [a, c].into_iter().collect());
    }

    #[test]
    fn validation_compares_sets() {
        let mut s = GameState::new(Mode::Easy, false, &cfg());
        let tr = Trial { index: 0, pattern: vec![Cell(0, 1), Cell(3, 4)], shown_at: 0.0 };
        s.handle_press(Cell(3, 4));
        assert_eq!(s.validate(&tr, 1.0, 2.0, vec![]).kind, OutcomeKind::Failure);
        s.handle_press(Cell(0, 1));
        assert_eq!(s.validate(&tr, 1.0, 2.0, vec![]).kind, OutcomeKind::Success);
        // no timeout outside stress however long it takes
        assert_eq!(s.validate(&tr, 1.0, 500.0, vec![]).kind, OutcomeKind::Success);
    }

    #[test]
    fn stress_timeout_counts_as_failure() {
        let mut s = GameState::new(Mode::Difficult, true, &cfg());
        s.time_limit_ms = Some(6000.0);
        let tr = Trial { index: 0, pattern: vec![Cell(0, 1)], shown_at: 0.0 };
        s.handle_press(Cell(0, 1));
        let o = s.validate(&tr, 0.0, 6.5, vec![]);
        assert_eq!(o.kind, OutcomeKind::Timeout);
        s.apply_outcome(&o);
        assert_eq!(s.score, 6);
        assert_eq!(s.time_limit_ms, Some(7000.0));
    }

    #[test]
    fn difficulty_steps() {
        let mut s = GameState::new(Mode::Difficult, true, &cfg());
        s.length = 8;
        s.update_difficulty(OutcomeKind::Success);
        assert_eq!(s.length, 8);
        s.update_difficulty(OutcomeKind::Success);
        assert_eq!(s.length, 9);
        s.update_difficulty(OutcomeKind::Success);
        assert_eq!(s.length, 10);
        s.update_difficulty(OutcomeKind::Failure);
        assert_eq!(s.length, 10);

        let mut d = GameState::new(Mode::Difficult, true, &cfg());
        d.update_difficulty(OutcomeKind::Failure);
        d.update_difficulty(OutcomeKind::Timeout);
        assert_eq!(d.length, 7);
    }

    #[test]
    fn time_limit_rules() {
        let mut s = GameState::new(Mode::Difficult, true, &cfg());
        s.time_limit_ms = Some(6000.0);
        s.update_time_constraint(&outcome(OutcomeKind::Failure, 3000.0)).unwrap();
        assert_eq!(s.time_limit_ms, Some(7000.0));
        s.update_time_constraint(&outcome(OutcomeKind::Success, 4300.0)).unwrap();
        assert_eq!(s.time_limit_ms, Some(4400.0));
        s.update_time_constraint(&outcome(OutcomeKind::Failure, 4000.0)).unwrap();
        assert_eq!(s.time_limit_ms, Some(5400.0));

        let mut calm = GameState::new(Mode::Difficult, false, &cfg());
        assert!(matches!(
            calm.update_time_constraint(&outcome(OutcomeKind::Failure, 1.0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn score_rules() {
        let mut s = GameState::new(Mode::Difficult, true, &cfg());
        s.score = 5;
        s.update_score(OutcomeKind::Success);
        assert_eq!(s.score, 6);
        s.score = 5;
        s.update_score(OutcomeKind::Failure);
        assert_eq!(s.score, 3);
        s.score = 1;
        s.update_score(OutcomeKind::Failure);
        assert_eq!(s.score, 0);
        s.score = 16;
        s.update_score(OutcomeKind::Success);
        assert_eq!(s.score, 16);
    }

    #[test]
    fn gauge_fill() {
        assert_eq!(time_gauge_fill(6000.0, 6000.0), 8);
        assert_eq!(time_gauge_fill(0.0, 6000.0), 0);
        assert_eq!(time_gauge_fill(3000.0, 6000.0), 4);
        assert_eq!(time_gauge_fill(3001.0, 6000.0), 5);
        assert_eq!(score_leds(8), 4);
        assert_eq!(score_leds(12), 6);
    }

    #[test]
    fn engine_timeline() {
        let mut e = GameEngine::new(Mode::Difficult, true, cfg(), 3);
        e.start(0);
        assert_eq!(e.phase(), Phase::Fixation);
        assert_eq!(e.view(0).glyph, Glyph::Fixation);
        // fixation 500 ms, display 7 × 250 ms, hold 500 ms
        e.advance(2_749_999);
        assert_eq!(e.phase(), Phase::Hold);
        e.advance(2_750_000);
        assert_eq!(e.phase(), Phase::Reproduce);
        let limit = e.state().time_limit_ms.unwrap();
        assert_eq!(limit, 7.0 * 250.0 + 500.0 + 7.0 * 600.0);
        let pattern = e.current_trial().unwrap().pattern.clone();
        for (k, c) in pattern.iter().enumerate() {
            e.press(3_000_000 + k as i64 * 100_000, c.0 as i64, c.1 as i64);
        }
        assert_eq!(e.press(3_800_000, 9, 0), PressEffect::Ignored);
        assert_eq!(e.validate(4_050_000), Some(OutcomeKind::Success));
        assert_eq!(e.view(4_100_000).glyph, Glyph::Circle);
        assert_eq!(e.state().time_limit_ms, Some(1300.0 + 100.0));
        assert_eq!(e.state().score, 9);
        // next trial after the feedback period, then an unanswered timeout
        e.advance(5_050_000);
        assert_eq!(e.phase(), Phase::Fixation);
        e.advance(60_000_000);
        let kinds: Vec<_> = e.records().iter().map(|r| r.outcome.kind).collect();
        assert!(kinds[1..].iter().all(|k| *k == OutcomeKind::Timeout));
        assert!(e.records()[1].outcome.completion_ms > 1400.0);
    }

    #[test]
    fn no_timeout_without_stress() {
        let mut e = GameEngine::new(Mode::Easy, false, cfg(), 3);
        e.start(0);
        e.advance(100_000_000);
        assert_eq!(e.phase(), Phase::Reproduce);
        assert!(e.records().is_empty());
        assert_eq!(e.view(100_000_000).time_fill, None);
    }
}
