//! Versioned JSONL event log of one block.
//!
//! Line 1 is a header carrying `"v"`, the block config and the physiology
//! the block was generated from; every further line is one event with a
//! `"type"` tag and a time `"t"` in seconds from block start.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use slowbeat_core::biofeedback::VibrationTrigger;
use slowbeat_core::game::GameEvent;
use slowbeat_core::probe::BeepEvent;
use slowbeat_core::rpeak::BeatEvent;

use crate::config::{BlockConfig, Condition};
use crate::error::{Error, Result};
use crate::population::{BlockPhysiology, Questionnaire};

pub const LOG_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    BlockStart {
        t: f64,
        condition: Condition,
    },
    /// Detected R peak at `t`, reported by the detector at `emitted`.
    Beat {
        t: f64,
        amp: f64,
        prom: f64,
        emitted: f64,
    },
    /// Live IBI estimate after a beat, ms.
    IbiEst {
        t: f64,
        ms: f64,
    },
    Vibe {
        t: f64,
        p1_ms: f64,
        gap_ms: f64,
        p2_ms: f64,
    },
    Beep {
        t: f64,
        dur_ms: f64,
        freq_hz: f64,
        level_db: f64,
        noise_db: f64,
    },
    Pedal {
        t: f64,
    },
    Questionnaire {
        t: f64,
        #[serde(flatten)]
        answers: Questionnaire,
    },
    BlockEnd {
        t: f64,
        complete: bool,
    },
}

/// One log line after the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogEvent {
    Game(GameEvent),
    Session(SessionEvent),
}

impl LogEvent {
    pub fn t(&self) -> f64 {
        match self {
            LogEvent::Game(g) => g.t(),
            LogEvent::Session(s) => match s {
                SessionEvent::BlockStart { t, .. }
                | SessionEvent::Beat { t, .. }
                | SessionEvent::IbiEst { t, .. }
                | SessionEvent::Vibe { t, .. }
                | SessionEvent::Beep { t, .. }
                | SessionEvent::Pedal { t }
                | SessionEvent::Questionnaire { t, .. }
                | SessionEvent::BlockEnd { t, .. } => *t,
            },
        }
    }

    pub fn beat(b: &BeatEvent, emitted: f64) -> LogEvent {
        LogEvent::Session(SessionEvent::Beat { t: b.t, amp: b.amplitude, prom: b.prominence, emitted })
    }

    pub fn vibe(tr: &VibrationTrigger) -> LogEvent {
        let p = tr.pattern;
        LogEvent::Session(SessionEvent::Vibe { t: tr.t, p1_ms: p.p1_ms, gap_ms: p.gap_ms, p2_ms: p.p2_ms })
    }

    pub fn beep(b: &BeepEvent) -> LogEvent {
        LogEvent::Session(SessionEvent::Beep {
            t: b.t,
            dur_ms: b.dur_ms,
            freq_hz: b.freq_hz,
            level_db: b.level_db,
            noise_db: b.noise_db,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub participant: Option<u32>,
    pub config: BlockConfig,
    pub physiology: BlockPhysiology,
    /// Channel name to CSV path, relative to the log file.
    #[serde(default)]
    pub signals: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    v: u64,
    #[serde(rename = "type")]
    kind: String,
    #[serde(flatten)]
    header: LogHeader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub header: LogHeader,
    pub events: Vec<LogEvent>,
}

impl BlockRecord {
    pub fn condition(&self) -> Condition {
        self.header.config.condition
    }

    /// A block is complete when it ran to its configured end.
    pub fn complete(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, LogEvent::Session(SessionEvent::BlockEnd { complete: true, .. })))
    }

    pub fn session_events(&self) -> impl Iterator<Item = &SessionEvent> {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Session(s) => Some(s),
            LogEvent::Game(_) => None,
        })
    }

    pub fn game_events(&self) -> impl Iterator<Item = &GameEvent> {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Game(g) => Some(g),
            LogEvent::Session(_) => None,
        })
    }

    pub fn beats(&self) -> Vec<BeatEvent> {
        self.session_events()
            .filter_map(|e| match *e {
                SessionEvent::Beat { t, amp, prom, .. } => Some(BeatEvent { t, amplitude: amp, prominence: prom }),
                _ => None,
            })
            .collect()
    }

    pub fn trigger_times(&self) -> Vec<f64> {
        self.session_events()
            .filter_map(|e| match *e {
                SessionEvent::Vibe { t, .. } => Some(t),
                _ => None,
            })
            .collect()
    }

    pub fn beeps(&self) -> Vec<BeepEvent> {
        self.session_events()
            .filter_map(|e| match *e {
                SessionEvent::Beep { t, dur_ms, freq_hz, level_db, noise_db } => {
                    Some(BeepEvent { t, dur_ms, freq_hz, level_db, noise_db })
                }
                _ => None,
            })
            .collect()
    }

    pub fn pedal_times(&self) -> Vec<f64> {
        self.session_events()
            .filter_map(|e| match *e {
                SessionEvent::Pedal { t } => Some(t),
                _ => None,
            })
            .collect()
    }

    pub fn questionnaire(&self) -> Option<Questionnaire> {
        self.session_events().find_map(|e| match *e {
            SessionEvent::Questionnaire { answers, .. } => Some(answers),
            _ => None,
        })
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t() <= w[1].t())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let head = HeaderLine { v: LOG_VERSION, kind: "header".into(), header: self.header.clone() };
        serde_json::to_writer(&mut w, &head)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses a log; line numbers in errors are 1-based.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<BlockRecord> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse { line: 1, message: "empty log".into() })?;
        let first = first?;
        let raw: serde_json::Value =
            serde_json::from_str(&first).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        let v = raw
            .get("v")
            .and_then(serde_json::Value::as_u64)
            .ok_or(Error::Parse { line: 1, message: "header has no version field \"v\"".into() })?;
        if v != LOG_VERSION {
            return Err(Error::Version { found: v, expected: LOG_VERSION });
        }
        let head: HeaderLine =
            serde_json::from_value(raw).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        if head.kind != "header" {
            return Err(Error::Parse { line: 1, message: format!("expected a header, got {:?}", head.kind) });
        }
        let mut events: Vec<LogEvent> = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: LogEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("not a known event ({e})"),
            })?;
            if let Some(prev) = events.last() {
                if ev.t() < prev.t() {
                    return Err(Error::Parse { line: i + 1, message: format!("time {} goes backwards", ev.t()) });
                }
            }
            events.push(ev);
        }
        Ok(BlockRecord { header: head.header, events })
    }

    pub fn from_jsonl(text: &str) -> Result<BlockRecord> {
        BlockRecord::read_jsonl(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BlockDefaults;
    use slowbeat_core::biofeedback::{encode_trigger, VibrationPattern};
    use slowbeat_core::game::PressEffect;

    fn record() -> BlockRecord {
        let cfg = BlockConfig::new(Condition::DSGR, 7, &BlockDefaults::default());
        BlockRecord {
            header: LogHeader {
                participant: Some(2),
                config: cfg,
                physiology: BlockPhysiology::nominal(Condition::DSGR),
                signals: BTreeMap::new(),
            },
            events: vec![
                LogEvent::Session(SessionEvent::BlockStart { t: 0.0, condition: Condition::DSGR }),
                LogEvent::Session(SessionEvent::Beat { t: 0.1 + 0.2, amp: 1.0 / 3.0, prom: 0.7, emitted: 0.39 }),
                LogEvent::Game(GameEvent::Press { t: 1.25, cell: [2, 3], effect: PressEffect::Lit }),
                LogEvent::Session(SessionEvent::Pedal { t: 2.0 }),
                LogEvent::Session(SessionEvent::BlockEnd { t: 480.0, complete: true }),
            ],
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let r = record();
        let text = r.to_jsonl();
        assert!(text.starts_with("{\"v\":1,\"type\":\"header\""));
        assert_eq!(BlockRecord::from_jsonl(&text).unwrap(), r);
        assert!(text.contains(r#"{"type":"press","t":1.25,"cell":[2,3],"effect":"lit"}"#));
        assert!(text.contains(r#"{"type":"pedal","t":2.0}"#));
    }

    #[test]
    fn vibe_line_matches_wire_frame() {
        let tr = VibrationTrigger { t: 12.345, pattern: VibrationPattern::default(), motors: 3 };
        assert_eq!(serde_json::to_string(&LogEvent::vibe(&tr)).unwrap(), encode_trigger(&tr));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text = record().to_jsonl().replacen("{\"v\":1,", "{\"v\":2,", 1);
        assert!(matches!(BlockRecord::from_jsonl(&text), Err(Error::Version { found: 2, expected: 1 })));
    }

    #[test]
    fn corrupted_line_is_named() {
        let mut lines: Vec<String> = record().to_jsonl().lines().map(String::from).collect();
        // line 1 is the header, the pedal press is line 5
        lines[4] = lines[4].replace("pedal", "pedl");
        let err = BlockRecord::from_jsonl(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
        lines[4] = "{\"type\":\"pedal\",\"t\":".into();
        assert!(matches!(BlockRecord::from_jsonl(&lines.join("\n")), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn backwards_time_is_rejected() {
        let mut r = record();
        r.events.swap(1, 2);
        assert!(matches!(BlockRecord::from_jsonl(&r.to_jsonl()), Err(Error::Parse { line: 4, .. })));
    }
}
