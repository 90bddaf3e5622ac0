//! Per-block feature extraction and the cohort feature table.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use slowbeat_analysis::eda::{eda_decompose, scr_stats, SCR_THRESHOLD_US};
use slowbeat_analysis::features::{
    behavioral_indicators, mean_hr, normalize, quality_screen, raw_behavior, respiration_rate, rmssd, FeatureSet,
    QualityConfig, QualityReport, RawBehavior,
};
use slowbeat_analysis::instruments::{score_gew_negative, score_tlx, Trait, TraitScores};
use slowbeat_core::game::TrialRecord;
use slowbeat_core::probe::{match_responses, RESPONSE_WINDOW_S};
use slowbeat_core::rpeak::IbiSeries;
use slowbeat_core::Signal;

use crate::block::BlockSignals;
use crate::config::Condition;
use crate::error::{Error, Result};
use crate::log::BlockRecord;
use crate::population::Questionnaire;

/// Which physiological channels to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScope {
    #[default]
    Full,
    /// Heart rate and RMSSD only; respiration and EDA are neither
    /// synthesized nor decomposed.
    Cardiac,
}

/// Features of one block before cohort-level normalization. A feature is
/// `None` when its channel failed quality screening or was not analyzed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFeatures {
    pub participant: u32,
    pub condition: Condition,
    pub complete: bool,
    pub hr_bpm: Option<f64>,
    pub rmssd_ms: Option<f64>,
    pub rr_cpm: Option<f64>,
    pub n_scrs: Option<usize>,
    pub scr_amp_mean: Option<f64>,
    pub tonic_mean: Option<f64>,
    pub behavior: Option<RawBehavior>,
    pub rt_mean_ms: Option<f64>,
    pub omissions: usize,
    pub questionnaire: Option<Questionnaire>,
    pub quality: Vec<QualityReport>,
}

fn screened(signal: Option<&Signal>, q: &QualityConfig, reports: &mut Vec<QualityReport>) -> bool {
    match signal {
        Some(s) => {
            let r = quality_screen(s, q);
            let ok = r.accepted();
            reports.push(r);
            ok
        }
        None => true,
    }
}

/// Extracts block features from the log, the trials it produced and
/// whatever signals are available.
///
/// HR and RMSSD come from the logged beats; a supplied ECG is used for
/// quality screening only.
pub fn extract_block(
    record: &BlockRecord,
    trials: &[TrialRecord],
    ecg: Option<&Signal>,
    signals: Option<&BlockSignals>,
    quality: &QualityConfig,
) -> Result<BlockFeatures> {
    // a recording has to span its block, however short the block is
    let quality = &QualityConfig { min_duration_s: quality.min_duration_s.min(record.header.config.duration_s), ..*quality };
    let mut reports = Vec::new();
    let times: Vec<f64> = record.beats().iter().map(|b| b.t).collect();
    let ibi = IbiSeries::from_beat_times(&times);
    let ecg_ok = screened(ecg, quality, &mut reports);
    let (hr_bpm, rmssd_ms) = if ecg_ok { (mean_hr(&ibi).ok(), rmssd(&ibi).ok()) } else { (None, None) };

    let mut rr_cpm = None;
    let (mut n_scrs, mut scr_amp_mean, mut tonic_mean) = (None, None, None);
    if let Some(sig) = signals {
        if screened(Some(&sig.resp), quality, &mut reports) {
            rr_cpm = Some(respiration_rate(&sig.resp)?);
        }
        if screened(Some(&sig.eda), quality, &mut reports) {
            let d = eda_decompose(&sig.eda)?;
            let st = scr_stats(&d.scrs, SCR_THRESHOLD_US);
            n_scrs = Some(st.count);
            scr_amp_mean = st.mean_amplitude;
            tonic_mean = Some(d.tonic_mean());
        }
    }

    let probe = match_responses(&record.beeps(), &record.pedal_times(), RESPONSE_WINDOW_S);
    Ok(BlockFeatures {
        participant: record.header.participant.unwrap_or(0),
        condition: record.condition(),
        complete: record.complete(),
        hr_bpm,
        rmssd_ms,
        rr_cpm,
        n_scrs,
        scr_amp_mean,
        tonic_mean,
        behavior: raw_behavior(trials).ok(),
        rt_mean_ms: probe.mean_rt_ms(),
        omissions: probe.omissions(),
        questionnaire: record.questionnaire(),
        quality: reports,
    })
}

impl BlockFeatures {
    /// The full feature row, when every physiological feature is defined.
    pub fn feature_set(&self, indicators: (f64, f64)) -> Option<FeatureSet> {
        Some(FeatureSet {
            hr_bpm: self.hr_bpm?,
            rmssd_ms: self.rmssd_ms?,
            rr_cpm: self.rr_cpm?,
            n_scrs: self.n_scrs?,
            scr_amp_mean: self.scr_amp_mean,
            tonic_mean: self.tonic_mean?,
            game_indicator: indicators.0,
            timeout_indicator: indicators.1,
            rt_mean_ms: self.rt_mean_ms,
            omissions: self.omissions,
        })
    }

    fn physio(&self) -> [Option<f64>; 6] {
        [
            self.hr_bpm,
            self.rmssd_ms,
            self.rr_cpm,
            self.n_scrs.map(|n| n as f64),
            self.scr_amp_mean,
            self.tonic_mean,
        ]
    }
}

pub const ID_COLUMNS: [&str; 3] = ["participant", "condition", "position"];
/// Physiological columns that also get a baseline-normalized twin.
pub const PHYSIO_COLUMNS: [&str; 6] = ["hr_bpm", "rmssd_ms", "rr_cpm", "n_scrs", "scr_amp_mean", "tonic_mean"];
pub const SUBJECTIVE_COLUMNS: [&str; 4] = ["tlx_global", "tlx_stress", "gew_negative", "bf_efficient"];

fn trait_name(t: Trait) -> &'static str {
    match t {
        Trait::Extraversion => "extraversion",
        Trait::Agreeableness => "agreeableness",
        Trait::Conscientiousness => "conscientiousness",
        Trait::Neuroticism => "neuroticism",
        Trait::Openness => "openness",
    }
}

/// Value columns of the cohort table, in order.
pub fn table_columns() -> Vec<String> {
    let mut c: Vec<String> = FeatureSet::COLUMNS.iter().map(|s| s.to_string()).collect();
    c.extend(PHYSIO_COLUMNS.iter().map(|s| format!("{s}_norm")));
    c.extend(SUBJECTIVE_COLUMNS.iter().map(|s| s.to_string()));
    c.extend(Trait::ALL.iter().map(|&t| trait_name(t).to_string()));
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub participant: u32,
    pub condition: Condition,
    /// Index among the participant's analyzed blocks, when known.
    pub position: Option<usize>,
    pub values: Vec<Option<f64>>,
}

/// One row per participant and analyzed condition; missing values are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl CohortTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Contrast(format!("unknown column {name:?}")))
    }

    pub fn value(&self, participant: u32, condition: Condition, column: &str) -> Result<Option<f64>> {
        let k = self.column(column)?;
        Ok(self
            .rows
            .iter()
            .find(|r| r.participant == participant && r.condition == condition)
            .and_then(|r| r.values[k]))
    }

    pub fn participants(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.rows.iter().map(|r| r.participant).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// Participants with both values defined, with their `(a, b)` pair.
    pub fn paired(&self, column: &str, a: Condition, b: Condition) -> Result<(Vec<u32>, Vec<f64>, Vec<f64>)> {
        let mut ids = Vec::new();
        let (mut xa, mut xb) = (Vec::new(), Vec::new());
        for p in self.participants() {
            if let (Some(va), Some(vb)) = (self.value(p, a, column)?, self.value(p, b, column)?) {
                ids.push(p);
                xa.push(va);
                xb.push(vb);
            }
        }
        Ok((ids, xa, xb))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut head: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
        head.extend(self.columns.iter().cloned());
        out.write_record(&head).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.participant.to_string(),
                r.condition.label().to_string(),
                r.position.map(|p| p.to_string()).unwrap_or_default(),
            ];
            rec.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<CohortTable> {
        let mut rd = csv::Reader::from_reader(r);
        let head: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(String::from).collect();
        if head.len() < 3 || head[..3] != ID_COLUMNS {
            return Err(Error::Contrast(format!("table must start with {ID_COLUMNS:?}")));
        }
        let columns = head[3..].to_vec();
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = i + 2;
            let bad = |m: String| Error::Parse { line, message: m };
            let participant = rec[0].parse().map_err(|_| bad(format!("participant {:?}", &rec[0])))?;
            let condition = Condition::parse(&rec[1]).ok_or_else(|| bad(format!("condition {:?}", &rec[1])))?;
            let position = if rec[2].is_empty() {
                None
            } else {
                Some(rec[2].parse().map_err(|_| bad(format!("position {:?}", &rec[2])))?)
            };
            let mut values = Vec::with_capacity(columns.len());
            for f in rec.iter().skip(3) {
                values.push(if f.is_empty() {
                    None
                } else {
                    Some(f.parse::<f64>().map_err(|_| bad(format!("value {f:?}")))?)
                });
            }
            if values.len() != columns.len() {
                return Err(bad(format!("{} values for {} columns", values.len(), columns.len())));
            }
            rows.push(TableRow { participant, condition, position, values });
        }
        Ok(CohortTable { columns, rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Assembles the cohort table.
///
/// Physiological features are normalized against the participant's easy
/// game block. Behavioral indicators are ratios to the mean over every
/// difficult-condition block of the cohort; the easy game is scaled by the
/// same mean. Training blocks are skipped.
pub fn build_table(
    blocks: &[BlockFeatures],
    positions: &BTreeMap<(u32, Condition), usize>,
    traits: &BTreeMap<u32, TraitScores>,
) -> Result<CohortTable> {
    let analyzed: Vec<&BlockFeatures> = blocks.iter().filter(|b| b.condition != Condition::Training).collect();
    let cohort: Vec<RawBehavior> = analyzed
        .iter()
        .filter(|b| b.condition != Condition::EG)
        .filter_map(|b| b.behavior)
        .collect();
    let baseline: BTreeMap<u32, &BlockFeatures> =
        analyzed.iter().filter(|b| b.condition == Condition::EG).map(|b| (b.participant, *b)).collect();
    let columns = table_columns();
    let mut rows = Vec::with_capacity(analyzed.len());
    for b in &analyzed {
        let ind = match (&b.behavior, cohort.is_empty()) {
            (Some(raw), false) => Some(behavioral_indicators(raw, &cohort)?),
            _ => None,
        };
        let mut v: Vec<Option<f64>> = Vec::with_capacity(columns.len());
        let phys = b.physio();
        v.extend_from_slice(&phys);
        v.push(ind.map(|i| i.0));
        v.push(ind.map(|i| i.1));
        v.push(b.rt_mean_ms);
        v.push(Some(b.omissions as f64));
        let base = baseline.get(&b.participant).map(|e| e.physio());
        for (k, x) in phys.iter().enumerate() {
            let norm = match (x, base.and_then(|bp| bp[k])) {
                (Some(x), Some(bl)) => normalize(*x, bl).ok(),
                _ => None,
            };
            v.push(norm);
        }
        let q = b.questionnaire.as_ref();
        let tlx = q.and_then(|q| score_tlx(&q.tlx).ok());
        v.push(tlx.map(|s| s.global));
        v.push(tlx.map(|s| s.stress));
        v.push(q.and_then(|q| score_gew_negative(&q.gew).ok()));
        v.push(q.and_then(|q| q.bf_efficient).map(|e| if e { 1.0 } else { 0.0 }));
        let tr = traits.get(&b.participant);
        v.extend(Trait::ALL.iter().map(|&t| tr.map(|s| s.get(t))));
        rows.push(TableRow {
            participant: b.participant,
            condition: b.condition,
            position: positions.get(&(b.participant, b.condition)).copied(),
            values: v,
        });
    }
    rows.sort_by_key(|r| (r.participant, r.condition));
    Ok(CohortTable { columns, rows })
}
