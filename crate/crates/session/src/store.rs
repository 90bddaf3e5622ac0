//! On-disk layout of a simulated experiment.
//!
//! ```text
//! out/
//!   p00_0_training.jsonl     one log per block, participant and run index
//!   p00_1_EG.jsonl
//!   p00_1_EG_ecg.csv         with --signals; referenced from the log header
//!   ...
//!   participants.json        block order and trait scores per participant
//!   features.csv             the cohort table
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slowbeat_analysis::features::QualityConfig;
use slowbeat_analysis::instruments::TraitScores;
use slowbeat_core::{ChannelKind, Signal};

use crate::block::{replay, synthesize_signals};
use crate::config::{Condition, ExperimentPlan};
use crate::error::{Error, Result};
use crate::experiment::ExperimentRecord;
use crate::log::BlockRecord;
use crate::table::{build_table, extract_block, BlockFeatures, CohortTable, FeatureScope};

pub const TABLE_FILE: &str = "features.csv";
pub const PARTICIPANTS_FILE: &str = "participants.json";

/// What the cohort table needs beyond the block logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub plan: ExperimentPlan,
    pub traits: TraitScores,
}

fn write_signal(dir: &Path, name: &str, s: &Signal) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    s.write_csv(&mut w)?;
    Ok(())
}

/// Writes every block log, the plans and the cohort table into `dir`.
/// Returns the log paths in run order.
pub fn write_experiment(rec: &ExperimentRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for p in &rec.participants {
        for (k, b) in p.blocks.iter().enumerate() {
            let stem = format!("p{:02}_{k}_{}", p.profile.id, b.record.condition());
            let mut record = b.record.clone();
            let mut channels: Vec<(&str, &Signal)> = Vec::new();
            if let Some(e) = &b.ecg {
                channels.push(("ecg", e));
            }
            if let Some(s) = &b.signals {
                channels.push(("resp", &s.resp));
                channels.push(("eda", &s.eda));
            }
            for (ch, sig) in channels {
                let name = format!("{stem}_{ch}.csv");
                write_signal(dir, &name, sig)?;
                record.header.signals.insert(ch.to_string(), name);
            }
            let path = dir.join(format!("{stem}.jsonl"));
            record.write_jsonl(BufWriter::new(File::create(&path)?))?;
            paths.push(path);
        }
    }
    let summary: Vec<ParticipantSummary> =
        rec.participants.iter().map(|p| ParticipantSummary { plan: p.plan.clone(), traits: p.traits }).collect();
    std::fs::write(dir.join(PARTICIPANTS_FILE), serde_json::to_string_pretty(&summary)?)?;
    rec.table.write_csv(BufWriter::new(File::create(dir.join(TABLE_FILE))?))?;
    Ok(paths)
}

pub fn read_log(path: &Path) -> Result<BlockRecord> {
    BlockRecord::read_jsonl(BufReader::new(File::open(path)?))
}

fn read_signal(base: &Path, record: &BlockRecord, ch: &str, kind: ChannelKind) -> Result<Option<Signal>> {
    match record.header.signals.get(ch) {
        Some(name) => {
            let r = BufReader::new(File::open(base.join(name))?);
            Ok(Some(Signal::read_csv(r, kind)?))
        }
        None => Ok(None),
    }
}

/// Features of one logged block. Trials come from replaying the log; signal
/// CSVs named in the header are used when present, otherwise the slow
/// channels are regenerated from the header.
pub fn block_features_from_log(path: &Path, scope: FeatureScope, quality: &QualityConfig) -> Result<BlockFeatures> {
    let record = read_log(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let out = replay(&record)?;
    if out.record.events != record.events {
        return Err(Error::State(format!("{} does not replay to itself", path.display())));
    }
    let ecg = read_signal(base, &record, "ecg", ChannelKind::Ecg)?;
    let signals = match scope {
        FeatureScope::Cardiac => None,
        FeatureScope::Full => {
            let mut s = synthesize_signals(&record.header)?;
            if let Some(r) = read_signal(base, &record, "resp", ChannelKind::Respiration)? {
                s.resp = r;
            }
            if let Some(e) = read_signal(base, &record, "eda", ChannelKind::Eda)? {
                s.eda = e;
            }
            Some(s)
        }
    };
    extract_block(&record, &out.trials, ecg.as_ref(), signals.as_ref(), quality)
}

/// Cohort table from a set of block logs; block positions and traits come
/// from the participant summaries when given.
pub fn table_from_logs(
    paths: &[PathBuf],
    participants: &[ParticipantSummary],
    scope: FeatureScope,
    quality: &QualityConfig,
) -> Result<CohortTable> {
    let mut feats = Vec::with_capacity(paths.len());
    for p in paths {
        feats.push(block_features_from_log(p, scope, quality)?);
    }
    let mut positions = BTreeMap::new();
    let mut traits = BTreeMap::new();
    for p in participants {
        for c in Condition::ANALYZED {
            if let Some(k) = p.plan.position(c) {
                positions.insert((p.plan.participant, c), k);
            }
        }
        traits.insert(p.plan.participant, p.traits);
    }
    build_table(&feats, &positions, &traits)
}

pub fn read_participants(path: &Path) -> Result<Vec<ParticipantSummary>> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Every `*.jsonl` file directly inside `dir`, sorted by name.
pub fn list_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "jsonl") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
