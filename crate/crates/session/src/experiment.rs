//! Whole-cohort simulation: profiles, block orders, headless blocks and the
//! feature table.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use slowbeat_analysis::features::QualityConfig;
use slowbeat_analysis::instruments::{score_bfi, BfiKey, TraitScores};
use slowbeat_core::rng::{derive_named, derive_seed, rng_from_seed};

use crate::block::{run_block, synthesize_signals, BlockSignals, SimParticipant};
use crate::config::{BlockConfig, BlockDefaults, Condition, ExperimentPlan};
use crate::error::{Error, Result};
use crate::log::{BlockRecord, LogHeader};
use crate::population::{ParticipantProfile, PopulationParams};
use crate::table::{build_table, extract_block, BlockFeatures, CohortTable, FeatureScope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub participants: u32,
    pub seed: u64,
    /// Run the unanalyzed training block before the four conditions.
    pub training: bool,
    pub population: PopulationParams,
    pub blocks: BlockDefaults,
    pub scope: FeatureScope,
    pub quality: QualityConfig,
    /// Return the rendered ECG and slow channels with each block.
    pub keep_signals: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            participants: 29,
            seed: 1,
            training: true,
            population: PopulationParams::default(),
            blocks: BlockDefaults::default(),
            scope: FeatureScope::Full,
            quality: QualityConfig::default(),
            keep_signals: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.participants < 2 {
            return Err(Error::Config(format!("{} participants; at least 2 are needed", self.participants)));
        }
        self.population.validate()?;
        self.blocks.scheduler.validate()?;
        Ok(())
    }
}

/// One simulated block with whatever signals were kept.
#[derive(Debug, Clone)]
pub struct SimulatedBlock {
    pub record: BlockRecord,
    pub features: BlockFeatures,
    pub true_beats: Vec<f64>,
    pub ecg: Option<slowbeat_core::Signal>,
    pub signals: Option<BlockSignals>,
}

#[derive(Debug, Clone)]
pub struct SimulatedParticipant {
    pub profile: ParticipantProfile,
    pub plan: ExperimentPlan,
    pub traits: TraitScores,
    pub blocks: Vec<SimulatedBlock>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub participants: Vec<SimulatedParticipant>,
    pub table: CohortTable,
}

impl ExperimentRecord {
    pub fn records(&self) -> impl Iterator<Item = &BlockRecord> {
        self.participants.iter().flat_map(|p| p.blocks.iter().map(|b| &b.record))
    }
}

/// Simulates one participant's whole session.
pub fn run_participant(cfg: &ExperimentConfig, id: u32, key: &BfiKey) -> Result<SimulatedParticipant> {
    let pseed = derive_seed(cfg.seed, id as u64);
    let profile = ParticipantProfile::draw(id, &cfg.population, pseed)?;
    let plan = ExperimentPlan::draw(id, cfg.training, &mut rng_from_seed(derive_named(pseed, "plan")));
    let traits = score_bfi(&profile.bfi(key), key)?;
    let mut blocks = Vec::new();
    for c in plan.blocks() {
        let config = BlockConfig::new(c, derive_named(pseed, &format!("block-{c}")), &cfg.blocks);
        let header = LogHeader {
            participant: Some(id),
            config,
            physiology: profile.block_physiology(c),
            signals: BTreeMap::new(),
        };
        let sim = SimParticipant {
            player: profile.player,
            probe: profile.probe,
            seed: derive_named(pseed, &format!("respond-{c}")),
        };
        let q = (c != Condition::Training).then(|| profile.questionnaire(c));
        let analyzed = c != Condition::Training;
        // the ECG is needed for quality screening even when it is not returned
        let out = run_block(header, &sim, q, analyzed || cfg.keep_signals)?;
        let signals = match cfg.scope {
            FeatureScope::Full if analyzed || cfg.keep_signals => Some(synthesize_signals(&out.record.header)?),
            _ => None,
        };
        let features = extract_block(&out.record, &out.trials, out.ecg.as_ref(), signals.as_ref(), &cfg.quality)?;
        blocks.push(SimulatedBlock {
            record: out.record,
            features,
            true_beats: out.true_beats,
            ecg: if cfg.keep_signals { out.ecg } else { None },
            signals: if cfg.keep_signals { signals } else { None },
        });
    }
    Ok(SimulatedParticipant { profile, plan, traits, blocks })
}

/// Simulates the cohort. Participants run in parallel; the result does not
/// depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let key = BfiKey::bundled();
    let participants: Vec<SimulatedParticipant> =
        (0..cfg.participants).into_par_iter().map(|id| run_participant(cfg, id, &key)).collect::<Result<_>>()?;
    let table = cohort_table(&participants)?;
    Ok(ExperimentRecord { participants, table })
}

pub fn cohort_table(participants: &[SimulatedParticipant]) -> Result<CohortTable> {
    let mut positions = BTreeMap::new();
    let mut traits = BTreeMap::new();
    let mut feats = Vec::new();
    for p in participants {
        for c in Condition::ANALYZED {
            if let Some(k) = p.plan.position(c) {
                positions.insert((p.profile.id, c), k);
            }
        }
        traits.insert(p.profile.id, p.traits);
        feats.extend(p.blocks.iter().map(|b| b.features.clone()));
    }
    build_table(&feats, &positions, &traits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Fidelity;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig { participants: 3, seed: 5, training: false, ..Default::default() };
        c.blocks.duration_s = 40.0;
        c.blocks.probe_gap_s = (8.0, 12.0);
        c.blocks.fidelity = Fidelity::BeatLevel;
        c.scope = FeatureScope::Cardiac;
        c
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&small()).unwrap();
        let b = run_experiment(&small()).unwrap();
        assert_eq!(a.table, b.table);
        let ra: Vec<_> = a.records().cloned().collect();
        let rb: Vec<_> = b.records().cloned().collect();
        assert_eq!(ra, rb);
        assert_eq!(ra.len(), 12);
        assert_eq!(a.table.rows.len(), 12);
    }

    #[test]
    fn blocks_follow_the_plan() {
        let r = run_experiment(&small()).unwrap();
        for p in &r.participants {
            let conds: Vec<Condition> = p.blocks.iter().map(|b| b.record.condition()).collect();
            assert_eq!(conds, p.plan.blocks());
            for b in &p.blocks {
                let has_triggers = !b.record.trigger_times().is_empty();
                assert_eq!(has_triggers, b.record.condition() == Condition::DSGR);
                assert!(b.record.complete());
            }
        }
    }

    #[test]
    fn rejects_single_participant() {
        let c = ExperimentConfig { participants: 1, ..small() };
        assert!(run_experiment(&c).is_err());
    }
}
