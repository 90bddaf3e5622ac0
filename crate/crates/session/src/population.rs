//! Synthetic cohort: per-participant profiles drawn at the scale of the
//! original sample, per-block physiology, and generated questionnaires.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use slowbeat_analysis::instruments::{BfiKey, BfiResponse, GewResponse, TlxResponse, Trait};
use slowbeat_core::rng::{derive_named, rng_from_seed, SimRng};
use slowbeat_core::sim::{AccuracyCurve, HeartParams, PlayerModel};

use crate::config::Condition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationParams {
    pub hr_mean: f64,
    pub hr_sd: f64,
    pub rmssd_mean: f64,
    pub rmssd_sd: f64,
    /// Per-participant entrainment coupling.
    pub kappa: f64,
    pub entrainment_cap: Option<f64>,
    pub stress_hr_offset: f64,
    /// Block-to-block variation of the mean HR, bpm.
    pub block_hr_sd: f64,
    /// Block-to-block log-scale variation of RMSSD.
    pub block_rmssd_sd: f64,
    pub rr_mean: f64,
    pub rr_sd: f64,
    pub stress_rr_offset: f64,
    pub block_rr_sd: f64,
    pub tonic_mean: f64,
    pub tonic_sd: f64,
    /// SCRs per block in the non-stressful conditions.
    pub scr_count_mean: f64,
    pub scr_count_sd: f64,
    pub stress_scr_offset: f64,
    pub scr_amp_mean: f64,
    pub scr_amp_sd: f64,
    pub scr_min_gap_s: f64,
    pub rt_mean_ms: f64,
    pub rt_between_sd_ms: f64,
    /// Within-participant coefficient of variation of reaction times.
    pub rt_cv: f64,
    pub omission_prob: f64,
    pub stress_omission_prob: f64,
    pub press_interval_ms: f64,
    pub press_interval_sd_ms: f64,
    /// Share of participants who perceive the regulation as efficient.
    pub bf_efficient_share: f64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        PopulationParams {
            hr_mean: 77.56,
            hr_sd: 9.13,
            rmssd_mean: 75.96,
            rmssd_sd: 39.92,
            kappa: 0.0,
            entrainment_cap: Some(0.15),
            stress_hr_offset: 3.0,
            block_hr_sd: 2.5,
            block_rmssd_sd: 0.15,
            rr_mean: 18.96,
            rr_sd: 2.73,
            stress_rr_offset: 0.8,
            block_rr_sd: 1.0,
            tonic_mean: 0.64,
            tonic_sd: 0.28,
            scr_count_mean: 26.92,
            scr_count_sd: 15.96,
            stress_scr_offset: 7.0,
            scr_amp_mean: 0.04,
            scr_amp_sd: 0.02,
            scr_min_gap_s: 5.0,
            rt_mean_ms: 1150.0,
            rt_between_sd_ms: 300.0,
            rt_cv: 0.35,
            omission_prob: 0.005,
            stress_omission_prob: 0.02,
            press_interval_ms: 450.0,
            press_interval_sd_ms: 60.0,
            bf_efficient_share: 12.0 / 29.0,
        }
    }
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.hr_sd,
            self.rmssd_sd,
            self.block_hr_sd,
            self.block_rmssd_sd,
            self.rr_sd,
            self.block_rr_sd,
            self.tonic_sd,
            self.scr_count_sd,
            self.scr_amp_sd,
            self.rt_between_sd_ms,
            self.rt_cv,
            self.press_interval_sd_ms,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("spreads must be finite and nonnegative".into()));
        }
        let probs = [self.kappa, self.omission_prob, self.stress_omission_prob, self.bf_efficient_share];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("kappa and probabilities must lie in [0, 1]".into()));
        }
        let pos = [self.hr_mean, self.rmssd_mean, self.rr_mean, self.tonic_mean, self.rt_mean_ms, self.press_interval_ms];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("means must be positive".into()));
        }
        Ok(())
    }
}

/// Pedal response behavior of one participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub rt_mean_ms: f64,
    pub rt_cv: f64,
    pub omission_prob: f64,
    pub stress_omission_prob: f64,
}

impl ProbeModel {
    /// Reaction time in seconds, or `None` for a missed beep.
    pub fn respond(&self, stress: bool, rng: &mut SimRng) -> Option<f64> {
        let miss = if stress { self.stress_omission_prob } else { self.omission_prob };
        if rng.random::<f64>() < miss {
            return None;
        }
        let sigma = (1.0 + self.rt_cv * self.rt_cv).ln().sqrt();
        let mu = self.rt_mean_ms.ln() - sigma * sigma / 2.0;
        let rt = LogNormal::new(mu, sigma).expect("finite parameters").sample(rng);
        Some(rt.max(150.0) / 1000.0)
    }
}

/// Everything the engine needs to synthesize one block's physiology.
/// Stored in the log header, so a block can be regenerated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPhysiology {
    /// Heart parameters in force (stress offset already applied).
    pub heart: HeartParams,
    pub resp_rate_cpm: f64,
    pub tonic_us: f64,
    pub scr_count: usize,
    pub scr_amp_mean: f64,
    pub scr_amp_sd: f64,
    pub scr_min_gap_s: f64,
}

impl BlockPhysiology {
    /// A fixed, noise-free profile at the cohort means.
    pub fn nominal(condition: Condition) -> BlockPhysiology {
        let p = PopulationParams::default();
        let stress = condition.stress();
        let heart = HeartParams {
            mean_hr: p.hr_mean,
            rmssd_target: p.rmssd_mean,
            entrainment_kappa: 0.0,
            stress_hr_offset: p.stress_hr_offset,
            entrainment_cap: p.entrainment_cap,
        };
        BlockPhysiology {
            heart: heart.for_block(stress),
            resp_rate_cpm: p.rr_mean + if stress { p.stress_rr_offset } else { 0.0 },
            tonic_us: p.tonic_mean,
            scr_count: p.scr_count_mean.round() as usize,
            scr_amp_mean: p.scr_amp_mean,
            scr_amp_sd: p.scr_amp_sd,
            scr_min_gap_s: p.scr_min_gap_s,
        }
    }
}

/// One post-block survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub tlx: TlxResponse,
    pub gew: GewResponse,
    /// Perceived efficiency of the regulation, asked after the biofeedback block.
    pub bf_efficient: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub id: u32,
    pub seed: u64,
    pub heart: HeartParams,
    pub resp_rate_cpm: f64,
    pub tonic_us: f64,
    pub scr_count_mean: f64,
    pub player: PlayerModel,
    pub probe: ProbeModel,
    /// Latent trait levels on the 1..5 scale, in `Trait::ALL` order.
    pub traits: [f64; 5],
    pub tlx_base: [f64; 6],
    pub gew_base: f64,
    pub bf_efficient: bool,
    pop: PopulationParams,
}

fn normal(rng: &mut SimRng, mean: f64, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sd * z
}

/// Log-normal draw with the given mean and standard deviation.
fn lognormal(rng: &mut SimRng, mean: f64, sd: f64) -> f64 {
    let s2 = (1.0 + (sd / mean).powi(2)).ln();
    let z: f64 = rng.sample(StandardNormal);
    (mean.ln() - s2 / 2.0 + s2.sqrt() * z).exp()
}

impl ParticipantProfile {
    pub fn draw(id: u32, pop: &PopulationParams, seed: u64) -> Result<ParticipantProfile> {
        pop.validate()?;
        let mut rng = rng_from_seed(derive_named(seed, "profile"));
        let heart = HeartParams {
            mean_hr: normal(&mut rng, pop.hr_mean, pop.hr_sd).clamp(50.0, 130.0),
            rmssd_target: lognormal(&mut rng, pop.rmssd_mean, pop.rmssd_sd).clamp(10.0, 200.0),
            entrainment_kappa: pop.kappa,
            stress_hr_offset: pop.stress_hr_offset,
            entrainment_cap: pop.entrainment_cap,
        };
        let player = PlayerModel {
            accuracy: AccuracyCurve { at_len1: rng.random_range(0.97..=1.0), slope: rng.random_range(0.003..=0.009) },
            press_interval_ms: normal(&mut rng, pop.press_interval_ms, pop.press_interval_sd_ms).clamp(250.0, 900.0),
            press_jitter_ms: 120.0,
            stress_penalty: 0.03,
        };
        let probe = ProbeModel {
            rt_mean_ms: normal(&mut rng, pop.rt_mean_ms, pop.rt_between_sd_ms).clamp(400.0, 2500.0),
            rt_cv: pop.rt_cv,
            omission_prob: pop.omission_prob,
            stress_omission_prob: pop.stress_omission_prob,
        };
        let traits = std::array::from_fn(|_| normal(&mut rng, 3.3, 0.6).clamp(1.0, 5.0));
        let tlx_base = std::array::from_fn(|_| rng.random_range(3.0..=10.0));
        Ok(ParticipantProfile {
            id,
            seed,
            heart,
            resp_rate_cpm: normal(&mut rng, pop.rr_mean, pop.rr_sd).clamp(8.0, 40.0),
            tonic_us: lognormal(&mut rng, pop.tonic_mean, pop.tonic_sd),
            scr_count_mean: normal(&mut rng, pop.scr_count_mean, pop.scr_count_sd).clamp(3.0, 70.0),
            player,
            probe,
            traits,
            tlx_base,
            gew_base: rng.random_range(1.3..=2.6),
            bf_efficient: rng.random::<f64>() < pop.bf_efficient_share,
            pop: *pop,
        })
    }

    pub fn block_physiology(&self, condition: Condition) -> BlockPhysiology {
        let mut rng = rng_from_seed(derive_named(self.seed, &format!("physiology-{condition}")));
        let p = &self.pop;
        let stress = condition.stress();
        let mut heart = self.heart.for_block(stress);
        heart.mean_hr = (heart.mean_hr + normal(&mut rng, 0.0, p.block_hr_sd)).clamp(45.0, 150.0);
        heart.rmssd_target *= normal(&mut rng, 0.0, p.block_rmssd_sd).exp();
        let rr = self.resp_rate_cpm + if stress { p.stress_rr_offset } else { 0.0 } + normal(&mut rng, 0.0, p.block_rr_sd);
        let count = self.scr_count_mean + if stress { p.stress_scr_offset } else { 0.0 };
        let count = normal(&mut rng, count, count.sqrt()).round().clamp(0.0, 80.0) as usize;
        BlockPhysiology {
            heart,
            resp_rate_cpm: rr.clamp(6.0, 50.0),
            tonic_us: self.tonic_us,
            scr_count: count,
            scr_amp_mean: p.scr_amp_mean,
            scr_amp_sd: p.scr_amp_sd,
            scr_min_gap_s: p.scr_min_gap_s,
        }
    }

    /// Survey answered after a block.
    pub fn questionnaire(&self, condition: Condition) -> Questionnaire {
        let mut rng = rng_from_seed(derive_named(self.seed, &format!("survey-{condition}")));
        // mental, physical, temporal, performance, effort, frustration
        let load: [f64; 6] = match condition {
            Condition::EG | Condition::Training => [-2.0, -1.0, -2.0, -2.0, -2.0, -2.0],
            Condition::DG => [3.0, 0.5, 1.5, 2.0, 3.0, 1.5],
            Condition::DSG | Condition::DSGR => [4.0, 1.0, 5.0, 3.5, 4.0, 4.5],
        };
        let relief = if condition == Condition::DSGR && self.bf_efficient { 1.5 } else { 0.0 };
        let r = |rng: &mut SimRng, k: usize| {
            let d = if k == 5 { relief } else { 0.0 };
            normal(rng, self.tlx_base[k] + load[k] - d, 1.5).round().clamp(0.0, 20.0) as u8
        };
        let tlx = TlxResponse {
            mental: r(&mut rng, 0),
            physical: r(&mut rng, 1),
            temporal: r(&mut rng, 2),
            performance: r(&mut rng, 3),
            effort: r(&mut rng, 4),
            frustration: r(&mut rng, 5),
        };
        let neg_shift = match condition {
            Condition::EG | Condition::Training => -0.3,
            Condition::DG => 0.1,
            Condition::DSG => 0.5,
            Condition::DSGR => {
                if self.bf_efficient {
                    -0.3
                } else {
                    0.5
                }
            }
        };
        let g = |rng: &mut SimRng, m: f64| normal(rng, m, 0.7).round().clamp(1.0, 5.0) as u8;
        let m = self.gew_base + neg_shift;
        let gew = GewResponse {
            impatience: g(&mut rng, m),
            frustration: g(&mut rng, m),
            sadness: g(&mut rng, m - 0.3),
            social_worry: g(&mut rng, m),
            dissatisfaction: g(&mut rng, m),
            positive: std::array::from_fn(|_| g(&mut rng, 3.0)),
        };
        Questionnaire { tlx, gew, bf_efficient: (condition == Condition::DSGR).then_some(self.bf_efficient) }
    }

    /// Personality inventory answered once, before the blocks.
    pub fn bfi(&self, key: &BfiKey) -> BfiResponse {
        let mut rng = rng_from_seed(derive_named(self.seed, "bfi"));
        let noise = Normal::new(0.0, 0.7).expect("fixed parameters");
        let (lo, hi) = (key.scale[0] as f64, key.scale[1] as f64);
        let mut out = BfiResponse::default();
        for it in &key.items {
            let k = Trait::ALL.iter().position(|&t| t == it.trait_).expect("closed enum");
            let keyed = (self.traits[k] + noise.sample(&mut rng)).round().clamp(lo, hi);
            let raw = if it.reverse { lo + hi - keyed } else { keyed };
            out.ratings.insert(it.item, raw as u8);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use slowbeat_analysis::instruments::{score_bfi, score_gew_negative, score_tlx};

    #[test]
    fn profiles_are_deterministic_and_valid() {
        let pop = PopulationParams::default();
        let a = ParticipantProfile::draw(3, &pop, 99).unwrap();
        let b = ParticipantProfile::draw(3, &pop, 99).unwrap();
        assert_eq!(a, b);
        a.heart.validate().unwrap();
        a.player.validate().unwrap();
        for c in Condition::ANALYZED {
            let phys = a.block_physiology(c);
            phys.heart.validate().unwrap();
            assert_eq!(phys, a.block_physiology(c));
        }
    }

    #[test]
    fn questionnaires_score_in_range() {
        let pop = PopulationParams::default();
        let key = BfiKey::bundled();
        for s in 0..20 {
            let p = ParticipantProfile::draw(s as u32, &pop, s).unwrap();
            for c in Condition::ANALYZED {
                let q = p.questionnaire(c);
                score_tlx(&q.tlx).unwrap();
                score_gew_negative(&q.gew).unwrap();
                assert_eq!(q.bf_efficient.is_some(), c == Condition::DSGR);
            }
            let scores = score_bfi(&p.bfi(&key), &key).unwrap();
            for t in Trait::ALL {
                assert!((1.0..=5.0).contains(&scores.get(t)));
            }
        }
    }

    #[test]
    fn bfi_tracks_latent_traits() {
        let pop = PopulationParams::default();
        let key = BfiKey::bundled();
        let p = ParticipantProfile::draw(0, &pop, 5).unwrap();
        let s = score_bfi(&p.bfi(&key), &key).unwrap();
        for (k, t) in Trait::ALL.iter().enumerate() {
            assert!((s.get(*t) - p.traits[k]).abs() < 0.8, "{t:?}");
        }
    }

    #[test]
    fn probe_omission_rate() {
        let m = ProbeModel { rt_mean_ms: 1000.0, rt_cv: 0.3, omission_prob: 0.1, stress_omission_prob: 0.1 };
        let mut rng = rng_from_seed(1);
        let n = 20_000;
        let rts: Vec<Option<f64>> = (0..n).map(|_| m.respond(false, &mut rng)).collect();
        let miss = rts.iter().filter(|r| r.is_none()).count() as f64 / n as f64;
        assert!((miss - 0.1).abs() < 0.01, "{miss}");
        let hit: Vec<f64> = rts.iter().flatten().copied().collect();
        let mean = hit.iter().sum::<f64>() / hit.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn rejects_bad_population() {
        let pop = PopulationParams { kappa: 1.5, ..Default::default() };
        assert!(ParticipantProfile::draw(0, &pop, 0).is_err());
    }
}
