//! Questionnaire scoring: NASA-TLX, Geneva Emotion Wheel, Big Five.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Raw TLX, each subscale rated 0..=20.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlxResponse {
    pub mental: u8,
    pub physical: u8,
    pub temporal: u8,
    pub performance: u8,
    pub effort: u8,
    /// Frustration/stress subscale.
    pub frustration: u8,
}

impl TlxResponse {
    pub fn subscales(&self) -> [u8; 6] {
        [self.mental, self.physical, self.temporal, self.performance, self.effort, self.frustration]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlxScore {
    /// Unweighted sum, 0..=120.
    pub global: f64,
    pub stress: f64,
}

pub fn score_tlx(r: &TlxResponse) -> Result<TlxScore> {
    for v in r.subscales() {
        check_range("TLX rating", v as f64, 0.0, 20.0)?;
    }
    Ok(TlxScore {
        global: r.subscales().iter().map(|&v| v as f64).sum(),
        stress: r.frustration as f64,
    })
}

/// Geneva Emotion Wheel ratings, 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GewResponse {
    pub impatience: u8,
    pub frustration: u8,
    pub sadness: u8,
    pub social_worry: u8,
    pub dissatisfaction: u8,
    /// Collected but not scored.
    pub positive: [u8; 5],
}

impl GewResponse {
    pub fn negatives(&self) -> [u8; 5] {
        [self.impatience, self.frustration, self.sadness, self.social_worry, self.dissatisfaction]
    }
}

/// Mean of the five negative feelings.
pub fn score_gew_negative(r: &GewResponse) -> Result<f64> {
    for v in r.negatives().into_iter().chain(r.positive) {
        check_range("GEW rating", v as f64, 1.0, 5.0)?;
    }
    Ok(r.negatives().iter().map(|&v| v as f64).sum::<f64>() / 5.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Extraversion,
    Agreeableness,
    Conscientiousness,
    Neuroticism,
    Openness,
}

impl Trait {
    pub const ALL: [Trait; 5] =
        [Trait::Extraversion, Trait::Agreeableness, Trait::Conscientiousness, Trait::Neuroticism, Trait::Openness];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemKey {
    pub item: u16,
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub reverse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfiKey {
    pub version: String,
    pub scale: [u8; 2],
    pub items: Vec<ItemKey>,
}

const BFI_FR_V1: &str = include_str!("../data/bfi_fr_v1.json");

impl BfiKey {
    /// The bundled 45-item French key.
    pub fn bundled() -> BfiKey {
        BfiKey::from_json(BFI_FR_V1).expect("bundled key is valid")
    }

    pub fn from_json(text: &str) -> Result<BfiKey> {
        let key: BfiKey = serde_json::from_str(text).map_err(|e| Error::ItemKey(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for it in &key.items {
            if !seen.insert(it.item) {
                return Err(Error::ItemKey(format!("item {} keyed twice", it.item)));
            }
        }
        for t in Trait::ALL {
            if !key.items.iter().any(|i| i.trait_ == t) {
                return Err(Error::ItemKey(format!("no items for {t:?}")));
            }
        }
        if key.scale[0] >= key.scale[1] {
            return Err(Error::ItemKey(format!("bad scale {:?}", key.scale)));
        }
        Ok(key)
    }
}

/// Item number to rating.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BfiResponse {
    pub ratings: BTreeMap<u16, u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitScores {
    pub extraversion: f64,
    pub agreeableness: f64,
    pub conscientiousness: f64,
    pub neuroticism: f64,
    pub openness: f64,
}

impl TraitScores {
    pub fn get(&self, t: Trait) -> f64 {
        match t {
            Trait::Extraversion => self.extraversion,
            Trait::Agreeableness => self.agreeableness,
            Trait::Conscientiousness => self.conscientiousness,
            Trait::Neuroticism => self.neuroticism,
            Trait::Openness => self.openness,
        }
    }
}

pub fn score_bfi(r: &BfiResponse, key: &BfiKey) -> Result<TraitScores> {
    let (lo, hi) = (key.scale[0] as f64, key.scale[1] as f64);
    let mut sums = [0.0f64; 5];
    let mut counts = [0usize; 5];
    for it in &key.items {
        let v = *r.ratings.get(&it.item).ok_or(Error::MissingItem(it.item))? as f64;
        check_range(&format!("BFI item {}", it.item), v, lo, hi)?;
        let v = if it.reverse { lo + hi - v } else { v };
        let k = Trait::ALL.iter().position(|&t| t == it.trait_).unwrap();
        sums[k] += v;
        counts[k] += 1;
    }
    let m = |k: usize| sums[k] / counts[k] as f64;
    Ok(TraitScores { extraversion: m(0), agreeableness: m(1), conscientiousness: m(2), neuroticism: m(3), openness: m(4) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split<I> {
    pub median: f64,
    pub low: Vec<I>,
    pub high: Vec<I>,
}

/// Median split. Values tied with the median go, in id order, to whichever
/// group is currently smaller (Low when equal).
pub fn median_split<I: Ord + Clone>(scores: &[(I, f64)]) -> Result<Split<I>> {
    if scores.len() < 2 {
        return Err(Error::InsufficientData(format!("median split of {} participants", scores.len())));
    }
    if scores.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let mut vals: Vec<f64> = scores.iter().map(|(_, v)| *v).collect();
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    let median = if n % 2 == 1 { vals[n / 2] } else { (vals[n / 2 - 1] + vals[n / 2]) / 2.0 };
    let mut sorted: Vec<&(I, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut ties = Vec::new();
    for (id, v) in sorted {
        if *v < median {
            low.push(id.clone());
        } else if *v > median {
            high.push(id.clone());
        } else {
            ties.push(id.clone());
        }
    }
    for id in ties {
        if low.len() <= high.len() {
            low.push(id);
        } else {
            high.push(id);
        }
    }
    low.sort();
    high.sort();
    Ok(Split { median, low, high })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tlx(v: u8) -> TlxResponse {
        TlxResponse { mental: v, physical: v, temporal: v, performance: v, effort: v, frustration: v }
    }

    #[test]
    fn tlx_bounds() {
        assert_eq!(score_tlx(&tlx(20)).unwrap().global, 120.0);
        assert_eq!(score_tlx(&tlx(0)).unwrap().global, 0.0);
        assert!(matches!(score_tlx(&tlx(21)), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn tlx_table_scale() {
        let r = TlxResponse { mental: 18, physical: 7, temporal: 17, performance: 13, effort: 17, frustration: 16 };
        let s = score_tlx(&r).unwrap();
        assert_eq!(s.global, 88.0);
        assert_eq!(s.stress, 16.0);
    }

    fn gew(neg: [u8; 5]) -> GewResponse {
        GewResponse {
            impatience: neg[0],
            frustration: neg[1],
            sadness: neg[2],
            social_worry: neg[3],
            dissatisfaction: neg[4],
            positive: [3; 5],
        }
    }

    #[test]
    fn gew_means() {
        assert_eq!(score_gew_negative(&gew([1; 5])).unwrap(), 1.0);
        assert_eq!(score_gew_negative(&gew([5; 5])).unwrap(), 5.0);
        assert!((score_gew_negative(&gew([3, 2, 2, 3, 2])).unwrap() - 2.4).abs() < 1e-12);
        assert!(score_gew_negative(&gew([0, 2, 2, 3, 2])).is_err());
    }

    fn all(v: u8) -> BfiResponse {
        BfiResponse { ratings: (1..=45).map(|i| (i, v)).collect() }
    }

    #[test]
    fn bundled_key_covers_45_items() {
        let key = BfiKey::bundled();
        assert_eq!(key.items.len(), 45);
        let mut ids: Vec<u16> = key.items.iter().map(|i| i.item).collect();
        ids.sort();
        assert_eq!(ids, (1..=45).collect::<Vec<_>>());
    }

    #[test]
    fn bfi_scoring() {
        let key = BfiKey::bundled();
        let s = score_bfi(&all(3), &key).unwrap();
        for t in Trait::ALL {
            assert_eq!(s.get(t), 3.0);
        }
        // a reverse item rated 5 counts as 1
        let rev = key.items.iter().find(|i| i.reverse && i.trait_ == Trait::Neuroticism).unwrap().item;
        let mut r = all(3);
        r.ratings.insert(rev, 5);
        let n_items = key.items.iter().filter(|i| i.trait_ == Trait::Neuroticism).count() as f64;
        let n = score_bfi(&r, &key).unwrap().neuroticism;
        assert!((n - (3.0 * (n_items - 1.0) + 1.0) / n_items).abs() < 1e-12);
        let mut missing = all(3);
        missing.ratings.remove(&17);
        assert_eq!(score_bfi(&missing, &key), Err(Error::MissingItem(17)));
    }

    #[test]
    fn neuroticism_group_mean() {
        // eight integer items cannot average 3.72 for one person; 25 people
        // with keyed item sums of 30 (x19) and 29 (x6) average exactly 3.72
        let key = BfiKey::bundled();
        let items: Vec<ItemKey> = key.items.iter().copied().filter(|i| i.trait_ == Trait::Neuroticism).collect();
        assert_eq!(items.len(), 8);
        let mut total = 0.0;
        for p in 0..25 {
            let keyed: [u8; 8] = if p < 19 { [4, 4, 4, 4, 4, 4, 3, 3] } else { [4, 4, 4, 4, 4, 3, 3, 3] };
            let mut r = all(3);
            for (it, &v) in items.iter().zip(&keyed) {
                r.ratings.insert(it.item, if it.reverse { 6 - v } else { v });
            }
            total += score_bfi(&r, &key).unwrap().neuroticism;
        }
        assert!((total / 25.0 - 3.72).abs() < 1e-12);
    }

    #[test]
    fn key_validation() {
        assert!(BfiKey::from_json(r#"{"version":"x","scale":[1,5],"items":[{"item":1,"trait":"openness","reverse":false}]}"#).is_err());
        assert!(BfiKey::from_json("not json").is_err());
    }

    #[test]
    fn split_examples() {
        let s = median_split(&[(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0)]).unwrap();
        assert_eq!((s.low, s.high), (vec![1, 2], vec![3, 4]));
        let odd: Vec<(u32, f64)> = (0..29).map(|i| (i, i as f64 * 0.1)).collect();
        let s = median_split(&odd).unwrap();
        assert_eq!((s.low.len(), s.high.len()), (15, 14));
        let same: Vec<(u32, f64)> = (0..6).map(|i| (i, 2.0)).collect();
        let s = median_split(&same).unwrap();
        assert_eq!((s.low, s.high), (vec![0, 2, 4], vec![1, 3, 5]));
        assert!(median_split(&[(1, 1.0)]).is_err());
    }
}
