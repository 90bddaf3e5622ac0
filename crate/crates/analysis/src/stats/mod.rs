//! Small-sample hypothesis tests with exact paths where enumeration is cheap.

mod alpha;
mod anova;
mod rank;
mod shapiro;
mod spearman;
mod ttest;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub use alpha::cronbach_alpha;
pub use anova::{mixed_anova_2x2, MixedAnova};
pub use rank::midranks;
pub use shapiro::shapiro_wilk;
pub use spearman::{spearman, SPEARMAN_EXACT_MAX_N};
pub use ttest::{paired_t, two_sample_t};
pub use wilcoxon::{wilcoxon_signed_rank, WILCOXON_EXACT_MAX_N};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// First sample tends to be smaller (or the correlation negative).
    Less,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    CohenD,
    RankBiserial,
    PartialEtaSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub kind: EffectKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
    pub tail: Alternative,
    pub effect: Option<Effect>,
    /// Observations entering the statistic.
    pub n: usize,
    /// Degrees of freedom; the second entry is the denominator df of an F test.
    pub df: Option<(f64, f64)>,
    pub method: PMethod,
    /// Observations dropped before testing (zero differences).
    pub excluded: usize,
}

impl TestResult {
    pub(crate) fn new(statistic: f64, p: f64, tail: Alternative, n: usize) -> Self {
        TestResult {
            statistic,
            p: p.clamp(0.0, 1.0),
            tail,
            effect: None,
            n,
            df: None,
            method: PMethod::Asymptotic,
            excluded: 0,
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

/// p_adj = min(1, m p).
pub fn bonferroni(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len() as f64;
    pvals.iter().map(|p| (p * m).min(1.0)).collect()
}

pub(crate) fn normal_p(z: f64, tail: Alternative) -> f64 {
    let n = Normal::standard();
    match tail {
        Alternative::TwoSided => 2.0 * n.sf(z.abs()),
        Alternative::Greater => n.sf(z),
        Alternative::Less => n.cdf(z),
    }
}

pub(crate) fn t_p(t: f64, df: f64, tail: Alternative) -> f64 {
    let d = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    match tail {
        Alternative::TwoSided => 2.0 * d.sf(t.abs()),
        Alternative::Greater => d.sf(t),
        Alternative::Less => d.cdf(t),
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n − 1 denominator).
pub(crate) fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.01]), vec![0.01]);
        let b = bonferroni(&[0.01, 0.04]);
        assert!((b[0] - 0.02).abs() < 1e-15 && (b[1] - 0.08).abs() < 1e-15);
        assert_eq!(bonferroni(&[0.9, 0.9]), vec![1.0, 1.0]);
        assert!(bonferroni(&[]).is_empty());
    }
}
