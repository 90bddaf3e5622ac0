use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{Alternative, Effect, EffectKind, TestResult};
use crate::error::{Error, Result};

/// Two within-subject conditions crossed with two between-subject groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedAnova {
    pub condition: TestResult,
    pub group: TestResult,
    pub interaction: TestResult,
    /// Interaction sum of squares over the total sum of squares.
    pub interaction_eta_squared: f64,
}

fn f_result(ss: f64, ss_err: f64, df_err: f64, n: usize) -> TestResult {
    let f = ss / (ss_err / df_err);
    let p = FisherSnedecor::new(1.0, df_err).expect("df > 0").sf(f);
    let mut r = TestResult::new(f, p, Alternative::TwoSided, n);
    r.df = Some((1.0, df_err));
    r.effect = Some(Effect { kind: EffectKind::PartialEtaSquared, value: ss / (ss + ss_err) });
    r
}

/// Rows are subjects, columns the two conditions. The condition main effect
/// uses unweighted group means.
pub fn mixed_anova_2x2(g1: &[[f64; 2]], g2: &[[f64; 2]]) -> Result<MixedAnova> {
    let (n1, n2) = (g1.len(), g2.len());
    if n1 == 0 || n2 == 0 || n1 + n2 < 3 {
        return Err(Error::InsufficientData(format!("group sizes {n1} and {n2}")));
    }
    if g1.iter().chain(g2).flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    let n = (n1 + n2) as f64;
    let df_err = n - 2.0;
    let groups = [g1, g2];

    // within-subject stratum, on differences d = c2 − c1
    let dbar: Vec<f64> = groups.iter().map(|g| g.iter().map(|r| r[1] - r[0]).sum::<f64>() / g.len() as f64).collect();
    let ss_within_err: f64 = groups
        .iter()
        .zip(&dbar)
        .map(|(g, m)| g.iter().map(|r| (r[1] - r[0] - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / 2.0;
    let d_all = (n1 as f64 * dbar[0] + n2 as f64 * dbar[1]) / n;
    let ss_inter = (n1 as f64 * (dbar[0] - d_all).powi(2) + n2 as f64 * (dbar[1] - d_all).powi(2)) / 2.0;
    let unweighted = (dbar[0] + dbar[1]) / 2.0;
    let h = 2.0 / (1.0 / n1 as f64 + 1.0 / n2 as f64);
    let ss_cond = h * unweighted.powi(2);

    // between-subject stratum, on subject means
    let mbar: Vec<f64> =
        groups.iter().map(|g| g.iter().map(|r| (r[0] + r[1]) / 2.0).sum::<f64>() / g.len() as f64).collect();
    let ss_between_err: f64 = 2.0
        * groups
            .iter()
            .zip(&mbar)
            .map(|(g, m)| g.iter().map(|r| ((r[0] + r[1]) / 2.0 - m).powi(2)).sum::<f64>())
            .sum::<f64>();
    let m_all = (n1 as f64 * mbar[0] + n2 as f64 * mbar[1]) / n;
    let ss_group = 2.0 * (n1 as f64 * (mbar[0] - m_all).powi(2) + n2 as f64 * (mbar[1] - m_all).powi(2));

    if ss_within_err == 0.0 || ss_between_err == 0.0 {
        return Err(Error::ZeroVariance("an error stratum has no variance".into()));
    }
    let grand = groups.iter().flat_map(|g| g.iter()).flatten().sum::<f64>() / (2.0 * n);
    let ss_total: f64 = groups.iter().flat_map(|g| g.iter()).flatten().map(|v| (v - grand).powi(2)).sum();
    let count = n1 + n2;
    Ok(MixedAnova {
        condition: f_result(ss_cond, ss_within_err, df_err, count),
        group: f_result(ss_group, ss_between_err, df_err, count),
        interaction: f_result(ss_inter, ss_within_err, df_err, count),
        interaction_eta_squared: ss_inter / ss_total,
    })
}
