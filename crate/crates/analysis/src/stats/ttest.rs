use super::{mean, t_p, var, Alternative, Effect, EffectKind, TestResult};
use crate::error::{Error, Result};

/// Paired t on `x − y`, with Cohen's d = mean(diff)/sd(diff).
///
/// Identical samples give t = 0 and p = 1; any other constant difference has
/// no variance to test against and is an error.
pub fn paired_t(x: &[f64], y: &[f64], tail: Alternative) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("paired samples of length {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("paired t needs 3 pairs, got {}", x.len())));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    let n = d.len();
    let df = (n - 1) as f64;
    if d.iter().all(|&v| v == 0.0) {
        let mut r = TestResult::new(0.0, if tail == Alternative::TwoSided { 1.0 } else { 0.5 }, tail, n);
        r.df = Some((df, f64::NAN));
        r.effect = Some(Effect { kind: EffectKind::CohenD, value: 0.0 });
        return Ok(r);
    }
    let m = mean(&d);
    let sd = var(&d).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance("paired differences are constant".into()));
    }
    let t = m / (sd / (n as f64).sqrt());
    let mut r = TestResult::new(t, t_p(t, df, tail), tail, n);
    r.df = Some((df, f64::NAN));
    r.effect = Some(Effect { kind: EffectKind::CohenD, value: m / sd });
    Ok(r)
}

/// Student's two-sample t with pooled variance; d uses the pooled sd.
pub fn two_sample_t(a: &[f64], b: &[f64], tail: Alternative) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!("group sizes {} and {}", a.len(), b.len())));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let df = n1 + n2 - 2.0;
    let sp2 = ((n1 - 1.0) * var(a) + (n2 - 1.0) * var(b)) / df;
    if sp2 == 0.0 {
        return Err(Error::ZeroVariance("both groups are constant".into()));
    }
    let diff = mean(a) - mean(b);
    let t = diff / (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt();
    let mut r = TestResult::new(t, t_p(t, df, tail), tail, a.len() + b.len());
    r.df = Some((df, f64::NAN));
    r.effect = Some(Effect { kind: EffectKind::CohenD, value: diff / sp2.sqrt() });
    Ok(r)
}
