use super::rank::midranks;
use super::{normal_p, Alternative, Effect, EffectKind, PMethod, TestResult};
use crate::error::{Error, Result};

/// Largest number of nonzero differences tested with the exact null.
pub const WILCOXON_EXACT_MAX_N: usize = 14;

/// Signed-rank test on `x − y`. The statistic is W⁺, the rank sum of the
/// positive differences; the effect is the matched-pairs rank-biserial
/// correlation (W⁺ − W⁻)/(W⁺ + W⁻). Zero differences are dropped.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], tail: Alternative) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("paired samples of length {} and {}", x.len(), y.len())));
    }
    let all: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    let d: Vec<f64> = all.iter().copied().filter(|&v| v != 0.0).collect();
    let excluded = all.len() - d.len();
    if d.is_empty() {
        return Err(Error::ZeroVariance("all paired differences are zero".into()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, &v)| v > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p, method) = if n <= WILCOXON_EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let w2 = (2.0 * w_plus).round() as usize;
        (exact_p(&doubled, w2, tail), PMethod::Exact)
    } else {
        let mean = total / 2.0;
        let tie_adj: f64 = ties.iter().map(|&t| ((t * t * t - t) as f64) / 48.0).sum();
        let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_adj;
        (normal_p((w_plus - mean) / var.sqrt(), tail), PMethod::Asymptotic)
    };
    let mut r = TestResult::new(w_plus, p, tail, n);
    r.method = method;
    r.excluded = excluded;
    r.effect = Some(Effect { kind: EffectKind::RankBiserial, value: (w_plus - w_minus) / total });
    Ok(r)
}

/// Null distribution of the doubled positive-rank sum over all 2ⁿ sign
/// assignments, by subset-sum counting.
fn exact_p(doubled: &[usize], w2: usize, tail: Alternative) -> f64 {
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let total = (1u64 << doubled.len()) as f64;
    let le = counts[..=w2].iter().sum::<u64>() as f64 / total;
    let ge = counts[w2..].iter().sum::<u64>() as f64 / total;
    match tail {
        Alternative::Greater => ge,
        Alternative::Less => le,
        Alternative::TwoSided => (2.0 * le.min(ge)).min(1.0),
    }
}
