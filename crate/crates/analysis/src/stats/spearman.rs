use super::rank::midranks;
use super::{t_p, Alternative, PMethod, TestResult};
use crate::error::{Error, Result};

/// Largest sample tested by full permutation.
pub const SPEARMAN_EXACT_MAX_N: usize = 8;

/// Rank correlation (Pearson on mid-ranks). The statistic is ρ.
pub fn spearman(x: &[f64], y: &[f64], tail: Alternative) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("samples of length {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("Spearman needs 4 pairs, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let rho = pearson(&rx, &ry)?;
    let (p, method) = if n <= SPEARMAN_EXACT_MAX_N {
        (permutation_p(&rx, &ry, tail), PMethod::Exact)
    } else {
        let df = (n - 2) as f64;
        let denom = 1.0 - rho * rho;
        let t = if denom <= 0.0 { rho.signum() * f64::INFINITY } else { rho * (df / denom).sqrt() };
        (t_p(t, df, tail), PMethod::Asymptotic)
    };
    let mut r = TestResult::new(rho, p, tail, n);
    r.method = method;
    r.df = Some(((n - 2) as f64, f64::NAN));
    Ok(r)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance("constant input to correlation".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Fraction of the n! pairings at least as extreme, on integer doubled ranks
/// so that ties with the observed value are counted exactly.
fn permutation_p(rx: &[f64], ry: &[f64], tail: Alternative) -> f64 {
    let a: Vec<i64> = rx.iter().map(|r| (2.0 * r).round() as i64).collect();
    let mut b: Vec<i64> = ry.iter().map(|r| (2.0 * r).round() as i64).collect();
    let n = a.len() as i64;
    let offset = a.iter().sum::<i64>() * b.iter().sum::<i64>();
    let centred = |b: &[i64]| n * a.iter().zip(b).map(|(x, y)| x * y).sum::<i64>() - offset;
    let obs = centred(&b);
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut visit = |b: &[i64]| {
        let c = centred(b);
        let extreme = match tail {
            Alternative::TwoSided => c.abs() >= obs.abs(),
            Alternative::Greater => c >= obs,
            Alternative::Less => c <= obs,
        };
        hits += extreme as u64;
        total += 1;
    };
    // Heap's algorithm, iterative
    let len = b.len();
    let mut c = vec![0usize; len];
    visit(&b);
    let mut i = 0;
    while i < len {
        if c[i] < i {
            if i % 2 == 0 {
                b.swap(0, i);
            } else {
                b.swap(c[i], i);
            }
            visit(&b);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}
