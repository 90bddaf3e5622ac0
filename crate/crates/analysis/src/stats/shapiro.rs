use statrs::distribution::{ContinuousCDF, Normal};

use super::{Alternative, TestResult};
use crate::error::{Error, Result};

fn poly(c: &[f64], x: f64) -> f64 {
    let mut ret = c[0];
    if c.len() > 1 {
        let mut p = x * c[c.len() - 1];
        for j in (1..c.len() - 1).rev() {
            p = (p + c[j]) * x;
        }
        ret += p;
    }
    ret
}

/// W statistic with Royston's coefficient and p-value approximations.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if !(3..=50).contains(&n) {
        return Err(Error::InvalidInput(format!("Shapiro-Wilk needs 3..=50 observations, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    if s[n - 1] - s[0] < 1e-19 * s[0].abs().max(1.0) {
        return Err(Error::ZeroVariance("constant sample".into()));
    }
    let norm = Normal::standard();
    let an = n as f64;
    let nn2 = n / 2;
    let mut a = vec![0.0; nn2];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let m: Vec<f64> = (1..=nn2).map(|i| norm.inverse_cdf((i as f64 - 0.375) / (an + 0.25))).collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (i1, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            a[1] = a2;
            (2, ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt())
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in i1..nn2 {
            a[i] = -m[i] / fac;
        }
    }
    let mean = s.iter().sum::<f64>() / an;
    let ssq: f64 = s.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = (0..nn2).map(|i| a[i] * (s[n - 1 - i] - s[i])).sum();
    let w = (num * num / ssq).min(1.0);

    let p = if n == 3 {
        (6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::FRAC_PI_3)).max(0.0)
    } else {
        let w1 = 1.0 - w;
        if w1 <= 0.0 {
            1.0
        } else {
            let mut y = w1.ln();
            let (m, sd) = if n <= 11 {
                let gamma = poly(&[-2.273, 0.459], an);
                if y >= gamma {
                    return Ok(TestResult::new(w, 1e-99, Alternative::TwoSided, n));
                }
                y = -(gamma - y).ln();
                (poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], an), poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp())
            } else {
                let xx = an.ln();
                (poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], xx), poly(&[-0.4803, -0.082676, 0.0030302], xx).exp())
            };
            norm.sf((y - m) / sd)
        }
    };
    Ok(TestResult::new(w, p, Alternative::TwoSided, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_rejected() {
        assert!(matches!(shapiro_wilk(&[2.0; 10]), Err(Error::ZeroVariance(_))));
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn three_points_equally_spaced() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!((r.p - 1.0).abs() < 1e-6);
    }
}
