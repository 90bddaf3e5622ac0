use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{require, Result};
use crate::rng::rng_from_seed;
use crate::signal::{ChannelKind, Signal};

/// Relative cycle-length jitter.
const PERIOD_JITTER: f64 = 0.06;

fn cycle_bounds(rate: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    require(rate.is_finite() && (5.0..=60.0).contains(&rate), "rate", || {
        format!("{rate} cycles/min outside [5, 60]")
    })?;
    require(duration.is_finite() && duration > 0.0, "duration", || format!("{duration} s"))?;
    let n = (rate * duration / 60.0).round().max(1.0) as usize;
    let mut rng = rng_from_seed(seed);
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (1.0 + PERIOD_JITTER * z.clamp(-3.0, 3.0)).max(0.5)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut bounds = Vec::with_capacity(n + 1);
    let mut t = 0.0;
    bounds.push(t);
    for r in raw {
        t += r * duration / total;
        bounds.push(t);
    }
    Ok(bounds)
}

/// Inspiration peaks: the midpoint of each breathing cycle.
pub fn inspiration_times(rate: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    let b = cycle_bounds(rate, duration, seed)?;
    Ok(b.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
}

/// Respiration belt trace with `round(rate × duration / 60)` cycles, one
/// inspiration maximum per cycle.
pub fn synth_respiration(rate: f64, fs: f64, duration: f64, seed: u64) -> Result<Signal> {
    require(fs.is_finite() && fs >= 10.0, "fs", || format!("{fs} Hz is below 10 Hz"))?;
    let b = cycle_bounds(rate, duration, seed)?;
    let n = (duration * fs).round() as usize;
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = i as f64 / fs;
        while k + 2 < b.len() && t >= b[k + 1] {
            k += 1;
        }
        let phase = (t - b[k]) / (b[k + 1] - b[k]);
        out.push(-(2.0 * std::f64::consts::PI * phase).cos());
    }
    Ok(Signal::new(ChannelKind::Respiration, fs, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_maxima(x: &[f64]) -> usize {
        x.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
    }

    #[test]
    fn cycle_count() {
        let s = synth_respiration(19.76, 50.0, 480.0, 2).unwrap();
        let n = local_maxima(&s.samples) as i64;
        assert!((n - 158).abs() <= 1, "{n}");
        assert_eq!(inspiration_times(19.76, 480.0, 2).unwrap().len(), 158);
    }

    #[test]
    fn rate_bounds() {
        assert!(synth_respiration(4.0, 50.0, 60.0, 0).is_err());
        assert!(synth_respiration(18.0, 5.0, 60.0, 0).is_err());
    }
}
