//! Second-order IIR sections (RBJ cookbook, Butterworth Q).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    // direct form II transposed state
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn from_raw(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Biquad {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: a1 / a0,
            a2: a2 / a0,
            z1: 0.0,
            z2: 0.0,
        }
    }

    pub fn lowpass(fs: f64, cutoff: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * FRAC_1_SQRT_2);
        Self::from_raw(
            (1.0 - c) / 2.0,
            1.0 - c,
            (1.0 - c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    pub fn highpass(fs: f64, cutoff: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * FRAC_1_SQRT_2);
        Self::from_raw(
            (1.0 + c) / 2.0,
            -(1.0 + c),
            (1.0 + c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    pub fn reset(&mut self) {
        self.z1 = 0.0;
        self.z2 = 0.0;
    }

    /// Primes the state as if `x` had been applied forever.
    pub fn settle_to(&mut self, x: f64) {
        let y = self.dc_gain() * x;
        self.z2 = self.b2 * x - self.a2 * y;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
    }
}

/// A chain of sections applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade(pub Vec<Biquad>);

impl Cascade {
    pub fn bandpass(fs: f64, low: f64, high: f64) -> Self {
        Cascade(vec![Biquad::highpass(fs, low), Biquad::lowpass(fs, high)])
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.0.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    /// Energy of the impulse response, i.e. the white-noise power gain.
    pub fn noise_power_gain(&self, len: usize) -> f64 {
        let mut probe = self.clone();
        probe.0.iter_mut().for_each(Biquad::reset);
        (0..len)
            .map(|i| probe.process(if i == 0 { 1.0 } else { 0.0 }).powi(2))
            .sum()
    }

    /// Primes every section for a constant input `x`.
    pub fn settle_to(&mut self, x: f64) {
        let mut level = x;
        for s in self.0.iter_mut() {
            s.settle_to(level);
            level *= s.dc_gain();
        }
    }

    /// Forward-backward application (zero phase). Offline use only.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let mut y: Vec<f64> = Vec::with_capacity(x.len());
        let mut chain = self.clone();
        chain.settle_to(x[0]);
        for &v in x {
            y.push(chain.process(v));
        }
        let mut back = self.clone();
        back.settle_to(*y.last().unwrap());
        let mut out: Vec<f64> = y.iter().rev().map(|&v| back.process(v)).collect();
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_gain(mut f: Cascade, fs: f64, freq: f64) -> f64 {
        let n = (fs * 4.0) as usize;
        let mut peak: f64 = 0.0;
        for i in 0..n {
            let y = f.process((2.0 * PI * freq * i as f64 / fs).sin());
            if i > n / 2 {
                peak = peak.max(y.abs());
            }
        }
        peak
    }

    #[test]
    fn butterworth_corner_is_minus_3db() {
        let g = tone_gain(Cascade(vec![Biquad::lowpass(1000.0, 35.0)]), 1000.0, 35.0);
        assert!((g - FRAC_1_SQRT_2).abs() < 0.01, "{g}");
        let g = tone_gain(Cascade(vec![Biquad::highpass(1000.0, 5.0)]), 1000.0, 5.0);
        assert!((g - FRAC_1_SQRT_2).abs() < 0.01, "{g}");
    }

    #[test]
    fn bandpass_rejects_wander() {
        let g = tone_gain(Cascade::bandpass(1000.0, 5.0, 25.0), 1000.0, 0.5);
        assert!(g < 0.02, "{g}");
        let g = tone_gain(Cascade::bandpass(1000.0, 5.0, 25.0), 1000.0, 12.0);
        assert!(g > 0.8, "{g}");
    }

    #[test]
    fn filtfilt_preserves_dc() {
        let f = Cascade(vec![Biquad::lowpass(100.0, 2.0)]);
        let y = f.filtfilt(&vec![3.0; 500]);
        assert!(y.iter().all(|v| (v - 3.0).abs() < 1e-9));
    }
}
