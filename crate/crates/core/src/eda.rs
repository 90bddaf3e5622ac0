//! Skin-conductance impulse response shared by synthesis and decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{require, Result};

/// Bi-exponential (Bateman) response `exp(-t/tau2) - exp(-t/tau1)`, scaled to a
/// unit peak so that an impulse of weight `a` produces an SCR of amplitude `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IrfConstants", into = "IrfConstants")]
pub struct BatemanIrf {
    tau1: f64,
    tau2: f64,
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct IrfConstants {
    tau1: f64,
    tau2: f64,
}

impl TryFrom<IrfConstants> for BatemanIrf {
    type Error = crate::Error;
    fn try_from(c: IrfConstants) -> Result<Self> {
        BatemanIrf::new(c.tau1, c.tau2)
    }
}

impl From<BatemanIrf> for IrfConstants {
    fn from(b: BatemanIrf) -> Self {
        IrfConstants { tau1: b.tau1, tau2: b.tau2 }
    }
}

impl Default for BatemanIrf {
    fn default() -> Self {
        BatemanIrf::new(0.75, 2.0).expect("default constants are valid")
    }
}

impl BatemanIrf {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self> {
        require(tau1 > 0.0 && tau2 > tau1, "tau", || {
            format!("need 0 < tau1 < tau2, got {tau1}, {tau2}")
        })?;
        let peak_t = Self::peak_time_of(tau1, tau2);
        let peak = (-peak_t / tau2).exp() - (-peak_t / tau1).exp();
        Ok(BatemanIrf { tau1, tau2, scale: 1.0 / peak })
    }

    fn peak_time_of(tau1: f64, tau2: f64) -> f64 {
        (tau2 / tau1).ln() * tau1 * tau2 / (tau2 - tau1)
    }

    /// Rise time constant, seconds.
    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    /// Decay time constant, seconds.
    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn peak_time(&self) -> f64 {
        Self::peak_time_of(self.tau1, self.tau2)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.scale * ((-t / self.tau2).exp() - (-t / self.tau1).exp())
        }
    }

    /// Time after which the response stays below `rel` of its peak.
    pub fn support(&self, rel: f64) -> f64 {
        self.peak_time() + self.tau2 * (1.0 / rel).ln() + self.tau2
    }

    /// Response sampled at `fs` from t = 0 up to the support, first tap at t = 0.
    pub fn kernel(&self, fs: f64, rel: f64) -> Vec<f64> {
        let n = (self.support(rel) * fs).ceil() as usize + 1;
        (0..n).map(|i| self.eval(i as f64 / fs)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_peak() {
        let irf = BatemanIrf::default();
        let p = irf.peak_time();
        assert!((irf.eval(p) - 1.0).abs() < 1e-12);
        assert!(irf.eval(p - 0.01) < 1.0 && irf.eval(p + 0.01) < 1.0);
        assert_eq!(irf.eval(0.0), 0.0);
        assert_eq!(irf.eval(-1.0), 0.0);
    }

    #[test]
    fn support_bounds_tail() {
        let irf = BatemanIrf::default();
        assert!(irf.eval(irf.support(1e-3)) < 1e-3);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(BatemanIrf::new(2.0, 0.75).is_err());
    }
}
