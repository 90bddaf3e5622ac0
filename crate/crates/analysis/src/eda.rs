//! Continuous decomposition of skin conductance into a smooth tonic level and
//! a nonnegative phasic driver.
//!
//! The signal is modelled as `B c + K d` where `B` is a cubic B-spline basis
//! with uniformly spaced knots, `K` convolves with the Bateman response and
//! `d >= 0` is the driver in µS per sample. For a fixed driver the tonic
//! coefficients have a closed form, so the solver only iterates on `d`
//! (accelerated projected gradient with adaptive restart).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use slowbeat_core::eda::BatemanIrf;
use slowbeat_core::sim::Scr;
use slowbeat_core::{ChannelKind, Signal};

use crate::error::{Error, Result};

pub const SCR_THRESHOLD_US: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdaConfig {
    /// Working rate after decimation, Hz.
    pub target_fs: f64,
    pub knot_spacing_s: f64,
    /// Weight of the squared second differences of the spline coefficients.
    pub smoothness: f64,
    /// L1 weight on the driver.
    pub sparsity: f64,
    pub max_iter: usize,
    /// Stop once the reconstruction moves by less than this fraction of the
    /// signal range over one iteration.
    pub tol: f64,
    pub irf: BatemanIrf,
}

impl Default for CdaConfig {
    fn default() -> Self {
        CdaConfig {
            target_fs: 10.0,
            knot_spacing_s: 10.0,
            smoothness: 1.0,
            sparsity: 1e-4,
            max_iter: 20_000,
            tol: 1e-7,
            irf: BatemanIrf::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaDecomposition {
    pub tonic: Signal,
    /// µS/s, nonnegative.
    pub driver: Signal,
    pub scrs: Vec<Scr>,
    pub residual_rms: f64,
    /// Max minus min of the decimated input.
    pub range: f64,
    pub iterations: usize,
}

impl EdaDecomposition {
    pub fn tonic_mean(&self) -> f64 {
        self.tonic.samples.iter().sum::<f64>() / self.tonic.len().max(1) as f64
    }

    /// Tonic plus the driver convolved with the response, on the tonic grid.
    pub fn reconstruction(&self, irf: &BatemanIrf) -> Vec<f64> {
        let conv = Conv::new(irf, self.driver.fs);
        let d: Vec<f64> = self.driver.samples.iter().map(|v| v / self.driver.fs).collect();
        let mut y = vec![0.0; d.len()];
        conv.apply(&d, &mut y);
        y.iter().zip(&self.tonic.samples).map(|(a, b)| a + b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrStats {
    pub count: usize,
    /// `None` when nothing passed the threshold.
    pub mean_amplitude: Option<f64>,
}

/// SCRs with amplitude at or above `threshold`.
pub fn scr_stats(scrs: &[Scr], threshold: f64) -> ScrStats {
    let kept: Vec<f64> = scrs.iter().map(|s| s.amplitude).filter(|&a| a >= threshold).collect();
    let mean_amplitude = (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64);
    ScrStats { count: kept.len(), mean_amplitude }
}

/// Second-order recursive form of the sampled Bateman response,
/// `h[n] = scale (r2^n - r1^n)`.
struct Conv {
    a1: f64,
    a2: f64,
    g: f64,
}

impl Conv {
    fn new(irf: &BatemanIrf, fs: f64) -> Self {
        let r1 = (-1.0 / (fs * irf.tau1())).exp();
        let r2 = (-1.0 / (fs * irf.tau2())).exp();
        // h[1] = scale (r2 - r1) is the input gain of the recursion
        Conv { a1: r1 + r2, a2: r1 * r2, g: irf.eval(1.0 / fs) }
    }

    fn apply(&self, d: &[f64], y: &mut [f64]) {
        let (mut y1, mut y2) = (0.0, 0.0);
        let mut prev_d = 0.0;
        for (out, &di) in y.iter_mut().zip(d) {
            let v = self.a1 * y1 - self.a2 * y2 + self.g * prev_d;
            *out = v;
            y2 = y1;
            y1 = v;
            prev_d = di;
        }
    }

    fn apply_t(&self, z: &[f64], w: &mut [f64]) {
        let (mut w1, mut w2) = (0.0, 0.0);
        let mut next_z = 0.0;
        for (out, &zi) in w.iter_mut().zip(z).rev() {
            let v = self.a1 * w1 - self.a2 * w2 + self.g * next_z;
            *out = v;
            w2 = w1;
            w1 = v;
            next_z = zi;
        }
    }

    /// Sum of the taps; bounds the operator norm.
    fn l1(&self) -> f64 {
        // H(1) of g z^-1 / (1 - a1 z^-1 + a2 z^-2)
        self.g / (1.0 - self.a1 + self.a2)
    }
}

/// Uniform cubic B-spline basis evaluated on the sample grid.
struct Spline {
    first: Vec<usize>,
    weights: Vec<[f64; 4]>,
    m: usize,
    chol: Cholesky<f64, Dyn>,
}

impl Spline {
    fn new(n: usize, spacing: f64, smoothness: f64) -> Result<Self> {
        let intervals = (((n - 1) as f64 / spacing).ceil() as usize).max(1);
        let m = intervals + 3;
        let mut first = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for j in 0..n {
            let u = j as f64 / spacing;
            let k = (u.floor() as usize).min(intervals - 1);
            let s = u - k as f64;
            let s2 = s * s;
            let s3 = s2 * s;
            first.push(k);
            weights.push([
                (1.0 - s).powi(3) / 6.0,
                (3.0 * s3 - 6.0 * s2 + 4.0) / 6.0,
                (-3.0 * s3 + 3.0 * s2 + 3.0 * s + 1.0) / 6.0,
                s3 / 6.0,
            ]);
        }
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (k, w) in first.iter().zip(&weights) {
            for p in 0..4 {
                for q in 0..4 {
                    a[(k + p, k + q)] += w[p] * w[q];
                }
            }
        }
        let lambda = smoothness * spacing;
        for r in 0..m.saturating_sub(2) {
            let row = [1.0, -2.0, 1.0];
            for p in 0..3 {
                for q in 0..3 {
                    a[(r + p, r + q)] += lambda * row[p] * row[q];
                }
            }
        }
        let chol = Cholesky::new(a).ok_or_else(|| Error::InvalidInput("tonic system is singular".into()))?;
        Ok(Spline { first, weights, m, chol })
    }

    fn coefficients(&self, r: &[f64]) -> DVector<f64> {
        let mut bt = DVector::<f64>::zeros(self.m);
        for ((k, w), &v) in self.first.iter().zip(&self.weights).zip(r) {
            for p in 0..4 {
                bt[k + p] += w[p] * v;
            }
        }
        self.chol.solve(&bt)
    }

    fn eval(&self, c: &DVector<f64>, out: &mut [f64]) {
        for ((o, k), w) in out.iter_mut().zip(&self.first).zip(&self.weights) {
            *o = (0..4).map(|p| w[p] * c[k + p]).sum();
        }
    }
}

pub fn eda_decompose(signal: &Signal) -> Result<EdaDecomposition> {
    eda_decompose_with(signal, &CdaConfig::default())
}

pub fn eda_decompose_with(signal: &Signal, cfg: &CdaConfig) -> Result<EdaDecomposition> {
    signal.expect_kind(ChannelKind::Eda)?;
    if signal.fs < 10.0 {
        return Err(Error::InvalidInput(format!("EDA sampled at {} Hz, need 10", signal.fs)));
    }
    if signal.duration() < 60.0 {
        return Err(Error::InsufficientData(format!("{:.1} s of EDA, need 60", signal.duration())));
    }
    if signal.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("EDA contains non-finite samples".into()));
    }
    let sig = signal.downsample(cfg.target_fs)?;
    let fs = sig.fs;
    let s = &sig.samples;
    let n = s.len();
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;

    let conv = Conv::new(&cfg.irf, fs);
    let spline = Spline::new(n, cfg.knot_spacing_s * fs, cfg.smoothness)?;
    let lip = conv.l1().powi(2);
    let step = 1.0 / lip;
    let stop = cfg.tol * range.max(1e-12);

    let mut x = vec![0.0; n];
    let mut x_prev = vec![0.0; n];
    let mut yk = vec![0.0; n];
    let mut kd = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let mut tonic = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut moved = vec![0.0; n];
    let mut t_mom = 1.0f64;
    let mut iterations = 0;
    let mut converged = range == 0.0;

    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        conv.apply(&yk, &mut kd);
        for j in 0..n {
            resid[j] = s[j] - kd[j];
        }
        let c = spline.coefficients(&resid);
        spline.eval(&c, &mut tonic);
        for j in 0..n {
            resid[j] -= tonic[j];
        }
        conv.apply_t(&resid, &mut grad);
        x_prev.copy_from_slice(&x);
        for j in 0..n {
            x[j] = (yk[j] + step * (grad[j] - cfg.sparsity)).max(0.0);
        }
        // restart momentum when it points uphill
        let mut dot = 0.0;
        for j in 0..n {
            moved[j] = x[j] - x_prev[j];
            dot += (yk[j] - x[j]) * moved[j];
        }
        let t_next = if dot > 0.0 {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * t_mom * t_mom).sqrt()) / 2.0
        };
        let beta = if dot > 0.0 { 0.0 } else { (t_mom - 1.0) / t_next };
        t_mom = t_next;
        for j in 0..n {
            yk[j] = x[j] + beta * moved[j];
        }
        conv.apply(&moved, &mut kd);
        let change = kd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if change <= stop && iterations > 1 {
            converged = true;
        }
    }

    conv.apply(&x, &mut kd);
    for j in 0..n {
        resid[j] = s[j] - kd[j];
    }
    let c = spline.coefficients(&resid);
    spline.eval(&c, &mut tonic);
    let residual_rms =
        ((0..n).map(|j| (resid[j] - tonic[j]).powi(2)).sum::<f64>() / n as f64).sqrt();

    if !converged {
        return Err(Error::NonConvergence { iterations, residual_rms, range });
    }

    let scrs = extract_scrs(&x, &sig);
    let t0 = sig.t0;
    let mk = |samples: Vec<f64>, units: &str| Signal {
        kind: ChannelKind::Eda,
        fs,
        t0,
        units: units.to_string(),
        samples,
    };
    Ok(EdaDecomposition {
        tonic: mk(tonic, "uS"),
        driver: mk(x.iter().map(|v| v * fs).collect(), "uS/s"),
        scrs,
        residual_rms,
        range,
        iterations,
    })
}

/// One SCR per driver burst. Bursts are runs of positive driver, split again
/// at valleys deeper than a fifth of the smaller neighbouring maximum.
fn extract_scrs(d: &[f64], grid: &Signal) -> Vec<Scr> {
    let peak = d.iter().copied().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let floor = peak * 1e-6;
    let mut out = Vec::new();
    let mut j = 0;
    while j < d.len() {
        if d[j] <= floor {
            j += 1;
            continue;
        }
        let start = j;
        while j < d.len() && d[j] > floor {
            j += 1;
        }
        split_burst(&d[start..j], start, grid, &mut out);
    }
    out
}

fn split_burst(seg: &[f64], offset: usize, grid: &Signal, out: &mut Vec<Scr>) {
    let maxima: Vec<usize> = (0..seg.len())
        .filter(|&i| {
            let l = if i == 0 { 0.0 } else { seg[i - 1] };
            let r = if i + 1 == seg.len() { 0.0 } else { seg[i + 1] };
            seg[i] >= l && seg[i] > r
        })
        .collect();
    // merge maxima separated by shallow valleys
    let mut cuts = vec![0usize];
    let mut keep_peak = maxima[0];
    for &m in &maxima[1..] {
        let (vi, vv) = (keep_peak..m).map(|i| (i, seg[i])).fold((keep_peak, f64::INFINITY), |a, b| {
            if b.1 < a.1 {
                b
            } else {
                a
            }
        });
        if vv < 0.2 * seg[keep_peak].min(seg[m]) {
            cuts.push(vi);
            keep_peak = m;
        } else if seg[m] > seg[keep_peak] {
            keep_peak = m;
        }
    }
    cuts.push(seg.len());
    for w in cuts.windows(2) {
        let part = &seg[w[0]..w[1]];
        let amplitude: f64 = part.iter().sum();
        let arg = part.iter().enumerate().fold(0, |b, (i, &v)| if v > part[b] { i } else { b });
        out.push(Scr { onset: grid.time_at(offset + w[0] + arg), amplitude });
    }
}
