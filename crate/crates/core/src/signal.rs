//! Uniformly sampled single-channel time series.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Ecg,
    Respiration,
    Eda,
}

impl ChannelKind {
    pub fn default_units(self) -> &'static str {
        match self {
            ChannelKind::Ecg => "mV",
            ChannelKind::Respiration => "a.u.",
            ChannelKind::Eda => "uS",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChannelKind::Ecg => "ecg",
            ChannelKind::Respiration => "respiration",
            ChannelKind::Eda => "eda",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub kind: ChannelKind,
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Time of the first sample in seconds.
    pub t0: f64,
    pub units: String,
    pub samples: Vec<f64>,
}

impl Signal {
    pub fn new(kind: ChannelKind, fs: f64, samples: Vec<f64>) -> Self {
        Signal {
            kind,
            fs,
            t0: 0.0,
            units: kind.default_units().to_string(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.fs
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.time_at(i))
    }

    pub fn expect_kind(&self, kind: ChannelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::WrongChannel {
                expected: kind.to_string(),
                found: self.kind.to_string(),
            })
        }
    }

    /// Block-average decimation to roughly `target_fs`.
    pub fn downsample(&self, target_fs: f64) -> Result<Signal> {
        require(target_fs > 0.0, "target_fs", || format!("{target_fs} Hz"))?;
        let factor = (self.fs / target_fs).round().max(1.0) as usize;
        if factor == 1 {
            return Ok(self.clone());
        }
        let samples = self
            .samples
            .chunks_exact(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        Ok(Signal {
            kind: self.kind,
            fs: self.fs / factor as f64,
            // each output sample sits at the centre of its input block
            t0: self.t0 + (factor as f64 - 1.0) / (2.0 * self.fs),
            units: self.units.clone(),
            samples,
        })
    }

    /// Writes `time_s,value` CSV with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", self.time_at(i), v)?;
        }
        Ok(())
    }

    /// Reads `time_s,value` CSV. The sampling rate is inferred from the
    /// median time step.
    pub fn read_csv<R: BufRead>(r: R, kind: ChannelKind) -> Result<Signal> {
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Csv(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("time")) {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(t), Some(v)) = (parts.next(), parts.next()) else {
                return Err(Error::Csv(format!("line {}: expected `time_s,value`", lineno + 1)));
            };
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("line {}: bad time `{t}`", lineno + 1)))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("line {}: bad value `{v}`", lineno + 1)))?;
            times.push(t);
            samples.push(v);
        }
        if times.len() < 2 {
            return Err(Error::InsufficientData("signal CSV needs at least two rows".into()));
        }
        let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        steps.sort_by(f64::total_cmp);
        let dt = steps[steps.len() / 2];
        if dt <= 0.0 {
            return Err(Error::Csv("time column is not increasing".into()));
        }
        // snap to an integer rate when the CSV rounding blurred it
        let fs = 1.0 / dt;
        let fs = if (fs - fs.round()).abs() < 1e-6 * fs { fs.round() } else { fs };
        Ok(Signal {
            kind,
            fs,
            t0: times[0],
            units: kind.default_units().to_string(),
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let s = Signal::new(ChannelKind::Ecg, 250.0, vec![0.0, 1.5, -0.25, 3.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = Signal::read_csv(buf.as_slice(), ChannelKind::Ecg).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = Signal::read_csv("time_s,value\n0,1\n0.1,x\n".as_bytes(), ChannelKind::Eda).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn downsample_block_means() {
        let s = Signal::new(ChannelKind::Eda, 100.0, (0..100).map(|i| i as f64).collect());
        let d = s.downsample(10.0).unwrap();
        assert_eq!(d.fs, 10.0);
        assert_eq!(d.len(), 10);
        assert_eq!(d.samples[0], 4.5);
        assert!((d.t0 - 0.045).abs() < 1e-12);
    }
}
