//! Synthetic demand with known dynamics: a daily sinusoidal envelope over
//! drifting Gaussian bumps plus i.i.d. Gaussian noise. The noise-free rate is
//! the Bayes-optimal point forecast, which gives accuracy tests a floor.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ExternalFactorFrame;
use crate::stmap::{StMap, StSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub row: f64,
    pub col: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthProcess {
    pub rows: usize,
    pub cols: usize,
    pub amplitude: f64,
    pub period: usize,
    pub bumps: Vec<Bump>,
    /// Bump translation in (rows, cols) per slot; positions wrap at the edges.
    pub drift: (f64, f64),
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthProcess {
    fn default() -> Self {
        Self {
            rows: 9,
            cols: 9,
            amplitude: 1.0,
            period: 24,
            bumps: vec![
                Bump {
                    row: 2.0,
                    col: 3.0,
                    width: 1.5,
                },
                Bump {
                    row: 6.0,
                    col: 6.0,
                    width: 1.0,
                },
            ],
            drift: (0.0, 0.05),
            noise_sigma: 0.05,
            seed: 7,
        }
    }
}

fn wrapped_distance(a: f64, b: f64, extent: usize) -> f64 {
    let n = extent as f64;
    let d = (a - b).rem_euclid(n);
    d.min(n - d)
}

impl SynthProcess {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("grid must be non-empty, got {}×{}", self.rows, self.cols));
        }
        if self.period < 2 {
            return bad(format!("period must be at least 2, got {}", self.period));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and ≥ 0, got {}", self.noise_sigma));
        }
        if !self.amplitude.is_finite() || !self.drift.0.is_finite() || !self.drift.1.is_finite() {
            return bad("amplitude and drift must be finite".into());
        }
        if let Some(b) = self.bumps.iter().find(|b| !(b.width > 0.0)) {
            return bad(format!("bump widths must be positive, got {}", b.width));
        }
        Ok(())
    }

    /// Daily envelope `(1 + sin(2πt / period)) / 2`.
    pub fn envelope(&self, t: u64) -> f64 {
        let phase = (t % self.period as u64) as f64 / self.period as f64;
        (1.0 + (2.0 * PI * phase).sin()) / 2.0
    }

    fn bump_field(&self, t: f64) -> Vec<f64> {
        let mut field = vec![0.0; self.rows * self.cols];
        for b in &self.bumps {
            let cr = b.row + self.drift.0 * t;
            let cc = b.col + self.drift.1 * t;
            for r in 0..self.rows {
                let dr = wrapped_distance(r as f64, cr, self.rows);
                for c in 0..self.cols {
                    let dc = wrapped_distance(c as f64, cc, self.cols);
                    field[r * self.cols + c] +=
                        (-(dr * dr + dc * dc) / (2.0 * b.width * b.width)).exp();
                }
            }
        }
        field
    }

    /// Noise-free rate at slot `t`.
    pub fn oracle_rate(&self, t: u64) -> StMap {
        let env = self.amplitude * self.envelope(t);
        let values = self.bump_field(t as f64).into_iter().map(|v| env * v).collect();
        StMap {
            rows: self.rows,
            cols: self.cols,
            slot: t as i64,
            values,
        }
    }

    /// Observed map at slot `t`: rate plus noise, floored at zero. The noise
    /// stream is keyed by `(seed, t)` so any slot can be regenerated alone.
    pub fn sample(&self, t: u64) -> StMap {
        let mut map = self.oracle_rate(t);
        if self.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t);
            let noise = Normal::new(0.0, self.noise_sigma).expect("validated sigma");
            for v in &mut map.values {
                *v += noise.sample(&mut rng);
            }
        }
        for v in &mut map.values {
            *v = v.max(0.0);
        }
        map
    }

    /// PoI stand-in: the bump field at slot 0.
    pub fn poi(&self) -> Vec<f64> {
        self.bump_field(0.0)
    }

    /// Pseudo-weather `[sin, cos]` of the daily phase; odd days are flagged
    /// as weekend.
    pub fn factors(&self, t: u64) -> ExternalFactorFrame {
        let phase = 2.0 * PI * (t % self.period as u64) as f64 / self.period as f64;
        ExternalFactorFrame {
            poi: self.poi(),
            weather: vec![phase.sin(), phase.cos()],
            is_weekend: ((t / self.period as u64) % 2) as f64,
        }
    }

    pub fn generate(&self, num_slots: usize) -> Result<(StSequence, Vec<ExternalFactorFrame>)> {
        self.validate()?;
        if num_slots == 0 {
            return Err(Error::InvalidArgument("num_slots must be at least 1".into()));
        }
        let maps = (0..num_slots as u64).map(|t| self.sample(t)).collect();
        let factors = (0..num_slots as u64).map(|t| self.factors(t)).collect();
        Ok((StSequence::new(self.rows, self.cols, maps)?, factors))
    }
}
