//! Classical forecasters: simple and weighted moving averages, per-region
//! autoregressive least squares, and a fully connected network.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Forecaster;
use crate::error::{Error, Result};
use crate::stmap::{MinMaxScaler, StMap, WindowedDataset};
use crate::tensor::layers::{init_dense, Forward, Mode, ParamStore};
use crate::tensor::Tensor;
use crate::trainer::sgd_step;

#[derive(Debug, Clone)]
pub enum Baseline {
    /// Mean of the last `k` maps.
    Sma(usize),
    /// Recency-weighted mean of the last `k` maps, weights `1..=k` normalized.
    Wma(usize),
    Ols(OlsModel),
    Mlp(MlpBaseline),
}

fn tail(history: &[StMap], k: usize) -> Result<&[StMap]> {
    if k == 0 {
        return Err(Error::InvalidArgument("lag count must be at least 1".into()));
    }
    if history.len() < k {
        return Err(Error::SequenceTooShort {
            needed: k,
            available: history.len(),
        });
    }
    Ok(&history[history.len() - k..])
}

fn weighted_mean(maps: &[StMap], weights: &[f64]) -> StMap {
    let last = &maps[maps.len() - 1];
    let total: f64 = weights.iter().sum();
    let mut values = vec![0.0; last.values.len()];
    for (m, w) in maps.iter().zip(weights) {
        for (v, x) in values.iter_mut().zip(&m.values) {
            *v += w * x;
        }
    }
    values.iter_mut().for_each(|v| *v /= total);
    StMap {
        rows: last.rows,
        cols: last.cols,
        slot: last.slot + 1,
        values,
    }
}

impl Baseline {
    pub fn label(&self) -> String {
        match self {
            Self::Sma(k) => format!("sma({k})"),
            Self::Wma(k) => format!("wma({k})"),
            Self::Ols(m) => format!("ols({})", m.lags),
            Self::Mlp(_) => "mlp".into(),
        }
    }

    /// Next-slot map from a raw-unit history (most recent last).
    pub fn predict_next(&self, history: &[StMap]) -> Result<StMap> {
        match self {
            Self::Sma(k) => {
                let h = tail(history, *k)?;
                Ok(weighted_mean(h, &vec![1.0; *k]))
            }
            Self::Wma(k) => {
                let h = tail(history, *k)?;
                let w: Vec<f64> = (1..=*k).map(|i| i as f64).collect();
                Ok(weighted_mean(h, &w))
            }
            Self::Ols(m) => m.predict(history),
            Self::Mlp(m) => m.predict(history),
        }
    }
}

impl Forecaster for Baseline {
    fn name(&self) -> String {
        self.label()
    }

    fn forecast(&self, data: &WindowedDataset, idx: &[usize], steps: usize) -> Result<Vec<Vec<StMap>>> {
        idx.iter()
            .map(|&i| {
                let mut hist = data.history(i).to_vec();
                let mut out = Vec::with_capacity(steps);
                for _ in 0..steps {
                    let next = self.predict_next(&hist)?;
                    hist.remove(0);
                    hist.push(next.clone());
                    out.push(next);
                }
                Ok(out)
            })
            .collect()
    }
}

/// Least-squares coefficients for `x · c ≈ y`, rows of `x` being samples.
/// Columns that are (numerically) linear combinations of earlier ones get a
/// zero coefficient, so collinear designs still reach the exact fit.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::shape("ols_fit", &[y.len()], &[n]));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("ragged design matrix".into()));
    }
    // Modified Gram-Schmidt with re-orthogonalization; keeps Q columns and R.
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut v: Vec<f64> = x.iter().map(|row| row[j]).collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for (qi, &col) in q.iter().zip(&kept) {
                let d: f64 = qi.iter().zip(&v).map(|(a, b)| a * b).sum();
                r[col][j] += d;
                v.iter_mut().zip(qi).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1e-10 * norm0.max(1e-300) || norm == 0.0 {
            continue;
        }
        r[j][j] = norm;
        v.iter_mut().for_each(|a| *a /= norm);
        q.push(v);
        kept.push(j);
    }
    let qty: Vec<f64> = q
        .iter()
        .map(|qi| qi.iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    let mut coef = vec![0.0; p];
    for (a, &j) in kept.iter().enumerate().rev() {
        let mut s = qty[a];
        for &l in &kept[a + 1..] {
            s -= r[j][l] * coef[l];
        }
        coef[j] = s / r[j][j];
    }
    Ok(coef)
}

/// Per-region autoregression on the last `lags` values plus an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsModel {
    pub lags: usize,
    /// One `[intercept, oldest lag, ..., newest lag]` row per region.
    pub coef: Vec<Vec<f64>>,
}

impl OlsModel {
    pub fn fit(train: &WindowedDataset, lags: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::NoTrainingData);
        }
        if lags == 0 || lags > train.window() {
            return Err(Error::InvalidArgument(format!(
                "lags must lie in 1..={}, got {lags}",
                train.window()
            )));
        }
        let regions = train.target(0).values.len();
        let mut coef = Vec::with_capacity(regions);
        for r in 0..regions {
            let mut x = Vec::with_capacity(train.len());
            let mut y = Vec::with_capacity(train.len());
            for i in 0..train.len() {
                let h = train.history(i);
                let mut row = vec![1.0];
                row.extend(h[h.len() - lags..].iter().map(|m| m.values[r]));
                x.push(row);
                y.push(train.target(i).values[r]);
            }
            coef.push(ols_fit(&x, &y)?);
        }
        Ok(Self { lags, coef })
    }

    pub fn predict(&self, history: &[StMap]) -> Result<StMap> {
        let h = tail(history, self.lags)?;
        let last = &h[h.len() - 1];
        if last.values.len() != self.coef.len() {
            return Err(Error::shape("ols predict", &[self.coef.len()], &[last.values.len()]));
        }
        let values = self
            .coef
            .iter()
            .enumerate()
            .map(|(r, c)| c[0] + h.iter().zip(&c[1..]).map(|(m, b)| b * m.values[r]).sum::<f64>())
            .collect();
        Ok(StMap {
            rows: last.rows,
            cols: last.cols,
            slot: last.slot + 1,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128, 64, 64],
            epochs: 20,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Dense network from the flattened, normalized history to the next map.
#[derive(Debug, Clone)]
pub struct MlpBaseline {
    pub lags: usize,
    pub layers: usize,
    pub params: ParamStore,
    pub scaler: MinMaxScaler,
}

impl MlpBaseline {
    fn input(&self, history: &[&[StMap]]) -> Result<Tensor> {
        let mut data = Vec::new();
        for h in history {
            for m in tail(h, self.lags)? {
                data.extend(m.values.iter().map(|&v| self.scaler.normalize_value(v)));
            }
        }
        let width = data.len() / history.len().max(1);
        Tensor::new(vec![history.len(), width], data)
    }

    fn forward(&self, fwd: &mut Forward, x: Tensor) -> Result<crate::tensor::Var> {
        let mut h = fwd.input(x);
        for l in 0..self.layers {
            h = fwd.dense(&format!("mlp{l}"), h)?;
            h = fwd.leaky_relu(h)?;
        }
        fwd.dense("mlp.out", h)
    }

    /// Trains with mean squared error on the normalized next map.
    pub fn fit(train: &WindowedDataset, lags: usize, cfg: &MlpConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::NoTrainingData);
        }
        if lags == 0 || lags > train.window() {
            return Err(Error::InvalidArgument(format!(
                "lags must lie in 1..={}, got {lags}",
                train.window()
            )));
        }
        if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "MLP batch_size and learning_rate must be positive".into(),
            ));
        }
        let first = train.start(0);
        let last = train.start(train.len() - 1) + train.window();
        let scaler = MinMaxScaler::fit(&train.sequence().maps()[first..=last])?;
        let regions = train.target(0).values.len();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        let mut w = lags * regions;
        for (l, &h) in cfg.hidden.iter().enumerate() {
            init_dense(&mut params, &format!("mlp{l}"), w, h, &mut rng);
            w = h;
        }
        init_dense(&mut params, "mlp.out", w, regions, &mut rng);
        let mut model = Self {
            lags,
            layers: cfg.hidden.len(),
            params,
            scaler,
        };

        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut step = 0u64;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for idx in order.chunks(cfg.batch_size) {
                let hist: Vec<&[StMap]> = idx.iter().map(|&i| train.history(i)).collect();
                let x = model.input(&hist)?;
                let target: Vec<f64> = idx
                    .iter()
                    .flat_map(|&i| train.target(i).values.iter().map(|&v| scaler.normalize_value(v)))
                    .collect();
                let grads = {
                    let mut fwd = Forward::new(&model.params, Mode::Train, None);
                    let out = model.forward(&mut fwd, x)?;
                    let y = fwd.input(Tensor::new(vec![idx.len(), regions], target)?);
                    let d = fwd.graph.sub(out, y)?;
                    let sq = fwd.graph.square(d)?;
                    let loss = fwd.graph.mean(sq)?;
                    fwd.param_grads(loss, |_| true)?
                };
                sgd_step(&mut model.params, &grads, cfg.learning_rate, None, step)?;
                step += 1;
            }
        }
        Ok(model)
    }

    pub fn predict(&self, history: &[StMap]) -> Result<StMap> {
        let x = self.input(&[history])?;
        let mut fwd = Forward::new(&self.params, Mode::Infer, None);
        let out = self.forward(&mut fwd, x)?;
        let last = &history[history.len() - 1];
        Ok(StMap {
            rows: last.rows,
            cols: last.cols,
            slot: last.slot + 1,
            values: fwd
                .value(out)
                .data()
                .iter()
                .map(|&v| self.scaler.denormalize_value(v))
                .collect(),
        })
    }
}
