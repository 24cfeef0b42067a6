//! Error metrics, one-step and rollout evaluation, classical baselines and
//! sweep tables.
//!
//! All metrics are measured in raw demand units. Dataset-level numbers pool
//! every region of every map before taking the root (or the mean, for MAE).

mod baselines;
mod sweep;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use baselines::{ols_fit, Baseline, MlpBaseline, MlpConfig, OlsModel};
pub use sweep::{factor_sweep, rollout_table, seq_length_sweep, SweepRow};

use crate::error::{Error, Result};
use crate::ingest::ExternalFactorFrame;
use crate::model::Dgan;
use crate::stmap::{maps_match, StMap, WindowedDataset};
use crate::synth::SynthProcess;

/// `√((1/mn) Σ (x_i − x̂_i)²)`.
pub fn rmse(truth: &StMap, pred: &StMap) -> Result<f64> {
    maps_match(truth, pred)?;
    let sq: f64 = truth
        .values
        .iter()
        .zip(&pred.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / truth.values.len() as f64).sqrt())
}

/// `(1/mn) Σ |x_i − x̂_i|`.
pub fn mae(truth: &StMap, pred: &StMap) -> Result<f64> {
    maps_match(truth, pred)?;
    let s: f64 = truth.values.iter().zip(&pred.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / truth.values.len() as f64)
}

/// `(1/mn) Σ (x_i − x̂_i)`, the literal signed mean; errors can cancel.
pub fn mean_signed_error(truth: &StMap, pred: &StMap) -> Result<f64> {
    maps_match(truth, pred)?;
    let s: f64 = truth.values.iter().zip(&pred.values).map(|(a, b)| a - b).sum();
    Ok(s / truth.values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaeMode {
    #[default]
    Absolute,
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Pool squared / absolute errors over all maps and regions.
    #[default]
    Pooled,
    /// Average the per-map metrics.
    PerMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricOptions {
    pub mae: MaeMode,
    pub pooling: Pooling,
}

/// Running sums for pooled or per-map metrics.
#[derive(Debug, Clone, Default)]
pub struct ErrorAccumulator {
    sq: f64,
    abs: f64,
    signed: f64,
    regions: usize,
    maps: usize,
    per_map_rmse: f64,
    per_map_mae: f64,
    per_map_signed: f64,
}

impl ErrorAccumulator {
    pub fn push(&mut self, truth: &StMap, pred: &StMap) -> Result<()> {
        maps_match(truth, pred)?;
        let n = truth.values.len() as f64;
        let (mut sq, mut abs, mut signed) = (0.0, 0.0, 0.0);
        for (a, b) in truth.values.iter().zip(&pred.values) {
            let d = a - b;
            sq += d * d;
            abs += d.abs();
            signed += d;
        }
        self.sq += sq;
        self.abs += abs;
        self.signed += signed;
        self.regions += truth.values.len();
        self.maps += 1;
        self.per_map_rmse += (sq / n).sqrt();
        self.per_map_mae += abs / n;
        self.per_map_signed += signed / n;
        Ok(())
    }

    pub fn maps(&self) -> usize {
        self.maps
    }

    /// `(rmse, mae)`; zero when nothing was pushed.
    pub fn finish(&self, opts: MetricOptions) -> (f64, f64) {
        if self.maps == 0 {
            return (0.0, 0.0);
        }
        match opts.pooling {
            Pooling::Pooled => {
                let n = self.regions as f64;
                let mae = match opts.mae {
                    MaeMode::Absolute => self.abs / n,
                    MaeMode::Signed => self.signed / n,
                };
                ((self.sq / n).sqrt(), mae)
            }
            Pooling::PerMap => {
                let n = self.maps as f64;
                let mae = match opts.mae {
                    MaeMode::Absolute => self.per_map_mae / n,
                    MaeMode::Signed => self.per_map_signed / n,
                };
                (self.per_map_rmse / n, mae)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub horizon: usize,
    pub rmse: f64,
    pub mae: f64,
    pub samples: usize,
}

/// Anything that forecasts raw-unit maps for windows of a dataset.
pub trait Forecaster {
    fn name(&self) -> String;

    /// For each window index in `idx`, the next `steps` maps in raw units.
    fn forecast(&self, data: &WindowedDataset, idx: &[usize], steps: usize) -> Result<Vec<Vec<StMap>>>;
}

/// Windows per forward pass when forecasting with the network.
const PREDICT_CHUNK: usize = 64;

/// The trained network as a forecaster. Each window draws its latent noise
/// from a stream keyed by its absolute target slot, so forecasts do not
/// depend on batching or on which windows are evaluated together.
#[derive(Debug, Clone)]
pub struct DganForecaster<'a> {
    pub model: &'a Dgan,
    pub seed: u64,
    pub label: String,
}

impl<'a> DganForecaster<'a> {
    pub fn new(model: &'a Dgan, seed: u64) -> Self {
        Self {
            model,
            seed,
            label: "dgan".into(),
        }
    }

    pub fn rng_for(&self, data: &WindowedDataset, i: usize) -> ChaCha8Rng {
        self.rng_at(data.target(i).slot)
    }

    fn rng_at(&self, first_slot: i64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(first_slot as u64);
        rng
    }

    /// Forecasts the `steps` maps following a raw-unit history (most recent
    /// last). `factors` starts at the first history slot; frames past its end
    /// repeat the last one. Matches [`Forecaster::forecast`] on a window with
    /// the same history.
    pub fn forecast_after(
        &self,
        history: &[StMap],
        factors: &[ExternalFactorFrame],
        steps: usize,
    ) -> Result<Vec<StMap>> {
        let last = history
            .last()
            .ok_or_else(|| Error::InvalidArgument("history is empty".into()))?;
        let scaler = self.model.scaler;
        let hist: Vec<StMap> = history.iter().map(|m| scaler.normalize(m)).collect();
        let mut rng = self.rng_at(last.slot + 1);
        let pred = self.model.predict(&hist, factors, steps, &mut rng)?;
        Ok(pred.iter().map(|m| scaler.denormalize(m)).collect())
    }
}

impl Forecaster for DganForecaster<'_> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn forecast(&self, data: &WindowedDataset, idx: &[usize], steps: usize) -> Result<Vec<Vec<StMap>>> {
        let scaler = self.model.scaler;
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(PREDICT_CHUNK) {
            let hist: Vec<Vec<StMap>> = chunk
                .iter()
                .map(|&i| data.history(i).iter().map(|m| scaler.normalize(m)).collect())
                .collect();
            let hrefs: Vec<&[StMap]> = hist.iter().map(Vec::as_slice).collect();
            // Known factor frames run to the end of the sequence; the model
            // carries the last one forward beyond that.
            let frefs: Vec<_> = chunk.iter().map(|&i| &data.frames()[data.start(i)..]).collect();
            let mut rngs: Vec<ChaCha8Rng> = chunk.iter().map(|&i| self.rng_for(data, i)).collect();
            let preds = self.model.predict_batch(&hrefs, &frefs, steps, &mut rngs)?;
            out.extend(
                preds
                    .into_iter()
                    .map(|p| p.iter().map(|m| scaler.denormalize(m)).collect::<Vec<_>>()),
            );
        }
        Ok(out)
    }
}

/// The noise-free rate of a synthetic process: the Bayes-optimal forecast.
#[derive(Debug, Clone)]
pub struct OracleForecaster<'a> {
    pub process: &'a SynthProcess,
}

impl Forecaster for OracleForecaster<'_> {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn forecast(&self, data: &WindowedDataset, idx: &[usize], steps: usize) -> Result<Vec<Vec<StMap>>> {
        idx.iter()
            .map(|&i| {
                let first = data.target(i).slot;
                (0..steps as i64)
                    .map(|k| {
                        let t = first + k;
                        if t < 0 {
                            return Err(Error::InvalidArgument(format!("negative slot {t}")));
                        }
                        Ok(self.process.oracle_rate(t as u64))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Pooled metrics for horizons `1..=steps` using autoregressive forecasts.
/// Every window is forecast `steps` ahead; horizon `k` pools the windows
/// whose ground truth reaches `k`, so horizon 1 covers the whole test set.
pub fn rollout_eval(
    f: &dyn Forecaster,
    test: &WindowedDataset,
    steps: usize,
    opts: MetricOptions,
) -> Result<Vec<MetricRow>> {
    if test.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let max = test.max_horizon();
    if steps > max {
        return Err(Error::InsufficientHorizon { max_feasible: max });
    }
    let idx: Vec<usize> = (0..test.len()).collect();
    let preds = f.forecast(test, &idx, steps)?;
    let mut acc = vec![ErrorAccumulator::default(); steps];
    for (&i, p) in idx.iter().zip(&preds) {
        let truth = test.future(i, steps.min(test.horizon(i))).expect("within the sequence");
        if p.len() != steps {
            return Err(Error::shape("forecast", &[steps], &[p.len()]));
        }
        for (k, (t, y)) in truth.iter().zip(p).enumerate() {
            acc[k].push(t, y)?;
        }
    }
    Ok(acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let (rmse, mae) = a.finish(opts);
            MetricRow {
                model: f.name(),
                horizon: k + 1,
                rmse,
                mae,
                samples: a.maps(),
            }
        })
        .collect())
}

/// One-step pooled metrics over every test window.
pub fn evaluate_model(f: &dyn Forecaster, test: &WindowedDataset, opts: MetricOptions) -> Result<MetricRow> {
    Ok(rollout_eval(f, test, 1, opts)?.remove(0))
}

/// Pooled RMSE of `truth` against the same slots of a synthetic oracle.
pub fn oracle_floor(process: &SynthProcess, test: &WindowedDataset) -> Result<f64> {
    evaluate_model(&OracleForecaster { process }, test, MetricOptions::default()).map(|r| r.rmse)
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// A row type that can be written as a CSV table.
pub trait TableRow: Serialize {
    const COLUMNS: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

impl TableRow for MetricRow {
    const COLUMNS: &'static [&'static str] = &["model", "horizon", "rmse", "mae", "samples"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            self.horizon.to_string(),
            format!("{:?}", self.rmse),
            format!("{:?}", self.mae),
            self.samples.to_string(),
        ]
    }
}

#[derive(Serialize)]
struct TableFile<'a, T> {
    config_fingerprint: &'a str,
    rows: &'a [T],
}

/// Writes `<stem>.csv` and `<stem>.json` in `dir`. Every CSV row carries
/// the config fingerprint; the JSON holds it once at the top.
pub fn write_table<T: TableRow>(dir: &Path, stem: &str, fingerprint: &str, rows: &[T]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("config_fingerprint").chain(T::COLUMNS.iter().copied()))?;
    for row in rows {
        w.write_record(std::iter::once(fingerprint.to_string()).chain(row.cells()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(&csv_path, bytes).map_err(io(&csv_path))?;

    let json_path = dir.join(format!("{stem}.json"));
    let mut json = serde_json::to_vec_pretty(&TableFile {
        config_fingerprint: fingerprint,
        rows,
    })?;
    json.push(b'\n');
    std::fs::write(&json_path, json).map_err(io(&json_path))
}
