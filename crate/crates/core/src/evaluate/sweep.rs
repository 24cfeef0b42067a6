//! Ablation tables: sequence length, external-factor variants and rollout
//! horizon. Every trained cell starts from the same seed.

use serde::{Deserialize, Serialize};

use super::{rollout_eval, DganForecaster, Forecaster, MetricOptions, MetricRow, TableRow};
use crate::error::{Error, Result};
use crate::ingest::ExternalFactorFrame;
use crate::model::{ArchSpec, FactorSelection};
use crate::stmap::{StSequence, WindowedDataset};
use crate::trainer::{split, train, TrainConfig};

/// One cell of a sweep table. Infeasible settings keep a row with a
/// `skipped: ...` status and no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub variant: String,
    pub horizon: usize,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub samples: usize,
    pub status: String,
}

impl SweepRow {
    fn from_metric(axis: &str, variant: &str, m: &MetricRow) -> Self {
        Self {
            axis: axis.into(),
            variant: variant.into(),
            horizon: m.horizon,
            rmse: Some(m.rmse),
            mae: Some(m.mae),
            samples: m.samples,
            status: "ok".into(),
        }
    }

    fn skipped(axis: &str, variant: &str, why: &Error) -> Self {
        log::warn!("{axis} sweep: skipping {variant}: {why}");
        Self {
            axis: axis.into(),
            variant: variant.into(),
            horizon: 0,
            rmse: None,
            mae: None,
            samples: 0,
            status: format!("skipped: {why}"),
        }
    }
}

impl TableRow for SweepRow {
    const COLUMNS: &'static [&'static str] =
        &["axis", "variant", "horizon", "rmse", "mae", "samples", "status"];

    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        vec![
            self.axis.clone(),
            self.variant.clone(),
            self.horizon.to_string(),
            opt(self.rmse),
            opt(self.mae),
            self.samples.to_string(),
            self.status.clone(),
        ]
    }
}

/// Trains on the chronological head of `seq` and evaluates a rollout of
/// `steps` on the tail.
fn train_and_roll(
    arch: &ArchSpec,
    cfg: &TrainConfig,
    seq: &StSequence,
    factors: &[ExternalFactorFrame],
    steps: usize,
    opts: MetricOptions,
) -> Result<Vec<MetricRow>> {
    let data = WindowedDataset::new(seq.clone(), factors.to_vec(), arch.seq_len)?;
    let (tr, test) = split(&data, cfg.train_fraction)?;
    let max = test.max_horizon();
    if steps > max {
        return Err(Error::InsufficientHorizon { max_feasible: max });
    }
    let outcome = train(arch, cfg, &tr, None)?;
    rollout_eval(&DganForecaster::new(&outcome.model, cfg.seed), &test, steps, opts)
}

/// Per-horizon RMSE for each history length `T` (one trained model each).
pub fn seq_length_sweep(
    arch: &ArchSpec,
    cfg: &TrainConfig,
    seq: &StSequence,
    factors: &[ExternalFactorFrame],
    lengths: &[usize],
    steps: usize,
    opts: MetricOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &t in lengths {
        let variant = format!("T={t}");
        let a = ArchSpec {
            seq_len: t,
            ..arch.clone()
        };
        match a.validate().and_then(|_| train_and_roll(&a, cfg, seq, factors, steps, opts)) {
            Ok(ms) => rows.extend(ms.iter().map(|m| SweepRow::from_metric("seq_length", &variant, m))),
            Err(e @ (Error::SequenceTooShort { .. } | Error::InsufficientHorizon { .. } | Error::InvalidArgument(_))) => {
                rows.push(SweepRow::skipped("seq_length", &variant, &e))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// One row per external-factor variant (ExF1, ExF2, ExF3, ExF3_w) at
/// horizon `steps`.
pub fn factor_sweep(
    arch: &ArchSpec,
    cfg: &TrainConfig,
    seq: &StSequence,
    factors: &[ExternalFactorFrame],
    steps: usize,
    opts: MetricOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (name, sel) in FactorSelection::variants() {
        let a = ArchSpec {
            factors: sel,
            ..arch.clone()
        };
        let ms = train_and_roll(&a, cfg, seq, factors, steps, opts)?;
        rows.extend(
            ms.iter()
                .filter(|m| m.horizon == steps)
                .map(|m| SweepRow::from_metric("external_factors", name, m)),
        );
    }
    Ok(rows)
}

/// Horizons `1..=steps` for one forecaster.
pub fn rollout_table(
    f: &dyn Forecaster,
    test: &WindowedDataset,
    steps: usize,
    opts: MetricOptions,
) -> Result<Vec<SweepRow>> {
    let name = f.name();
    Ok(rollout_eval(f, test, steps, opts)?
        .iter()
        .map(|m| SweepRow::from_metric("rollout_steps", &name, m))
        .collect())
}
