//! Run configuration: one JSON document covering every subcommand. Unknown
//! keys are rejected at any depth.

use std::path::{Path, PathBuf};

use dgan_core::evaluate::{MetricOptions, MlpConfig};
use dgan_core::ingest::ColumnMapping;
use dgan_core::model::ArchSpec;
use dgan_core::stmap::GridSpec;
use dgan_core::synth::SynthProcess;
use dgan_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed. When set it replaces the synth, training and MLP seeds.
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub arch: ArchSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub predict: PredictConfig,
    pub sweep: SweepConfig,
}

/// Where datasets come from. `dataset` is a directory written by `synth` or
/// `ingest`; the remaining keys drive `ingest`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub columns: ColumnMapping,
    pub grid: Option<GridSpec>,
    /// Inclusive hour-slot window; defaults to the span of the records.
    pub start_slot: Option<i64>,
    pub end_slot: Option<i64>,
    pub weather: Option<PathBuf>,
    pub weather_time_column: Option<String>,
    pub poi: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub process: SynthProcess,
    pub slots: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            process: SynthProcess::default(),
            slots: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Sma,
    Wma,
    Ols,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Defaults to `checkpoint.bin` in the output directory.
    pub checkpoint: Option<PathBuf>,
    pub steps: usize,
    pub metrics: MetricOptions,
    /// Baselines use the model's history length as their lag count.
    pub baselines: Vec<BaselineKind>,
    pub mlp: MlpConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            steps: 1,
            metrics: MetricOptions::default(),
            baselines: vec![BaselineKind::Sma, BaselineKind::Wma, BaselineKind::Ols],
            mlp: MlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub steps: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { steps: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    SeqLength,
    ExternalFactors,
    RolloutSteps,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::SeqLength => "seq_length",
            Self::ExternalFactors => "external_factors",
            Self::RolloutSteps => "rollout_steps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub lengths: Vec<usize>,
    pub steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::SeqLength,
            lengths: vec![8, 12, 24],
            steps: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Pushes the master seed down into every seeded section.
    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.synth.process.seed = s;
            self.train.seed = s;
            self.eval.mlp.seed = s;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |section: &str, e: dgan_core::Error| CliError::Config(format!("{section}: {e}"));
        self.synth.process.validate().map_err(|e| cfg("synth.process", e))?;
        if self.synth.slots == 0 {
            return Err(CliError::Config("synth.slots: must be at least 1".into()));
        }
        self.arch.validate().map_err(|e| cfg("arch", e))?;
        self.train.validate().map_err(|e| cfg("train", e))?;
        if let Some(g) = &self.data.grid {
            g.validate().map_err(|e| cfg("data.grid", e))?;
        }
        if let (Some(a), Some(b)) = (self.data.start_slot, self.data.end_slot) {
            if a > b {
                return Err(CliError::Config(format!(
                    "data: start_slot {a} is after end_slot {b}"
                )));
            }
        }
        if self.data.weather.is_some() != self.data.poi.is_some() {
            return Err(CliError::Config(
                "data: weather and poi must be given together".into(),
            ));
        }
        for (key, v) in [
            ("eval.steps", self.eval.steps),
            ("predict.steps", self.predict.steps),
            ("sweep.steps", self.sweep.steps),
            ("eval.mlp.batch_size", self.eval.mlp.batch_size),
        ] {
            if v == 0 {
                return Err(CliError::Config(format!("{key}: must be at least 1")));
            }
        }
        if !(self.eval.mlp.learning_rate > 0.0) {
            return Err(CliError::Config("eval.mlp.learning_rate: must be positive".into()));
        }
        if self.sweep.lengths.is_empty() || self.sweep.lengths.contains(&0) {
            return Err(CliError::Config(
                "sweep.lengths: need at least one length, all positive".into(),
            ));
        }
        Ok(())
    }
}
