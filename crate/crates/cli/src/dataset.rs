//! On-disk dataset directory: the map container, factor frames and a
//! metadata sidecar.

use std::path::{Path, PathBuf};

use dgan_core::ingest::ExternalFactorFrame;
use dgan_core::stmap::StSequence;
use dgan_core::synth::SynthProcess;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEQUENCE_FILE: &str = "sequence.bin";
pub const FACTORS_FILE: &str = "factors.json";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub rows: usize,
    pub malformed: usize,
    pub kept: usize,
    pub out_of_box: usize,
    pub out_of_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config_fingerprint: String,
    pub rows: usize,
    pub cols: usize,
    pub slots: usize,
    pub epoch_slot: i64,
    pub total_demand: f64,
    /// The generating process, for synthetic datasets.
    pub synth: Option<SynthProcess>,
    pub ingest: Option<IngestCounts>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub sequence: StSequence,
    pub factors: Vec<ExternalFactorFrame>,
    pub meta: DatasetMeta,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(dgan_core::Error::from)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| dgan_core::Error::io(path, e).into())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| dgan_core::Error::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(dgan_core::Error::from)?)
}

impl Dataset {
    pub fn new(
        sequence: StSequence,
        factors: Vec<ExternalFactorFrame>,
        fingerprint: &str,
        synth: Option<SynthProcess>,
        ingest: Option<IngestCounts>,
    ) -> Self {
        let meta = DatasetMeta {
            config_fingerprint: fingerprint.into(),
            rows: sequence.rows(),
            cols: sequence.cols(),
            slots: sequence.len(),
            epoch_slot: sequence.epoch_slot(),
            total_demand: sequence.total_demand(),
            synth,
            ingest,
        };
        Self {
            sequence,
            factors,
            meta,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| dgan_core::Error::io(dir, e))?;
        self.sequence.save(&dir.join(SEQUENCE_FILE))?;
        write_json(&dir.join(FACTORS_FILE), &self.factors)?;
        write_json(&dir.join(META_FILE), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let sequence = StSequence::load(&dir.join(SEQUENCE_FILE))?;
        let factors: Vec<ExternalFactorFrame> = read_json(&dir.join(FACTORS_FILE))?;
        let meta: DatasetMeta = read_json(&dir.join(META_FILE))?;
        if factors.len() != sequence.len() {
            return Err(dgan_core::Error::Data(format!(
                "{}: {} factor frames for {} maps",
                dir.display(),
                factors.len(),
                sequence.len()
            ))
            .into());
        }
        Ok(Self {
            sequence,
            factors,
            meta,
        })
    }

    /// Weather features per frame.
    pub fn weather_arity(&self) -> usize {
        self.factors.first().map_or(0, |f| f.weather.len())
    }
}

/// Dataset directory from the config, required by the named command.
pub fn dataset_dir(dataset: &Option<PathBuf>, command: &str) -> Result<PathBuf, CliError> {
    dataset
        .clone()
        .ok_or_else(|| CliError::Config(format!("data.dataset: required for `{command}`")))
}
