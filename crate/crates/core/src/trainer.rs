//! Alternating discriminator / encoder-generator optimization.
//!
//! Each batch runs the encoders and the generator once. The discriminator
//! is updated on detached copies of the generated maps and codes; the
//! encoder/generator objective is then scored by the updated discriminator
//! on the same forward pass, so its gradients flow through the
//! reparameterized samples but never reach the discriminator's weights.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    is_discriminator_param, is_generator_param, save_checkpoint, ArchSpec, BatchInputs,
    BatchNoise, Dgan, FactorScaler, LossConfig,
};
use crate::objectives::{graph as loss, LossReport};
use crate::stmap::{MinMaxScaler, WindowedDataset};
use crate::tensor::layers::{BatchStats, Forward, Mode, ParamStore};
use crate::tensor::Tensor;

pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub d_steps_per_g_step: usize,
    pub grad_clip_norm: Option<f64>,
    /// Save a checkpoint every this many epochs (always at start and end).
    pub checkpoint_every: Option<usize>,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-4,
            epochs: 500,
            train_fraction: 0.9,
            seed: 0,
            d_steps_per_g_step: 1,
            grad_clip_norm: None,
            checkpoint_every: None,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.d_steps_per_g_step == 0 {
            return bad("d_steps_per_g_step must be at least 1".into());
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return bad(format!("grad_clip_norm must be positive, got {c}"));
            }
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint_every must be at least 1".into());
        }
        if !self.loss.d_enc_label.is_finite() {
            return bad("d_enc_label must be finite".into());
        }
        self.loss.weights.validate()
    }
}

/// Chronological split by target slot: the first `⌊fraction·n⌋` windows train.
pub fn split(data: &WindowedDataset, fraction: f64) -> Result<(WindowedDataset, WindowedDataset)> {
    if data.is_empty() {
        return Err(Error::NoTrainingData);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = data.len();
    // The nudge keeps products like 0.57 × 100 from flooring to 56.
    let n_train = ((n as f64) * fraction + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "a {fraction} split of {n} windows leaves one side empty"
        )));
    }
    Ok((data.select(0..n_train), data.select(n_train..n)))
}

/// `θ ← θ − lr·g` over every named gradient. With `clip_norm`, the whole
/// gradient is first rescaled so its global L2 norm is at most `clip_norm`.
pub fn sgd_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Tensor>,
    lr: f64,
    clip_norm: Option<f64>,
    step: u64,
) -> Result<()> {
    for (name, g) in grads {
        if !g.is_finite() {
            return Err(Error::Divergence {
                step,
                param: name.clone(),
            });
        }
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::shape("sgd_step", p.shape(), g.shape()));
        }
    }
    let norm = grads.values().map(Tensor::sum_squares).sum::<f64>().sqrt();
    let scale = match clip_norm {
        Some(c) if norm > c => c / norm,
        _ => 1.0,
    };
    for (name, g) in grads {
        let p = params.get_mut(name).expect("checked above");
        for (p, g) in p.data_mut().iter_mut().zip(g.data()) {
            *p -= lr * scale * g;
        }
    }
    Ok(())
}

/// Fits the demand scaler and factor scaler on every slot a training
/// window touches.
pub fn fit_scalers(train: &WindowedDataset) -> Result<(MinMaxScaler, FactorScaler)> {
    if train.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let first = train.start(0);
    let last = train.start(train.len() - 1) + train.window();
    let maps = &train.sequence().maps()[first..=last];
    let frames = &train.frames()[first..=last];
    Ok((MinMaxScaler::fit(maps)?, FactorScaler::fit(frames)?))
}

/// Where a run writes its log and checkpoint.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub fingerprint: String,
}

impl RunOutput {
    pub fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Dgan,
    pub history: Vec<LossReport>,
    pub checkpoint: Option<PathBuf>,
}

/// Mutable training state: the model, counters and the master RNG.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Dgan,
    pub step: u64,
    pub epoch: usize,
    rng: ChaCha8Rng,
}

impl TrainState {
    /// A freshly initialized model with scalers fitted on `train`.
    pub fn new(arch: &ArchSpec, cfg: &TrainConfig, train: &WindowedDataset) -> Result<Self> {
        cfg.validate()?;
        if train.window() != arch.seq_len {
            return Err(Error::InvalidArgument(format!(
                "dataset window {} does not match seq_len {}",
                train.window(),
                arch.seq_len
            )));
        }
        let mut model = Dgan::new(arch.clone(), cfg.seed)?;
        let (scaler, factor_scaler) = fit_scalers(train)?;
        if arch.factors.weather && factor_scaler.weather.len() != arch.weather_arity {
            return Err(Error::InvalidArgument(format!(
                "data has {} weather features, architecture expects {}",
                factor_scaler.weather.len(),
                arch.weather_arity
            )));
        }
        model.scaler = scaler;
        model.factor_scaler = factor_scaler;
        Ok(Self {
            model,
            step: 0,
            epoch: 0,
            // A distinct stream from the one that initialized the weights.
            rng: {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream(1);
                r
            },
        })
    }

    /// One D update (or several) followed by one encoder/generator update.
    pub fn train_step(&mut self, cfg: &TrainConfig, inputs: &BatchInputs) -> Result<LossReport> {
        let step = self.step;
        let noise = BatchNoise::draw(&self.model, inputs.batch_size(), &mut self.rng);
        let diverged = |e: Error| match e {
            Error::NonFinite(op) => Error::Divergence {
                step,
                param: op.to_string(),
            },
            e => e,
        };
        let (d_params, eg_grads, bn, report) =
            phases(&self.model, cfg, inputs, &noise, &mut self.rng, step).map_err(diverged)?;

        sgd_step(
            &mut self.model.params,
            &eg_grads,
            cfg.learning_rate,
            cfg.grad_clip_norm,
            step,
        )?;
        for (name, t) in d_params.params() {
            *self.model.params.get_mut(name).expect("discriminator parameter") = t.clone();
        }
        self.model.params.update_running_stats(&bn);
        if !self.model.params.all_finite() {
            return Err(Error::Divergence {
                step,
                param: "parameters".into(),
            });
        }
        self.step += 1;
        Ok(report)
    }

    /// One pass over `train` in a seeded shuffled order.
    pub fn train_epoch(
        &mut self,
        cfg: &TrainConfig,
        train: &WindowedDataset,
        mut on_step: impl FnMut(u64, &LossReport) -> Result<()>,
    ) -> Result<Vec<LossReport>> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut reports = Vec::with_capacity(order.len().div_ceil(cfg.batch_size));
        for idx in order.chunks(cfg.batch_size) {
            let inputs = BatchInputs::gather(&self.model, train, idx)?;
            let r = self.train_step(cfg, &inputs)?;
            on_step(self.step - 1, &r)?;
            reports.push(r);
        }
        self.epoch += 1;
        Ok(reports)
    }
}

type Phases = (
    ParamStore,
    BTreeMap<String, Tensor>,
    Vec<(String, BatchStats)>,
    LossReport,
);

/// Runs both phases against the current model without mutating it. Returns
/// the updated discriminator weights, encoder/generator gradients, batch
/// statistics for the running buffers, and the step's report.
fn phases(
    model: &Dgan,
    cfg: &TrainConfig,
    inputs: &BatchInputs,
    noise: &BatchNoise,
    rng: &mut ChaCha8Rng,
    step: u64,
) -> Result<Phases> {
    let mut fwd = Forward::new(&model.params, Mode::Train, Some(rng));
    let gen = model.generator_graph(&mut fwd, inputs, noise)?;

    let mut d_params = ParamStore::new();
    for (name, t) in model.params.params() {
        if is_discriminator_param(name) {
            d_params.insert(name.clone(), t.clone());
        }
    }
    let mut d_loss_before = None;
    for _ in 0..cfg.d_steps_per_g_step {
        let mut dfwd = Forward::new(&model.params, Mode::Train, None);
        for (name, t) in d_params.params() {
            dfwd.bind(name, t.clone())?;
        }
        let pairs = gen.pairs.detach_into(&fwd, &mut dfwd);
        let d = model.discriminator_losses(&mut dfwd, &pairs, &cfg.loss)?;
        d_loss_before.get_or_insert(dfwd.value(d.d_loss).item());
        let grads = dfwd.param_grads(d.d_loss, is_discriminator_param)?;
        sgd_step(&mut d_params, &grads, cfg.learning_rate, cfg.grad_clip_norm, step)?;
    }

    for (name, t) in d_params.params() {
        fwd.bind(name, t.clone())?;
    }
    let d = model.discriminator_losses(&mut fwd, &gen.pairs, &cfg.loss)?;
    let g_loss = loss::g_loss(&mut fwd.graph, d.d_fake, d.d_enc)?;
    let recon = loss::recon_loss(&mut fwd.graph, gen.pairs.x_real, gen.pairs.x_enc)?;
    let total = loss::eg_objective(&mut fwd.graph, gen.kl, recon, g_loss, cfg.loss.weights)?;
    let report = LossReport::new(
        d_loss_before.expect("at least one discriminator step"),
        fwd.value(g_loss).item(),
        fwd.value(gen.kl).item(),
        fwd.value(recon).item(),
        cfg.loss.weights,
    );
    let grads = fwd.param_grads(total, is_generator_param)?;
    let bn = fwd.take_bn_updates();
    Ok((d_params, grads, bn, report))
}

fn save_atomically(model: &Dgan, out: &RunOutput) -> Result<PathBuf> {
    let path = out.checkpoint_path();
    let tmp = out.dir.join(format!("{CHECKPOINT_FILE}.tmp"));
    save_checkpoint(model, &out.fingerprint, &tmp)?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Trains a fresh model on `train` for `cfg.epochs` epochs.
///
/// With `out`, the run writes a per-batch loss log and keeps a checkpoint
/// that is replaced only by a complete, finite model: if training diverges
/// the error is returned and the last good checkpoint stays on disk.
pub fn train(
    arch: &ArchSpec,
    cfg: &TrainConfig,
    train: &WindowedDataset,
    out: Option<&RunOutput>,
) -> Result<TrainOutcome> {
    let mut state = TrainState::new(arch, cfg, train)?;
    let mut log = match out {
        Some(o) => {
            std::fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
            let path = o.log_path();
            let mut w = create(&path)?;
            writeln!(w, "# config {}", o.fingerprint).map_err(|e| Error::io(&path, e))?;
            writeln!(w, "{}", LossReport::CSV_HEADER).map_err(|e| Error::io(&path, e))?;
            Some((path, w))
        }
        None => None,
    };
    let mut checkpoint = out.map(|o| save_atomically(&state.model, o)).transpose()?;

    let mut history = Vec::new();
    for epoch in 0..cfg.epochs {
        let reports = state.train_epoch(cfg, train, |step, r| {
            if let Some((path, w)) = log.as_mut() {
                writeln!(w, "{}", r.csv_row(step)).map_err(|e| Error::io(&*path, e))?;
            }
            Ok(())
        });
        if let Some((path, w)) = log.as_mut() {
            w.flush().map_err(|e| Error::io(&*path, e))?;
        }
        let reports = reports?;
        if let Some(last) = reports.last() {
            log::info!(
                "epoch {}: d_loss {:.5} g_loss {:.5} kl {:.5} recon {:.6}",
                epoch + 1,
                last.d_loss,
                last.g_loss,
                last.kl,
                last.recon
            );
        }
        history.extend(reports);
        let due = cfg.checkpoint_every.is_some_and(|k| (epoch + 1) % k == 0);
        if let Some(o) = out {
            if due || epoch + 1 == cfg.epochs {
                checkpoint = Some(save_atomically(&state.model, o)?);
            }
        }
    }
    Ok(TrainOutcome {
        model: state.model,
        history,
        checkpoint,
    })
}
