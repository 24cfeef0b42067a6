//! The per-batch computation graph: encode, fuse, decode the encoded and the
//! prior codes, score the three pairs, and assemble every loss.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{factor_tensor, history_tensor};
use super::network::{sample_prior, Dgan, ENCODER, FACTOR_ENCODER};
use crate::error::Result;
use crate::objectives::{graph as loss, LossReport, LossWeights};
use crate::stmap::WindowedDataset;
use crate::tensor::layers::Forward;
use crate::tensor::{Tensor, Var};

/// Model-ready tensors for one batch of windows.
#[derive(Debug, Clone)]
pub struct BatchInputs {
    /// `(b, T, m, n, 1)`, normalized.
    pub history: Tensor,
    /// `(b, T, m, n, c_f)`, present when the factor branch is enabled.
    pub factors: Option<Tensor>,
    /// `(b, m·n)`, normalized next-slot maps.
    pub target: Tensor,
}

impl BatchInputs {
    pub fn batch_size(&self) -> usize {
        self.history.shape()[0]
    }

    /// Gathers samples `idx` of `data`, normalizing demand with the model's scaler.
    pub fn gather(model: &Dgan, data: &WindowedDataset, idx: &[usize]) -> Result<Self> {
        let norm_hist: Vec<Vec<_>> = idx
            .iter()
            .map(|&i| data.history(i).iter().map(|m| model.scaler.normalize(m)).collect())
            .collect();
        let refs: Vec<&[_]> = norm_hist.iter().map(Vec::as_slice).collect();
        let history = history_tensor(&model.arch, &refs)?;
        let factors = if model.arch.factors_enabled() {
            let frefs: Vec<&[_]> = idx.iter().map(|&i| data.factors(i)).collect();
            Some(factor_tensor(&model.arch, &model.factor_scaler, &frefs)?)
        } else {
            None
        };
        let mut target = Vec::with_capacity(idx.len() * model.arch.regions());
        for &i in idx {
            target.extend(data.target(i).values.iter().map(|&v| model.scaler.normalize_value(v)));
        }
        let target = Tensor::new(vec![idx.len(), model.arch.regions()], target)?;
        Ok(Self {
            history,
            factors,
            target,
        })
    }
}

/// Every random draw a batch needs, fixed up front so a pass can be replayed.
#[derive(Debug, Clone)]
pub struct BatchNoise {
    pub eps_x: Tensor,
    pub eps_f: Option<Tensor>,
    /// One prior draw of fused width per sample; used as the generator input
    /// and as the code paired with real and fake maps.
    pub prior: Tensor,
}

impl BatchNoise {
    pub fn draw(model: &Dgan, batch: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = &model.arch;
        let mut take = |dim: usize| {
            Tensor::new(vec![batch, dim], sample_prior(batch * dim, rng)).expect("length matches")
        };
        let eps_x = take(a.latent_dim);
        let eps_f = a.factors_enabled().then(|| take(a.factor_latent_dim));
        let prior = take(a.fused_dim());
        Self {
            eps_x,
            eps_f,
            prior,
        }
    }

    pub fn zeros(model: &Dgan, batch: usize) -> Self {
        let a = &model.arch;
        Self {
            eps_x: Tensor::zeros(&[batch, a.latent_dim]),
            eps_f: a
                .factors_enabled()
                .then(|| Tensor::zeros(&[batch, a.factor_latent_dim])),
            prior: Tensor::zeros(&[batch, a.fused_dim()]),
        }
    }
}

/// How the loss terms are weighted and labelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub weights: LossWeights,
    /// Target for `D(y_Enc)` in the discriminator loss.
    pub d_enc_label: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            d_enc_label: 1.0,
        }
    }
}

/// The maps and codes the discriminator pairs up.
#[derive(Debug, Clone, Copy)]
pub struct Pairs {
    pub x_real: Var,
    pub x_fake: Var,
    pub x_enc: Var,
    /// Shared prior draw `z`.
    pub z: Var,
    /// Fused posterior sample `FV_cat`.
    pub fv: Var,
}

impl Pairs {
    /// Copies the current values into `dst` as constants.
    pub fn detach_into(&self, src: &Forward, dst: &mut Forward) -> Self {
        let mut c = |v: Var| dst.input(src.value(v).clone());
        Self {
            x_real: c(self.x_real),
            x_fake: c(self.x_fake),
            x_enc: c(self.x_enc),
            z: c(self.z),
            fv: c(self.fv),
        }
    }
}

/// Graph handles for the encoder/generator half of a pass.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorVars {
    pub pairs: Pairs,
    pub kl: Var,
}

/// Graph handles for the three discriminator scores and `loss_D`.
#[derive(Debug, Clone, Copy)]
pub struct DiscriminatorVars {
    pub d_real: Var,
    pub d_fake: Var,
    pub d_enc: Var,
    pub d_loss: Var,
}

/// Graph handles for the pieces of one full forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub d_loss: Var,
    pub g_loss: Var,
    pub kl: Var,
    pub recon: Var,
    pub total_eg: Var,
    pub x_enc: Var,
    pub x_fake: Var,
    pub d_real: Var,
    pub d_fake: Var,
    pub d_enc: Var,
}

impl LossVars {
    pub fn report(&self, fwd: &Forward) -> LossReport {
        let v = |x: Var| fwd.value(x).item();
        LossReport {
            d_loss: v(self.d_loss),
            g_loss: v(self.g_loss),
            kl: v(self.kl),
            recon: v(self.recon),
            total_eg: v(self.total_eg),
        }
    }
}

impl Dgan {
    /// Encodes history and factors, fuses, and decodes both the fused
    /// posterior sample (`x_Enc`) and the prior draw (`x_Fake`). KL covers
    /// both posteriors.
    pub fn generator_graph(
        &self,
        fwd: &mut Forward,
        inputs: &BatchInputs,
        noise: &BatchNoise,
    ) -> Result<GeneratorVars> {
        let x = fwd.input(inputs.history.clone());
        let (mu, lv) = self.encoder_graph(fwd, ENCODER, x)?;
        let fv_x = Self::reparameterize(fwd, mu, lv, noise.eps_x.clone())?;
        let mut kl = loss::kl_divergence(&mut fwd.graph, mu, lv)?;

        let fv = match (&inputs.factors, &noise.eps_f) {
            (Some(f), Some(eps_f)) if self.arch.factors_enabled() => {
                let f = fwd.input(f.clone());
                let (fmu, flv) = self.encoder_graph(fwd, FACTOR_ENCODER, f)?;
                let fv_f = Self::reparameterize(fwd, fmu, flv, eps_f.clone())?;
                let kl_f = loss::kl_divergence(&mut fwd.graph, fmu, flv)?;
                kl = fwd.graph.add(kl, kl_f)?;
                fwd.graph.concat(&[fv_x, fv_f], 1)?
            }
            _ => fv_x,
        };

        let x_enc = self.decoder_graph(fwd, fv, true)?;
        let z = fwd.input(noise.prior.clone());
        let x_fake = self.decoder_graph(fwd, z, false)?;
        let x_real = fwd.input(inputs.target.clone());
        Ok(GeneratorVars {
            pairs: Pairs {
                x_real,
                x_fake,
                x_enc,
                z,
                fv,
            },
            kl,
        })
    }

    /// Scores `y_Real = [x_real, z]`, `y_Fake = [x_fake, z]` and
    /// `y_Enc = [x_enc, fv]`, and forms `loss_D`.
    pub fn discriminator_losses(
        &self,
        fwd: &mut Forward,
        p: &Pairs,
        cfg: &LossConfig,
    ) -> Result<DiscriminatorVars> {
        let d_real = self.discriminator_graph(fwd, p.x_real, p.z)?;
        let d_fake = self.discriminator_graph(fwd, p.x_fake, p.z)?;
        let d_enc = self.discriminator_graph(fwd, p.x_enc, p.fv)?;
        let d_loss = loss::d_loss(&mut fwd.graph, d_real, d_fake, d_enc, cfg.d_enc_label)?;
        Ok(DiscriminatorVars {
            d_real,
            d_fake,
            d_enc,
            d_loss,
        })
    }

    /// Records the full training computation for one batch on `fwd`.
    pub fn loss_graph(
        &self,
        fwd: &mut Forward,
        inputs: &BatchInputs,
        noise: &BatchNoise,
        cfg: &LossConfig,
    ) -> Result<LossVars> {
        let gen = self.generator_graph(fwd, inputs, noise)?;
        let d = self.discriminator_losses(fwd, &gen.pairs, cfg)?;
        let g_loss = loss::g_loss(&mut fwd.graph, d.d_fake, d.d_enc)?;
        let recon = loss::recon_loss(&mut fwd.graph, gen.pairs.x_real, gen.pairs.x_enc)?;
        let total_eg = loss::eg_objective(&mut fwd.graph, gen.kl, recon, g_loss, cfg.weights)?;
        Ok(LossVars {
            d_loss: d.d_loss,
            g_loss,
            kl: gen.kl,
            recon,
            total_eg,
            x_enc: gen.pairs.x_enc,
            x_fake: gen.pairs.x_fake,
            d_real: d.d_real,
            d_fake: d.d_fake,
            d_enc: d.d_enc,
        })
    }
}
