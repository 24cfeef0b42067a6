//! Least-squares adversarial losses, the Gaussian KL regularizer, the
//! region-normalized L2 reconstruction loss, and their composition into the
//! discriminator and encoder/generator objectives.
//!
//! Each loss has a plain scalar form (used for reporting and tests) and a
//! graph form (used for training); the two are checked against each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stmap::{maps_match, StMap};
use crate::tensor::{Graph, Var};

fn mean_sq_dev(xs: &[f64], label: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|x| (x - label).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Discriminator loss: real pairs pushed to 1, prior-generated pairs to 0,
/// encoded pairs to `enc_label` (1 by default). Each term is a batch mean.
pub fn d_loss(d_real: &[f64], d_fake: &[f64], d_enc: &[f64], enc_label: f64) -> f64 {
    mean_sq_dev(d_real, 1.0) + mean_sq_dev(d_fake, 0.0) + mean_sq_dev(d_enc, enc_label)
}

/// Generator loss: both generated paths pushed to 1.
pub fn g_loss(d_fake: &[f64], d_enc: &[f64]) -> f64 {
    mean_sq_dev(d_fake, 1.0) + mean_sq_dev(d_enc, 1.0)
}

/// `KL(N(μ, σ²) ‖ N(0, I)) = Σ ½(μ² + σ² − 1 − ln σ²)`.
pub fn kl_divergence(mu: &[f64], sigma: &[f64]) -> Result<f64> {
    if mu.len() != sigma.len() {
        return Err(Error::shape("kl_divergence", &[mu.len()], &[sigma.len()]));
    }
    if let Some(s) = sigma.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {s}"
        )));
    }
    Ok(mu
        .iter()
        .zip(sigma)
        .map(|(m, s)| {
            let v = s * s;
            0.5 * (m * m + v - 1.0 - v.ln())
        })
        .sum())
}

/// `‖x_real − x_enc‖₂ / mn`: Euclidean norm of the difference divided by
/// the number of regions.
pub fn recon_loss(x_real: &StMap, x_enc: &StMap) -> Result<f64> {
    maps_match(x_real, x_enc)?;
    let sq: f64 = x_real
        .values
        .iter()
        .zip(&x_enc.values)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(sq.sqrt() / x_real.values.len() as f64)
}

/// Relative weights of the KL and reconstruction terms in the
/// encoder/generator objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub kl: f64,
    pub recon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { kl: 1.0, recon: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.kl > 0.0 && self.recon > 0.0 && self.kl.is_finite() && self.recon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be positive, got kl={} recon={}",
                self.kl, self.recon
            )));
        }
        Ok(())
    }
}

/// Per-batch loss components (batch means).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub d_loss: f64,
    pub g_loss: f64,
    pub kl: f64,
    pub recon: f64,
    pub total_eg: f64,
}

/// `(loss_D, loss_EG)`: the discriminator minimizes its own adversarial
/// loss; encoders and generator minimize `β_kl·KL + β_rec·L_R + L_G`.
pub fn compose(d: f64, g: f64, kl: f64, recon: f64, w: LossWeights) -> (f64, f64) {
    (d, w.kl * kl + w.recon * recon + g)
}

impl LossReport {
    pub fn new(d: f64, g: f64, kl: f64, recon: f64, w: LossWeights) -> Self {
        let (_, total_eg) = compose(d, g, kl, recon, w);
        Self {
            d_loss: d,
            g_loss: g,
            kl,
            recon,
            total_eg,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.d_loss, self.g_loss, self.kl, self.recon, self.total_eg]
            .iter()
            .all(|v| v.is_finite())
    }

    pub const CSV_HEADER: &'static str = "step,d_loss,g_loss,kl,recon,total_eg";

    pub fn csv_row(&self, step: u64) -> String {
        format!(
            "{step},{:?},{:?},{:?},{:?},{:?}",
            self.d_loss, self.g_loss, self.kl, self.recon, self.total_eg
        )
    }
}

/// Graph forms of the losses. Inputs are batched: probabilities `(b, 1)`,
/// posterior parameters `(b, latent)`, maps `(b, m·n)`.
pub mod graph {
    use super::*;

    fn mean_sq_dev(g: &mut Graph, x: Var, label: f64) -> Result<Var> {
        let d = g.offset(x, -label)?;
        let sq = g.square(d)?;
        g.mean(sq)
    }

    pub fn d_loss(g: &mut Graph, d_real: Var, d_fake: Var, d_enc: Var, enc_label: f64) -> Result<Var> {
        let a = mean_sq_dev(g, d_real, 1.0)?;
        let b = mean_sq_dev(g, d_fake, 0.0)?;
        let c = mean_sq_dev(g, d_enc, enc_label)?;
        let ab = g.add(a, b)?;
        g.add(ab, c)
    }

    pub fn g_loss(g: &mut Graph, d_fake: Var, d_enc: Var) -> Result<Var> {
        let a = mean_sq_dev(g, d_fake, 1.0)?;
        let b = mean_sq_dev(g, d_enc, 1.0)?;
        g.add(a, b)
    }

    /// Batch mean of the per-sample KL, from `μ` and `log σ²`.
    pub fn kl_divergence(g: &mut Graph, mu: Var, log_var: Var) -> Result<Var> {
        let mu2 = g.square(mu)?;
        let var = g.exp(log_var)?;
        let s = g.add(mu2, var)?;
        let s = g.sub(s, log_var)?;
        let s = g.offset(s, -1.0)?;
        let s = g.scale(s, 0.5)?;
        let per = g.sum_rows(s)?;
        g.mean(per)
    }

    /// Batch mean of `‖x_real − x_enc‖₂ / mn` over `(b, mn)` maps.
    pub fn recon_loss(g: &mut Graph, x_real: Var, x_enc: Var) -> Result<Var> {
        let shape = g.value(x_real).shape().to_vec();
        let regions: usize = shape[1..].iter().product();
        let d = g.sub(x_real, x_enc)?;
        let sq = g.square(d)?;
        let per = g.sum_rows(sq)?;
        let norm = g.sqrt(per)?;
        let scaled = g.scale(norm, 1.0 / regions as f64)?;
        g.mean(scaled)
    }

    /// `β_kl·kl + β_rec·recon + g`.
    pub fn eg_objective(g: &mut Graph, kl: Var, recon: Var, g_loss: Var, w: LossWeights) -> Result<Var> {
        let a = g.scale(kl, w.kl)?;
        let b = g.scale(recon, w.recon)?;
        let ab = g.add(a, b)?;
        g.add(ab, g_loss)
    }
}
