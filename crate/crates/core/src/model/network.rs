use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::arch::{factor_tensor, history_tensor, ArchSpec, FactorScaler};
use crate::error::{Error, Result};
use crate::ingest::ExternalFactorFrame;
use crate::stmap::{MinMaxScaler, StMap};
use crate::tensor::layers::{
    init_batch_norm, init_conv3d, init_conv_lstm, init_dense, Forward, Mode, ParamStore,
};
use crate::tensor::{Tensor, Var};

pub const ENCODER: &str = "enc";
pub const FACTOR_ENCODER: &str = "fenc";
pub const DECODER: &str = "dec";
pub const DISCRIMINATOR: &str = "disc";

pub fn is_discriminator_param(name: &str) -> bool {
    name.starts_with("disc.")
}

/// Everything the encoders and the decoder own.
pub fn is_generator_param(name: &str) -> bool {
    !is_discriminator_param(name)
}

/// Gaussian posterior parameters and one reparameterized draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sample: Vec<f64>,
}

/// Draws `n` i.i.d. standard-normal values.
pub fn sample_prior(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Concatenates the demand code with the factor code (if any).
pub fn fuse(fv_x: &[f64], fv_f: Option<&[f64]>) -> Vec<f64> {
    let mut out = fv_x.to_vec();
    if let Some(f) = fv_f {
        out.extend_from_slice(f);
    }
    out
}

/// The trainable model plus the scalers fixed at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dgan {
    pub arch: ArchSpec,
    pub params: ParamStore,
    pub scaler: MinMaxScaler,
    pub factor_scaler: FactorScaler,
}

impl Dgan {
    pub fn new(arch: ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let a = &arch;
        let flat = a.seq_len * a.regions() * a.conv3d_channels;

        init_stack(&mut store, ENCODER, 1, a, &mut rng);
        init_mlp(&mut store, ENCODER, flat, 2 * a.latent_dim, a, &mut rng);

        if a.factors_enabled() {
            init_stack(&mut store, FACTOR_ENCODER, a.factor_channels(), a, &mut rng);
            init_mlp(&mut store, FACTOR_ENCODER, flat, 2 * a.factor_latent_dim, a, &mut rng);
        }

        let seed_len = a.decoder_seed_steps * a.regions() * a.decoder_seed_channels;
        init_mlp(&mut store, DECODER, a.fused_dim(), seed_len, a, &mut rng);
        init_stack_with_head(&mut store, DECODER, a.decoder_seed_channels, 1, a, &mut rng);

        init_stack(&mut store, DISCRIMINATOR, 1 + a.fused_dim(), a, &mut rng);
        let disc_flat = a.regions() * a.conv3d_channels;
        init_dense(&mut store, "disc.out", disc_flat, 1, &mut rng);

        let factor_scaler = FactorScaler::identity(a.weather_arity);
        Ok(Self {
            arch,
            params: store,
            scaler: MinMaxScaler {
                data_min: 0.0,
                data_max: 1.0,
            },
            factor_scaler,
        })
    }

    fn stack(&self, fwd: &mut Forward, prefix: &str, mut x: Var, track_bn: bool) -> Result<Var> {
        for l in 0..self.arch.conv_lstm_filters.len() {
            x = fwd.conv_lstm_layer(&format!("{prefix}.lstm{l}"), x)?;
            x = fwd.batch_norm(&format!("{prefix}.bn{l}"), x, track_bn)?;
        }
        Ok(x)
    }

    fn mlp(&self, fwd: &mut Forward, prefix: &str, mut h: Var) -> Result<Var> {
        for i in 0..self.arch.mlp_hidden.len() {
            h = fwd.dense(&format!("{prefix}.mlp{i}"), h)?;
            h = fwd.leaky_relu(h)?;
            h = fwd.dropout(h, self.arch.dropout)?;
        }
        fwd.dense(&format!("{prefix}.head"), h)
    }

    /// ConvLSTM stack → Conv3D → flatten → MLP head emitting `(μ, log σ²)`.
    /// `prefix` selects the demand or the factor encoder.
    pub fn encoder_graph(&self, fwd: &mut Forward, prefix: &str, x: Var) -> Result<(Var, Var)> {
        let latent = match prefix {
            ENCODER => self.arch.latent_dim,
            FACTOR_ENCODER => self.arch.factor_latent_dim,
            _ => return Err(Error::InvalidArgument(format!("no encoder named `{prefix}`"))),
        };
        let batch = fwd.value(x).shape()[0];
        let h = self.stack(fwd, prefix, x, true)?;
        let h = fwd.conv3d(&format!("{prefix}.c3d"), h)?;
        let h = fwd.leaky_relu(h)?;
        let len = fwd.value(h).len() / batch;
        let h = fwd.graph.reshape(h, &[batch, len])?;
        let out = self.mlp(fwd, prefix, h)?;
        let mu = fwd.graph.slice(out, 1, 0, latent)?;
        let log_var = fwd.graph.slice(out, 1, latent, latent)?;
        Ok((mu, log_var))
    }

    /// `μ + exp(½ log σ²) ⊙ ε`.
    pub fn reparameterize(fwd: &mut Forward, mu: Var, log_var: Var, eps: Tensor) -> Result<Var> {
        let half = fwd.graph.scale(log_var, 0.5)?;
        let sigma = fwd.graph.exp(half)?;
        let e = fwd.input(eps);
        let noise = fwd.graph.mul(sigma, e)?;
        fwd.graph.add(mu, noise)
    }

    /// MLP → seed volume `(b, T', m, n, c)` → ConvLSTM stack → Conv3D to one
    /// channel → last time step → sigmoid. Output is `(b, m·n)`.
    /// `track_bn` controls whether batch statistics feed the running buffers.
    pub fn decoder_graph(&self, fwd: &mut Forward, fv: Var, track_bn: bool) -> Result<Var> {
        let a = &self.arch;
        let shape = fwd.value(fv).shape().to_vec();
        if shape.len() != 2 || shape[1] != a.fused_dim() {
            return Err(Error::shape("decode", &[shape[0], a.fused_dim()], &shape));
        }
        let batch = shape[0];
        let seed = self.mlp(fwd, DECODER, fv)?;
        let seed = fwd.graph.reshape(
            seed,
            &[batch, a.decoder_seed_steps, a.rows, a.cols, a.decoder_seed_channels],
        )?;
        let h = self.stack(fwd, DECODER, seed, track_bn)?;
        let h = fwd.conv3d("dec.c3d", h)?;
        let last = fwd.graph.slice(h, 1, a.decoder_seed_steps - 1, 1)?;
        let flat = fwd.graph.reshape(last, &[batch, a.regions()])?;
        fwd.graph.sigmoid(flat)
    }

    /// Scores `(map, code)` pairs. The code is tiled over the grid as extra
    /// channels next to the map; the pair runs through a ConvLSTM stack over
    /// a single time step, Conv3D, flatten, dense and sigmoid. Batch norm here
    /// always uses batch statistics. Output is `(b, 1)`.
    pub fn discriminator_graph(&self, fwd: &mut Forward, map: Var, code: Var) -> Result<Var> {
        let a = &self.arch;
        let (ms, cs) = (fwd.value(map).shape().to_vec(), fwd.value(code).shape().to_vec());
        let batch = ms[0];
        if ms != [batch, a.regions()] {
            return Err(Error::shape("discriminate map", &[batch, a.regions()], &ms));
        }
        if cs != [batch, a.fused_dim()] {
            return Err(Error::shape("discriminate code", &[batch, a.fused_dim()], &cs));
        }
        let m = fwd.graph.reshape(map, &[batch, 1, a.rows, a.cols, 1])?;
        let tiled = fwd.graph.repeat(code, 1, a.regions())?;
        let tiled = fwd.graph.reshape(tiled, &[batch, 1, a.rows, a.cols, a.fused_dim()])?;
        let y = fwd.graph.concat(&[m, tiled], 4)?;
        let mut h = y;
        for l in 0..a.conv_lstm_filters.len() {
            h = fwd.conv_lstm_layer(&format!("disc.lstm{l}"), h)?;
            let gamma = fwd.param(&format!("disc.bn{l}.gamma"))?;
            let beta = fwd.param(&format!("disc.bn{l}.beta"))?;
            h = fwd
                .graph
                .batch_norm(h, gamma, beta, crate::tensor::layers::BN_EPS)?
                .0;
        }
        let h = fwd.conv3d("disc.c3d", h)?;
        let h = fwd.leaky_relu(h)?;
        let h = fwd.graph.reshape(h, &[batch, a.regions() * a.conv3d_channels])?;
        let logit = fwd.dense("disc.out", h)?;
        fwd.graph.sigmoid(logit)
    }

    fn latent_from(&self, fwd: &Forward, mu: Var, lv: Var, sample: Var) -> LatentCode {
        LatentCode {
            mu: fwd.value(mu).data().to_vec(),
            sigma: fwd.value(lv).data().iter().map(|v| (0.5 * v).exp()).collect(),
            sample: fwd.value(sample).data().to_vec(),
        }
    }

    fn draw_eps(dim: usize, rng: Option<&mut ChaCha8Rng>) -> Tensor {
        match rng {
            Some(r) => Tensor::new(vec![1, dim], sample_prior(dim, r)).expect("length matches"),
            None => Tensor::zeros(&[1, dim]),
        }
    }

    /// Encodes one normalized history window (inference mode). Without an
    /// RNG, ε is zero and the sample equals μ.
    pub fn encode(&self, history: &[StMap], rng: Option<&mut ChaCha8Rng>) -> Result<LatentCode> {
        let x = history_tensor(&self.arch, &[history])?;
        let mut fwd = Forward::new(&self.params, Mode::Infer, None);
        let xv = fwd.input(x);
        let (mu, lv) = self.encoder_graph(&mut fwd, ENCODER, xv)?;
        let eps = Self::draw_eps(self.arch.latent_dim, rng);
        let s = Self::reparameterize(&mut fwd, mu, lv, eps)?;
        Ok(self.latent_from(&fwd, mu, lv, s))
    }

    /// Encodes one window of factor frames; fails if the factor branch is disabled.
    pub fn encode_factors(
        &self,
        frames: &[ExternalFactorFrame],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<LatentCode> {
        if !self.arch.factors_enabled() {
            return Err(Error::InvalidArgument("factor branch is disabled".into()));
        }
        let f = factor_tensor(&self.arch, &self.factor_scaler, &[frames])?;
        let mut fwd = Forward::new(&self.params, Mode::Infer, None);
        let fv = fwd.input(f);
        let (mu, lv) = self.encoder_graph(&mut fwd, FACTOR_ENCODER, fv)?;
        let eps = Self::draw_eps(self.arch.factor_latent_dim, rng);
        let s = Self::reparameterize(&mut fwd, mu, lv, eps)?;
        Ok(self.latent_from(&fwd, mu, lv, s))
    }

    /// Next-slot map in the normalized domain from a fused code.
    pub fn decode(&self, fv_cat: &[f64]) -> Result<StMap> {
        if fv_cat.len() != self.arch.fused_dim() {
            return Err(Error::shape("decode", &[self.arch.fused_dim()], &[fv_cat.len()]));
        }
        let mut fwd = Forward::new(&self.params, Mode::Infer, None);
        let v = fwd.input(Tensor::new(vec![1, fv_cat.len()], fv_cat.to_vec())?);
        let out = self.decoder_graph(&mut fwd, v, false)?;
        StMap::new(self.arch.rows, self.arch.cols, 0, fwd.value(out).data().to_vec())
    }

    /// Probability that a single `(map, code)` pair is real.
    pub fn discriminate(&self, map: &StMap, code: &[f64]) -> Result<f64> {
        if map.rows != self.arch.rows || map.cols != self.arch.cols {
            return Err(Error::shape(
                "discriminate",
                &[self.arch.rows, self.arch.cols],
                &[map.rows, map.cols],
            ));
        }
        let mut fwd = Forward::new(&self.params, Mode::Infer, None);
        let m = fwd.input(Tensor::new(vec![1, map.values.len()], map.values.clone())?);
        let c = fwd.input(Tensor::new(vec![1, code.len()], code.to_vec())?);
        let d = self.discriminator_graph(&mut fwd, m, c)?;
        Ok(fwd.value(d).item())
    }

    /// Autoregressive forecast for one window; see [`Dgan::predict_batch`].
    pub fn predict(
        &self,
        history: &[StMap],
        factors: &[ExternalFactorFrame],
        steps: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<StMap>> {
        let mut out = self.predict_batch(&[history], &[factors], steps, std::slice::from_mut(rng))?;
        Ok(out.remove(0))
    }

    /// Forecasts `steps` maps per window. Each step encodes the current
    /// history (and factor window), fuses, decodes, then slides the history
    /// forward by appending the prediction. Factor windows advance with the
    /// history; frames past the end of `factors` repeat its last frame.
    ///
    /// Histories are normalized; predictions stay in the normalized domain.
    /// Window `i` draws all of its ε from `rngs[i]`, so results do not depend
    /// on how windows are batched.
    pub fn predict_batch(
        &self,
        histories: &[&[StMap]],
        factors: &[&[ExternalFactorFrame]],
        steps: usize,
        rngs: &mut [ChaCha8Rng],
    ) -> Result<Vec<Vec<StMap>>> {
        let a = &self.arch;
        let b = histories.len();
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if factors.len() != b || rngs.len() != b {
            return Err(Error::shape("predict_batch", &[b, b], &[factors.len(), rngs.len()]));
        }
        for (h, f) in histories.iter().zip(factors) {
            if h.len() != a.seq_len {
                return Err(Error::shape("predict history", &[a.seq_len], &[h.len()]));
            }
            if a.factors_enabled() && f.is_empty() {
                return Err(Error::InvalidArgument("factor frames required".into()));
            }
        }
        let mut windows: Vec<Vec<StMap>> = histories.iter().map(|h| h.to_vec()).collect();
        let mut out: Vec<Vec<StMap>> = vec![Vec::with_capacity(steps); b];
        for k in 0..steps {
            let refs: Vec<&[StMap]> = windows.iter().map(Vec::as_slice).collect();
            let x = history_tensor(a, &refs)?;
            let mut fwd = Forward::new(&self.params, Mode::Infer, None);
            let xv = fwd.input(x);
            let (mu, lv) = self.encoder_graph(&mut fwd, ENCODER, xv)?;
            let eps_x: Vec<Vec<f64>> = rngs.iter_mut().map(|r| sample_prior(a.latent_dim, r)).collect();
            let eps_x = Tensor::new(vec![b, a.latent_dim], eps_x.concat())?;
            let mut fv = Self::reparameterize(&mut fwd, mu, lv, eps_x)?;
            if a.factors_enabled() {
                let fwin: Vec<Vec<ExternalFactorFrame>> = factors
                    .iter()
                    .map(|f| {
                        (k..k + a.seq_len)
                            .map(|i| f[i.min(f.len() - 1)].clone())
                            .collect()
                    })
                    .collect();
                let frefs: Vec<&[ExternalFactorFrame]> = fwin.iter().map(Vec::as_slice).collect();
                let ft = factor_tensor(a, &self.factor_scaler, &frefs)?;
                let fvar = fwd.input(ft);
                let (fmu, flv) = self.encoder_graph(&mut fwd, FACTOR_ENCODER, fvar)?;
                let eps_f: Vec<Vec<f64>> = rngs
                    .iter_mut()
                    .map(|r| sample_prior(a.factor_latent_dim, r))
                    .collect();
                let eps_f = Tensor::new(vec![b, a.factor_latent_dim], eps_f.concat())?;
                let ff = Self::reparameterize(&mut fwd, fmu, flv, eps_f)?;
                fv = fwd.graph.concat(&[fv, ff], 1)?;
            }
            let pred = self.decoder_graph(&mut fwd, fv, false)?;
            let vals = fwd.value(pred).data();
            for (i, w) in windows.iter_mut().enumerate() {
                let slot = w.last().map_or(0, |m| m.slot) + 1;
                let map = StMap::new(
                    a.rows,
                    a.cols,
                    slot,
                    vals[i * a.regions()..(i + 1) * a.regions()].to_vec(),
                )?;
                out[i].push(map.clone());
                w.remove(0);
                w.push(map);
            }
        }
        Ok(out)
    }
}

fn init_stack(store: &mut ParamStore, prefix: &str, in_ch: usize, a: &ArchSpec, rng: &mut ChaCha8Rng) {
    init_stack_with_head(store, prefix, in_ch, a.conv3d_channels, a, rng);
}

fn init_stack_with_head(
    store: &mut ParamStore,
    prefix: &str,
    in_ch: usize,
    head_ch: usize,
    a: &ArchSpec,
    rng: &mut ChaCha8Rng,
) {
    let mut c = in_ch;
    for (l, &f) in a.conv_lstm_filters.iter().enumerate() {
        init_conv_lstm(store, &format!("{prefix}.lstm{l}"), c, f, a.forget_bias, rng);
        init_batch_norm(store, &format!("{prefix}.bn{l}"), f);
        c = f;
    }
    init_conv3d(store, &format!("{prefix}.c3d"), c, head_ch, rng);
}

fn init_mlp(store: &mut ParamStore, prefix: &str, input: usize, output: usize, a: &ArchSpec, rng: &mut ChaCha8Rng) {
    let mut w = input;
    for (i, &h) in a.mlp_hidden.iter().enumerate() {
        init_dense(store, &format!("{prefix}.mlp{i}"), w, h, rng);
        w = h;
    }
    init_dense(store, &format!("{prefix}.head"), w, output, rng);
}
