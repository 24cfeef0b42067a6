//! Layer primitives built on the [`Graph`] tape.
//!
//! Parameters live in a [`ParamStore`] keyed by dotted names
//! (`enc.lstm0.wx`, `dec.head.k`, ...). A [`Forward`] pass binds the names it
//! touches to graph inputs so gradients can be collected per name afterwards.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use super::graph::BatchStats;
use super::{Gradients, Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Infer,
}

/// Named trainable tensors plus non-trainable buffers (batch-norm running stats).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    buffers: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.params.insert(name.into(), t);
    }

    pub fn insert_buffer(&mut self, name: impl Into<String>, t: Tensor) {
        self.buffers.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn buffer(&self, name: &str) -> Result<&Tensor> {
        self.buffers
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown buffer `{name}`")))
    }

    pub fn buffer_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.buffers.get_mut(name)
    }

    pub fn params(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.buffers.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.values().all(Tensor::is_finite) && self.buffers.values().all(Tensor::is_finite)
    }

    /// Concatenated values of the named parameters, in the given order.
    pub fn flatten(&self, names: &[String]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for n in names {
            out.extend_from_slice(self.get(n)?.data());
        }
        Ok(out)
    }

    /// Inverse of [`ParamStore::flatten`].
    pub fn unflatten(&mut self, names: &[String], flat: &[f64]) -> Result<()> {
        let mut off = 0;
        for n in names {
            let t = self
                .params
                .get_mut(n)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{n}`")))?;
            let len = t.len();
            if off + len > flat.len() {
                return Err(Error::shape("unflatten", &[off + len], &[flat.len()]));
            }
            t.data_mut().copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(())
    }

    /// Folds training-mode batch statistics into the running buffers.
    pub fn update_running_stats(&mut self, updates: &[(String, BatchStats)]) {
        for (prefix, stats) in updates {
            let pairs = [
                (format!("{prefix}.running_mean"), &stats.mean),
                (format!("{prefix}.running_var"), &stats.var),
            ];
            for (name, observed) in pairs {
                if let Some(buf) = self.buffers.get_mut(&name) {
                    for (r, o) in buf.data_mut().iter_mut().zip(observed) {
                        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * o;
                    }
                }
            }
        }
    }
}

/// Kernel or weight with entries drawn from N(0, 1/fan_in).
pub fn fan_in_init<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    Tensor::randn(shape, 1.0 / (fan_in.max(1) as f64).sqrt(), rng)
}

pub fn init_dense<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, fan_in: usize, out: usize, rng: &mut R) {
    store.insert(format!("{prefix}.w"), fan_in_init(&[fan_in, out], fan_in, rng));
    store.insert(format!("{prefix}.b"), Tensor::zeros(&[out]));
}

/// ConvLSTM cell with 3×3 input-to-state and state-to-state kernels.
/// Gate channel order in the fused kernels is input, forget, output, candidate.
pub fn init_conv_lstm<R: Rng + ?Sized>(
    store: &mut ParamStore,
    prefix: &str,
    in_ch: usize,
    hidden: usize,
    forget_bias: f64,
    rng: &mut R,
) {
    store.insert(
        format!("{prefix}.wx"),
        fan_in_init(&[1, 3, 3, in_ch, 4 * hidden], 9 * in_ch, rng),
    );
    store.insert(
        format!("{prefix}.wh"),
        fan_in_init(&[1, 3, 3, hidden, 4 * hidden], 9 * hidden, rng),
    );
    let mut b = Tensor::zeros(&[4 * hidden]);
    b.data_mut()[hidden..2 * hidden].fill(forget_bias);
    store.insert(format!("{prefix}.b"), b);
}

pub fn init_conv3d<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, in_ch: usize, out_ch: usize, rng: &mut R) {
    store.insert(
        format!("{prefix}.k"),
        fan_in_init(&[3, 3, 3, in_ch, out_ch], 27 * in_ch, rng),
    );
    store.insert(format!("{prefix}.b"), Tensor::zeros(&[out_ch]));
}

pub fn init_batch_norm(store: &mut ParamStore, prefix: &str, channels: usize) {
    store.insert(format!("{prefix}.gamma"), Tensor::full(&[channels], 1.0));
    store.insert(format!("{prefix}.beta"), Tensor::zeros(&[channels]));
    store.insert_buffer(format!("{prefix}.running_mean"), Tensor::zeros(&[channels]));
    store.insert_buffer(format!("{prefix}.running_var"), Tensor::full(&[channels], 1.0));
}

/// Hidden and cell tensors of a ConvLSTM layer, both `(batch, 1, rows, cols, channels)`.
#[derive(Debug, Clone, Copy)]
pub struct ConvLstmState {
    pub hidden: Var,
    pub cell: Var,
}

/// One forward pass over a [`ParamStore`].
pub struct Forward<'a> {
    pub graph: Graph,
    store: &'a ParamStore,
    bound: BTreeMap<String, Var>,
    mode: Mode,
    rng: Option<&'a mut ChaCha8Rng>,
    bn_updates: Vec<(String, BatchStats)>,
}

impl<'a> Forward<'a> {
    /// `rng` drives dropout masks; without one, dropout is disabled even in
    /// training mode.
    pub fn new(store: &'a ParamStore, mode: Mode, rng: Option<&'a mut ChaCha8Rng>) -> Self {
        Self {
            graph: Graph::new(),
            store,
            bound: BTreeMap::new(),
            mode,
            rng,
            bn_updates: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(v) = self.bound.get(name) {
            return Ok(*v);
        }
        let v = self.graph.input(self.store.get(name)?.clone());
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    /// Binds `name` to `t` for the rest of the pass, shadowing the store.
    pub fn bind(&mut self, name: &str, t: Tensor) -> Result<Var> {
        let expected = self.store.get(name)?.shape();
        if t.shape() != expected {
            return Err(Error::shape("bind", expected, t.shape()));
        }
        if self.bound.contains_key(name) {
            return Err(Error::InvalidArgument(format!("`{name}` is already bound")));
        }
        let v = self.graph.input(t);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.graph.input(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.graph.value(v)
    }

    /// Parameters bound during this pass whose names satisfy `filter`.
    pub fn bound_params(&self, filter: impl Fn(&str) -> bool) -> Vec<(String, Var)> {
        self.bound
            .iter()
            .filter(|(n, _)| filter(n))
            .map(|(n, v)| (n.clone(), *v))
            .collect()
    }

    pub fn take_bn_updates(&mut self) -> Vec<(String, BatchStats)> {
        std::mem::take(&mut self.bn_updates)
    }

    /// Gradients of `loss` for every bound parameter accepted by `filter`.
    pub fn param_grads(
        &self,
        loss: Var,
        filter: impl Fn(&str) -> bool,
    ) -> Result<BTreeMap<String, Tensor>> {
        let targets = self.bound_params(filter);
        let vars: Vec<Var> = targets.iter().map(|(_, v)| *v).collect();
        let mut grads: Gradients = self.graph.backward(loss, &vars)?;
        Ok(targets
            .into_iter()
            .map(|(n, v)| {
                let g = grads
                    .take(v)
                    .unwrap_or_else(|| Tensor::zeros(self.graph.value(v).shape()));
                (n, g)
            })
            .collect())
    }

    /// `x: (b, in) -> (b, out)`.
    pub fn dense(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let w = self.param(&format!("{prefix}.w"))?;
        let b = self.param(&format!("{prefix}.b"))?;
        let y = self.graph.matmul(x, w)?;
        self.graph.add_bias(y, b)
    }

    /// 3×3×3 same-padded conv with bias on `(b, d, h, w, cin)`.
    pub fn conv3d(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let k = self.param(&format!("{prefix}.k"))?;
        let b = self.param(&format!("{prefix}.b"))?;
        let y = self.graph.conv(x, k)?;
        self.graph.add_bias(y, b)
    }

    pub fn leaky_relu(&mut self, x: Var) -> Result<Var> {
        self.graph.leaky_relu(x, LEAKY_SLOPE)
    }

    /// Inverted dropout; identity in inference mode or with `p = 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability must lie in [0, 1), got {p}"
            )));
        }
        if self.mode == Mode::Infer || p == 0.0 {
            return Ok(x);
        }
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(x);
        };
        let keep = 1.0 / (1.0 - p);
        let shape = self.graph.value(x).shape().to_vec();
        let mask = Tensor::from_fn(&shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep });
        let m = self.graph.input(mask);
        self.graph.mul(x, m)
    }

    /// Batch norm over every axis but channels. Training mode uses batch
    /// statistics and records them; inference uses the running buffers.
    /// With `track = false` the statistics are not recorded.
    pub fn batch_norm(&mut self, prefix: &str, x: Var, track: bool) -> Result<Var> {
        let gamma = self.param(&format!("{prefix}.gamma"))?;
        let beta = self.param(&format!("{prefix}.beta"))?;
        match self.mode {
            Mode::Train => {
                let (y, stats) = self.graph.batch_norm(x, gamma, beta, BN_EPS)?;
                if track {
                    self.bn_updates.push((prefix.to_string(), stats));
                }
                Ok(y)
            }
            Mode::Infer => {
                let mean = self.store.buffer(&format!("{prefix}.running_mean"))?;
                let var = self.store.buffer(&format!("{prefix}.running_var"))?;
                let g = self.graph.value(gamma).data();
                let b = self.graph.value(beta).data();
                let scale: Vec<f64> = g
                    .iter()
                    .zip(var.data())
                    .map(|(g, v)| g / (v + BN_EPS).sqrt())
                    .collect();
                let shift: Vec<f64> = b
                    .iter()
                    .zip(mean.data())
                    .zip(&scale)
                    .map(|((b, m), s)| b - m * s)
                    .collect();
                self.graph.channel_affine(x, &scale, &shift)
            }
        }
    }

    /// Zero hidden and cell state for a layer of `hidden` channels.
    pub fn zero_state(&mut self, batch: usize, rows: usize, cols: usize, hidden: usize) -> ConvLstmState {
        let z = Tensor::zeros(&[batch, 1, rows, cols, hidden]);
        let h = self.graph.input(z.clone());
        let c = self.graph.input(z);
        ConvLstmState { hidden: h, cell: c }
    }

    /// One ConvLSTM transition, `x: (b, 1, h, w, cin)`:
    ///
    /// ```text
    /// [i f o g] = Wx * x + Wh * h + b
    /// c' = σ(f) ⊙ c + σ(i) ⊙ tanh(g)
    /// h' = σ(o) ⊙ tanh(c')
    /// ```
    pub fn conv_lstm_step(&mut self, prefix: &str, x: Var, state: ConvLstmState) -> Result<ConvLstmState> {
        let wx = self.param(&format!("{prefix}.wx"))?;
        let wh = self.param(&format!("{prefix}.wh"))?;
        let b = self.param(&format!("{prefix}.b"))?;
        let hidden = self.graph.value(wh).shape()[3];
        let hs = self.graph.value(state.hidden).shape();
        let xs = self.graph.value(x).shape();
        if xs.len() != 5 || hs.len() != 5 || xs[..4] != hs[..4] || hs[4] != hidden {
            return Err(Error::shape("conv_lstm_step", hs, xs));
        }
        if self.graph.value(state.cell).shape() != hs {
            return Err(Error::shape(
                "conv_lstm_step",
                hs,
                self.graph.value(state.cell).shape(),
            ));
        }
        let zx = self.graph.conv(x, wx)?;
        let zh = self.graph.conv(state.hidden, wh)?;
        let z = self.graph.add(zx, zh)?;
        let z = self.graph.add_bias(z, b)?;
        let gi = self.graph.slice(z, 4, 0, hidden)?;
        let gf = self.graph.slice(z, 4, hidden, hidden)?;
        let go = self.graph.slice(z, 4, 2 * hidden, hidden)?;
        let gg = self.graph.slice(z, 4, 3 * hidden, hidden)?;
        let i = self.graph.sigmoid(gi)?;
        let f = self.graph.sigmoid(gf)?;
        let o = self.graph.sigmoid(go)?;
        let g = self.graph.tanh(gg)?;
        let fc = self.graph.mul(f, state.cell)?;
        let ig = self.graph.mul(i, g)?;
        let cell = self.graph.add(fc, ig)?;
        let tc = self.graph.tanh(cell)?;
        let hidden = self.graph.mul(o, tc)?;
        Ok(ConvLstmState { hidden, cell })
    }

    /// Runs a ConvLSTM layer over `x: (b, t, h, w, cin)` from a zero state
    /// and returns the stacked hidden sequence `(b, t, h, w, hidden)`.
    pub fn conv_lstm_layer(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let shape = self.graph.value(x).shape().to_vec();
        if shape.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "conv_lstm_layer expects (batch, time, rows, cols, channels), got {shape:?}"
            )));
        }
        let hidden = self.store.get(&format!("{prefix}.wh"))?.shape()[3];
        let mut state = self.zero_state(shape[0], shape[2], shape[3], hidden);
        let mut outputs = Vec::with_capacity(shape[1]);
        for t in 0..shape[1] {
            let xt = self.graph.slice(x, 1, t, 1)?;
            state = self.conv_lstm_step(prefix, xt, state)?;
            outputs.push(state.hidden);
        }
        self.graph.concat(&outputs, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn leaky_relu_slope() {
        let store = ParamStore::new();
        let mut fwd = Forward::new(&store, Mode::Infer, None);
        let x = fwd.input(Tensor::new(vec![2], vec![-1.0, 2.0]).unwrap());
        let y = fwd.leaky_relu(x).unwrap();
        assert_eq!(fwd.value(y).data(), &[-0.2, 2.0]);
    }

    #[test]
    fn dropout_is_identity_at_inference() {
        let store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut fwd = Forward::new(&store, Mode::Infer, Some(&mut rng));
        let x = fwd.input(Tensor::full(&[10], 3.0));
        let y = fwd.dropout(x, 0.4).unwrap();
        assert_eq!(fwd.value(y).data(), &[3.0; 10]);
    }

    #[test]
    fn dropout_rejects_bad_probability() {
        let store = ParamStore::new();
        let mut fwd = Forward::new(&store, Mode::Train, None);
        let x = fwd.input(Tensor::full(&[3], 1.0));
        assert!(fwd.dropout(x, 1.0).is_err());
        assert!(fwd.dropout(x, -0.1).is_err());
    }

    #[test]
    fn dropout_scales_kept_units() {
        let store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut fwd = Forward::new(&store, Mode::Train, Some(&mut rng));
        let x = fwd.input(Tensor::full(&[20_000], 1.0));
        let y = fwd.dropout(x, 0.4).unwrap();
        let vals = fwd.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.6).abs() < 1e-12));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 1.0).abs() < 0.03);
    }

    #[test]
    fn batch_norm_standardizes() {
        // Values with mean 3 and variance 4: 1 and 5 alternating.
        let mut store = ParamStore::new();
        init_batch_norm(&mut store, "bn", 1);
        let mut fwd = Forward::new(&store, Mode::Train, None);
        let x = fwd.input(Tensor::from_fn(&[8, 1], |i| if i % 2 == 0 { 1.0 } else { 5.0 }));
        let y = fwd.batch_norm("bn", x, true).unwrap();
        let v = fwd.value(y).data();
        let mean = v.iter().sum::<f64>() / 8.0;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 8.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-5);
        let updates = fwd.take_bn_updates();
        assert_eq!(updates[0].1.mean, vec![3.0]);
        assert_eq!(updates[0].1.var, vec![4.0]);
    }

    #[test]
    fn running_stats_move_toward_batch() {
        let mut store = ParamStore::new();
        init_batch_norm(&mut store, "bn", 1);
        store.update_running_stats(&[(
            "bn".into(),
            BatchStats {
                mean: vec![3.0],
                var: vec![4.0],
            },
        )]);
        assert!((store.buffer("bn.running_mean").unwrap().item() - 0.3).abs() < 1e-12);
        assert!((store.buffer("bn.running_var").unwrap().item() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn conv_lstm_zero_propagation() {
        let mut store = ParamStore::new();
        store.insert("c.wx", Tensor::zeros(&[1, 3, 3, 2, 12]));
        store.insert("c.wh", Tensor::zeros(&[1, 3, 3, 3, 12]));
        store.insert("c.b", Tensor::zeros(&[12]));
        let mut fwd = Forward::new(&store, Mode::Train, None);
        let x = fwd.input(Tensor::zeros(&[1, 1, 4, 4, 2]));
        let s0 = fwd.zero_state(1, 4, 4, 3);
        let s1 = fwd.conv_lstm_step("c", x, s0).unwrap();
        assert!(fwd.value(s1.hidden).data().iter().all(|&v| v == 0.0));
        assert!(fwd.value(s1.cell).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_lstm_single_cell_matches_scalar_lstm() {
        // On a 1×1 grid only the kernel centre tap touches real data, so the
        // cell reduces to a scalar LSTM with weights taken from tap (1, 1).
        let (wi, wf, wo, wg) = (0.5, -0.3, 0.8, 1.2);
        let (ui, uf, uo, ug) = (0.1, 0.4, -0.6, 0.7);
        let (bi, bf, bo, bg) = (0.05, 1.0, -0.1, 0.2);
        let mut wx = Tensor::full(&[1, 3, 3, 1, 4], 9.0);
        let mut wh = Tensor::full(&[1, 3, 3, 1, 4], -9.0);
        let centre = 4 * 4;
        wx.data_mut()[centre..centre + 4].copy_from_slice(&[wi, wf, wo, wg]);
        wh.data_mut()[centre..centre + 4].copy_from_slice(&[ui, uf, uo, ug]);
        let mut store = ParamStore::new();
        store.insert("c.wx", wx);
        store.insert("c.wh", wh);
        store.insert("c.b", Tensor::new(vec![4], vec![bi, bf, bo, bg]).unwrap());

        let xs = [0.3, -0.7, 1.1];
        let (mut h, mut c) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for &x in &xs {
            let i = sig(wi * x + ui * h + bi);
            let f = sig(wf * x + uf * h + bf);
            let o = sig(wo * x + uo * h + bo);
            let g = (wg * x + ug * h + bg).tanh();
            c = f * c + i * g;
            h = o * c.tanh();
            expected.push((h, c));
        }

        let mut fwd = Forward::new(&store, Mode::Train, None);
        let mut state = fwd.zero_state(1, 1, 1, 1);
        for (&x, &(eh, ec)) in xs.iter().zip(&expected) {
            let xv = fwd.input(Tensor::full(&[1, 1, 1, 1, 1], x));
            state = fwd.conv_lstm_step("c", xv, state).unwrap();
            assert!((fwd.value(state.hidden).item() - eh).abs() < 1e-14);
            assert!((fwd.value(state.cell).item() - ec).abs() < 1e-14);
        }
    }

    #[test]
    fn conv_lstm_layer_equals_unrolled_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        init_conv_lstm(&mut store, "c", 2, 3, 1.0, &mut rng);
        let x = Tensor::randn(&[2, 3, 4, 4, 2], 1.0, &mut rng);

        let mut fwd = Forward::new(&store, Mode::Train, None);
        let xv = fwd.input(x.clone());
        let seq = fwd.conv_lstm_layer("c", xv).unwrap();
        let seq_val = fwd.value(seq).clone();

        let mut fwd2 = Forward::new(&store, Mode::Train, None);
        let mut state = fwd2.zero_state(2, 4, 4, 3);
        let xv = fwd2.input(x);
        let mut steps = Vec::new();
        for t in 0..3 {
            let xt = fwd2.graph.slice(xv, 1, t, 1).unwrap();
            state = fwd2.conv_lstm_step("c", xt, state).unwrap();
            steps.push(state.hidden);
        }
        let unrolled = fwd2.graph.concat(&steps, 1).unwrap();
        assert_eq!(fwd2.value(unrolled), &seq_val);
    }

    #[test]
    fn conv_lstm_shape_mismatch_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        init_conv_lstm(&mut store, "c", 2, 3, 1.0, &mut rng);
        let mut fwd = Forward::new(&store, Mode::Train, None);
        let x = fwd.input(Tensor::zeros(&[1, 1, 4, 4, 2]));
        let wrong = fwd.zero_state(1, 5, 4, 3);
        assert!(fwd.conv_lstm_step("c", x, wrong).is_err());
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        init_conv_lstm(&mut store, "c", 1, 2, 1.0, &mut rng);
        assert_eq!(store.get("c.b").unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
