use dgan_core::ingest::ExternalFactorFrame;
use dgan_core::model::{
    factor_tensor, history_tensor, is_discriminator_param, is_generator_param, ArchSpec, BatchInputs,
    BatchNoise, Dgan, LossConfig,
};
use dgan_core::stmap::StMap;
use dgan_core::tensor::layers::{init_batch_norm, init_conv3d, init_conv_lstm, init_dense, ConvLstmState, ParamStore};
use dgan_core::tensor::{grad_check_params, weighted_sum, GradCheckReport, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn assert_report(what: &str, r: &GradCheckReport) {
    assert!(r.checked > 0, "{what}: nothing checked");
    assert!(
        r.max_rel_error < TOL,
        "{what}: max relative error {:e} at {} (analytic {:e}, numeric {:e})",
        r.max_rel_error,
        r.worst_index,
        r.analytic,
        r.numeric
    );
}

fn names(store: &ParamStore) -> Vec<String> {
    store.names().cloned().collect()
}

#[test]
fn conv_lstm_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    init_conv_lstm(&mut store, "l", 2, 3, 1.0, &mut rng);
    // Bias starts at zero apart from the forget gate; perturb so every gate is generic.
    let b = store.get_mut("l.b").unwrap();
    for v in b.data_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    store.insert("x", Tensor::randn(&[2, 1, 4, 4, 2], 1.0, &mut rng));
    store.insert("h0", Tensor::randn(&[2, 1, 4, 4, 3], 0.5, &mut rng));
    store.insert("c0", Tensor::randn(&[2, 1, 4, 4, 3], 0.5, &mut rng));
    let wh = Tensor::randn(&[2, 1, 4, 4, 3], 1.0, &mut rng);
    let wc = Tensor::randn(&[2, 1, 4, 4, 3], 1.0, &mut rng);
    let r = grad_check_params(&store, &names(&store), EPS, |fwd| {
        let x = fwd.param("x")?;
        let state = ConvLstmState {
            hidden: fwd.param("h0")?,
            cell: fwd.param("c0")?,
        };
        let next = fwd.conv_lstm_step("l", x, state)?;
        let a = weighted_sum(fwd, next.hidden, &wh)?;
        let b = weighted_sum(fwd, next.cell, &wc)?;
        fwd.graph.add(a, b)
    })
    .unwrap();
    assert_report("conv_lstm_step", &r);
}

#[test]
fn conv_lstm_layer_over_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    init_conv_lstm(&mut store, "l", 1, 2, 1.0, &mut rng);
    store.insert("x", Tensor::randn(&[2, 3, 3, 4, 1], 1.0, &mut rng));
    let w = Tensor::randn(&[2, 3, 3, 4, 2], 1.0, &mut rng);
    let r = grad_check_params(&store, &names(&store), EPS, |fwd| {
        let x = fwd.param("x")?;
        let h = fwd.conv_lstm_layer("l", x)?;
        weighted_sum(fwd, h, &w)
    })
    .unwrap();
    assert_report("conv_lstm_layer", &r);
}

#[test]
fn conv3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    init_conv3d(&mut store, "c", 2, 3, &mut rng);
    store.insert("c.b", Tensor::randn(&[3], 0.3, &mut rng));
    store.insert("x", Tensor::randn(&[2, 3, 4, 4, 2], 1.0, &mut rng));
    let w = Tensor::randn(&[2, 3, 4, 4, 3], 1.0, &mut rng);
    let r = grad_check_params(&store, &names(&store), EPS, |fwd| {
        let x = fwd.param("x")?;
        let y = fwd.conv3d("c", x)?;
        weighted_sum(fwd, y, &w)
    })
    .unwrap();
    assert_report("conv3d", &r);
}

#[test]
fn dense_and_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    init_dense(&mut store, "d0", 5, 4, &mut rng);
    init_dense(&mut store, "d1", 4, 4, &mut rng);
    init_dense(&mut store, "d2", 4, 3, &mut rng);
    for b in ["d0.b", "d1.b", "d2.b"] {
        let n = store.get(b).unwrap().len();
        store.insert(b, Tensor::randn(&[n], 0.3, &mut rng));
    }
    store.insert("x", Tensor::randn(&[3, 5], 1.0, &mut rng));
    let w = Tensor::randn(&[3, 3], 1.0, &mut rng);
    let r = grad_check_params(&store, &names(&store), EPS, |fwd| {
        let x = fwd.param("x")?;
        let h = fwd.dense("d0", x)?;
        let h = fwd.leaky_relu(h)?;
        let h = fwd.dense("d1", h)?;
        let h = fwd.graph.tanh(h)?;
        let h = fwd.dense("d2", h)?;
        let h = fwd.graph.sigmoid(h)?;
        weighted_sum(fwd, h, &w)
    })
    .unwrap();
    assert_report("dense + activations", &r);
}

#[test]
fn batch_norm_with_batch_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    init_batch_norm(&mut store, "bn", 3);
    store.insert("bn.gamma", Tensor::randn(&[3], 1.0, &mut rng));
    store.insert("bn.beta", Tensor::randn(&[3], 1.0, &mut rng));
    store.insert("x", Tensor::randn(&[2, 2, 3, 3, 3], 2.0, &mut rng));
    let w = Tensor::randn(&[2, 2, 3, 3, 3], 1.0, &mut rng);
    let r = grad_check_params(&store, &names(&store), EPS, |fwd| {
        let x = fwd.param("x")?;
        let y = fwd.batch_norm("bn", x, false)?;
        let y = fwd.graph.tanh(y)?;
        weighted_sum(fwd, y, &w)
    })
    .unwrap();
    assert_report("batch_norm", &r);
}

fn tiny_arch() -> ArchSpec {
    ArchSpec {
        rows: 4,
        cols: 4,
        seq_len: 3,
        conv_lstm_filters: vec![2, 2],
        conv3d_channels: 2,
        latent_dim: 4,
        factor_latent_dim: 2,
        mlp_hidden: vec![5],
        decoder_seed_steps: 2,
        dropout: 0.0,
        ..ArchSpec::default()
    }
}

fn tiny_batch(model: &Dgan, seed: u64) -> (BatchInputs, BatchNoise) {
    let arch = &model.arch;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = 2;
    let mut map = |slot: i64| {
        let v = (0..arch.regions()).map(|_| rng.random::<f64>()).collect();
        StMap::new(arch.rows, arch.cols, slot, v).unwrap()
    };
    let hist: Vec<Vec<StMap>> = (0..b)
        .map(|i| (0..arch.seq_len as i64).map(|t| map(10 * i as i64 + t)).collect())
        .collect();
    let target: Vec<f64> = (0..b).flat_map(|i| map(10 * i as i64 + 9).values).collect();
    let frames: Vec<Vec<ExternalFactorFrame>> = (0..b)
        .map(|i| {
            (0..arch.seq_len)
                .map(|t| ExternalFactorFrame {
                    poi: (0..arch.regions()).map(|r| ((r * 7 + i) % 5) as f64 / 5.0).collect(),
                    weather: vec![((t + i) as f64).sin(), ((t * i) as f64).cos()],
                    is_weekend: ((t + i) % 2) as f64,
                })
                .collect()
        })
        .collect();
    let hrefs: Vec<&[StMap]> = hist.iter().map(Vec::as_slice).collect();
    let frefs: Vec<&[ExternalFactorFrame]> = frames.iter().map(Vec::as_slice).collect();
    let inputs = BatchInputs {
        history: history_tensor(arch, &hrefs).unwrap(),
        factors: Some(factor_tensor(arch, &model.factor_scaler, &frefs).unwrap()),
        target: Tensor::new(vec![b, arch.regions()], target).unwrap(),
    };
    let mut nrng = ChaCha8Rng::seed_from_u64(seed + 1);
    (inputs, BatchNoise::draw(model, b, &mut nrng))
}

/// Gives every parameter a generic value: zero-initialized biases and unit
/// batch-norm scales otherwise leave symmetric, near-degenerate directions.
fn jitter(store: &mut ParamStore, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = names(store);
    for n in names {
        for v in store.get_mut(&n).unwrap().data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
}

#[test]
fn full_encoder_generator_loss() {
    let mut model = Dgan::new(tiny_arch(), 11).unwrap();
    jitter(&mut model.params, 12);
    let (inputs, noise) = tiny_batch(&model, 13);
    let cfg = LossConfig::default();
    let gen: Vec<String> = model.params.names().filter(|n| is_generator_param(n)).cloned().collect();
    assert!(!gen.is_empty());
    let r = grad_check_params(&model.params, &gen, EPS, |fwd| {
        Ok(model.loss_graph(fwd, &inputs, &noise, &cfg)?.total_eg)
    })
    .unwrap();
    assert_eq!(r.checked, gen.iter().map(|n| model.params.get(n).unwrap().len()).sum::<usize>());
    assert_report("loss_EG", &r);
}

#[test]
fn full_discriminator_loss() {
    let mut model = Dgan::new(tiny_arch(), 21).unwrap();
    jitter(&mut model.params, 22);
    let (inputs, noise) = tiny_batch(&model, 23);
    let cfg = LossConfig::default();
    let disc: Vec<String> = model.params.names().filter(|n| is_discriminator_param(n)).cloned().collect();
    assert!(!disc.is_empty());
    let r = grad_check_params(&model.params, &disc, EPS, |fwd| {
        Ok(model.loss_graph(fwd, &inputs, &noise, &cfg)?.d_loss)
    })
    .unwrap();
    assert_report("loss_D", &r);
}

#[test]
fn a_wrong_gradient_is_caught() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::new();
    store.insert("x", Tensor::randn(&[4], 1.0, &mut rng));
    let w = Tensor::randn(&[4], 1.0, &mut rng);
    // Doubling the graph output doubles both sides; doubling only the
    // analytic side must be flagged.
    let theta = store.flatten(&names(&store)).unwrap();
    let r = dgan_core::tensor::grad_check(
        |t| {
            let v: f64 = t.iter().zip(w.data()).map(|(a, b)| a * b).sum();
            Ok((v, w.data().iter().map(|b| 2.0 * b).collect()))
        },
        &theta,
        EPS,
    )
    .unwrap();
    assert!((r.max_rel_error - 1.0).abs() < 1e-6, "{}", r.max_rel_error);
}
