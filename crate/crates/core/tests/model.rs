use dgan_core::ingest::ExternalFactorFrame;
use dgan_core::model::{
    fuse, load_checkpoint, read_checkpoint, sample_prior, save_checkpoint, write_checkpoint,
    ArchSpec, Dgan, FactorSelection,
};
use dgan_core::stmap::StMap;
use dgan_core::tensor::layers::{Forward, Mode};
use dgan_core::tensor::Tensor;
use dgan_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_arch() -> ArchSpec {
    ArchSpec {
        rows: 4,
        cols: 3,
        seq_len: 3,
        conv_lstm_filters: vec![3, 2],
        conv3d_channels: 2,
        latent_dim: 5,
        factor_latent_dim: 2,
        mlp_hidden: vec![6],
        decoder_seed_steps: 2,
        ..ArchSpec::default()
    }
}

fn history(arch: &ArchSpec, seed: u64) -> Vec<StMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..arch.seq_len as i64)
        .map(|t| {
            let v = (0..arch.regions()).map(|_| rng.random::<f64>()).collect();
            StMap::new(arch.rows, arch.cols, 100 + t, v).unwrap()
        })
        .collect()
}

fn frames(arch: &ArchSpec, n: usize) -> Vec<ExternalFactorFrame> {
    (0..n)
        .map(|t| ExternalFactorFrame {
            poi: (0..arch.regions()).map(|r| r as f64 / arch.regions() as f64).collect(),
            weather: vec![(t as f64).sin(), (t as f64).cos()],
            is_weekend: (t % 2) as f64,
        })
        .collect()
}

#[test]
fn zero_noise_sample_is_the_mean() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 1).unwrap();
    let code = m.encode(&history(&arch, 2), None).unwrap();
    assert_eq!(code.sample, code.mu);
    assert!(code.sigma.iter().all(|s| *s > 0.0));
    assert_eq!(code.mu.len(), arch.latent_dim);
    let f = m.encode_factors(&frames(&arch, arch.seq_len), None).unwrap();
    assert_eq!(f.sample, f.mu);
    assert_eq!(f.mu.len(), arch.factor_latent_dim);
}

#[test]
fn encode_is_deterministic_under_a_seed() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 1).unwrap();
    let h = history(&arch, 3);
    let a = m.encode(&h, Some(&mut ChaCha8Rng::seed_from_u64(9))).unwrap();
    let b = m.encode(&h, Some(&mut ChaCha8Rng::seed_from_u64(9))).unwrap();
    assert_eq!(a, b);
    let c = m.encode(&h, Some(&mut ChaCha8Rng::seed_from_u64(10))).unwrap();
    assert_eq!(a.mu, c.mu);
    assert_ne!(a.sample, c.sample);
}

#[test]
fn zero_factor_encoder_gives_standard_posterior() {
    let arch = small_arch();
    let mut m = Dgan::new(arch.clone(), 1).unwrap();
    let names: Vec<String> = m.params.names().filter(|n| n.starts_with("fenc.")).cloned().collect();
    for n in names {
        m.params.get_mut(&n).unwrap().data_mut().fill(0.0);
    }
    let zero = vec![
        ExternalFactorFrame {
            poi: vec![0.0; arch.regions()],
            weather: vec![0.0; 2],
            is_weekend: 0.0,
        };
        arch.seq_len
    ];
    let code = m.encode_factors(&zero, None).unwrap();
    assert!(code.mu.iter().all(|v| *v == 0.0));
    assert!(code.sigma.iter().all(|v| *v == 1.0));
}

#[test]
fn factor_arity_mismatch_is_rejected() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 1).unwrap();
    let mut f = frames(&arch, arch.seq_len);
    f[1].weather.push(0.5);
    assert!(m.encode_factors(&f, None).is_err());
}

#[test]
fn disabled_factor_branch() {
    let arch = ArchSpec {
        factors: FactorSelection::NONE,
        ..small_arch()
    };
    let m = Dgan::new(arch.clone(), 1).unwrap();
    assert!(m.encode_factors(&frames(&arch, arch.seq_len), None).is_err());
    assert!(!m.params.names().any(|n| n.starts_with("fenc.")));
    let p = m
        .predict(&history(&arch, 1), &[], 2, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    assert_eq!(p.len(), 2);
}

#[test]
fn fuse_layout() {
    let a: Vec<f64> = (0..64).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..16).map(|i| -(i as f64)).collect();
    let f = fuse(&a, Some(&b));
    assert_eq!(f.len(), 80);
    assert_eq!(&f[..64], &a[..]);
    assert_eq!(&f[64..], &b[..]);
    assert_eq!(fuse(&a, None), a);
}

#[test]
fn prior_draws() {
    let a = sample_prior(80, &mut ChaCha8Rng::seed_from_u64(4));
    let b = sample_prior(80, &mut ChaCha8Rng::seed_from_u64(4));
    assert_eq!(a.len(), 80);
    assert_eq!(a, b);
    let n = 100_000;
    let xs = sample_prior(n, &mut ChaCha8Rng::seed_from_u64(5));
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "var {var}");
}

#[test]
fn reparameterized_moments() {
    let n = 100_000;
    let mu = [0.3, -1.2, 2.0];
    let sigma: [f64; 3] = [0.5, 1.5, 0.1];
    let d = mu.len();
    let store = Default::default();
    let mut fwd = Forward::new(&store, Mode::Infer, None);
    let m = fwd.input(Tensor::from_fn(&[n, d], |i| mu[i % d]));
    let lv = fwd.input(Tensor::from_fn(&[n, d], |i| (sigma[i % d] * sigma[i % d]).ln()));
    let eps = Tensor::new(vec![n, d], sample_prior(n * d, &mut ChaCha8Rng::seed_from_u64(6))).unwrap();
    let s = Dgan::reparameterize(&mut fwd, m, lv, eps).unwrap();
    let v = fwd.value(s).data();
    for j in 0..d {
        let col: Vec<f64> = v.iter().skip(j).step_by(d).copied().collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - mu[j]).abs() < 4.0 * sigma[j] / (n as f64).sqrt());
        assert!((var / (sigma[j] * sigma[j]) - 1.0).abs() < 0.05);
    }
}

#[test]
fn decode_range_and_determinism() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 2).unwrap();
    let fv = sample_prior(arch.fused_dim(), &mut ChaCha8Rng::seed_from_u64(1));
    let a = m.decode(&fv).unwrap();
    let b = m.decode(&fv).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.rows, a.cols), (arch.rows, arch.cols));
    assert!(a.values.iter().all(|v| *v > 0.0 && *v < 1.0));
    assert!(m.decode(&fv[1..]).is_err());
}

#[test]
fn discriminator_range() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for scale in [0.0, 1.0, 100.0] {
        let map = StMap::new(
            arch.rows,
            arch.cols,
            0,
            (0..arch.regions()).map(|_| scale * rng.random::<f64>()).collect(),
        )
        .unwrap();
        let code: Vec<f64> = sample_prior(arch.fused_dim(), &mut rng)
            .iter()
            .map(|v| v * scale)
            .collect();
        let p = m.discriminate(&map, &code).unwrap();
        assert!(p > 0.0 && p < 1.0, "{p}");
        assert_eq!(p, m.discriminate(&map, &code).unwrap());
    }
    let wrong = StMap::zeros(arch.rows + 1, arch.cols, 0);
    assert!(m.discriminate(&wrong, &vec![0.0; arch.fused_dim()]).is_err());
}

#[test]
fn one_step_prediction_is_encode_fuse_decode() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 4).unwrap();
    let h = history(&arch, 5);
    let f = frames(&arch, arch.seq_len);
    let p = m.predict(&h, &f, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    // The same draws in the same order: demand ε, then factor ε.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = m.encode(&h, Some(&mut rng)).unwrap();
    let fc = m.encode_factors(&f, Some(&mut rng)).unwrap();
    let d = m.decode(&fuse(&x.sample, Some(&fc.sample))).unwrap();
    assert_eq!(p[0].values, d.values);
    assert_eq!(p[0].slot, h.last().unwrap().slot + 1);
}

#[test]
fn rollout_range_and_prefix() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 4).unwrap();
    let h = history(&arch, 6);
    let f = frames(&arch, arch.seq_len + 4);
    let ten = m.predict(&h, &f, 10, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    assert_eq!(ten.len(), 10);
    assert!(ten.iter().flat_map(|m| &m.values).all(|v| v.is_finite() && *v > 0.0 && *v < 1.0));
    let three = m.predict(&h, &f, 3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let two = m.predict(&h, &f, 2, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    assert_eq!(&three[..2], &two[..]);
    assert_eq!(&ten[..3], &three[..]);
    assert!(m.predict(&h, &f, 0, &mut ChaCha8Rng::seed_from_u64(8)).is_err());
}

#[test]
fn batching_does_not_change_predictions() {
    let arch = small_arch();
    let m = Dgan::new(arch.clone(), 4).unwrap();
    let hs: Vec<Vec<StMap>> = (0..3).map(|s| history(&arch, s)).collect();
    let f = frames(&arch, arch.seq_len);
    let hrefs: Vec<&[StMap]> = hs.iter().map(Vec::as_slice).collect();
    let frefs = vec![f.as_slice(); 3];
    let mut rngs: Vec<ChaCha8Rng> = (0..3).map(ChaCha8Rng::seed_from_u64).collect();
    let batched = m.predict_batch(&hrefs, &frefs, 2, &mut rngs).unwrap();
    for (i, h) in hs.iter().enumerate() {
        let alone = m.predict(h, &f, 2, &mut ChaCha8Rng::seed_from_u64(i as u64)).unwrap();
        assert_eq!(batched[i], alone);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let arch = small_arch();
    let mut m = Dgan::new(arch.clone(), 11).unwrap();
    m.scaler.data_max = 37.5;
    m.factor_scaler.weather[1].data_min = -0.25;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&m, "feedbeef", &path).unwrap();
    let ck = load_checkpoint(&path).unwrap();
    assert_eq!(ck.config_hash, "feedbeef");
    assert_eq!(ck.model.arch, m.arch);
    assert_eq!(ck.model.scaler, m.scaler);
    assert_eq!(ck.model.factor_scaler, m.factor_scaler);
    for ((na, ta), (nb, tb)) in m.params.params().zip(ck.model.params.params()) {
        assert_eq!(na, nb);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(ta), bits(tb), "{na}");
    }
    assert_eq!(ck.model.params, m.params);

    let h = history(&arch, 1);
    let f = frames(&arch, arch.seq_len);
    let before = m.predict(&h, &f, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let after = ck.model.predict(&h, &f, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(before, after);

    ck.expect_grid(4, 3).unwrap();
    assert!(matches!(ck.expect_grid(5, 3), Err(Error::Checkpoint(_))));
    ck.expect_fingerprint("feedbeef").unwrap();
    assert!(ck.expect_fingerprint("other").is_err());
}

#[test]
fn checkpoint_version_and_corruption_guards() {
    let m = Dgan::new(small_arch(), 1).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&m, "x", &mut bytes).unwrap();
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let needle = "\"format_version\":1";
    assert!(text.contains(needle));
    let pos = bytes.windows(needle.len()).position(|w| w == needle.as_bytes()).unwrap();
    let mut bumped = bytes.clone();
    bumped[pos + needle.len() - 1] = b'9';
    assert!(read_checkpoint(&mut bumped.as_slice()).is_err());

    let truncated = &bytes[..bytes.len() - 3];
    assert!(read_checkpoint(&mut &truncated[..]).is_err());
    assert!(read_checkpoint(&mut &b"garbage"[..]).is_err());
}

fn arch_strategy() -> impl Strategy<Value = ArchSpec> {
    (
        1usize..4,
        1usize..4,
        1usize..4,
        prop::collection::vec(1usize..4, 1..3),
        1usize..3,
        1usize..4,
        0usize..3,
        prop::collection::vec(1usize..5, 0..2),
        1usize..3,
        1usize..3,
        any::<(bool, bool, bool)>(),
    )
        .prop_map(
            |(rows, cols, seq_len, filters, c3d, latent, flat, mlp, seed_steps, seed_ch, (p, w, we))| {
                ArchSpec {
                    rows,
                    cols,
                    seq_len,
                    conv_lstm_filters: filters,
                    conv3d_channels: c3d,
                    latent_dim: latent,
                    factor_latent_dim: flat + 1,
                    mlp_hidden: mlp,
                    decoder_seed_steps: seed_steps,
                    decoder_seed_channels: seed_ch,
                    factors: FactorSelection {
                        poi: p,
                        weekday: w,
                        weather: we,
                    },
                    ..ArchSpec::default()
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_shapes_follow_the_arch(arch in arch_strategy(), seed in 0u64..100) {
        let m = Dgan::new(arch.clone(), seed).unwrap();
        let h = history(&arch, seed);
        let f = frames(&arch, arch.seq_len);
        let code = m.encode(&h, None).unwrap();
        prop_assert_eq!(code.mu.len(), arch.latent_dim);
        prop_assert_eq!(code.sigma.len(), arch.latent_dim);
        let fused = if arch.factors_enabled() {
            let fc = m.encode_factors(&f, None).unwrap();
            prop_assert_eq!(fc.mu.len(), arch.factor_latent_dim);
            fuse(&code.sample, Some(&fc.sample))
        } else {
            code.sample.clone()
        };
        prop_assert_eq!(fused.len(), arch.fused_dim());
        let map = m.decode(&fused).unwrap();
        prop_assert_eq!((map.rows, map.cols), (arch.rows, arch.cols));
        let p = m.discriminate(&map, &fused).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
        let preds = m.predict(&h, &f, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(preds.len(), 2);
        prop_assert!(preds.iter().all(|q| q.values.len() == arch.regions()));
    }
}
