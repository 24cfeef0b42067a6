use dgan_core::evaluate::{
    evaluate_model, mae, mean_signed_error, rmse, rollout_eval, write_table, Baseline, ErrorAccumulator,
    Forecaster, MaeMode, MetricOptions, MetricRow, MlpBaseline, MlpConfig, OlsModel, OracleForecaster, Pooling,
};
use dgan_core::ingest::ExternalFactorFrame;
use dgan_core::stmap::{StMap, StSequence, WindowedDataset};
use dgan_core::synth::SynthProcess;
use dgan_core::{Error, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> StMap {
    let v = (0..rows * cols).map(|_| rng.random_range(-50.0..50.0)).collect();
    StMap::new(rows, cols, 0, v).unwrap()
}

fn brute_rmse(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).powi(2);
    }
    (s / a.len() as f64).sqrt()
}

fn brute_mae(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).abs();
    }
    s / a.len() as f64
}

#[test]
fn metrics_match_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(1..12), rng.random_range(1..12));
        let a = random_map(&mut rng, r, c);
        let b = random_map(&mut rng, r, c);
        let (x, y) = (rmse(&a, &b).unwrap(), mae(&a, &b).unwrap());
        assert!((x - brute_rmse(&a.values, &b.values)).abs() < 1e-9);
        assert!((y - brute_mae(&a.values, &b.values)).abs() < 1e-9);
        assert!(y <= x + 1e-12);
    }
}

#[test]
fn metric_hand_values() {
    let t = StMap::new(1, 2, 0, vec![0.0, 0.0]).unwrap();
    let p = StMap::new(1, 2, 0, vec![1.0, 2.0]).unwrap();
    assert!((rmse(&t, &p).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
    let p = StMap::new(1, 2, 0, vec![-1.0, 2.0]).unwrap();
    assert_eq!(mae(&t, &p).unwrap(), 1.5);
    assert_eq!(mean_signed_error(&t, &p).unwrap(), -0.5);
    assert_eq!(rmse(&t, &t).unwrap(), 0.0);
    assert_eq!(mae(&t, &t).unwrap(), 0.0);
    let q = StMap::new(2, 1, 0, vec![0.0, 0.0]).unwrap();
    assert!(matches!(rmse(&t, &q), Err(Error::Shape { .. })));
}

#[test]
fn pooled_metrics_match_flattened_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut acc = ErrorAccumulator::default();
    let (mut ta, mut pa) = (Vec::new(), Vec::new());
    let mut per_map = 0.0;
    for _ in 0..50 {
        let a = random_map(&mut rng, 3, 4);
        let b = random_map(&mut rng, 3, 4);
        acc.push(&a, &b).unwrap();
        per_map += rmse(&a, &b).unwrap();
        ta.extend(a.values);
        pa.extend(b.values);
    }
    let (r, m) = acc.finish(MetricOptions::default());
    assert!((r - brute_rmse(&ta, &pa)).abs() < 1e-9);
    assert!((m - brute_mae(&ta, &pa)).abs() < 1e-9);
    let opts = MetricOptions {
        pooling: Pooling::PerMap,
        mae: MaeMode::Absolute,
    };
    assert!((acc.finish(opts).0 - per_map / 50.0).abs() < 1e-9);
    let signed = MetricOptions {
        mae: MaeMode::Signed,
        ..MetricOptions::default()
    };
    let want: f64 = ta.iter().zip(&pa).map(|(a, b)| a - b).sum::<f64>() / ta.len() as f64;
    assert!((acc.finish(signed).1 - want).abs() < 1e-9);
}

fn noiseless(slots: usize, window: usize) -> (SynthProcess, WindowedDataset) {
    let p = SynthProcess {
        noise_sigma: 0.0,
        ..SynthProcess::default()
    };
    let (seq, factors) = p.generate(slots).unwrap();
    (p, WindowedDataset::new(seq, factors, window).unwrap())
}

#[test]
fn oracle_on_noiseless_data_is_exact_at_every_horizon() {
    let (p, data) = noiseless(80, 8);
    let rows = rollout_eval(&OracleForecaster { process: &p }, &data, 10, MetricOptions::default()).unwrap();
    assert_eq!(rows.len(), 10);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r.horizon, k + 1);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.samples, data.len() - k);
        assert_eq!(r.model, "oracle");
    }
}

struct Zero;

impl Forecaster for Zero {
    fn name(&self) -> String {
        "zero".into()
    }

    fn forecast(&self, data: &WindowedDataset, idx: &[usize], steps: usize) -> Result<Vec<Vec<StMap>>> {
        let s = data.sequence();
        Ok(idx
            .iter()
            .map(|_| (0..steps).map(|_| StMap::zeros(s.rows(), s.cols(), 0)).collect())
            .collect())
    }
}

#[test]
fn zero_predictor_scores_the_data_rms() {
    let (_, data) = noiseless(60, 5);
    let row = evaluate_model(&Zero, &data, MetricOptions::default()).unwrap();
    let targets: Vec<f64> = (0..data.len()).flat_map(|i| data.target(i).values.clone()).collect();
    let rms = (targets.iter().map(|v| v * v).sum::<f64>() / targets.len() as f64).sqrt();
    let mean_abs = targets.iter().map(|v| v.abs()).sum::<f64>() / targets.len() as f64;
    assert!((row.rmse - rms).abs() < 1e-12);
    assert!((row.mae - mean_abs).abs() < 1e-12);
    assert!(row.mae <= row.rmse);
}

#[test]
fn first_rollout_row_is_the_one_step_evaluation() {
    let p = SynthProcess::default();
    let (seq, factors) = p.generate(120).unwrap();
    let data = WindowedDataset::new(seq, factors, 8).unwrap();
    for f in [Baseline::Sma(4), Baseline::Wma(3)] {
        let one = evaluate_model(&f, &data, MetricOptions::default()).unwrap();
        let roll = rollout_eval(&f, &data, 1, MetricOptions::default()).unwrap();
        assert_eq!(roll, vec![one.clone()]);
        let ten = rollout_eval(&f, &data, 10, MetricOptions::default()).unwrap();
        assert_eq!(ten.len(), 10);
        assert_eq!(ten[0], one);
        for (k, r) in ten.iter().enumerate() {
            assert_eq!(r.samples, data.len() - k);
            assert!(r.rmse.is_finite() && r.mae <= r.rmse);
        }
    }
}

#[test]
fn too_long_a_rollout_names_the_feasible_horizon() {
    let (p, data) = noiseless(20, 8);
    let f = OracleForecaster { process: &p };
    match rollout_eval(&f, &data, 13, MetricOptions::default()) {
        Err(Error::InsufficientHorizon { max_feasible }) => assert_eq!(max_feasible, 12),
        other => panic!("expected an insufficient-horizon error, got {other:?}"),
    }
    assert!(rollout_eval(&f, &data, 12, MetricOptions::default()).is_ok());
}

#[test]
fn baselines_are_deterministic() {
    let p = SynthProcess::default();
    let (seq, factors) = p.generate(150).unwrap();
    let data = WindowedDataset::new(seq, factors, 6).unwrap();
    let cfg = MlpConfig {
        hidden: vec![16, 8],
        epochs: 3,
        ..MlpConfig::default()
    };
    let a = MlpBaseline::fit(&data, 6, &cfg).unwrap();
    let b = MlpBaseline::fit(&data, 6, &cfg).unwrap();
    let h = data.history(10);
    assert_eq!(a.predict(h).unwrap(), b.predict(h).unwrap());
    let o1 = OlsModel::fit(&data, 4).unwrap();
    let o2 = OlsModel::fit(&data, 4).unwrap();
    assert_eq!(o1.predict(h).unwrap(), o2.predict(h).unwrap());
    assert_eq!(Baseline::Sma(3).predict_next(h).unwrap(), Baseline::Sma(3).predict_next(h).unwrap());
}

#[test]
fn mlp_training_reduces_error() {
    let p = SynthProcess {
        noise_sigma: 0.0,
        ..SynthProcess::default()
    };
    let (seq, factors) = p.generate(300).unwrap();
    let data = WindowedDataset::new(seq, factors, 4).unwrap();
    let cfg = |epochs| MlpConfig {
        hidden: vec![32],
        epochs,
        learning_rate: 0.1,
        ..MlpConfig::default()
    };
    let score = |epochs| {
        let mlp = Baseline::Mlp(MlpBaseline::fit(&data, 4, &cfg(epochs)).unwrap());
        evaluate_model(&mlp, &data, MetricOptions::default()).unwrap().rmse
    };
    let (before, after) = (score(0), score(100));
    assert!(after < 0.5 * before, "before {before} after {after}");
}

#[test]
fn ols_fits_linear_per_region_series_exactly() {
    // Region r follows x_t = a_r + b_r·t, an exact linear function of its lags.
    let (rows, cols, len) = (2, 3, 40);
    let maps = (0..len as i64)
        .map(|t| {
            let v = (0..rows * cols).map(|r| 3.0 + r as f64 + (0.5 + r as f64) * t as f64).collect();
            StMap::new(rows, cols, t, v).unwrap()
        })
        .collect();
    let seq = StSequence::new(rows, cols, maps).unwrap();
    let data = WindowedDataset::new(seq, vec![ExternalFactorFrame::default(); len], 3).unwrap();
    let ols = OlsModel::fit(&data, 3).unwrap();
    for i in 0..data.len() {
        let p = ols.predict(data.history(i)).unwrap();
        for (a, b) in p.values.iter().zip(&data.target(i).values) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn tables_carry_the_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![MetricRow {
        model: "sma(8)".into(),
        horizon: 1,
        rmse: 0.25,
        mae: 0.125,
        samples: 3,
    }];
    write_table(dir.path(), "metrics", "abc123", &rows).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(
        csv,
        "config_fingerprint,model,horizon,rmse,mae,samples\nabc123,sma(8),1,0.25,0.125,3\n"
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["config_fingerprint"], "abc123");
    assert_eq!(json["rows"][0]["rmse"], 0.25);
}

proptest! {
    #[test]
    fn mae_never_exceeds_rmse(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..64),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = a.len();
        let t = StMap::new(1, n, 0, a).unwrap();
        let p = StMap::new(1, n, 0, b).unwrap();
        let (r, m) = (rmse(&t, &p).unwrap(), mae(&t, &p).unwrap());
        prop_assert!(m >= 0.0 && m <= r * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn forecast_after_a_history_matches_the_window_forecast() {
    use dgan_core::evaluate::DganForecaster;
    use dgan_core::model::{ArchSpec, Dgan};
    let p = SynthProcess::default();
    let (seq, factors) = p.generate(30).unwrap();
    let data = WindowedDataset::new(seq, factors, 4).unwrap();
    let arch = ArchSpec {
        seq_len: 4,
        conv_lstm_filters: vec![2],
        conv3d_channels: 1,
        latent_dim: 3,
        factor_latent_dim: 2,
        mlp_hidden: vec![4],
        decoder_seed_steps: 2,
        ..ArchSpec::default()
    };
    let model = Dgan::new(arch, 3).unwrap();
    let f = DganForecaster::new(&model, 9);
    let idx = [2, 11];
    let windows = f.forecast(&data, &idx, 3).unwrap();
    for (&i, w) in idx.iter().zip(&windows) {
        let alone = f.forecast_after(data.history(i), &data.frames()[data.start(i)..], 3).unwrap();
        assert_eq!(&alone, w);
        assert_eq!(alone[0].slot, data.target(i).slot);
    }
}
