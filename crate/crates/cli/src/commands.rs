//! Subcommand bodies. Each takes a validated config and its fingerprint.

use std::io::Write;
use std::path::{Path, PathBuf};

use dgan_core::evaluate::{
    factor_sweep, rollout_eval, rollout_table, seq_length_sweep, write_table, Baseline, DganForecaster,
    Forecaster, MetricRow, MlpBaseline, OlsModel, OracleForecaster, SweepRow,
};
use dgan_core::ingest::{aggregate, build_factors_from_files, calendar_only_factors, parse_trips};
use dgan_core::model::{load_checkpoint, ArchSpec, Checkpoint};
use dgan_core::stmap::{StSequence, WindowedDataset};
use dgan_core::trainer::{split, train, RunOutput, CHECKPOINT_FILE};

use crate::config::{BaselineKind, RunConfig, SweepAxis};
use crate::dataset::{dataset_dir, Dataset, IngestCounts};
use crate::CliError;

pub const METRICS_STEM: &str = "metrics";
pub const PREDICTIONS_FILE: &str = "predictions.bin";
pub const PREDICTIONS_CSV: &str = "predictions.csv";

pub struct Run {
    pub cfg: RunConfig,
    pub fingerprint: String,
    pub out: PathBuf,
}

pub fn synth(run: &Run) -> Result<(), CliError> {
    let p = &run.cfg.synth.process;
    let (seq, factors) = p.generate(run.cfg.synth.slots)?;
    let ds = Dataset::new(seq, factors, &run.fingerprint, Some(p.clone()), None);
    ds.save(&run.out)?;
    println!(
        "synth: {} slots of {}×{}, total demand {:.3}, written to {}",
        ds.meta.slots,
        ds.meta.rows,
        ds.meta.cols,
        ds.meta.total_demand,
        run.out.display()
    );
    Ok(())
}

pub fn ingest(run: &Run) -> Result<(), CliError> {
    let d = &run.cfg.data;
    let trips = d
        .trips
        .as_ref()
        .ok_or_else(|| CliError::Config("data.trips: required for `ingest`".into()))?;
    let grid = d
        .grid
        .ok_or_else(|| CliError::Config("data.grid: required for `ingest`".into()))?;
    let parsed = parse_trips(trips, &d.columns)?;
    let span = parsed.records.iter().map(|r| r.slot());
    let start = match d.start_slot {
        Some(s) => s,
        None => span.clone().min().ok_or(dgan_core::Error::NoTrainingData)?,
    };
    let end = match d.end_slot {
        Some(s) => s,
        None => span.max().ok_or(dgan_core::Error::NoTrainingData)?,
    };
    if start > end {
        return Err(CliError::Config(format!(
            "data: start_slot {start} is after end_slot {end}"
        )));
    }
    let agg = aggregate(&parsed.records, &grid, start, end)?;
    let factors = match (&d.weather, &d.poi) {
        (Some(w), Some(p)) => {
            let col = d.weather_time_column.as_deref().unwrap_or("time");
            build_factors_from_files(w, col, p, &grid, start..=end)?
        }
        _ => calendar_only_factors(&grid, start..=end),
    };
    let counts = IngestCounts {
        rows: parsed.rows,
        malformed: parsed.malformed,
        kept: agg.kept,
        out_of_box: agg.out_of_box,
        out_of_window: agg.out_of_window,
    };
    let ds = Dataset::new(agg.sequence, factors, &run.fingerprint, None, Some(counts.clone()));
    ds.save(&run.out)?;
    println!(
        "ingest: {} slots, total demand {}, rows {} (malformed {}), kept {}, dropped {} out of box and {} out of window",
        ds.meta.slots,
        ds.meta.total_demand,
        counts.rows,
        counts.malformed,
        counts.kept,
        counts.out_of_box,
        counts.out_of_window
    );
    Ok(())
}

fn load_dataset(run: &Run, command: &str) -> Result<Dataset, CliError> {
    Dataset::load(&dataset_dir(&run.cfg.data.dataset, command)?)
}

/// The configured architecture with grid and weather arity taken from data.
fn arch_for(cfg: &ArchSpec, ds: &Dataset) -> ArchSpec {
    ArchSpec {
        rows: ds.meta.rows,
        cols: ds.meta.cols,
        weather_arity: ds.weather_arity(),
        ..cfg.clone()
    }
}

pub fn train_cmd(run: &Run) -> Result<(), CliError> {
    let ds = load_dataset(run, "train")?;
    let arch = arch_for(&run.cfg.arch, &ds);
    let data = WindowedDataset::new(ds.sequence, ds.factors, arch.seq_len)?;
    let (tr, _) = split(&data, run.cfg.train.train_fraction)?;
    let out = RunOutput {
        dir: run.out.clone(),
        fingerprint: run.fingerprint.clone(),
    };
    let outcome = train(&arch, &run.cfg.train, &tr, Some(&out))?;
    if let Some(last) = outcome.history.last() {
        println!(
            "train: {} steps, final d_loss {:.6} g_loss {:.6} kl {:.6} recon {:.6}",
            outcome.history.len(),
            last.d_loss,
            last.g_loss,
            last.kl,
            last.recon
        );
    }
    println!("checkpoint: {}", out.checkpoint_path().display());
    Ok(())
}

fn checkpoint_path(run: &Run) -> PathBuf {
    run.cfg
        .eval
        .checkpoint
        .clone()
        .unwrap_or_else(|| run.out.join(CHECKPOINT_FILE))
}

fn load_model(run: &Run, ds: &Dataset) -> Result<Checkpoint, CliError> {
    let ck = load_checkpoint(&checkpoint_path(run))?;
    ck.expect_grid(ds.meta.rows, ds.meta.cols)?;
    Ok(ck)
}

/// Forecasters scored next to the network: configured baselines, plus the
/// oracle when the data is synthetic.
fn reference_forecasters<'a>(
    run: &Run,
    ds: &'a Dataset,
    train: &WindowedDataset,
    lags: usize,
) -> Result<Vec<Box<dyn Forecaster + 'a>>, CliError> {
    let mut out: Vec<Box<dyn Forecaster + 'a>> = Vec::new();
    for kind in &run.cfg.eval.baselines {
        let b = match kind {
            BaselineKind::Sma => Baseline::Sma(lags),
            BaselineKind::Wma => Baseline::Wma(lags),
            BaselineKind::Ols => Baseline::Ols(OlsModel::fit(train, lags)?),
            BaselineKind::Mlp => Baseline::Mlp(MlpBaseline::fit(train, lags, &run.cfg.eval.mlp)?),
        };
        out.push(Box::new(b));
    }
    if let Some(p) = &ds.meta.synth {
        out.push(Box::new(OracleForecaster { process: p }));
    }
    Ok(out)
}

fn print_rows(rows: &[MetricRow]) {
    for r in rows {
        println!(
            "{:>10} h={:<3} rmse {:.6} mae {:.6} n={}",
            r.model, r.horizon, r.rmse, r.mae, r.samples
        );
    }
}

pub fn eval(run: &Run) -> Result<(), CliError> {
    let ds = load_dataset(run, "eval")?;
    let ck = load_model(run, &ds)?;
    let t = ck.model.arch.seq_len;
    let data = WindowedDataset::new(ds.sequence.clone(), ds.factors.clone(), t)?;
    let (tr, te) = split(&data, run.cfg.train.train_fraction)?;
    let opts = run.cfg.eval.metrics;
    let steps = run.cfg.eval.steps;
    let mut rows = rollout_eval(&DganForecaster::new(&ck.model, run.cfg.train.seed), &te, steps, opts)?;
    for f in reference_forecasters(run, &ds, &tr, t)? {
        rows.extend(rollout_eval(f.as_ref(), &te, steps, opts)?);
    }
    write_table(&run.out, METRICS_STEM, &run.fingerprint, &rows)?;
    print_rows(&rows);
    Ok(())
}

pub fn predict(run: &Run) -> Result<(), CliError> {
    let ds = load_dataset(run, "predict")?;
    let ck = load_model(run, &ds)?;
    let t = ck.model.arch.seq_len;
    let maps = ds.sequence.maps();
    if maps.len() < t {
        return Err(dgan_core::Error::SequenceTooShort {
            needed: t,
            available: maps.len(),
        }
        .into());
    }
    let from = maps.len() - t;
    let f = DganForecaster::new(&ck.model, run.cfg.train.seed);
    let pred = f.forecast_after(&maps[from..], &ds.factors[from..], run.cfg.predict.steps)?;
    std::fs::create_dir_all(&run.out).map_err(|e| dgan_core::Error::io(&run.out, e))?;
    let seq = StSequence::new(ds.meta.rows, ds.meta.cols, pred)?;
    seq.save(&run.out.join(PREDICTIONS_FILE))?;
    write_region_csv(&run.out.join(PREDICTIONS_CSV), &run.fingerprint, &seq)?;
    println!(
        "predict: {} maps for slots {}..={} written to {}",
        seq.len(),
        seq.epoch_slot(),
        seq.epoch_slot() + seq.len() as i64 - 1,
        run.out.display()
    );
    Ok(())
}

/// One row per (step, region), ready for heat-map rendering.
fn write_region_csv(path: &Path, fingerprint: &str, seq: &StSequence) -> Result<(), CliError> {
    let io = |e| dgan_core::Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "config_fingerprint,step,slot,row,col,value").map_err(io)?;
    for (k, m) in seq.maps().iter().enumerate() {
        for r in 0..m.rows {
            for c in 0..m.cols {
                writeln!(w, "{fingerprint},{},{},{r},{c},{:?}", k + 1, m.slot, m.get(r, c)).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn sweep(run: &Run) -> Result<(), CliError> {
    let ds = load_dataset(run, "sweep")?;
    let opts = run.cfg.eval.metrics;
    let s = &run.cfg.sweep;
    let rows: Vec<SweepRow> = match s.axis {
        SweepAxis::SeqLength => {
            let arch = arch_for(&run.cfg.arch, &ds);
            seq_length_sweep(&arch, &run.cfg.train, &ds.sequence, &ds.factors, &s.lengths, s.steps, opts)?
        }
        SweepAxis::ExternalFactors => {
            let arch = arch_for(&run.cfg.arch, &ds);
            factor_sweep(&arch, &run.cfg.train, &ds.sequence, &ds.factors, s.steps, opts)?
        }
        SweepAxis::RolloutSteps => {
            let ck = load_model(run, &ds)?;
            let t = ck.model.arch.seq_len;
            let data = WindowedDataset::new(ds.sequence.clone(), ds.factors.clone(), t)?;
            let (tr, te) = split(&data, run.cfg.train.train_fraction)?;
            let mut rows = rollout_table(&DganForecaster::new(&ck.model, run.cfg.train.seed), &te, s.steps, opts)?;
            for f in reference_forecasters(run, &ds, &tr, t)? {
                rows.extend(rollout_table(f.as_ref(), &te, s.steps, opts)?);
            }
            rows
        }
    };
    let stem = format!("sweep_{}", s.axis.name());
    write_table(&run.out, &stem, &run.fingerprint, &rows)?;
    for r in &rows {
        match (r.rmse, r.mae) {
            (Some(rmse), Some(mae)) => println!(
                "{:>16} {:>8} h={:<3} rmse {rmse:.6} mae {mae:.6}",
                r.axis, r.variant, r.horizon
            ),
            _ => println!("{:>16} {:>8} {}", r.axis, r.variant, r.status),
        }
    }
    Ok(())
}
