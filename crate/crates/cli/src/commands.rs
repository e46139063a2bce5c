use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use neuroplex::analysis::{fit_measurement_constant, measurement_sweep};
use neuroplex::ensemble::{Ensemble, WeightVector};
use neuroplex::hr::{add_gaussian_noise, simulate_signal, HrState};
use neuroplex::io::{read_ensemble_header, save_ensemble, save_series, write_sweep_csv, write_weights};
use neuroplex::multiplex::interference_component;
use neuroplex::pipeline::{run_trial, TrialReport, TrialSeeds};
use neuroplex::rng::{stream, Purpose};
use neuroplex::Error;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Creates `dir` and proves it accepts files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let probe = dir.join(".write-probe");
    File::create(&probe).with_context(|| format!("output directory {} is not writable", dir.display()))?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Timestamps live here so that every other output is reproducible.
struct Metadata {
    command: &'static str,
    started: u128,
}

impl Metadata {
    fn start(command: &'static str) -> Self {
        Self { command, started: unix_ms() }
    }

    fn finish(self, dir: &Path) -> Result<()> {
        let v = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix_ms": self.started as u64,
            "finished_unix_ms": unix_ms() as u64,
        });
        write_json(&dir.join("metadata.json"), &v)
    }
}

fn begin(cfg: &RunConfig, command: &'static str, resolve_eta: bool) -> Result<(RunConfig, Metadata)> {
    cfg.validate()?;
    ensure_writable(&cfg.output_dir)?;
    let resolved = if resolve_eta { cfg.resolved() } else { cfg.clone() };
    write_json(&cfg.output_dir.join("resolved_config.json"), &resolved)?;
    Ok((resolved, Metadata::start(command)))
}

#[derive(Serialize)]
struct SeriesStats {
    min: f64,
    max: f64,
    mean: f64,
}

fn stats(v: &[f64]) -> SeriesStats {
    SeriesStats {
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: v.iter().sum::<f64>() / v.len() as f64,
    }
}

/// Noiseless and noisy traces of the first `signals` signal-dominant columns
/// of trial 0.
pub fn simulate_neuron(cfg: &RunConfig) -> Result<()> {
    let (cfg, meta) = begin(cfg, "simulate-neuron", true)?;
    let dir = &cfg.output_dir;
    let e = &cfg.ensemble;
    let seed = TrialSeeds::derive(cfg.master_seed, 0).transmitter;
    let mut summary = Vec::new();
    for j in 0..cfg.signals {
        let init = HrState::random(&mut stream(seed, Purpose::InitialCondition, j as u64));
        let clean = simulate_signal(&e.hr, init, e.measurements)?;
        let noisy = add_gaussian_noise(&clean, e.signal_noise_variance, &mut stream(seed, Purpose::SignalNoise, j as u64))?;
        save_series(&dir.join(format!("signal_{j}_clean.csv")), clean.samples())?;
        save_series(&dir.join(format!("signal_{j}_noisy.csv")), noisy.samples())?;
        summary.push(json!({
            "signal": j,
            "initial_state": init,
            "samples": clean.len(),
            "clean": stats(clean.samples()),
            "noisy": stats(noisy.samples()),
        }));
    }
    write_json(&dir.join("summary.json"), &json!({ "seed": seed, "signals": summary }))?;
    meta.finish(dir)
}

struct TrialArtifacts {
    report: TrialReport,
    recovery: Value,
    weights: WeightVector,
    measurement: Vec<f64>,
    interference: Vec<f64>,
    /// `(index, w_i a_i, x*_i â_i)` for every true support index.
    pairs: Vec<(usize, Vec<f64>, Vec<f64>)>,
    ensemble: Option<Ensemble>,
}

fn trial(cfg: &RunConfig, t: usize, keep_ensemble: bool) -> Result<TrialArtifacts> {
    let seeds = TrialSeeds::derive(cfg.master_seed, t as u64);
    let run = run_trial(&cfg.pipeline(), t, &seeds)?;
    let tx = &run.transmission;
    let interference = interference_component(&tx.ensemble, &tx.weights)?.y;
    let pairs = tx
        .weights
        .significant_support
        .iter()
        .map(|&i| {
            let original = tx.ensemble.matrix().column(i) * tx.weights.values[i];
            let rebuilt = run.receiver.matrix().column(i) * run.recovery.x_star[i];
            (i, original.as_slice().to_vec(), rebuilt.as_slice().to_vec())
        })
        .collect();
    Ok(TrialArtifacts {
        recovery: run.recovery.to_json(),
        weights: tx.weights.clone(),
        measurement: tx.measurement.y.as_slice().to_vec(),
        interference: interference.as_slice().to_vec(),
        pairs,
        ensemble: keep_ensemble.then(|| tx.ensemble.clone()),
        report: run.report,
    })
}

fn write_trial(dir: &Path, a: &TrialArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &a.report)?;
    write_json(&dir.join("recovery.json"), &a.recovery)?;
    let mut w = BufWriter::new(File::create(dir.join("weights.csv"))?);
    write_weights(&mut w, &a.weights)?;
    w.flush()?;
    save_series(&dir.join("measurement.csv"), &a.measurement)?;
    save_series(&dir.join("interference.csv"), &a.interference)?;
    for (i, original, rebuilt) in &a.pairs {
        save_series(&dir.join(format!("signal_{i}_original.csv")), original)?;
        save_series(&dir.join(format!("signal_{i}_reconstruction.csv")), rebuilt)?;
    }
    if let Some(e) = &a.ensemble {
        save_ensemble(&dir.join("transmitter.nplex"), e)?;
    }
    Ok(())
}

/// Runs every trial. Returns the number of trials that ended in an error.
pub fn run(cfg: &RunConfig, save_ensembles: bool) -> Result<usize> {
    let (cfg, meta) = begin(cfg, "run", true)?;
    let dir = cfg.output_dir.clone();
    let outcomes: Vec<Result<TrialArtifacts>> =
        (0..cfg.trials).into_par_iter().map(|t| trial(&cfg, t, save_ensembles)).collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(a) => {
                write_trial(&dir.join(format!("trial_{t:04}")), &a)?;
                records.push(a.report);
            }
            Err(e) => {
                failures.push(json!({ "trial": t, "error": format!("{e:#}") }));
            }
        }
    }
    let successes = records.iter().filter(|r| r.support.exact_match).count();
    let mean = |f: &dyn Fn(&TrialReport) -> f64| {
        if records.is_empty() {
            None
        } else {
            Some(records.iter().map(f).sum::<f64>() / records.len() as f64)
        }
    };
    let report = json!({
        "trials": cfg.trials,
        "completed": records.len(),
        "successes": successes,
        "success_rate": successes as f64 / cfg.trials as f64,
        "mean_precision": mean(&|r| r.support.precision),
        "mean_recall": mean(&|r| r.support.recall),
        "failed_trials": failures,
        "records": records,
    });
    write_json(&dir.join("report.json"), &report)?;
    meta.finish(&dir)?;
    Ok(failures.len())
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    // an estimated η depends on M, so it stays unresolved
    let (cfg, meta) = begin(cfg, "sweep", false)?;
    let dir = &cfg.output_dir;
    let result = measurement_sweep(&cfg.pipeline(), &cfg.sweep.grid, cfg.sweep.trials, cfg.master_seed)?;
    write_json(&dir.join("sweep.json"), &result)?;
    let mut w = BufWriter::new(File::create(dir.join("sweep.csv"))?);
    write_sweep_csv(&mut w, &result)?;
    w.flush()?;
    let fit = match fit_measurement_constant(&result) {
        Ok(f) => json!({ "status": "ok", "constant": f.constant, "residual": f.residual, "points": f.points }),
        Err(Error::InsufficientData { points }) => json!({ "status": "insufficient_data", "points": points }),
        Err(e) => json!({ "status": "error", "error": e.to_string() }),
    };
    write_json(&dir.join("fit.json"), &fit)?;
    meta.finish(dir)
}

/// Resolved configuration and derived sizes, or the header of a saved
/// ensemble.
pub fn inspect(cfg: &RunConfig, ensemble: Option<&Path>) -> Result<Value> {
    if let Some(path) = ensemble {
        let mut f = std::io::BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
        let h = read_ensemble_header(&mut f)?;
        return Ok(json!({
            "measurements": h.measurements,
            "neurons": h.neurons,
            "signal_indices": h.signal_indices,
            "seeds": h.seeds,
            "noise_column_variance": h.noise_column_variance,
        }));
    }
    cfg.validate()?;
    let e = &cfg.ensemble;
    let k = e.multiplexed as f64;
    Ok(json!({
        "resolved_config": cfg.resolved(),
        "derived": {
            "eta": cfg.pipeline().eta(),
            "noise_columns": e.neurons - e.signal_dominant,
            "k_ln_n_over_k": if e.multiplexed > 0 { k * (e.neurons as f64 / k).ln() } else { 0.0 },
            "trial_0_seeds": TrialSeeds::derive(cfg.master_seed, 0),
        },
    }))
}
