//! Simulation experiments: estimation error against the amount of logged
//! data (sweeps) and against ranker similarity (overlap).
//!
//! Each run derives its seed from (base seed, run index) alone, so within a
//! run every x value sees the same corpus and ranker noise. Runs execute in
//! parallel and are merged in run order.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use posbias_core::pipeline::{pair_stats, simulate};
use posbias_core::{fit_mle, true_propensities, FitOptions, SeedStream, SimulationConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("metric undefined: position {position} is unidentifiable")]
    MetricUndefined { position: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no result rows to emit")]
    EmptyResults,
    #[error(transparent)]
    Core(#[from] posbias_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Aggregated error at one x value.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentResultRow {
    /// Sweep count or overlap fraction.
    pub x_value: f64,
    /// `None` when no run was identifiable.
    pub mse_mean: Option<f64>,
    pub mse_variance: Option<f64>,
    pub runs: usize,
    pub per_run_mse: Vec<f64>,
    pub unidentifiable_runs: usize,
}

impl ExperimentResultRow {
    pub fn from_runs(x_value: f64, outcomes: &[Option<f64>]) -> Self {
        let per_run_mse: Vec<f64> = outcomes.iter().flatten().copied().collect();
        let (mse_mean, mse_variance) = mean_variance(&per_run_mse);
        ExperimentResultRow {
            x_value,
            mse_mean,
            mse_variance,
            runs: outcomes.len(),
            unidentifiable_runs: outcomes.len() - per_run_mse.len(),
            per_run_mse,
        }
    }
}

/// Mean and population variance.
fn mean_variance(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var))
}

/// Mean squared error of relative propensities over positions 2..=M.
///
/// `truth` may be on any scale; it is normalised by its first entry.
pub fn mse(rel_propensity: &[Option<f64>], truth: &[f64]) -> Result<f64, HarnessError> {
    if rel_propensity.len() != truth.len() || truth.len() < 2 {
        return Err(HarnessError::InvalidArgument(format!(
            "estimate has {} positions, truth has {}",
            rel_propensity.len(),
            truth.len()
        )));
    }
    let mut total = 0.0;
    for (k, (est, t)) in rel_propensity.iter().zip(truth).enumerate().skip(1) {
        let est = est.ok_or(HarnessError::MetricUndefined { position: k + 1 })?;
        total += (est - t / truth[0]).powi(2);
    }
    Ok(total / (truth.len() - 1) as f64)
}

/// Simulates, fits and scores one configuration. `Ok(None)` when the run
/// cannot identify every relative propensity.
pub fn run_once(config: &SimulationConfig, options: &FitOptions) -> Result<Option<f64>, HarnessError> {
    let sim = simulate(config)?;
    let stats = pair_stats(&sim.logs, config.top_k)?;
    let estimate = match fit_mle(&stats, options) {
        Ok(e) => e,
        Err(e) if e.is_estimation_impossible() => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let truth = true_propensities(config.eta, config.top_k);
    match mse(&estimate.rel_propensity, &truth) {
        Ok(v) => Ok(Some(v)),
        Err(HarnessError::MetricUndefined { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Seed of run `run` under `base_seed`.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    SeedStream::new(base_seed).child(run as u64).seed()
}

fn run_experiment<X: Copy + Sync>(
    config: &SimulationConfig,
    values: &[X],
    runs: usize,
    apply: impl Fn(&mut SimulationConfig, X) + Sync,
    x_value: impl Fn(X) -> f64,
) -> Result<Vec<ExperimentResultRow>, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::InvalidArgument("runs must be at least 1".into()));
    }
    config.validate()?;
    let options = FitOptions::default();
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|i| (0..runs).map(move |r| (i, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(i, run)| {
            let mut cfg = config.clone();
            apply(&mut cfg, values[i]);
            cfg.seed = run_seed(config.seed, run);
            cfg.validate()?;
            run_once(&cfg, &options)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(values
        .iter()
        .zip(outcomes.chunks(runs))
        .map(|(&x, chunk)| ExperimentResultRow::from_runs(x_value(x), chunk))
        .collect())
}

/// Error as a function of the number of sweeps. `config.seed` is the base
/// seed.
pub fn run_sweep_experiment(
    config: &SimulationConfig,
    sweep_values: &[usize],
    runs: usize,
) -> Result<Vec<ExperimentResultRow>, HarnessError> {
    run_experiment(config, sweep_values, runs, |c, s| c.sweeps = s, |s| s as f64)
}

/// Error as a function of ranker overlap. `config.seed` is the base seed.
pub fn run_overlap_experiment(
    config: &SimulationConfig,
    overlap_values: &[f64],
    runs: usize,
) -> Result<Vec<ExperimentResultRow>, HarnessError> {
    run_experiment(config, overlap_values, runs, |c, o| c.overlap = o, |o| o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

/// Formats with 10 significant digits, printed in shortest form.
fn sig10(x: f64) -> String {
    if !x.is_finite() {
        return "nan".into();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_results<W: Write>(
    rows: &[ExperimentResultRow],
    mut w: W,
    format: ResultFormat,
) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    match format {
        ResultFormat::Csv => {
            let mut out = String::from("x,mse_mean,mse_variance,runs,unidentifiable_runs\n");
            for r in rows {
                let opt = |v: Option<f64>| v.map_or_else(|| "nan".into(), sig10);
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    sig10(r.x_value),
                    opt(r.mse_mean),
                    opt(r.mse_variance),
                    r.runs,
                    r.unidentifiable_runs
                )
                .expect("writing to a String");
            }
            w.write_all(out.as_bytes())?;
        }
        ResultFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(io::Error::from)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(
    rows: &[ExperimentResultRow],
    path: impl AsRef<Path>,
    format: ResultFormat,
) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let file = std::fs::File::create(path)?;
    write_results(rows, io::BufWriter::new(file), format)
}
