//! Simulation driver: resolved configuration, parallel trials, CSV output and
//! the run manifest.
//!
//! User-facing indices (sensors, hypotheses, rounds) are 1-based; trial
//! indices are 0-based because they address the per-trial random streams.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use das_detect_core::{
    aggregate_outcomes, run_trial, BenchmarkSpec, Family, HypothesisModel, MonteCarloConfig, StrategyKind,
    TrajectoryAggregate, TrialOutcome,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_file::load_model;

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const TRACE_FILE: &str = "selection_trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const TRAJECTORIES_HEADER: &str = "strategy,true_hyp,round,mean_llr,std_llr,stderr,trials,alt_hyp";
pub const TRACE_HEADER: &str = "trial,round,strategy,chosen_node,score,true_hyp";

/// Where the hypothesis model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSource {
    Benchmark { family: String, sensors: usize, amplitude: f64, noise_var: f64, rho: Vec<f64> },
    File { path: PathBuf },
}

impl ModelSource {
    pub fn from_spec(spec: &BenchmarkSpec) -> Self {
        ModelSource::Benchmark {
            family: spec.family.name().to_string(),
            sensors: spec.sensors,
            amplitude: spec.amplitude,
            noise_var: spec.noise_var,
            rho: spec.rho.clone(),
        }
    }

    pub fn build(&self) -> Result<HypothesisModel> {
        match self {
            ModelSource::Benchmark { family, sensors, amplitude, noise_var, rho } => {
                let family: Family = family.parse().map_err(Error::Usage)?;
                let spec = BenchmarkSpec {
                    family,
                    sensors: *sensors,
                    amplitude: *amplitude,
                    noise_var: *noise_var,
                    rho: rho.clone(),
                };
                Ok(spec.build()?)
            }
            ModelSource::File { path } => load_model(path),
        }
    }
}

/// Fully resolved simulation settings; everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: ModelSource,
    pub strategies: Vec<String>,
    /// 1-based.
    pub true_hypotheses: Vec<usize>,
    pub trials: usize,
    pub rounds: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn strategy_kinds(&self) -> Result<Vec<StrategyKind>> {
        if self.strategies.is_empty() {
            return Err(Error::Usage("no strategy selected".into()));
        }
        self.strategies.iter().map(|s| s.parse().map_err(Error::Usage)).collect()
    }
}

/// One (strategy, true hypothesis) series.
#[derive(Debug, Clone)]
pub struct Series {
    pub strategy: StrategyKind,
    /// 0-based.
    pub true_hypothesis: usize,
    pub outcomes: Vec<TrialOutcome>,
    pub aggregates: Vec<TrajectoryAggregate>,
}

/// All trials of `cfg`, run in parallel on the current rayon pool and
/// returned in trial order.
pub fn par_run_trials(model: &HypothesisModel, cfg: &MonteCarloConfig) -> das_detect_core::Result<Vec<TrialOutcome>> {
    cfg.validate(model)?;
    (0..cfg.trials as u64).into_par_iter().map(|t| run_trial(model, cfg, t)).collect()
}

/// Runs every strategy for every requested truth with common random numbers.
pub fn run_series(model: &HypothesisModel, cfg: &SimulationConfig) -> Result<Vec<Series>> {
    let kinds = cfg.strategy_kinds()?;
    if cfg.true_hypotheses.is_empty() {
        return Err(Error::Usage("no true hypothesis selected".into()));
    }
    let mut out = Vec::new();
    for &truth in &cfg.true_hypotheses {
        if truth == 0 || truth > model.hypotheses() {
            return Err(Error::Usage(format!("true hypothesis {truth} outside 1..={}", model.hypotheses())));
        }
        for &strategy in &kinds {
            let mc = MonteCarloConfig {
                strategy,
                true_hypothesis: truth - 1,
                trials: cfg.trials,
                rounds: Some(cfg.rounds),
                seed: cfg.seed,
                keep_reports: false,
            };
            let outcomes = par_run_trials(model, &mc)?;
            let aggregates = aggregate_outcomes(&outcomes)?;
            out.push(Series { strategy, true_hypothesis: truth - 1, outcomes, aggregates });
        }
    }
    Ok(out)
}

/// Fixed 17-significant-digit rendering used by every CSV numeric field.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectories<W: Write>(w: &mut W, series: &[Series]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORIES_HEADER}")?;
    for s in series {
        for agg in &s.aggregates {
            let stderr = agg.stderr();
            for l in 0..agg.rounds() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    s.strategy,
                    s.true_hypothesis + 1,
                    l + 1,
                    fmt_real(agg.mean[l]),
                    fmt_real(agg.std[l]),
                    fmt_real(stderr[l]),
                    agg.trials,
                    agg.pair.1 + 1
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_trace<W: Write>(w: &mut W, series: &[Series]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in series {
        for o in &s.outcomes {
            for (l, step) in o.steps.iter().enumerate() {
                let score = step.score.map(fmt_real).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    o.trial,
                    l + 1,
                    s.strategy,
                    step.sensor + 1,
                    score,
                    s.true_hypothesis + 1
                )?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub trajectories: String,
    pub selection_trace: String,
}

/// Written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Seconds since the Unix epoch; the only field that differs between
    /// reproductions.
    pub timestamp: u64,
    pub config: SimulationConfig,
    pub outputs: Outputs,
}

impl RunManifest {
    pub fn new(config: SimulationConfig) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: "simulate".to_string(),
            seed: config.seed,
            timestamp,
            config,
            outputs: Outputs { trajectories: TRAJECTORIES_FILE.to_string(), selection_trace: TRACE_FILE.to_string() },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Summary of a completed run for the console.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub series: usize,
    pub rounds: usize,
    pub final_means: Vec<(StrategyKind, usize, f64)>,
}

fn write_file(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Runs `cfg` and writes CSVs plus manifest into `out_dir`. On failure none
/// of the three output files is left behind.
pub fn simulate_to_dir(cfg: &SimulationConfig, out_dir: &Path) -> Result<RunSummary> {
    let targets = [out_dir.join(TRAJECTORIES_FILE), out_dir.join(TRACE_FILE), out_dir.join(MANIFEST_FILE)];
    let result = (|| {
        let model = cfg.model.build()?;
        if cfg.rounds == 0 || cfg.rounds > model.sensors() {
            return Err(Error::Usage(format!("--rounds must lie in 1..={}", model.sensors())));
        }
        let series = run_series(&model, cfg)?;
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        write_file(&targets[0], |w| write_trajectories(w, &series))?;
        write_file(&targets[1], |w| write_trace(w, &series))?;
        let manifest = serde_json::to_string_pretty(&RunManifest::new(cfg.clone()))?;
        fs::write(&targets[2], manifest + "\n").map_err(|e| Error::io(&targets[2], e))?;
        let final_means = series
            .iter()
            .flat_map(|s| s.aggregates.iter().map(move |a| (s.strategy, s.true_hypothesis + 1, a.mean[a.rounds() - 1])))
            .collect();
        Ok(RunSummary { series: series.len(), rounds: cfg.rounds, final_means })
    })();
    if result.is_err() {
        for t in &targets {
            let _ = fs::remove_file(t);
        }
    }
    result
}
