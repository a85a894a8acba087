//! Seeded Monte-Carlo trials and trajectory aggregation.
//!
//! A trial samples the full measurement vector under the true hypothesis from
//! the `(seed, trial)` measurement stream, then lets a strategy pick the
//! upload order. Because the sample never depends on the strategy, running
//! several strategies with the same seed gives paired (common random number)
//! comparisons.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::detector::{LLRTrajectory, SequentialDetector};
use crate::error::{Error, Result};
use crate::gaussian::{sample_mvn, StreamPurpose, TrialStream};
use crate::model::HypothesisModel;
use crate::selection::{select, ScoreReport, SelectionState, StrategyKind};

pub const DEFAULT_TRIALS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub strategy: StrategyKind,
    /// 0-based.
    pub true_hypothesis: usize,
    pub trials: usize,
    /// Upload budget `T`; `None` means all `K` sensors.
    pub rounds: Option<usize>,
    pub seed: u64,
    /// Keep every candidate's score, not only the winner's.
    pub keep_reports: bool,
}

impl MonteCarloConfig {
    pub fn new(strategy: StrategyKind, true_hypothesis: usize, seed: u64) -> Self {
        Self { strategy, true_hypothesis, trials: DEFAULT_TRIALS, rounds: None, seed, keep_reports: false }
    }

    pub fn rounds_for(&self, model: &HypothesisModel) -> usize {
        self.rounds.unwrap_or(model.sensors())
    }

    pub fn validate(&self, model: &HypothesisModel) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1"));
        }
        let rounds = self.rounds_for(model);
        if rounds == 0 || rounds > model.sensors() {
            return Err(Error::InvalidConfig("rounds must lie in 1..=K"));
        }
        if self.true_hypothesis >= model.hypotheses() {
            return Err(Error::InvalidConfig("true hypothesis out of range"));
        }
        Ok(())
    }
}

/// Per-round summary of a selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionStep {
    pub sensor: usize,
    /// Winning score; `None` for random selection.
    pub score: Option<f64>,
    pub tie_broken: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    /// Full measurement vector drawn for the trial, indexed by sensor.
    pub samples: Vec<f64>,
    pub steps: Vec<SelectionStep>,
    /// `LLR_{true, alt}` for every alternative, in ascending `alt` order.
    pub trajectories: Vec<LLRTrajectory>,
    /// Empty unless the config asked for full reports.
    pub reports: Vec<ScoreReport>,
}

impl TrialOutcome {
    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.sensor).collect()
    }
}

/// Measurement vector of trial `trial` under hypothesis `q`.
pub fn sample_trial(model: &HypothesisModel, q: usize, seed: u64, trial: u64) -> Result<Vec<f64>> {
    let mut stream = TrialStream::new(seed, trial, StreamPurpose::Measurements);
    sample_mvn(model.mean(q), model.chol(q), &mut stream)
}

fn run_trial_inner(model: &HypothesisModel, cfg: &MonteCarloConfig, trial: u64) -> Result<TrialOutcome> {
    let truth = cfg.true_hypothesis;
    let rounds = cfg.rounds_for(model);
    let samples = sample_trial(model, truth, cfg.seed, trial)?;
    let mut picker = TrialStream::new(cfg.seed, trial, StreamPurpose::Selection);
    let mut state = SelectionState::new(model);
    let mut detector = SequentialDetector::new(model.hypotheses());
    let alternatives: Vec<usize> = (0..model.hypotheses()).filter(|&q| q != truth).collect();
    let mut trajectories: Vec<LLRTrajectory> = alternatives
        .iter()
        .map(|&alt| LLRTrajectory { pair: (truth, alt), values: Vec::with_capacity(rounds) })
        .collect();
    let mut steps = Vec::with_capacity(rounds);
    let mut reports = Vec::new();

    for _ in 0..rounds {
        let selection = select(cfg.strategy, &state, model, &mut picker)?;
        let k = selection.sensor;
        let z = samples[k];
        detector.update(k, z, &state, model)?;
        state.observe(model, k, z)?;
        for t in trajectories.iter_mut() {
            t.values.push(detector.llr(t.pair.0, t.pair.1));
        }
        steps.push(SelectionStep {
            sensor: k,
            score: selection.report.as_ref().map(ScoreReport::chosen_score),
            tie_broken: selection.report.as_ref().is_some_and(|r| r.tie_broken),
        });
        if cfg.keep_reports {
            if let Some(r) = selection.report {
                reports.push(r);
            }
        }
    }
    Ok(TrialOutcome { trial, samples, steps, trajectories, reports })
}

/// Runs one trial; errors carry the trial index.
pub fn run_trial(model: &HypothesisModel, cfg: &MonteCarloConfig, trial: u64) -> Result<TrialOutcome> {
    cfg.validate(model)?;
    run_trial_inner(model, cfg, trial).map_err(|e| Error::Trial { trial, source: Box::new(e) })
}

/// Pointwise statistics of one LLR series across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryAggregate {
    pub pair: (usize, usize),
    pub mean: Vec<f64>,
    /// Sample standard deviation (`n − 1` denominator; zero for one trial).
    pub std: Vec<f64>,
    pub trials: usize,
}

impl TrajectoryAggregate {
    pub fn stderr(&self) -> Vec<f64> {
        let root_n = libm::sqrt(self.trials as f64);
        self.std.iter().map(|s| s / root_n).collect()
    }

    pub fn rounds(&self) -> usize {
        self.mean.len()
    }
}

/// Mean and standard deviation at each round, reduced in the order given.
pub fn aggregate(trajectories: &[&LLRTrajectory]) -> Result<TrajectoryAggregate> {
    let first = trajectories.first().ok_or(Error::EmptyInput)?;
    let rounds = first.values.len();
    if let Some(bad) = trajectories.iter().find(|t| t.values.len() != rounds) {
        return Err(Error::DimensionMismatch { expected: rounds, found: bad.values.len() });
    }
    let n = trajectories.len() as f64;
    let mut mean = alloc::vec![0.0; rounds];
    for t in trajectories {
        for (m, v) in mean.iter_mut().zip(&t.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = alloc::vec![0.0; rounds];
    if trajectories.len() > 1 {
        for t in trajectories {
            for ((s, v), m) in std.iter_mut().zip(&t.values).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| *s = libm::sqrt(*s / (n - 1.0)));
    }
    Ok(TrajectoryAggregate { pair: first.pair, mean, std, trials: trajectories.len() })
}

/// One aggregate per alternative hypothesis.
pub fn aggregate_outcomes(outcomes: &[TrialOutcome]) -> Result<Vec<TrajectoryAggregate>> {
    let first = outcomes.first().ok_or(Error::EmptyInput)?;
    (0..first.trajectories.len())
        .map(|a| {
            let series: Vec<&LLRTrajectory> = outcomes.iter().map(|o| &o.trajectories[a]).collect();
            aggregate(&series)
        })
        .collect()
}

/// Runs `cfg.trials` trials in index order.
pub fn run_trials(model: &HypothesisModel, cfg: &MonteCarloConfig) -> Result<Vec<TrialOutcome>> {
    cfg.validate(model)?;
    (0..cfg.trials as u64).map(|t| run_trial(model, cfg, t)).collect()
}

/// Trials of one strategy together with their aggregates.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: StrategyKind,
    pub outcomes: Vec<TrialOutcome>,
    pub aggregates: Vec<TrajectoryAggregate>,
}

/// Runs every strategy on the same sampled measurement vectors.
pub fn compare_strategies(
    model: &HypothesisModel,
    base: &MonteCarloConfig,
    strategies: &[StrategyKind],
) -> Result<Vec<StrategyRun>> {
    if strategies.is_empty() {
        return Err(Error::InvalidConfig("no strategies to compare"));
    }
    strategies
        .iter()
        .map(|&strategy| {
            let cfg = MonteCarloConfig { strategy, ..base.clone() };
            let outcomes = run_trials(model, &cfg)?;
            let aggregates = aggregate_outcomes(&outcomes)?;
            Ok(StrategyRun { strategy, outcomes, aggregates })
        })
        .collect()
}

/// Per-round mean and standard error of `a − b` over paired trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDifference {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Paired difference of the `alt`-th LLR series between two runs of the same
/// trials.
pub fn paired_difference(a: &[TrialOutcome], b: &[TrialOutcome], alt: usize) -> Result<PairedDifference> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let diffs: Vec<LLRTrajectory> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            if x.trial != y.trial {
                return Err(Error::InvalidConfig("paired runs must cover the same trials"));
            }
            let (tx, ty) = (&x.trajectories[alt], &y.trajectories[alt]);
            let values = tx.values.iter().zip(&ty.values).map(|(p, q)| p - q).collect();
            Ok(LLRTrajectory { pair: tx.pair, values })
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&LLRTrajectory> = diffs.iter().collect();
    let agg = aggregate(&refs)?;
    let stderr = agg.stderr();
    Ok(PairedDifference { mean: agg.mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BenchmarkSpec, Family};

    fn iid(sensors: usize) -> HypothesisModel {
        BenchmarkSpec { family: Family::IidAntipodal, sensors, amplitude: 1.0, noise_var: 1.0, rho: vec![] }
            .build()
            .unwrap()
    }

    #[test]
    fn full_run_is_a_permutation() {
        let model = BenchmarkSpec { sensors: 12, ..BenchmarkSpec::default() }.build().unwrap();
        for kind in StrategyKind::ALL {
            let cfg = MonteCarloConfig { trials: 1, ..MonteCarloConfig::new(kind, 0, 3) };
            let mut order = run_trial(&model, &cfg, 0).unwrap().order();
            order.sort_unstable();
            assert_eq!(order, (0..12).collect::<Vec<_>>(), "{kind}");
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let model = BenchmarkSpec { sensors: 10, ..BenchmarkSpec::default() }.build().unwrap();
        let cfg = MonteCarloConfig::new(StrategyKind::Random, 1, 77);
        let a = run_trial(&model, &cfg, 5).unwrap();
        let b = run_trial(&model, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, run_trial(&model, &cfg, 6).unwrap().samples);
    }

    #[test]
    fn aggregate_edge_cases() {
        let t = LLRTrajectory { pair: (0, 1), values: vec![1.0, -2.0, 3.5] };
        let agg = aggregate(&[&t]).unwrap();
        assert_eq!(agg.mean, t.values);
        assert_eq!(agg.std, vec![0.0; 3]);
        let neg = LLRTrajectory { pair: (0, 1), values: t.values.iter().map(|v| -v).collect() };
        let agg = aggregate(&[&t, &neg]).unwrap();
        assert_eq!(agg.mean, vec![0.0; 3]);
        assert_eq!(aggregate(&[]), Err(Error::EmptyInput));
        let short = LLRTrajectory { pair: (0, 1), values: vec![1.0] };
        assert!(aggregate(&[&t, &short]).is_err());
    }

    #[test]
    fn iid_mean_tracks_two_per_round() {
        let model = iid(50);
        let cfg = MonteCarloConfig { trials: 500, ..MonteCarloConfig::new(StrategyKind::JDas, 0, 11) };
        let agg = &aggregate_outcomes(&run_trials(&model, &cfg).unwrap()).unwrap()[0];
        let se = agg.stderr();
        for l in 0..50 {
            let want = 2.0 * (l + 1) as f64;
            assert!((agg.mean[l] - want).abs() < 3.0 * se[l], "round {}: {} vs {}", l + 1, agg.mean[l], want);
        }
    }

    #[test]
    fn identical_strategies_give_identical_aggregates() {
        let model = BenchmarkSpec { sensors: 8, ..BenchmarkSpec::default() }.build().unwrap();
        let base = MonteCarloConfig { trials: 20, ..MonteCarloConfig::new(StrategyKind::Random, 0, 5) };
        let runs = compare_strategies(&model, &base, &[StrategyKind::Random, StrategyKind::Random]).unwrap();
        assert_eq!(runs[0].aggregates, runs[1].aggregates);
    }

    #[test]
    fn common_random_numbers_across_strategies() {
        let model = BenchmarkSpec { sensors: 8, ..BenchmarkSpec::default() }.build().unwrap();
        let base = MonteCarloConfig { trials: 10, ..MonteCarloConfig::new(StrategyKind::Random, 1, 5) };
        let runs = compare_strategies(&model, &base, &StrategyKind::ALL).unwrap();
        for r in &runs[1..] {
            for (a, b) in r.outcomes.iter().zip(&runs[0].outcomes) {
                assert_eq!(a.samples, b.samples);
            }
        }
    }

    #[test]
    fn config_validation() {
        let model = iid(4);
        let mut cfg = MonteCarloConfig::new(StrategyKind::JDas, 0, 1);
        cfg.rounds = Some(5);
        assert!(run_trial(&model, &cfg, 0).is_err());
        cfg.rounds = Some(0);
        assert!(run_trial(&model, &cfg, 0).is_err());
        cfg.rounds = Some(2);
        cfg.true_hypothesis = 2;
        assert!(run_trial(&model, &cfg, 0).is_err());
        cfg.true_hypothesis = 1;
        cfg.trials = 0;
        assert!(run_trials(&model, &cfg).is_err());
        cfg.trials = 1;
        assert_eq!(run_trial(&model, &cfg, 0).unwrap().trajectories[0].values.len(), 2);
    }

    #[test]
    fn reports_kept_on_request() {
        let model = iid(4);
        let cfg = MonteCarloConfig { keep_reports: true, ..MonteCarloConfig::new(StrategyKind::EntropyDas, 0, 1) };
        let out = run_trial(&model, &cfg, 0).unwrap();
        assert_eq!(out.reports.len(), 4);
        assert_eq!(out.reports[0].scores.len(), 4);
        assert!(out.steps.iter().all(|s| s.score.is_some()));
    }
}
