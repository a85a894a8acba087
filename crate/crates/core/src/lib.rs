//! Data-aided sensing for distributed detection over jointly Gaussian sensor
//! measurements.
//!
//! A fusion center receives one sensor measurement per round and chooses the
//! next sensor from the measurements it already has. This crate provides the
//! selection rules (random, conditional-entropy/MSE, J-divergence), sequential
//! LLR accumulation, the benchmark hypothesis models and a seeded Monte-Carlo
//! harness. It is `no_std` and only needs `alloc`; file formats, CSV output
//! and the command line live in the `das-detect` crate.
//!
//! Indices are 0-based throughout this crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod detector;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod selection;

pub use detector::{batch_loglik, decide, llr_increment, DecisionRecord, LLRTrajectory, SequentialDetector};
pub use error::{Error, Result};
pub use gaussian::{
    condition_scalar, mvn_affine, sample_mvn, ConditionalGaussian, JointSlice, StreamPurpose, TrialStream,
};
pub use harness::{
    aggregate, aggregate_outcomes, compare_strategies, paired_difference, run_trial, run_trials, MonteCarloConfig,
    PairedDifference, SelectionStep, StrategyRun, TrajectoryAggregate, TrialOutcome, DEFAULT_TRIALS,
};
pub use linalg::{cholesky, extend_inverse, log_det, quad_form, CholFactor, SymMatrix};
pub use model::{BenchmarkSpec, Family, HypothesisModel};
pub use selection::{
    conditional_entropy, eef_term, exact_log_density_gap, j_divergence_score, kl_gauss, mse_score, select,
    select_entropy_das, select_jdas, select_mse_das, select_random, symmetric_kl, Conditioner, DenseView, ScoreReport,
    Selection, SelectionState, StrategyKind,
};
