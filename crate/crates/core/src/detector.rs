//! Sequential log-likelihood accumulation and the batch ML rule.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, quad_form};
use crate::model::HypothesisModel;
use crate::selection::Conditioner;

/// `ln f_q(z_k | Z(l)) − ln f_i(z_k | Z(l))`, the change in `LLR_{q,i}` when
/// sensor `k` uploads `z`.
pub fn llr_increment<C: Conditioner + ?Sized>(
    k: usize,
    z: f64,
    state: &C,
    model: &HypothesisModel,
    q: usize,
    i: usize,
) -> Result<f64> {
    if q == i {
        return Ok(0.0);
    }
    let fq = state.conditional(model, k, q)?;
    let fi = state.conditional(model, k, i)?;
    Ok(fq.log_density(z) - fi.log_density(z))
}

/// `ln f(z_idx | θ_q)` on the sub-model restricted to `indices`.
pub fn batch_loglik(indices: &[usize], values: &[f64], model: &HypothesisModel, q: usize) -> Result<f64> {
    if indices.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: indices.len(), found: values.len() });
    }
    if indices.is_empty() {
        return Err(Error::InvalidConfig("batch log-likelihood needs at least one index"));
    }
    if let Some(&k) = indices.iter().find(|&&k| k >= model.sensors()) {
        return Err(Error::SensorUnavailable { sensor: k });
    }
    let chol = cholesky(&model.cov(q).restrict(indices))?;
    let mean = model.mean(q);
    let resid: Vec<f64> = indices.iter().zip(values).map(|(&k, z)| z - mean[k]).collect();
    let n = indices.len() as f64;
    Ok(-0.5 * (quad_form(&resid, &chol)? + chol.log_det() + n * libm::log(2.0 * PI)))
}

/// ML decision on a partial set of measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub round: usize,
    pub hypothesis: usize,
    /// Best minus second-best log-likelihood.
    pub margin: f64,
    pub tie: bool,
}

/// Picks the hypothesis with the largest log-likelihood; ties go to the
/// smallest index with zero margin.
pub fn decide(logliks: &[f64], round: usize) -> Result<DecisionRecord> {
    if logliks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut best = 0;
    for (q, &v) in logliks.iter().enumerate() {
        if v > logliks[best] {
            best = q;
        }
    }
    let runner_up =
        logliks.iter().enumerate().filter(|&(q, _)| q != best).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
    let margin = if logliks.len() == 1 { f64::INFINITY } else { logliks[best] - runner_up };
    Ok(DecisionRecord { round, hypothesis: best, margin, tie: margin == 0.0 })
}

/// Accumulated `LLR_{q,i}` after each upload.
#[derive(Debug, Clone, PartialEq)]
pub struct LLRTrajectory {
    pub pair: (usize, usize),
    /// Entry `l − 1` holds the value after `l` uploads.
    pub values: Vec<f64>,
}

/// Running per-hypothesis log-likelihoods of the uploaded set.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialDetector {
    logliks: Vec<f64>,
    rounds: usize,
}

impl SequentialDetector {
    pub fn new(hypotheses: usize) -> Self {
        Self { logliks: vec![0.0; hypotheses], rounds: 0 }
    }

    /// Adds `ln f_q(z | Z(l))` for every hypothesis. Call before the state
    /// records the upload.
    pub fn update<C: Conditioner + ?Sized>(
        &mut self,
        k: usize,
        z: f64,
        state: &C,
        model: &HypothesisModel,
    ) -> Result<()> {
        let incs = (0..self.logliks.len())
            .map(|q| state.conditional(model, k, q).map(|f| f.log_density(z)))
            .collect::<Result<Vec<_>>>()?;
        for (acc, inc) in self.logliks.iter_mut().zip(incs) {
            *acc += inc;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn logliks(&self) -> &[f64] {
        &self.logliks
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn llr(&self, q: usize, i: usize) -> f64 {
        if q == i {
            0.0
        } else {
            self.logliks[q] - self.logliks[i]
        }
    }

    pub fn decide(&self) -> Result<DecisionRecord> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("no measurement has been uploaded"));
        }
        decide(&self.logliks, self.rounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BenchmarkSpec, Family};
    use crate::selection::SelectionState;

    fn iid(sensors: usize) -> HypothesisModel {
        BenchmarkSpec { family: Family::IidAntipodal, sensors, amplitude: 1.0, noise_var: 1.0, rho: vec![] }
            .build()
            .unwrap()
    }

    #[test]
    fn iid_increments() {
        let model = iid(3);
        let state = SelectionState::new(&model);
        assert_eq!(llr_increment(0, 0.0, &state, &model, 0, 1).unwrap(), 0.0);
        assert!((llr_increment(0, 1.0, &state, &model, 0, 1).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(llr_increment(0, 1.0, &state, &model, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn batch_examples() {
        let model =
            BenchmarkSpec { family: Family::IidAntipodal, sensors: 2, amplitude: 0.0, noise_var: 1.0, rho: vec![] }
                .build()
                .unwrap();
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        assert!((batch_loglik(&[0], &[0.0], &model, 0).unwrap() + half_ln_2pi).abs() < 1e-15);
        let v = batch_loglik(&[0, 1], &[1.0, 1.0], &model, 0).unwrap();
        assert!((v + 1.0 + (2.0 * PI).ln()).abs() < 1e-14);
        assert!((v + 2.8378770664093453).abs() < 1e-13);
        assert!(batch_loglik(&[], &[], &model, 0).is_err());
    }

    #[test]
    fn decide_examples() {
        let d = decide(&[3.2, 0.0], 4).unwrap();
        assert_eq!((d.hypothesis, d.margin, d.tie), (0, 3.2, false));
        let d = decide(&[-1.5, -1.5], 1).unwrap();
        assert_eq!((d.hypothesis, d.margin, d.tie), (0, 0.0, true));
        let d = decide(&[-5.0, -4.0, -7.0], 2).unwrap();
        assert_eq!((d.hypothesis, d.margin), (1, 1.0));
    }

    #[test]
    fn iid_llr_is_scaled_sum() {
        let model = iid(6);
        let mut state = SelectionState::new(&model);
        let mut det = SequentialDetector::new(2);
        let zs = [0.5, -1.25, 2.0, 0.75];
        for (k, &z) in zs.iter().enumerate() {
            det.update(k, z, &state, &model).unwrap();
            state.observe(&model, k, z).unwrap();
        }
        let sum: f64 = zs.iter().sum();
        assert_eq!(det.llr(0, 1), 2.0 * sum);
        assert_eq!(det.decide().unwrap().hypothesis, 0);
    }

    #[test]
    fn sequential_matches_batch_on_correlated_model() {
        let model = BenchmarkSpec::default().build().unwrap();
        let mut state = SelectionState::new(&model);
        let mut det = SequentialDetector::new(2);
        let order = [12usize, 3, 40, 4, 27, 0];
        for (i, &k) in order.iter().enumerate() {
            let z = 0.3 * i as f64 - 0.7;
            det.update(k, z, &state, &model).unwrap();
            state.observe(&model, k, z).unwrap();
            for q in 0..2 {
                let b = batch_loglik(state.uploaded(), state.values(), &model, q).unwrap();
                assert!((det.logliks()[q] - b).abs() < 1e-10);
            }
        }
    }
}
