//! Reference computations that share no code path with the core crate's
//! Cholesky, block-inverse and closed-form routines.
//!
//! Dense algebra goes through nalgebra's LU decomposition; KL divergences are
//! integrated numerically with composite Simpson's rule.

use das_detect_core::{ConditionalGaussian, HypothesisModel, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn to_dense(m: &SymMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.dim(), m.dim(), |i, j| m.get(i, j))
}

/// Inverse via LU with partial pivoting.
pub fn dense_inverse(m: &SymMatrix) -> Option<DMatrix<f64>> {
    to_dense(m).lu().try_inverse()
}

/// `ln |det M|` via LU.
pub fn dense_log_det(m: &SymMatrix) -> f64 {
    to_dense(m).lu().determinant().abs().ln()
}

/// Scalar conditional law of sensor `k` given `observed` (indices and
/// values) under hypothesis `q`, by a dense LU solve.
pub fn dense_conditional(
    model: &HypothesisModel,
    q: usize,
    observed: &[usize],
    values: &[f64],
    k: usize,
) -> (f64, f64) {
    let cov = model.cov(q);
    let mean = model.mean(q);
    if observed.is_empty() {
        return (mean[k], cov.get(k, k));
    }
    let lu = to_dense(&cov.restrict(observed)).lu();
    let c = DVector::from_iterator(observed.len(), observed.iter().map(|&j| cov.get(k, j)));
    let resid = DVector::from_iterator(observed.len(), observed.iter().zip(values).map(|(&j, z)| z - mean[j]));
    let x = lu.solve(&c).expect("observed block is nonsingular");
    (mean[k] + x.dot(&resid), cov.get(k, k) - x.dot(&c))
}

/// `ln f(values | θ_q)` on the restricted model, via LU.
pub fn dense_loglik(model: &HypothesisModel, q: usize, observed: &[usize], values: &[f64]) -> f64 {
    let sub = model.cov(q).restrict(observed);
    let lu = to_dense(&sub).lu();
    let resid = DVector::from_iterator(observed.len(), observed.iter().zip(values).map(|(&j, z)| z - model.mean(q)[j]));
    let x = lu.solve(&resid).expect("restricted covariance is nonsingular");
    let n = observed.len() as f64;
    -0.5 * (resid.dot(&x) + lu.determinant().abs().ln() + n * (2.0 * std::f64::consts::PI).ln())
}

fn ln_pdf(g: &ConditionalGaussian, z: f64) -> f64 {
    let d = z - g.mean;
    -0.5 * ((2.0 * std::f64::consts::PI * g.variance).ln() + d * d / g.variance)
}

/// `∫ p ln(p/r)` over `μ_p ± 10σ_p` with Simpson's rule at step `1e-3·σ_p`.
pub fn kl_by_quadrature(p: &ConditionalGaussian, r: &ConditionalGaussian) -> f64 {
    let sd = p.variance.sqrt();
    let h = 1e-3 * sd;
    let n = 20_000usize;
    let lo = p.mean - 10.0 * sd;
    let f = |z: f64| {
        let lp = ln_pdf(p, z);
        lp.exp() * (lp - ln_pdf(r, z))
    };
    let mut acc = f(lo) + f(lo + n as f64 * h);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `B Bᵀ / dim + floor·I` with standard normal `B`.
pub fn random_spd<R: Rng>(dim: usize, floor: f64, rng: &mut R) -> SymMatrix {
    let b: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    SymMatrix::from_fn(dim, |i, j| {
        let dot: f64 = (0..dim).map(|t| b[i * dim + t] * b[j * dim + t]).sum();
        dot / dim as f64 + if i == j { floor } else { 0.0 }
    })
}

/// `Q`-hypothesis model on `K` sensors with random means and covariances.
pub fn random_model<R: Rng>(sensors: usize, hypotheses: usize, rng: &mut R) -> HypothesisModel {
    let labels = (1..=hypotheses).map(|q| format!("h{q}")).collect();
    let means = (0..hypotheses).map(|_| (0..sensors).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let covs = (0..hypotheses).map(|_| random_spd(sensors, 0.2, rng)).collect();
    HypothesisModel::new(labels, means, covs).expect("random covariance is positive definite")
}

/// Maximum absolute entry of `a − b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
