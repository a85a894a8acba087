//! Scalar Gaussian conditioning and multivariate normal sampling.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CholFactor, SymMatrix};

/// Conditional variances at or below this value are treated as singular.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Law of one unobserved measurement given the observed ones, under a single
/// hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl ConditionalGaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > VARIANCE_FLOOR) || !variance.is_finite() {
            return Err(Error::NonPositiveConditionalVariance { variance });
        }
        Ok(Self { mean, variance })
    }

    /// Precision, i.e. the reciprocal conditional variance.
    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }

    pub fn log_density(&self, z: f64) -> f64 {
        let d = z - self.mean;
        -0.5 * (libm::log(2.0 * PI * self.variance) + d * d / self.variance)
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        0.5 * libm::log(2.0 * PI * core::f64::consts::E * self.variance)
    }
}

/// Prior moments of a candidate measurement `z_k` jointly with the observed
/// block, under one hypothesis. Observed entries follow upload order.
#[derive(Debug, Clone, Copy)]
pub struct JointSlice<'a> {
    /// Unconditional variance of the candidate.
    pub variance: f64,
    /// Covariance between the observed block and the candidate.
    pub cross: &'a [f64],
    /// Prior mean of the candidate.
    pub mean: f64,
    /// Prior means of the observed block.
    pub observed_mean: &'a [f64],
}

/// Conditions the candidate on `observed` using a Cholesky factor of the
/// observed block's covariance.
pub fn condition_scalar(slice: &JointSlice<'_>, observed: &[f64], chol: &CholFactor) -> Result<ConditionalGaussian> {
    let l = chol.dim();
    for len in [slice.cross.len(), slice.observed_mean.len(), observed.len()] {
        if len != l {
            return Err(Error::DimensionMismatch { expected: l, found: len });
        }
    }
    let residual: Vec<f64> = observed.iter().zip(slice.observed_mean).map(|(z, m)| z - m).collect();
    let a = chol.forward_solve(slice.cross);
    let b = chol.forward_solve(&residual);
    let gain: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let explained: f64 = a.iter().map(|x| x * x).sum();
    ConditionalGaussian::new(slice.mean + gain, slice.variance - explained)
}

/// Same conditioning as [`condition_scalar`] but through an explicit inverse
/// of the observed covariance. `weights` must equal `inverse · (z(l) − z̄(l))`.
pub fn condition_with_inverse(
    variance: f64,
    cross: &[f64],
    mean: f64,
    weights: &[f64],
    inverse: &SymMatrix,
) -> Result<ConditionalGaussian> {
    let l = inverse.dim();
    for len in [cross.len(), weights.len()] {
        if len != l {
            return Err(Error::DimensionMismatch { expected: l, found: len });
        }
    }
    let gain: f64 = cross.iter().zip(weights).map(|(c, w)| c * w).sum();
    ConditionalGaussian::new(mean + gain, variance - inverse.quadratic(cross))
}

/// `mean + L·u`.
pub fn mvn_affine(mean: &[f64], chol: &CholFactor, normals: &[f64]) -> Result<Vec<f64>> {
    let n = chol.dim();
    for len in [mean.len(), normals.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    Ok(chol.mul_vec(normals).iter().zip(mean).map(|(x, m)| x + m).collect())
}

/// Draws `mean + L·u` with `u` taken from `rng`, one standard normal per
/// coordinate in index order.
pub fn sample_mvn<R: RngCore + ?Sized>(mean: &[f64], chol: &CholFactor, rng: &mut R) -> Result<Vec<f64>> {
    let u: Vec<f64> = (0..chol.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    mvn_affine(mean, chol, &u)
}

/// What a per-trial stream is used for. Distinct purposes never share
/// keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Measurements = 0x6d65_6173,
    Selection = 0x7365_6c65,
}

/// Counter-based random stream addressed by `(seed, trial, purpose)`.
///
/// The ChaCha key is built from `seed` and `purpose`; `trial` selects the
/// ChaCha stream id. Output depends only on that triple, so trials can run
/// in any order or on any thread.
#[derive(Debug, Clone)]
pub struct TrialStream {
    inner: ChaCha8Rng,
}

impl TrialStream {
    pub fn new(seed: u64, trial: u64, purpose: StreamPurpose) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(trial);
        Self { inner }
    }
}

impl RngCore for TrialStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
