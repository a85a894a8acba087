//! Node selection for data-aided sensing.
//!
//! A [`SelectionState`] tracks which sensors have uploaded, in upload order,
//! and keeps per-hypothesis caches (Cholesky factor, explicit inverse and
//! whitened residual of the observed block) so that each round only pays for
//! growing those caches by one row. Every score is a function of the scalar
//! conditional laws `f_q(z_k | Z(l))` exposed through [`Conditioner`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::gaussian::{condition_scalar, condition_with_inverse, ConditionalGaussian, JointSlice};
use crate::linalg::{cholesky, CholFactor, SymMatrix, PIVOT_RTOL};
use crate::model::HypothesisModel;

/// Scores within this relative distance of the best one count as tied.
pub const TIE_RTOL: f64 = 1e-9;

/// Source of scalar conditional laws for unobserved sensors.
pub trait Conditioner {
    fn sensors(&self) -> usize;
    /// Number of sensors already uploaded, `l`.
    fn round(&self) -> usize;
    fn is_available(&self, k: usize) -> bool;
    /// `f_q(z_k | Z(l))`.
    fn conditional(&self, model: &HypothesisModel, k: usize, q: usize) -> Result<ConditionalGaussian>;

    fn candidates(&self) -> Vec<usize> {
        (0..self.sensors()).filter(|&k| self.is_available(k)).collect()
    }
}

#[derive(Debug, Clone)]
struct HypothesisCache {
    chol: CholFactor,
    inverse: SymMatrix,
    residual: Vec<f64>,
    /// `inverse · residual`
    weights: Vec<f64>,
    /// Covariances of every sensor with the uploaded sensors, one row of
    /// `stride` entries per sensor; the first `l` entries of a row are live.
    cross: Vec<f64>,
    stride: usize,
}

impl HypothesisCache {
    fn cross_row(&self, k: usize, l: usize) -> &[f64] {
        &self.cross[k * self.stride..k * self.stride + l]
    }

    /// Appends `cov(j, k)` to the row of every sensor `j`.
    fn push_cross(&mut self, cov: &SymMatrix, k: usize, l: usize) {
        let sensors = cov.dim();
        if l == self.stride {
            let stride = (2 * self.stride).max(8);
            let mut grown = alloc::vec![0.0; sensors * stride];
            for j in 0..sensors {
                grown[j * stride..j * stride + l].copy_from_slice(self.cross_row(j, l));
            }
            self.cross = grown;
            self.stride = stride;
        }
        for j in 0..sensors {
            self.cross[j * self.stride + l] = cov.get(j, k);
        }
    }
}

/// Uploaded sensors, their values and the per-hypothesis caches.
#[derive(Debug, Clone)]
pub struct SelectionState {
    sensors: usize,
    uploaded: Vec<usize>,
    values: Vec<f64>,
    available: Vec<bool>,
    caches: Vec<HypothesisCache>,
}

impl SelectionState {
    pub fn new(model: &HypothesisModel) -> Self {
        let cache = HypothesisCache {
            chol: CholFactor::empty(),
            inverse: SymMatrix::zeros(0),
            residual: Vec::new(),
            weights: Vec::new(),
            cross: Vec::new(),
            stride: 0,
        };
        Self {
            sensors: model.sensors(),
            uploaded: Vec::new(),
            values: Vec::new(),
            available: alloc::vec![true; model.sensors()],
            caches: alloc::vec![cache; model.hypotheses()],
        }
    }

    /// Sensors in upload order, `K(l)`.
    pub fn uploaded(&self) -> &[usize] {
        &self.uploaded
    }

    /// Measurements in upload order, `z(l)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cached `R_q(l)⁻¹`, rows in upload order.
    pub fn inverse(&self, q: usize) -> &SymMatrix {
        &self.caches[q].inverse
    }

    /// Cached Cholesky factor of `R_q(l)`.
    pub fn chol(&self, q: usize) -> &CholFactor {
        &self.caches[q].chol
    }

    /// `z(l) − z̄_q(l)`.
    pub fn residual(&self, q: usize) -> &[f64] {
        &self.caches[q].residual
    }

    /// Records the upload of sensor `k` with value `z`. On error the state is
    /// left unchanged.
    pub fn observe(&mut self, model: &HypothesisModel, k: usize, z: f64) -> Result<()> {
        if !self.is_available(k) {
            return Err(Error::SensorUnavailable { sensor: k });
        }
        let mut pending = Vec::with_capacity(self.caches.len());
        for (q, cache) in self.caches.iter().enumerate() {
            let cov = model.cov(q);
            let cross = cache.cross_row(k, self.uploaded.len());
            let diag = cov.get(k, k);
            let row = cache.chol.next_row(cross, diag, PIVOT_RTOL * cov.max_diagonal())?;
            let border = cache.inverse.border_update(cross, diag)?;
            pending.push((row, border));
        }
        for (q, (cache, ((w, pivot), (u, schur)))) in self.caches.iter_mut().zip(pending).enumerate() {
            let cov = model.cov(q);
            cache.chol.commit_row(w, pivot);
            cache.inverse.commit_border(&u, schur);
            cache.residual.push(z - model.mean(q)[k]);
            cache.weights = cache.inverse.mul_vec(&cache.residual);
            cache.push_cross(cov, k, self.uploaded.len());
        }
        self.uploaded.push(k);
        self.values.push(z);
        self.available[k] = false;
        Ok(())
    }
}

impl Conditioner for SelectionState {
    fn sensors(&self) -> usize {
        self.sensors
    }

    fn round(&self) -> usize {
        self.uploaded.len()
    }

    fn is_available(&self, k: usize) -> bool {
        self.available.get(k).copied().unwrap_or(false)
    }

    fn conditional(&self, model: &HypothesisModel, k: usize, q: usize) -> Result<ConditionalGaussian> {
        if !self.is_available(k) {
            return Err(Error::SensorUnavailable { sensor: k });
        }
        let cov = model.cov(q);
        let cache = &self.caches[q];
        condition_with_inverse(
            cov.get(k, k),
            cache.cross_row(k, self.uploaded.len()),
            model.mean(q)[k],
            &cache.weights,
            &cache.inverse,
        )
    }
}

/// From-scratch view of a [`SelectionState`]: refactors each `R_q(l)` with a
/// fresh Cholesky decomposition and never touches the incremental caches.
#[derive(Debug)]
pub struct DenseView<'a> {
    state: &'a SelectionState,
    chols: Vec<CholFactor>,
    observed_means: Vec<Vec<f64>>,
}

impl<'a> DenseView<'a> {
    pub fn new(state: &'a SelectionState, model: &HypothesisModel) -> Result<Self> {
        let idx = state.uploaded();
        let mut chols = Vec::new();
        let mut observed_means = Vec::new();
        for q in 0..model.hypotheses() {
            chols.push(if idx.is_empty() { CholFactor::empty() } else { cholesky(&model.cov(q).restrict(idx))? });
            observed_means.push(idx.iter().map(|&i| model.mean(q)[i]).collect());
        }
        Ok(Self { state, chols, observed_means })
    }
}

impl Conditioner for DenseView<'_> {
    fn sensors(&self) -> usize {
        self.state.sensors
    }

    fn round(&self) -> usize {
        self.state.round()
    }

    fn is_available(&self, k: usize) -> bool {
        self.state.is_available(k)
    }

    fn conditional(&self, model: &HypothesisModel, k: usize, q: usize) -> Result<ConditionalGaussian> {
        if !self.is_available(k) {
            return Err(Error::SensorUnavailable { sensor: k });
        }
        let cov = model.cov(q);
        let cross = cov.cross(k, self.state.uploaded());
        let slice = JointSlice {
            variance: cov.get(k, k),
            cross: &cross,
            mean: model.mean(q)[k],
            observed_mean: &self.observed_means[q],
        };
        condition_scalar(&slice, self.state.values(), &self.chols[q])
    }
}

/// Node-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Random,
    EntropyDas,
    MseDas,
    JDas,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] =
        [StrategyKind::Random, StrategyKind::EntropyDas, StrategyKind::MseDas, StrategyKind::JDas];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::EntropyDas => "entropy-das",
            StrategyKind::MseDas => "mse-das",
            StrategyKind::JDas => "j-das",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        StrategyKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| alloc::format!("unknown strategy `{s}`"))
    }
}

/// Scores of every candidate in one round and the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// `(sensor, score)` in ascending sensor order.
    pub scores: Vec<(usize, f64)>,
    pub chosen: usize,
    /// More than one candidate was within [`TIE_RTOL`] of the best score.
    pub tie_broken: bool,
}

impl ScoreReport {
    /// Picks the maximum, breaking ties towards the smallest sensor index.
    pub fn from_scores(scores: Vec<(usize, f64)>) -> Result<Self> {
        let best = scores.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
        if scores.is_empty() {
            return Err(Error::Exhausted);
        }
        let slack = TIE_RTOL * best.abs().max(1.0);
        let mut tied = scores.iter().filter(|&&(_, s)| s >= best - slack);
        let chosen = tied.next().map(|&(k, _)| k).ok_or(Error::Exhausted)?;
        let tie_broken = tied.next().is_some();
        Ok(Self { scores, chosen, tie_broken })
    }

    pub fn chosen_score(&self) -> f64 {
        self.scores.iter().find(|&&(k, _)| k == self.chosen).map(|&(_, s)| s).unwrap_or(f64::NAN)
    }

    /// Every sensor within the tie slack of the best score.
    pub fn tie_set(&self) -> Vec<usize> {
        let best = self.chosen_score();
        let slack = TIE_RTOL * best.abs().max(1.0);
        self.scores.iter().filter(|&&(_, s)| s >= best - slack).map(|&(k, _)| k).collect()
    }
}

fn require_available<C: Conditioner + ?Sized>(state: &C, k: usize) -> Result<()> {
    if state.is_available(k) {
        Ok(())
    } else {
        Err(Error::SensorUnavailable { sensor: k })
    }
}

/// `H(z_k | Z(l), θ_q)` in nats.
pub fn conditional_entropy<C: Conditioner + ?Sized>(
    k: usize,
    state: &C,
    q: usize,
    model: &HypothesisModel,
) -> Result<f64> {
    require_available(state, k)?;
    Ok(state.conditional(model, k, q)?.entropy())
}

/// `E[|z_k − ẑ_k|² | Z(l)]` under `θ_q`, the MMSE of predicting `z_k`.
pub fn mse_score<C: Conditioner + ?Sized>(k: usize, state: &C, model: &HypothesisModel, q: usize) -> Result<f64> {
    require_available(state, k)?;
    Ok(state.conditional(model, k, q)?.variance)
}

/// `D(p ‖ r)` for univariate Gaussians, in nats.
pub fn kl_gauss(p: &ConditionalGaussian, r: &ConditionalGaussian) -> f64 {
    let d = p.mean - r.mean;
    0.5 * (libm::log(r.variance / p.variance) + (p.variance + d * d) / r.variance - 1.0)
}

/// `D(p ‖ r) + D(r ‖ p)`; the log terms cancel.
pub fn symmetric_kl(p: &ConditionalGaussian, r: &ConditionalGaussian) -> f64 {
    let d2 = (p.mean - r.mean) * (p.mean - r.mean);
    0.5 * ((p.variance + d2) / r.variance + (r.variance + d2) / p.variance) - 1.0
}

const STACK_HYPOTHESES: usize = 8;

/// `Σ_q Σ_{i≠q} D(f_q ‖ f_i)` over the scalar conditionals of sensor `k`.
pub fn j_divergence_score<C: Conditioner + ?Sized>(k: usize, state: &C, model: &HypothesisModel) -> Result<f64> {
    require_available(state, k)?;
    let q_count = model.hypotheses();
    let mut stack = [ConditionalGaussian { mean: 0.0, variance: 1.0 }; STACK_HYPOTHESES];
    let mut heap = Vec::new();
    let laws: &mut [ConditionalGaussian] = if q_count <= STACK_HYPOTHESES {
        &mut stack[..q_count]
    } else {
        heap.resize(q_count, stack[0]);
        &mut heap
    };
    for (q, law) in laws.iter_mut().enumerate() {
        *law = state.conditional(model, k, q)?;
    }
    let mut total = 0.0;
    for (q, fq) in laws.iter().enumerate() {
        for fi in &laws[q + 1..] {
            total += symmetric_kl(fq, fi);
        }
    }
    Ok(total)
}

/// Hypothesis conditioned on in round `l` by the cycling entropy rule.
pub fn cycled_hypothesis(round: usize, hypotheses: usize) -> usize {
    round % hypotheses
}

fn score_all<C: Conditioner + ?Sized>(state: &C, mut score: impl FnMut(usize) -> Result<f64>) -> Result<ScoreReport> {
    let scores = state.candidates().into_iter().map(|k| score(k).map(|s| (k, s))).collect::<Result<Vec<_>>>()?;
    ScoreReport::from_scores(scores)
}

/// Maximum conditional entropy under the hypothesis for this round, cycling
/// through the hypotheses in ascending order.
pub fn select_entropy_das<C: Conditioner + ?Sized>(state: &C, model: &HypothesisModel) -> Result<ScoreReport> {
    let q = cycled_hypothesis(state.round(), model.hypotheses());
    score_all(state, |k| conditional_entropy(k, state, q, model))
}

/// Maximum conditional MSE, with the same hypothesis cycling as
/// [`select_entropy_das`].
pub fn select_mse_das<C: Conditioner + ?Sized>(state: &C, model: &HypothesisModel) -> Result<ScoreReport> {
    let q = cycled_hypothesis(state.round(), model.hypotheses());
    score_all(state, |k| mse_score(k, state, model, q))
}

/// Maximum J-divergence between the hypotheses' conditional laws.
pub fn select_jdas<C: Conditioner + ?Sized>(state: &C, model: &HypothesisModel) -> Result<ScoreReport> {
    score_all(state, |k| j_divergence_score(k, state, model))
}

/// Uniform draw from the sensors that have not uploaded yet.
pub fn select_random<C: Conditioner + ?Sized, R: RngCore + ?Sized>(state: &C, rng: &mut R) -> Result<usize> {
    let candidates = state.candidates();
    if candidates.is_empty() {
        return Err(Error::Exhausted);
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// Outcome of one selection round.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub sensor: usize,
    /// Absent for random selection.
    pub report: Option<ScoreReport>,
}

/// Runs the rule `kind` for one round. `rng` is only consumed by
/// [`StrategyKind::Random`].
pub fn select<C, R>(kind: StrategyKind, state: &C, model: &HypothesisModel, rng: &mut R) -> Result<Selection>
where
    C: Conditioner + ?Sized,
    R: RngCore + ?Sized,
{
    let report = match kind {
        StrategyKind::Random => return Ok(Selection { sensor: select_random(state, rng)?, report: None }),
        StrategyKind::EntropyDas => select_entropy_das(state, model)?,
        StrategyKind::MseDas => select_mse_das(state, model)?,
        StrategyKind::JDas => select_jdas(state, model)?,
    };
    Ok(Selection { sensor: report.chosen, report: Some(report) })
}

/// The explicit two-term expression for `E_a[ln f_a] − E_b[ln f_a]`:
///
/// `−(α_{k;a}/2)(r_{k;a} − r_{k;b} − d̄_k²) − d̄_k (z(l) − z̄_a(l))ᵀ b_{k;a}`
///
/// with `d̄_k = z̄_{k;a} − z̄_{k;b}` the prior mean gap, `r` the prior variances,
/// `α_{k;a} = 1/(r_{k;a} − cᵀ R_a(l)⁻¹ c)` and `b_{k;a} = −α_{k;a} R_a(l)⁻¹ c`.
/// Kept for comparison against [`exact_log_density_gap`]; selection never
/// uses it.
pub fn eef_term(k: usize, state: &SelectionState, model: &HypothesisModel, a: usize, b: usize) -> Result<f64> {
    require_available(state, k)?;
    if a == b {
        return Ok(0.0);
    }
    let cov_a = model.cov(a);
    let cross = cov_a.cross(k, state.uploaded());
    let inv = state.inverse(a);
    let inv_c = inv.mul_vec(&cross);
    let schur = cov_a.get(k, k) - cross.iter().zip(&inv_c).map(|(x, y)| x * y).sum::<f64>();
    if !(schur > crate::gaussian::VARIANCE_FLOOR) {
        return Err(Error::NonPositiveConditionalVariance { variance: schur });
    }
    let alpha = 1.0 / schur;
    let gap = model.mean(a)[k] - model.mean(b)[k];
    let r_a = cov_a.get(k, k);
    let r_b = model.cov(b).get(k, k);
    let resid_b: f64 = state.residual(a).iter().zip(&inv_c).map(|(e, v)| e * -alpha * v).sum();
    Ok(-0.5 * alpha * (r_a - r_b - gap * gap) - gap * resid_b)
}

/// `E_a[ln f_a] − E_b[ln f_a]` from the exact conditional laws:
/// `−(1/(2 s_a²))(s_a² − s_b² − (μ_a − μ_b)²)`.
pub fn exact_log_density_gap<C: Conditioner + ?Sized>(
    k: usize,
    state: &C,
    model: &HypothesisModel,
    a: usize,
    b: usize,
) -> Result<f64> {
    require_available(state, k)?;
    if a == b {
        return Ok(0.0);
    }
    let fa = state.conditional(model, k, a)?;
    let fb = state.conditional(model, k, b)?;
    let d = fa.mean - fb.mean;
    Ok(-0.5 * fa.precision() * (fa.variance - fb.variance - d * d))
}
