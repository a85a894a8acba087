//! Per-hypothesis Gaussian measurement models and the two benchmark families.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholFactor, SymMatrix};

/// `Q` jointly Gaussian laws over the same `K` sensors.
///
/// Hypothesis and sensor indices are 0-based here; user-facing formats add 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisModel {
    sensors: usize,
    labels: Vec<String>,
    means: Vec<Vec<f64>>,
    covs: Vec<SymMatrix>,
    chols: Vec<CholFactor>,
}

impl HypothesisModel {
    pub fn new(labels: Vec<String>, means: Vec<Vec<f64>>, covs: Vec<SymMatrix>) -> Result<Self> {
        let q = labels.len();
        if q < 2 {
            return Err(Error::InvalidModel("at least two hypotheses are required"));
        }
        if means.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: means.len() });
        }
        if covs.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: covs.len() });
        }
        let sensors = means[0].len();
        if sensors == 0 {
            return Err(Error::InvalidModel("at least one sensor is required"));
        }
        for m in &means {
            if m.len() != sensors {
                return Err(Error::DimensionMismatch { expected: sensors, found: m.len() });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel("mean entries must be finite"));
            }
        }
        let mut chols = Vec::with_capacity(q);
        for c in &covs {
            if c.dim() != sensors {
                return Err(Error::DimensionMismatch { expected: sensors, found: c.dim() });
            }
            chols.push(cholesky(c)?);
        }
        Ok(Self { sensors, labels, means, covs, chols })
    }

    /// Number of sensors `K`.
    pub fn sensors(&self) -> usize {
        self.sensors
    }

    /// Number of hypotheses `Q`.
    pub fn hypotheses(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, q: usize) -> &str {
        &self.labels[q]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mean(&self, q: usize) -> &[f64] {
        &self.means[q]
    }

    pub fn cov(&self, q: usize) -> &SymMatrix {
        &self.covs[q]
    }

    pub fn chol(&self, q: usize) -> &CholFactor {
        &self.chols[q]
    }
}

/// The built-in benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Sinusoidal means with AR(1) covariances of opposite correlation sign.
    SinusoidalAr1,
    /// Constant means `±A` with white noise.
    IidAntipodal,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::SinusoidalAr1 => "sinusoidal-ar1",
            Family::IidAntipodal => "iid-antipodal",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "sinusoidal-ar1" => Ok(Family::SinusoidalAr1),
            "iid-antipodal" => Ok(Family::IidAntipodal),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

pub const DEFAULT_SENSORS: usize = 50;
pub const DEFAULT_SNR_DB: f64 = 0.0;
pub const DEFAULT_RHO: [f64; 2] = [0.75, -0.75];

/// Parameters of a benchmark model.
///
/// The signal-to-noise ratio is `A² / (2σ²)`. Amplitude and noise variance are
/// stored directly so that `A = 0` (identical hypotheses) stays expressible.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub family: Family,
    pub sensors: usize,
    pub amplitude: f64,
    pub noise_var: f64,
    /// Per-hypothesis AR(1) correlation; ignored by the iid family.
    pub rho: Vec<f64>,
}

impl BenchmarkSpec {
    /// Unit noise variance with the amplitude chosen to hit `snr_db`.
    pub fn from_snr_db(family: Family, sensors: usize, snr_db: f64) -> Self {
        let amplitude = libm::sqrt(2.0 * db_to_linear(snr_db));
        Self { family, sensors, amplitude, noise_var: 1.0, rho: DEFAULT_RHO.to_vec() }
    }

    /// Fixed amplitude with the noise variance implied by `snr_db`.
    pub fn from_amplitude_and_snr_db(family: Family, sensors: usize, amplitude: f64, snr_db: f64) -> Self {
        let noise_var = amplitude * amplitude / (2.0 * db_to_linear(snr_db));
        Self { family, sensors, amplitude, noise_var, rho: DEFAULT_RHO.to_vec() }
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * libm::log10(self.amplitude * self.amplitude / (2.0 * self.noise_var))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 {
            return Err(Error::InvalidModel("at least one sensor is required"));
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return Err(Error::InvalidModel("noise variance must be finite and positive"));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidModel("amplitude must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<HypothesisModel> {
        match self.family {
            Family::SinusoidalAr1 => build_sinusoidal_ar1(self),
            Family::IidAntipodal => build_iid_antipodal(self),
        }
    }
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self::from_snr_db(Family::SinusoidalAr1, DEFAULT_SENSORS, DEFAULT_SNR_DB)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

fn default_labels(q: usize) -> Vec<String> {
    (1..=q).map(|i| format!("theta{i}")).collect()
}

/// `σ² ρ^{|k−t|}`, with powers formed by repeated multiplication.
pub fn ar1_covariance(sensors: usize, noise_var: f64, rho: f64) -> Result<SymMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidRho { rho });
    }
    let mut powers = vec![1.0; sensors.max(1)];
    for lag in 1..sensors {
        powers[lag] = powers[lag - 1] * rho;
    }
    Ok(SymMatrix::from_fn(sensors, |i, j| noise_var * powers[i - j]))
}

/// Means `A cos(π(k−1)/10)` and `A sin(π(k−1)/10)` with AR(1) covariances.
pub fn build_sinusoidal_ar1(spec: &BenchmarkSpec) -> Result<HypothesisModel> {
    spec.validate()?;
    if spec.rho.len() != 2 {
        return Err(Error::InvalidModel("the sinusoidal family has exactly two hypotheses"));
    }
    let phase = |k: usize| PI * k as f64 / 10.0;
    let means = vec![
        (0..spec.sensors).map(|k| spec.amplitude * libm::cos(phase(k))).collect(),
        (0..spec.sensors).map(|k| spec.amplitude * libm::sin(phase(k))).collect(),
    ];
    let covs =
        spec.rho.iter().map(|&rho| ar1_covariance(spec.sensors, spec.noise_var, rho)).collect::<Result<Vec<_>>>()?;
    HypothesisModel::new(default_labels(2), means, covs)
}

/// Means `±A` on every sensor, covariance `σ² I` under both hypotheses.
pub fn build_iid_antipodal(spec: &BenchmarkSpec) -> Result<HypothesisModel> {
    spec.validate()?;
    let cov = SymMatrix::from_fn(spec.sensors, |i, j| if i == j { spec.noise_var } else { 0.0 });
    let means = vec![vec![spec.amplitude; spec.sensors], vec![-spec.amplitude; spec.sensors]];
    HypothesisModel::new(default_labels(2), means, vec![cov.clone(), cov])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_first_sensor() {
        let spec = BenchmarkSpec { amplitude: 2f64.sqrt(), ..BenchmarkSpec::default() };
        let m = build_sinusoidal_ar1(&spec).unwrap();
        assert_eq!(m.mean(0)[0], 2f64.sqrt());
        assert_eq!(m.mean(1)[0], 0.0);
        assert_eq!(m.sensors(), 50);
        assert_eq!(m.hypotheses(), 2);
    }

    #[test]
    fn ar1_lag_two_entry() {
        let spec = BenchmarkSpec { noise_var: 1.0, ..BenchmarkSpec::default() };
        let m = build_sinusoidal_ar1(&spec).unwrap();
        assert_eq!(m.cov(0).get(0, 2), 0.5625);
        assert_eq!(m.cov(1).get(0, 2), 0.5625);
        assert_eq!(m.cov(1).get(0, 1), -0.75);
    }

    #[test]
    fn zero_db_gives_unit_noise() {
        let spec = BenchmarkSpec::from_snr_db(Family::SinusoidalAr1, 50, 0.0);
        assert_eq!(spec.noise_var, 1.0);
        assert!((spec.amplitude - 2f64.sqrt()).abs() < 1e-15);
        let spec = BenchmarkSpec::from_amplitude_and_snr_db(Family::SinusoidalAr1, 50, 2f64.sqrt(), 0.0);
        assert!((spec.noise_var - 1.0).abs() < 1e-15);
        assert!(spec.snr_db().abs() < 1e-12);
    }

    #[test]
    fn invalid_rho_rejected() {
        let spec = BenchmarkSpec { rho: vec![0.75, -1.0], ..BenchmarkSpec::default() };
        assert_eq!(build_sinusoidal_ar1(&spec).unwrap_err(), Error::InvalidRho { rho: -1.0 });
    }

    #[test]
    fn iid_antipodal_small() {
        let spec =
            BenchmarkSpec { family: Family::IidAntipodal, sensors: 3, amplitude: 1.0, noise_var: 1.0, rho: vec![] };
        let m = spec.build().unwrap();
        assert_eq!(m.mean(0), &[1.0, 1.0, 1.0]);
        assert_eq!(m.mean(1), &[-1.0, -1.0, -1.0]);
        assert_eq!(m.cov(0), &SymMatrix::identity(3));
        assert_eq!(m.cov(1), &SymMatrix::identity(3));
    }

    #[test]
    fn iid_zero_amplitude_is_degenerate() {
        let spec =
            BenchmarkSpec { family: Family::IidAntipodal, sensors: 4, amplitude: 0.0, noise_var: 2.0, rho: vec![] };
        let m = spec.build().unwrap();
        assert_eq!(m.mean(0), m.mean(1));
        assert_eq!(m.cov(0), m.cov(1));
    }

    #[test]
    fn iid_snr_relation() {
        let spec = BenchmarkSpec::from_snr_db(Family::IidAntipodal, 5, 0.0);
        assert!((spec.amplitude * spec.amplitude - 2.0 * spec.noise_var).abs() < 1e-15);
    }

    #[test]
    fn model_rejects_bad_shapes() {
        let labels = default_labels(2);
        let cov = SymMatrix::identity(2);
        let err =
            HypothesisModel::new(labels.clone(), vec![vec![0.0; 2], vec![0.0; 3]], vec![cov.clone(), cov.clone()]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let err = HypothesisModel::new(vec![String::from("a")], vec![vec![0.0; 2]], vec![cov.clone()]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let bad = SymMatrix::from_dense(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        let err = HypothesisModel::new(labels, vec![vec![0.0; 2]; 2], vec![cov, bad]);
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn single_sensor_model() {
        let spec = BenchmarkSpec { sensors: 1, ..BenchmarkSpec::default() };
        let m = spec.build().unwrap();
        assert_eq!(m.cov(0).dim(), 1);
    }
}
