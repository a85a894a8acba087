//! Text format for hypothesis models.
//!
//! A model file is TOML with five keys:
//!
//! ```text
//! K = 2                              # sensors
//! Q = 2                              # hypotheses
//! labels = ["theta1", "theta2"]      # Q names
//! means = [[1.0, 0.0], [-1.0, 0.0]]  # Q rows of K means
//! covs = [                           # Q blocks of K rows of K entries
//!   [[1.0, 0.75], [0.75, 1.0]],
//!   [[1.0, -0.75], [-0.75, 1.0]],
//! ]
//! ```
//!
//! Whitespace and line breaks are free-form. Each covariance block is given
//! in full, row-major, and must be exactly symmetric and positive definite.
//! Sensor `k` in the file is row/column `k` (1-based when counting rows).
//!
//! [`write_model`] emits one matrix row per line with shortest round-trip
//! float formatting, so `save → load → save` reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use das_detect_core::{Error as CoreError, HypothesisModel, SymMatrix};
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "K")]
    sensors: usize,
    #[serde(rename = "Q")]
    hypotheses: usize,
    labels: Vec<String>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<Vec<f64>>>,
}

/// Parses and validates a model from text.
pub fn parse_model(text: &str) -> Result<HypothesisModel> {
    let raw: RawModel = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let (k, q) = (raw.sensors, raw.hypotheses);
    let dims = |expected, found| -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::Core(CoreError::DimensionMismatch { expected, found }))
        }
    };
    dims(q, raw.labels.len())?;
    dims(q, raw.means.len())?;
    dims(q, raw.covs.len())?;
    for m in &raw.means {
        dims(k, m.len())?;
    }
    let mut covs = Vec::with_capacity(q);
    for (h, block) in raw.covs.iter().enumerate() {
        dims(k, block.len())?;
        let mut dense = Vec::with_capacity(k * k);
        for row in block {
            dims(k, row.len())?;
            dense.extend_from_slice(row);
        }
        if let Some(bad) = dense.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("covariance {} has non-finite entry {bad}", h + 1)));
        }
        let cov = SymMatrix::from_dense(k, &dense).map_err(|e| match e {
            CoreError::Asymmetric { row, col } => Error::Parse(format!(
                "asymmetric covariance {}: entry ({}, {}) differs from ({}, {})",
                h + 1,
                row + 1,
                col + 1,
                col + 1,
                row + 1
            )),
            other => Error::Core(other),
        })?;
        covs.push(cov);
    }
    Ok(HypothesisModel::new(raw.labels, raw.means, covs)?)
}

pub fn load_model(path: &Path) -> Result<HypothesisModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

fn push_row(out: &mut String, indent: &str, row: impl Iterator<Item = f64>) {
    out.push_str(indent);
    out.push('[');
    for (i, v) in row.enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{v:?}");
    }
    out.push_str("],\n");
}

/// Renders a model in the documented format.
pub fn write_model(model: &HypothesisModel) -> String {
    let k = model.sensors();
    let q = model.hypotheses();
    let mut out = String::new();
    let _ = writeln!(out, "K = {k}");
    let _ = writeln!(out, "Q = {q}");
    let labels: Vec<String> = model.labels().iter().map(|l| toml::Value::String(l.clone()).to_string()).collect();
    let _ = writeln!(out, "labels = [{}]", labels.join(", "));
    out.push_str("means = [\n");
    for h in 0..q {
        push_row(&mut out, "  ", model.mean(h).iter().copied());
    }
    out.push_str("]\ncovs = [\n");
    for h in 0..q {
        out.push_str("  [\n");
        let cov = model.cov(h);
        for i in 0..k {
            push_row(&mut out, "    ", (0..k).map(|j| cov.get(i, j)));
        }
        out.push_str("  ],\n");
    }
    out.push_str("]\n");
    out
}

pub fn save_model(model: &HypothesisModel, path: &Path) -> Result<()> {
    fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use das_detect_core::{BenchmarkSpec, Family};

    const SMALL: &str = r#"
        K = 2
        Q = 2
        labels = ["theta1", "theta2"]
        means = [[1.0, 0.0], [-1.0, 0.0]]
        covs = [
          [[1.0, 0.75], [0.75, 1.0]],
          [[1.0, -0.75], [-0.75, 1.0]],
        ]
    "#;

    #[test]
    fn small_model_loads_and_round_trips() {
        let model = parse_model(SMALL).unwrap();
        assert_eq!(model.sensors(), 2);
        assert_eq!(model.cov(1).get(0, 1), -0.75);
        let text = write_model(&model);
        let again = parse_model(&text).unwrap();
        assert_eq!(again, model);
        assert_eq!(write_model(&again), text);
    }

    #[test]
    fn integers_are_accepted_as_floats() {
        let model =
            parse_model("K = 1\nQ = 2\nlabels = [\"a\", \"b\"]\nmeans = [[1], [-1]]\ncovs = [[[2]], [[2]]]\n").unwrap();
        assert_eq!(model.cov(0).get(0, 0), 2.0);
    }

    #[test]
    fn asymmetric_covariance_is_a_parse_error() {
        let text = SMALL.replace("[[1.0, 0.75], [0.75, 1.0]]", "[[1.0, 0.75], [0.7, 1.0]]");
        match parse_model(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("asymmetric"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let text = SMALL.replace("[[1.0, 0.75], [0.75, 1.0]]", "[[1.0, 2.0], [2.0, 1.0]]");
        assert!(matches!(parse_model(&text), Err(Error::Core(CoreError::NotPositiveDefinite { .. }))));
    }

    #[test]
    fn shape_errors() {
        let text = SMALL.replace("[[1.0, 0.0], [-1.0, 0.0]]", "[[1.0, 0.0], [-1.0]]");
        assert!(matches!(parse_model(&text), Err(Error::Core(CoreError::DimensionMismatch { .. }))));
        let text = SMALL.replace("Q = 2", "Q = 3");
        assert!(matches!(parse_model(&text), Err(Error::Core(CoreError::DimensionMismatch { .. }))));
        assert!(matches!(parse_model("K = \"x\""), Err(Error::Parse(_))));
        assert!(matches!(parse_model(&format!("{SMALL}\nextra = 1")), Err(Error::Parse(_))));
    }

    #[test]
    fn benchmark_export_is_stable() {
        for family in [Family::SinusoidalAr1, Family::IidAntipodal] {
            let model = BenchmarkSpec::from_snr_db(family, 50, 0.0).build().unwrap();
            let text = write_model(&model);
            let again = parse_model(&text).unwrap();
            assert_eq!(again, model);
            assert_eq!(write_model(&again), text);
        }
    }
}
