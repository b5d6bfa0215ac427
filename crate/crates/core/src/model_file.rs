//! JSON model files for linear Gaussian systems on a safe box.
//!
//! ```json
//! { "n": 2,
//!   "phi": { "triplets": [[0, 0, 0.8], [1, 0, 0.5], [1, 1, 0.8]] },
//!   "sigma": [0.2, 0.2],
//!   "safe_lo": [-1, -1], "safe_hi": [1, 1],
//!   "horizon": 10,
//!   "epsilon": 0.5 }
//! ```
//!
//! `phi` may also be a dense array of rows. Exactly one of `epsilon` and
//! `bins_per_dim` must be present. Unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abstraction::{build_dbn, BuildOptions, DiscreteDbn};
use crate::bounds::{dbn_error, ErrorReport, LipschitzData, SetTerm};
use crate::model::{ProcessModel, SafeSet, SparseMatrix};
use crate::partition::size_from_budget;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Dense(Vec<Vec<f64>>),
    Sparse(Triplets),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triplets {
    pub triplets: Vec<(usize, usize, f64)>,
}

/// The file as written, before semantic validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModelFile {
    pub n: usize,
    pub phi: PhiSpec,
    pub sigma: Vec<f64>,
    pub safe_lo: Vec<f64>,
    pub safe_hi: Vec<f64>,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_per_dim: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sizing {
    Epsilon(f64),
    BinsPerDim(Vec<usize>),
}

/// A validated model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub raw: RawModelFile,
    pub model: ProcessModel,
    pub safe: SafeSet,
    pub horizon: usize,
    pub sizing: Sizing,
}

/// 1-based line of the first occurrence of `"key"`, for pointing semantic
/// errors at the offending field.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle).map(|at| text[..at].matches('\n').count() + 1)
}

fn at_field(text: &str, key: &str, e: Error) -> Error {
    let what = match e {
        Error::Format(m) | Error::InvalidParameter(m) | Error::DimensionMismatch(m) => m,
        Error::NonFinite(m) => format!("non-finite value in {m}"),
        other => other.to_string(),
    };
    match key_line(text, key) {
        Some(line) => Error::Format(format!("line {line}: field `{key}`: {what}")),
        None => Error::Format(format!("field `{key}`: {what}")),
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::validate(raw, text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_raw(raw: RawModelFile) -> Result<Self> {
        Self::validate(raw, "")
    }

    fn validate(raw: RawModelFile, text: &str) -> Result<Self> {
        let n = raw.n;
        if n == 0 {
            return Err(at_field(
                text,
                "n",
                Error::InvalidParameter("must be at least 1".into()),
            ));
        }
        let phi = match &raw.phi {
            PhiSpec::Dense(rows) => {
                if rows.len() != n {
                    Err(Error::DimensionMismatch(format!("{} rows for n = {n}", rows.len())))
                } else {
                    SparseMatrix::from_dense(rows)
                }
            }
            PhiSpec::Sparse(t) => SparseMatrix::from_triplets(n, t.triplets.iter().copied()),
        }
        .map_err(|e| at_field(text, "phi", e))?;
        if raw.sigma.len() != n {
            return Err(at_field(
                text,
                "sigma",
                Error::DimensionMismatch(format!("{} entries for n = {n}", raw.sigma.len())),
            ));
        }
        let model = ProcessModel::linear_gaussian(phi, raw.sigma.clone()).map_err(|e| at_field(text, "sigma", e))?;
        for key in ["safe_lo", "safe_hi"] {
            let len = if key == "safe_lo" {
                raw.safe_lo.len()
            } else {
                raw.safe_hi.len()
            };
            if len != n {
                return Err(at_field(
                    text,
                    key,
                    Error::DimensionMismatch(format!("{len} entries for n = {n}")),
                ));
            }
        }
        let safe = SafeSet::new(raw.safe_lo.clone(), raw.safe_hi.clone()).map_err(|e| at_field(text, "safe_hi", e))?;
        let sizing = match (raw.epsilon, &raw.bins_per_dim) {
            (Some(eps), None) => {
                if !eps.is_finite() || eps <= 0.0 {
                    return Err(at_field(
                        text,
                        "epsilon",
                        Error::InvalidParameter(format!("{eps} is not positive")),
                    ));
                }
                Sizing::Epsilon(eps)
            }
            (None, Some(bins)) => {
                if bins.len() != n {
                    return Err(at_field(
                        text,
                        "bins_per_dim",
                        Error::DimensionMismatch(format!("{} entries for n = {n}", bins.len())),
                    ));
                }
                if bins.contains(&0) {
                    return Err(at_field(
                        text,
                        "bins_per_dim",
                        Error::InvalidParameter("bin counts must be positive".into()),
                    ));
                }
                Sizing::BinsPerDim(bins.clone())
            }
            (Some(_), Some(_)) => {
                return Err(at_field(
                    text,
                    "bins_per_dim",
                    Error::InvalidParameter("give either `epsilon` or `bins_per_dim`, not both".into()),
                ))
            }
            (None, None) => {
                return Err(Error::Format("one of `epsilon` or `bins_per_dim` is required".into()));
            }
        };
        Ok(ModelFile {
            horizon: raw.horizon,
            raw,
            model,
            safe,
            sizing,
        })
    }

    pub fn lipschitz(&self) -> Result<LipschitzData> {
        LipschitzData::for_model(&self.model, &self.safe)
    }

    /// Bins per dimension: from the budget when `epsilon` is given.
    pub fn counts(&self) -> Result<Vec<usize>> {
        match &self.sizing {
            Sizing::BinsPerDim(b) => Ok(b.clone()),
            Sizing::Epsilon(eps) => size_from_budget(&self.lipschitz()?, &self.safe, self.horizon, *eps),
        }
    }

    pub fn build(&self, opts: BuildOptions) -> Result<DiscreteDbn> {
        build_dbn(&self.model, &self.safe, &self.counts()?, opts)
    }

    /// Certified abstraction error of a network built on this model's safe box.
    pub fn error_report(&self, dbn: &DiscreteDbn) -> Result<ErrorReport> {
        dbn_error(
            &self.lipschitz()?,
            self.horizon,
            &dbn.partition().diameters(),
            SetTerm::default(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "n": 2,
  "phi": {"triplets": [[0, 0, 1.0], [1, 0, 1.0], [1, 1, 1.0]]},
  "sigma": [0.2, 0.2],
  "safe_lo": [-1, -1],
  "safe_hi": [1, 1],
  "horizon": 10,
  "epsilon": 0.2
}"#;

    #[test]
    fn bidiagonal_pair_sizes_from_budget() {
        let m = ModelFile::parse(GOOD).unwrap();
        assert_eq!(m.counts().unwrap(), vec![3630, 3630]);
        assert_eq!(m.model.parents(1), &[0, 1]);
    }

    #[test]
    fn dense_and_sparse_agree() {
        let dense = GOOD.replace(
            r#"{"triplets": [[0, 0, 1.0], [1, 0, 1.0], [1, 1, 1.0]]}"#,
            "[[1, 0], [1, 1]]",
        );
        let a = ModelFile::parse(GOOD).unwrap();
        let b = ModelFile::parse(&dense).unwrap();
        assert_eq!(a.model.phi(), b.model.phi());
    }

    #[test]
    fn trivial_model() {
        let text = r#"{"n":1,"phi":[[0]],"sigma":[1],"safe_lo":[0],"safe_hi":[1],"horizon":3,"bins_per_dim":[1]}"#;
        let m = ModelFile::parse(text).unwrap();
        let dbn = m.build(BuildOptions::default()).unwrap();
        assert_eq!(dbn.counts(), vec![1]);
        assert!(dbn.parents(0).is_empty());
    }

    #[test]
    fn unknown_field_is_rejected_with_position() {
        let text = GOOD.replace("\"horizon\"", "\"horizn\"");
        let msg = ModelFile::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("unknown field") && msg.contains("line 7"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_line() {
        let text = GOOD.replace("[0.2, 0.2]", "[0.2]");
        let msg = ModelFile::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("line 4") && msg.contains("sigma"), "{msg}");
        let text = GOOD.replace("[1, 1]", "[1, -2]");
        assert!(ModelFile::parse(&text).unwrap_err().to_string().contains("line 6"));
    }

    #[test]
    fn exactly_one_sizing() {
        let both = GOOD.replace("\"epsilon\": 0.2", "\"epsilon\": 0.2, \"bins_per_dim\": [2, 2]");
        assert!(ModelFile::parse(&both).is_err());
        let none = GOOD.replace(",\n  \"epsilon\": 0.2", "");
        assert!(ModelFile::parse(&none).is_err());
        let zero = GOOD.replace("\"epsilon\": 0.2", "\"epsilon\": 0");
        assert!(ModelFile::parse(&zero).is_err());
    }

    #[test]
    fn triplets_outside_the_matrix() {
        let text = GOOD.replace("[1, 1, 1.0]", "[2, 1, 1.0]");
        assert!(ModelFile::parse(&text).unwrap_err().to_string().contains("line 3"));
    }

    #[test]
    fn raw_round_trip() {
        let m = ModelFile::parse(GOOD).unwrap();
        let text = serde_json::to_string(&m.raw).unwrap();
        assert_eq!(ModelFile::parse(&text).unwrap().raw, m.raw);
    }
}
