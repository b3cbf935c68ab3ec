use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    gaussian_model, rbm_model, AltSampler, GaussBernoulliRbm, GmmPosterior, GmmPosteriorParams,
    RbmParams, ScoreModel,
};
use crate::error::{invalid, Error, Result};

/// Model document: `{"kind": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian { dim: usize },
    GmmPosterior(GmmPosteriorParams),
    Rbm(RbmSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmSpec {
    /// Parameters of a randomly generated RBM; ignored when `weights_csv` is set.
    #[serde(default, flatten)]
    pub random: RbmParams,
    /// CSV file with the `dx × dh` weight matrix (one row per visible unit, no header).
    #[serde(default)]
    pub weights_csv: Option<PathBuf>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "gaussian" => Ok(ModelSpec::Gaussian { dim }),
            "gmm_posterior" | "gmm" => Ok(ModelSpec::GmmPosterior(GmmPosteriorParams::default())),
            "rbm" => Ok(ModelSpec::Rbm(RbmSpec {
                random: RbmParams { dx: dim, ..Default::default() },
                weights_csv: None,
                b: None,
                c: None,
            })),
            other => Err(invalid(format!("unknown model '{other}'"))),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// A `name` or the path of a JSON model document.
    pub fn resolve(name_or_path: &str, dim: usize) -> Result<Self> {
        let p = Path::new(name_or_path);
        if name_or_path.ends_with(".json") || p.is_file() {
            let text = std::fs::read_to_string(p)?;
            let mut spec = Self::from_json_str(&text)?;
            // Relative CSV paths are resolved against the document's directory.
            if let ModelSpec::Rbm(r) = &mut spec {
                if let (Some(csv), Some(dir)) = (&r.weights_csv, p.parent()) {
                    if csv.is_relative() {
                        r.weights_csv = Some(dir.join(csv));
                    }
                }
            }
            Ok(spec)
        } else {
            Self::from_name(name_or_path, dim)
        }
    }

    pub fn build(&self) -> Result<Box<dyn ScoreModel>> {
        Ok(match self {
            ModelSpec::Gaussian { dim } => Box::new(gaussian_model(*dim)?),
            ModelSpec::GmmPosterior(p) => Box::new(GmmPosterior::from_params(p.clone())?),
            ModelSpec::Rbm(r) => Box::new(r.build()?),
        })
    }

    /// Sampler for the model itself, used for null calibration.
    pub fn null_sampler(&self) -> Result<AltSampler> {
        match self {
            ModelSpec::Gaussian { dim } => Ok(AltSampler::Gaussian { dim: *dim }),
            ModelSpec::GmmPosterior(p) => Ok(AltSampler::GmmSgldTarget { posterior: p.clone(), grid: 400 }),
            ModelSpec::Rbm(r) if r.weights_csv.is_none() => Ok(AltSampler::RbmGibbs {
                rbm: r.random.clone(),
                sigma_per: 0.0,
                perturb_seed: None,
            }),
            ModelSpec::Rbm(_) => Err(Error::Unsupported("null sampling for an RBM loaded from CSV".into())),
        }
    }
}

impl RbmSpec {
    pub fn build(&self) -> Result<GaussBernoulliRbm> {
        match &self.weights_csv {
            None => GaussBernoulliRbm::random(&self.random),
            Some(path) => {
                let (rows, dh) = read_matrix_csv(path)?;
                let dx = rows.len() / dh;
                let b = self.b.clone().unwrap_or_else(|| vec![0.0; dx]);
                let c = self.c.clone().unwrap_or_else(|| vec![0.0; dh]);
                rbm_model(rows, b, c)
            }
        }
    }
}

/// Reads a comma-separated numeric matrix without header. Returns the
/// row-major values and the column count.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<f64>, usize)> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text)
}

pub(crate) fn parse_matrix_csv(text: &str) -> Result<(Vec<f64>, usize)> {
    let mut values = Vec::new();
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: '{}' is not a number", lineno + 1, t.trim())))
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: expected {c} columns, found {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
    }
    let cols = cols.ok_or(Error::EmptyInput("matrix file has no rows"))?;
    Ok((values, cols))
}
