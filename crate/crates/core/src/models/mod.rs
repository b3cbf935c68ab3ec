//! Target distributions (through their score functions) and samples.

mod gmm;
mod rbm;
mod sampling;
mod spec;

pub use gmm::{gmm_posterior_model, GmmPosterior, GmmPosteriorParams};
pub use rbm::{rbm_model, GaussBernoulliRbm, RbmParams};
pub use sampling::{sample_alternative, AltSampler};
pub use spec::ModelSpec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::numeric::ExactSum;

/// A target distribution `P` known through `b(x) = ∇log p(x)`.
pub trait ScoreModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `∇log p(x)` into `out`.
    fn score(&self, x: &[f64], out: &mut [f64]);

    /// Unnormalized `log p(x)`, where available in closed form.
    fn log_density(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Number of data points behind a posterior model.
    fn data_len(&self) -> Option<usize> {
        None
    }

    /// Unbiased minibatch estimate of the score: prior term plus the
    /// likelihood terms of `batch` rescaled by `data_len / batch.len()`.
    fn stochastic_score(&self, _x: &[f64], _batch: &[usize], _out: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported(format!("{} has no stochastic score", self.label())))
    }

    fn label(&self) -> &str;

    fn score_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.score(x, &mut out);
        out
    }
}

/// Standard multivariate Gaussian `N(0, I)`.
#[derive(Debug, Clone)]
pub struct StandardGaussian {
    dim: usize,
}

pub fn gaussian_model(dim: usize) -> Result<StandardGaussian> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(StandardGaussian { dim })
}

impl ScoreModel for StandardGaussian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &[f64], out: &mut [f64]) {
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -xi;
        }
    }
    fn log_density(&self, x: &[f64]) -> Option<f64> {
        Some(-0.5 * x.iter().map(|v| v * v).sum::<f64>())
    }
    fn label(&self) -> &str {
        "gaussian"
    }
}

/// Improper flat density; the score is identically zero.
#[derive(Debug, Clone)]
pub struct Flat {
    dim: usize,
}

pub fn flat_model(dim: usize) -> Result<Flat> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(Flat { dim })
}

impl ScoreModel for Flat {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn log_density(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn data_len(&self) -> Option<usize> {
        Some(1)
    }
    fn stochastic_score(&self, _x: &[f64], _batch: &[usize], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }
    fn label(&self) -> &str {
        "flat"
    }
}

/// `N` points in `R^D`, stored row-major, with their mean `m_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<f64>,
    n: usize,
    dim: usize,
    mean: Vec<f64>,
}

impl SampleSet {
    pub fn new(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if points.is_empty() {
            return Err(Error::EmptyInput("sample has no points"));
        }
        if points.len() % dim != 0 {
            return Err(invalid(format!(
                "{} values do not form rows of dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample contains non-finite values"));
        }
        let n = points.len() / dim;
        // Exact per-coordinate sums: the mean does not depend on row order.
        let mut sums = vec![ExactSum::new(); dim];
        for row in points.chunks_exact(dim) {
            for (s, &v) in sums.iter_mut().zip(row) {
                s.add(v);
            }
        }
        let mean = sums.iter().map(|s| s.value() / n as f64).collect();
        Ok(Self { points, n, dim, mean })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or(Error::EmptyInput("sample has no points"))?;
        let mut points = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            points.extend_from_slice(r);
        }
        Self::new(points, dim)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    /// Rows reordered by `perm` (a permutation of `0..len`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(invalid("permutation length differs from sample size"));
        }
        let mut pts = Vec::with_capacity(self.points.len());
        for &i in perm {
            pts.extend_from_slice(self.row(i));
        }
        Self::new(pts, self.dim)
    }

    pub fn concat(&self, other: &SampleSet) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::new(pts, self.dim)
    }

    /// All coordinates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.points.iter().map(|v| v * factor).collect(), self.dim)
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.n);
        Self::new(self.points[..n * self.dim].to_vec(), self.dim)
    }

    /// Per-point scores, row-major `N × D`.
    pub fn scores(&self, model: &dyn ScoreModel) -> Result<Vec<f64>> {
        check_dim(model.dim(), self.dim)?;
        let mut out = vec![0.0; self.points.len()];
        for (x, o) in self.rows().zip(out.chunks_exact_mut(self.dim)) {
            model.score(x, o);
        }
        Ok(out)
    }
}
