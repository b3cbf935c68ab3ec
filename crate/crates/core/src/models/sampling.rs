//! Data samplers for null and alternative distributions.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GaussBernoulliRbm, GmmPosterior, GmmPosteriorParams, RbmParams, SampleSet, ScoreModel};
use crate::error::{invalid, Result};
use crate::numeric::rng_stream;

/// Distribution to draw a sample from, in the `{"kind": ..., "params": {...}}`
/// layout used by model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum AltSampler {
    /// Standard Gaussian `N(0, I)`.
    Gaussian { dim: usize },
    /// Product of Laplace(0, 1/√2) coordinates (unit variance).
    LaplaceProduct { dim: usize },
    /// Standard multivariate t.
    StudentT { dim: usize, df: f64 },
    /// Grid-discretized draws from the GMM posterior.
    GmmSgldTarget {
        #[serde(default)]
        posterior: GmmPosteriorParams,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    /// Gibbs chain of a (perturbed) Gauss–Bernoulli RBM.
    RbmGibbs {
        #[serde(default)]
        rbm: RbmParams,
        #[serde(default)]
        sigma_per: f64,
        /// Seed of the weight perturbation. `None` draws fresh noise from the
        /// sampling seed, so every trial sees a new perturbed model.
        #[serde(default)]
        perturb_seed: Option<u64>,
    },
}

fn default_grid() -> usize {
    400
}

impl AltSampler {
    pub fn dim(&self) -> usize {
        match self {
            AltSampler::Gaussian { dim } | AltSampler::LaplaceProduct { dim } => *dim,
            AltSampler::StudentT { dim, .. } => *dim,
            AltSampler::GmmSgldTarget { .. } => 2,
            AltSampler::RbmGibbs { rbm, .. } => rbm.dx,
        }
    }

    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        Ok(match name {
            "gaussian" => AltSampler::Gaussian { dim },
            "laplace" | "laplace_product" => AltSampler::LaplaceProduct { dim },
            "student_t" | "t" => AltSampler::StudentT { dim, df: 5.0 },
            "gmm_sgld_target" => AltSampler::GmmSgldTarget {
                posterior: GmmPosteriorParams::default(),
                grid: default_grid(),
            },
            "rbm_gibbs" => AltSampler::RbmGibbs {
                rbm: RbmParams { dx: dim, ..Default::default() },
                sigma_per: 0.0,
                perturb_seed: None,
            },
            other => return Err(invalid(format!("unknown sampler kind '{other}'"))),
        })
    }
}

/// Draws `n` points; the result depends only on `(kind, n, seed)`.
pub fn sample_alternative(kind: &AltSampler, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = rng_stream(seed, 0);
    let points = match kind {
        AltSampler::Gaussian { dim } => {
            positive_dim(*dim)?;
            (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
        AltSampler::LaplaceProduct { dim } => {
            positive_dim(*dim)?;
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            (0..n * dim)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                })
                .collect()
        }
        AltSampler::StudentT { dim, df } => {
            positive_dim(*dim)?;
            let chi = ChiSquared::new(*df).map_err(|e| invalid(format!("student t df: {e}")))?;
            let mut pts = Vec::with_capacity(n * dim);
            for _ in 0..n {
                let w = (chi.sample(&mut rng) / df).sqrt();
                for _ in 0..*dim {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    pts.push(g / w);
                }
            }
            pts
        }
        AltSampler::GmmSgldTarget { posterior, grid } => {
            let model = GmmPosterior::from_params(posterior.clone())?;
            grid_sample(&model, (*grid).max(16), n, &mut rng)
        }
        AltSampler::RbmGibbs { rbm, sigma_per, perturb_seed } => {
            let base = GaussBernoulliRbm::random(rbm)?;
            let model = base.perturbed(*sigma_per, perturb_seed.unwrap_or(seed))?;
            model.gibbs_sample(n, rbm.burn_in, rbm.thin, seed)
        }
    };
    SampleSet::new(points, kind.dim())
}

fn positive_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

/// Draws from a 2-D density by tabulating it on a grid covering its bulk,
/// picking cells by probability and jittering uniformly inside each cell.
fn grid_sample<R: Rng>(model: &dyn ScoreModel, grid: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let logp = |x: f64, y: f64| model.log_density(&[x, y]).unwrap_or(f64::NEG_INFINITY);
    // Locate the bulk on a coarse grid.
    let coarse = 200;
    let (lo, hi) = (-10.0, 10.0);
    let step = (hi - lo) / coarse as f64;
    let mut vals = Vec::with_capacity(coarse * coarse);
    for i in 0..coarse {
        for j in 0..coarse {
            vals.push((i, j, logp(lo + (i as f64 + 0.5) * step, lo + (j as f64 + 0.5) * step)));
        }
    }
    let max = vals.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    let bulk: Vec<_> = vals.iter().filter(|v| v.2 > max - 40.0).collect();
    let imin = bulk.iter().map(|v| v.0).min().unwrap_or(0);
    let imax = bulk.iter().map(|v| v.0).max().unwrap_or(coarse - 1);
    let jmin = bulk.iter().map(|v| v.1).min().unwrap_or(0);
    let jmax = bulk.iter().map(|v| v.1).max().unwrap_or(coarse - 1);
    let x0 = lo + imin.saturating_sub(1) as f64 * step;
    let x1 = lo + (imax + 2).min(coarse) as f64 * step;
    let y0 = lo + jmin.saturating_sub(1) as f64 * step;
    let y1 = lo + (jmax + 2).min(coarse) as f64 * step;

    let (hx, hy) = ((x1 - x0) / grid as f64, (y1 - y0) / grid as f64);
    let mut logs = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            logs.push(logp(x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy));
        }
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = Vec::with_capacity(logs.len());
    let mut acc = 0.0;
    for l in &logs {
        acc += (l - m).exp();
        cdf.push(acc);
    }
    let mut pts = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let u = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let (i, j) = (k / grid, k % grid);
        pts.push(x0 + (i as f64 + rng.random::<f64>()) * hx);
        pts.push(y0 + (j as f64 + rng.random::<f64>()) * hy);
    }
    pts
}
