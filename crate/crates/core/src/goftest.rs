//! Goodness-of-fit testing with the RΦSD statistic `N·RΦSD²` and its
//! simulated Gaussian-functional null.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{check_inputs, draw_locations, feature_matrix, RPhiSDConfig};
use crate::error::{invalid, Error, Result};
use crate::hyper::ConfigRecipe;
use crate::models::{sample_alternative, AltSampler, SampleSet, ScoreModel};
use crate::numeric::{derive_seed, rng_stream, sorted_quantile, ExactSum, PAR_CHUNK};

pub const DEFAULT_N_SIMS: usize = 4000;
pub const DEFAULT_N_CAL: usize = 200;

/// Per-point test features `ξ_{n,dm} = (T_dΦ)(x_n, Z_m)/(M ν(Z_m))^{1/r}`.
#[derive(Debug, Clone)]
pub struct TestFeatures {
    /// `N × (D·M)` row-major, column `d·M + m`.
    pub matrix: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub m: usize,
    pub r: f64,
}

impl TestFeatures {
    pub fn from_matrix(matrix: Vec<f64>, n: usize, dim: usize, m: usize, r: f64) -> Result<Self> {
        if n == 0 || dim == 0 || m == 0 {
            return Err(invalid("feature matrix must be nonempty"));
        }
        if matrix.len() != n * dim * m {
            return Err(Error::DimensionMismatch { expected: n * dim * m, found: matrix.len() });
        }
        Ok(Self { matrix, n, dim, m, r })
    }

    pub fn width(&self) -> usize {
        self.dim * self.m
    }

    pub fn column_means(&self) -> Vec<f64> {
        let k = self.width();
        let mut sums = vec![ExactSum::new(); k];
        for row in self.matrix.chunks_exact(k) {
            for (s, v) in sums.iter_mut().zip(row) {
                s.add(*v);
            }
        }
        sums.iter().map(|s| s.value() / self.n as f64).collect()
    }

    /// `F = Σ_d (Σ_m |mean_n ξ_dm|^r)^{2/r}`, which equals `RΦSD²`.
    pub fn functional(&self) -> f64 {
        null_functional(&self.column_means(), self.dim, self.m, self.r)
    }

    /// `N·F`.
    pub fn statistic(&self) -> f64 {
        self.n as f64 * self.functional()
    }
}

fn null_functional(v: &[f64], dim: usize, m: usize, r: f64) -> f64 {
    (0..dim)
        .map(|d| v[d * m..(d + 1) * m].iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(2.0 / r))
        .sum()
}

/// Features of `sample` at locations drawn from `cfg.seed`.
pub fn build_test_features(sample: &SampleSet, model: &dyn ScoreModel, cfg: &RPhiSDConfig) -> Result<TestFeatures> {
    check_inputs(sample, model, cfg)?;
    let scores = sample.scores(model)?;
    let loc = draw_locations(sample, cfg);
    let (_, matrix) = feature_matrix(sample, &scores, &loc, cfg.r);
    TestFeatures::from_matrix(matrix, sample.len(), sample.dim(), cfg.m, cfg.r)
}

/// Plug-in covariance `N⁻¹ Σ ξ(x_n)ξ(x_n)ᵀ − μ̂μ̂ᵀ`, computed from centred rows.
pub fn estimate_covariance(tf: &TestFeatures) -> Result<DMatrix<f64>> {
    if tf.n < 2 {
        return Err(invalid("covariance estimate needs at least two points"));
    }
    let k = tf.width();
    let mu = tf.column_means();
    let centred = DMatrix::from_fn(tf.n, k, |i, j| tf.matrix[i * k + j] - mu[j]);
    let mut sigma = centred.tr_mul(&centred) / tf.n as f64;
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
    }
    Ok(sigma)
}

/// Lower Cholesky factor of `sigma + jitter·I`, escalating the jitter from
/// `1e-10` to `1e-6` times the mean diagonal over ten attempts.
fn jittered_cholesky(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = sigma.nrows();
    let scale = sigma.trace() / k as f64;
    for attempt in 0..10 {
        let jitter = 1e-10 * scale * 10f64.powf(4.0 * attempt as f64 / 9.0);
        let mut s = sigma.clone();
        for i in 0..k {
            s[(i, i)] += jitter;
        }
        if let Some(ch) = s.cholesky() {
            return Ok(ch.l());
        }
    }
    Err(Error::Numerical("covariance is not positive semidefinite even with jitter 1e-6".into()))
}

/// `n_sims` sorted draws of `Σ_d (Σ_m |ζ_dm|^r)^{2/r}` with `ζ ∼ N(0, Σ)`.
pub fn simulate_null(sigma: &DMatrix<f64>, r: f64, dim: usize, m: usize, n_sims: usize, seed: u64) -> Result<Vec<f64>> {
    let k = dim * m;
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: sigma.nrows() });
    }
    if n_sims < 100 {
        return Err(invalid(format!("need at least 100 null draws, got {n_sims}")));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("covariance has non-finite entries".into()));
    }
    if sigma.trace() <= 0.0 {
        return Ok(vec![0.0; n_sims]);
    }
    let l = jittered_cholesky(sigma)?;
    let mut draws: Vec<f64> = (0..n_sims)
        .into_par_iter()
        .with_min_len(PAR_CHUNK)
        .map(|i| {
            let mut rng = rng_stream(seed, i as u64);
            let g = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let zeta = &l * g;
            null_functional(zeta.as_slice(), dim, m, r)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    Ok(draws)
}

/// Which points the covariance is estimated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSource {
    /// The test sample itself.
    Sample,
    /// `n` fresh draws from the null.
    NullDraws { sampler: AltSampler, n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofOptions {
    pub alpha: f64,
    /// Level used for the decision; defaults to `alpha`.
    pub alpha_nominal: Option<f64>,
    pub n_sims: usize,
    pub covariance: CovarianceSource,
}

impl Default for GofOptions {
    fn default() -> Self {
        Self { alpha: 0.05, alpha_nominal: None, n_sims: DEFAULT_N_SIMS, covariance: CovarianceSource::Sample }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofTestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub alpha_nominal: f64,
    pub n_null_sims: usize,
    pub seed: u64,
    #[serde(skip)]
    pub null_draws: Vec<f64>,
}

/// Smoothed upper-tail p-value `(#{null ≥ stat} + 1)/(n + 1)`.
pub fn p_value(sorted_null: &[f64], statistic: f64) -> f64 {
    let below = sorted_null.partition_point(|&v| v < statistic);
    (sorted_null.len() - below + 1) as f64 / (sorted_null.len() + 1) as f64
}

pub fn run_test(sample: &SampleSet, model: &dyn ScoreModel, cfg: &RPhiSDConfig, opts: &GofOptions) -> Result<GofTestResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    let alpha_nominal = opts.alpha_nominal.unwrap_or(opts.alpha);
    check_inputs(sample, model, cfg)?;
    let scores = sample.scores(model)?;
    let loc = draw_locations(sample, cfg);
    let (_, matrix) = feature_matrix(sample, &scores, &loc, cfg.r);
    let tf = TestFeatures::from_matrix(matrix, sample.len(), sample.dim(), cfg.m, cfg.r)?;
    let sigma = match &opts.covariance {
        CovarianceSource::Sample => estimate_covariance(&tf)?,
        CovarianceSource::NullDraws { sampler, n } => {
            let fresh = sample_alternative(sampler, *n, derive_seed(cfg.seed, 2))?;
            let fresh_scores = fresh.scores(model)?;
            let (_, fm) = feature_matrix(&fresh, &fresh_scores, &loc, cfg.r);
            estimate_covariance(&TestFeatures::from_matrix(fm, fresh.len(), fresh.dim(), cfg.m, cfg.r)?)?
        }
    };
    let null = simulate_null(&sigma, cfg.r, tf.dim, tf.m, opts.n_sims, derive_seed(cfg.seed, 1))?;
    let statistic = tf.statistic();
    let threshold = sorted_quantile(&null, 1.0 - alpha_nominal);
    Ok(GofTestResult {
        statistic,
        threshold,
        p_value: p_value(&null, statistic),
        reject: statistic > threshold,
        alpha: opts.alpha,
        alpha_nominal,
        n_null_sims: opts.n_sims,
        seed: cfg.seed,
        null_draws: null,
    })
}

/// P-values of `n_cal` tests on datasets of size `n` drawn from the null.
pub fn null_p_values(
    model: &dyn ScoreModel,
    null_sampler: &AltSampler,
    recipe: &ConfigRecipe,
    n: usize,
    n_cal: usize,
    n_sims: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..n_cal)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let sample = sample_alternative(null_sampler, n, s)?;
            let cfg = recipe.build(&sample)?.with_seed(derive_seed(s, 1));
            let opts = GofOptions { n_sims, ..Default::default() };
            Ok(run_test(&sample, model, &cfg, &opts)?.p_value)
        })
        .collect()
}

/// `min(α, 5th percentile of n_cal null p-values)`.
pub fn calibrate_nominal_level(
    model: &dyn ScoreModel,
    null_sampler: &AltSampler,
    recipe: &ConfigRecipe,
    alpha: f64,
    n_cal: usize,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n_cal < 20 {
        return Err(invalid(format!("calibration needs at least 20 p-values, got {n_cal}")));
    }
    let mut p = null_p_values(model, null_sampler, recipe, n, n_cal, DEFAULT_N_SIMS, seed)?;
    p.sort_by(f64::total_cmp);
    Ok(alpha.min(sorted_quantile(&p, 0.05)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerRow {
    pub label: String,
    pub n: usize,
    pub trials: usize,
    pub alpha: f64,
    pub alpha_nominal: f64,
    pub rejection_rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerOptions {
    pub n: usize,
    pub trials: usize,
    pub alpha: f64,
    pub n_sims: usize,
    /// Number of null p-values for level calibration; `None` tests at `alpha`.
    pub n_cal: Option<usize>,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { n: 1000, trials: 200, alpha: 0.05, n_sims: DEFAULT_N_SIMS, n_cal: Some(DEFAULT_N_CAL), seed: 0 }
    }
}

/// Rejection rate of each configuration on datasets from `alt_sampler`.
pub fn power_experiment(
    null_model: &dyn ScoreModel,
    null_sampler: &AltSampler,
    alt_sampler: &AltSampler,
    recipes: &[(String, ConfigRecipe)],
    opts: &PowerOptions,
) -> Result<Vec<PowerRow>> {
    if opts.trials < 50 {
        return Err(invalid(format!("power experiment needs at least 50 trials, got {}", opts.trials)));
    }
    let mut rows = Vec::new();
    for (ci, (label, recipe)) in recipes.iter().enumerate() {
        let cseed = derive_seed(opts.seed, ci as u64);
        let alpha_nominal = match opts.n_cal {
            Some(n_cal) => {
                calibrate_nominal_level(null_model, null_sampler, recipe, opts.alpha, n_cal, opts.n, derive_seed(cseed, 0))?
            }
            None => opts.alpha,
        };
        let tseed = derive_seed(cseed, 1);
        let rejections: Vec<bool> = (0..opts.trials)
            .into_par_iter()
            .map(|t| {
                let s = derive_seed(tseed, t as u64);
                let sample = sample_alternative(alt_sampler, opts.n, s)?;
                let cfg = recipe.build(&sample)?.with_seed(derive_seed(s, 1));
                let g = GofOptions { alpha: opts.alpha, alpha_nominal: Some(alpha_nominal), n_sims: opts.n_sims, ..Default::default() };
                Ok(run_test(&sample, null_model, &cfg, &g)?.reject)
            })
            .collect::<Result<_>>()?;
        let rate = rejections.iter().filter(|&&r| r).count() as f64 / opts.trials as f64;
        rows.push(PowerRow {
            label: label.clone(),
            n: opts.n,
            trials: opts.trials,
            alpha: opts.alpha,
            alpha_nominal,
            rejection_rate: rate,
            se: (rate * (1.0 - rate) / opts.trials as f64).sqrt(),
        });
    }
    Ok(rows)
}
