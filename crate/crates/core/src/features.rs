//! Feature functions `Φ(x, z) = A(x − m_N)·F(x − z)` and their Langevin
//! Stein transforms `(T_dΦ)(x, z) = b_d(x)Φ(x, z) + ∂_{x_d}Φ(x, z)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::kernels::{Stationary, TiltFunction};
use crate::models::{SampleSet, ScoreModel};
use crate::numeric::ExactSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub stationary: Stationary,
    pub tilt: TiltFunction,
}

impl FeatureSpec {
    pub fn new(stationary: Stationary, tilt: TiltFunction) -> Result<Self> {
        stationary.validate()?;
        Ok(Self { stationary, tilt })
    }

    pub fn recentered(&self, center: &[f64]) -> Self {
        Self { stationary: self.stationary, tilt: self.tilt.recentered(center) }
    }

    /// `log Φ(x, z)`.
    pub fn log_eval(&self, x: &[f64], z: &[f64], u: &mut [f64]) -> f64 {
        for d in 0..x.len() {
            u[d] = x[d] - z[d];
        }
        self.tilt.log_value(x) + self.stationary.log_eval(u)
    }

    /// Writes `b_d(x) + ∂_d log A(x) + ∂_d log F(x − z)` into `out`; `u` must
    /// hold `x − z`. Multiplying by `Φ(x, z)` gives `(T_dΦ)(x, z)`.
    pub fn stein_factor(&self, x: &[f64], score: &[f64], u: &[f64], out: &mut [f64]) {
        self.stationary.grad_log(u, out);
        for d in 0..x.len() {
            out[d] += score[d] + self.tilt.grad_log_at(x, d);
        }
    }
}

pub fn feature_eval(f: &FeatureSpec, x: &[f64], z: &[f64]) -> f64 {
    let mut u = vec![0.0; x.len()];
    f.log_eval(x, z, &mut u).exp()
}

pub fn stein_feature_eval(f: &FeatureSpec, model: &dyn ScoreModel, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_dim(model.dim(), x.len())?;
    check_dim(x.len(), z.len())?;
    let dim = x.len();
    let mut u = vec![0.0; dim];
    let phi = f.log_eval(x, z, &mut u).exp();
    let score = model.score_vec(x);
    let mut out = vec![0.0; dim];
    f.stein_factor(x, &score, &u, &mut out);
    for o in out.iter_mut() {
        *o *= phi;
    }
    Ok(out)
}

/// Sample-averaged Stein features at one location, kept in scaled form so
/// that very small feature values do not underflow.
#[derive(Debug, Clone)]
pub struct AppliedFeature {
    /// `max_n log Φ(x_n, z)`
    pub log_scale: f64,
    /// `(1/N) Σ_n exp(log Φ(x_n, z) − log_scale)·factor_d(x_n, z)`
    pub scaled: Vec<f64>,
}

impl AppliedFeature {
    pub fn values(&self) -> Vec<f64> {
        let s = self.log_scale.exp();
        self.scaled.iter().map(|v| v * s).collect()
    }

    /// `log |(Q_N T_dΦ)(z)|`.
    pub fn log_abs(&self, d: usize) -> f64 {
        self.log_scale + self.scaled[d].abs().ln()
    }
}

/// Per-point buffers for one feature location.
pub(crate) struct FeatureWork {
    logs: Vec<f64>,
    factors: Vec<f64>,
    u: Vec<f64>,
}

impl FeatureWork {
    pub(crate) fn new(n: usize, dim: usize) -> Self {
        Self { logs: vec![0.0; n], factors: vec![0.0; n * dim], u: vec![0.0; dim] }
    }

    /// Fills `log Φ(x_n, z)` and the Stein factors for every sample point.
    pub(crate) fn fill(&mut self, f: &FeatureSpec, sample: &SampleSet, scores: &[f64], z: &[f64]) {
        let dim = sample.dim();
        for (i, x) in sample.rows().enumerate() {
            self.logs[i] = f.log_eval(x, z, &mut self.u);
            f.stein_factor(x, &scores[i * dim..(i + 1) * dim], &self.u, &mut self.factors[i * dim..(i + 1) * dim]);
        }
    }

    pub(crate) fn logs(&self) -> &[f64] {
        &self.logs
    }

    pub(crate) fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub(crate) fn applied(&self, dim: usize) -> AppliedFeature {
        let n = self.logs.len();
        let log_scale = self.logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sums = vec![ExactSum::new(); dim];
        for i in 0..n {
            let w = (self.logs[i] - log_scale).exp();
            for d in 0..dim {
                sums[d].add(w * self.factors[i * dim + d]);
            }
        }
        AppliedFeature { log_scale, scaled: sums.iter().map(|s| s.value() / n as f64).collect() }
    }
}

/// `(Q_N T_dΦ)(z)` for the sample as given (the tilt centre is used as stored).
pub fn applied_feature_scaled(
    sample: &SampleSet,
    model: &dyn ScoreModel,
    f: &FeatureSpec,
    z: &[f64],
) -> Result<AppliedFeature> {
    check_dim(model.dim(), sample.dim())?;
    check_dim(sample.dim(), z.len())?;
    let scores = sample.scores(model)?;
    let mut work = FeatureWork::new(sample.len(), sample.dim());
    work.fill(f, sample, &scores, z);
    Ok(work.applied(sample.dim()))
}

pub fn applied_feature(sample: &SampleSet, model: &dyn ScoreModel, f: &FeatureSpec, z: &[f64]) -> Result<Vec<f64>> {
    Ok(applied_feature_scaled(sample, model, f, z)?.values())
}
