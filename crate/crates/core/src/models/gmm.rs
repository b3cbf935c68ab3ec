//! Posterior of the two-parameter Gaussian mixture used for SGLD tuning:
//! `θ1 ~ N(0, σ1²)`, `θ2 ~ N(0, σ2²)`,
//! `x_i ~ ½N(θ1, σx²) + ½N(θ1 + θ2, σx²)`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ScoreModel;
use crate::error::{invalid, Error, Result};
use crate::numeric::rng_stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmPosteriorParams {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub sigmax_sq: f64,
    /// Weight of the first mixture component; the second gets `1 - weight`.
    pub weight: f64,
    /// Parameters the synthetic dataset is drawn from.
    pub true_theta: [f64; 2],
    pub n_data: usize,
    pub data_seed: u64,
    /// Explicit data; when present `true_theta`, `n_data` and `data_seed` are ignored.
    pub data: Option<Vec<f64>>,
}

impl Default for GmmPosteriorParams {
    fn default() -> Self {
        Self {
            sigma1_sq: 10.0,
            sigma2_sq: 1.0,
            sigmax_sq: 2.0,
            weight: 0.5,
            true_theta: [0.0, 1.0],
            n_data: 100,
            data_seed: 0,
            data: None,
        }
    }
}

impl GmmPosteriorParams {
    /// The dataset: explicit data if given, otherwise `n_data` draws from the
    /// mixture at `true_theta`.
    pub fn dataset(&self) -> Vec<f64> {
        if let Some(d) = &self.data {
            return d.clone();
        }
        use rand::Rng;
        let mut rng = rng_stream(self.data_seed, 0);
        let sd = self.sigmax_sq.sqrt();
        (0..self.n_data)
            .map(|_| {
                let loc = if rng.random::<f64>() < self.weight {
                    self.true_theta[0]
                } else {
                    self.true_theta[0] + self.true_theta[1]
                };
                let g: f64 = StandardNormal.sample(&mut rng);
                loc + sd * g
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GmmPosterior {
    params: GmmPosteriorParams,
    data: Vec<f64>,
}

pub fn gmm_posterior_model(data: Vec<f64>, params: GmmPosteriorParams) -> Result<GmmPosterior> {
    if data.is_empty() {
        return Err(Error::EmptyInput("GMM posterior needs data"));
    }
    if !(params.sigma1_sq > 0.0 && params.sigma2_sq > 0.0 && params.sigmax_sq > 0.0) {
        return Err(invalid("GMM variances must be positive"));
    }
    if !(params.weight > 0.0 && params.weight < 1.0) {
        return Err(invalid("GMM mixture weight must lie in (0, 1)"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("GMM data must be finite"));
    }
    Ok(GmmPosterior { params, data })
}

impl GmmPosterior {
    pub fn from_params(params: GmmPosteriorParams) -> Result<Self> {
        gmm_posterior_model(params.dataset(), params)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn params(&self) -> &GmmPosteriorParams {
        &self.params
    }

    fn prior_grad(&self, theta: &[f64], out: &mut [f64]) {
        out[0] = -theta[0] / self.params.sigma1_sq;
        out[1] = -theta[1] / self.params.sigma2_sq;
    }

    /// Gradient of the log-likelihood of datum `x`.
    fn datum_grad(&self, theta: &[f64], x: f64) -> [f64; 2] {
        let s2 = self.params.sigmax_sq;
        let u1 = x - theta[0];
        let u2 = x - theta[0] - theta[1];
        // Responsibilities via a log-domain softmax.
        let l1 = self.params.weight.ln() - 0.5 * u1 * u1 / s2;
        let l2 = (1.0 - self.params.weight).ln() - 0.5 * u2 * u2 / s2;
        let m = l1.max(l2);
        let e1 = (l1 - m).exp();
        let e2 = (l2 - m).exp();
        let r1 = e1 / (e1 + e2);
        let r2 = e2 / (e1 + e2);
        [(r1 * u1 + r2 * u2) / s2, r2 * u2 / s2]
    }

    fn datum_log_lik(&self, theta: &[f64], x: f64) -> f64 {
        let s2 = self.params.sigmax_sq;
        let u1 = x - theta[0];
        let u2 = x - theta[0] - theta[1];
        let l1 = self.params.weight.ln() - 0.5 * u1 * u1 / s2;
        let l2 = (1.0 - self.params.weight).ln() - 0.5 * u2 * u2 / s2;
        let m = l1.max(l2);
        m + ((l1 - m).exp() + (l2 - m).exp()).ln() - 0.5 * (2.0 * std::f64::consts::PI * s2).ln()
    }
}

impl ScoreModel for GmmPosterior {
    fn dim(&self) -> usize {
        2
    }

    fn score(&self, theta: &[f64], out: &mut [f64]) {
        self.prior_grad(theta, out);
        let (mut g0, mut g1) = (0.0, 0.0);
        for &x in &self.data {
            let g = self.datum_grad(theta, x);
            g0 += g[0];
            g1 += g[1];
        }
        out[0] += g0;
        out[1] += g1;
    }

    fn log_density(&self, theta: &[f64]) -> Option<f64> {
        let prior = -0.5 * theta[0] * theta[0] / self.params.sigma1_sq
            - 0.5 * theta[1] * theta[1] / self.params.sigma2_sq;
        Some(prior + self.data.iter().map(|&x| self.datum_log_lik(theta, x)).sum::<f64>())
    }

    fn data_len(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn stochastic_score(&self, theta: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("minibatch"));
        }
        self.prior_grad(theta, out);
        let scale = self.data.len() as f64 / batch.len() as f64;
        let (mut g0, mut g1) = (0.0, 0.0);
        for &i in batch {
            let x = *self
                .data
                .get(i)
                .ok_or_else(|| invalid(format!("minibatch index {i} out of range")))?;
            let g = self.datum_grad(theta, x);
            g0 += g[0];
            g1 += g[1];
        }
        out[0] += scale * g0;
        out[1] += scale * g1;
        Ok(())
    }

    fn label(&self) -> &str {
        "gmm_posterior"
    }
}
