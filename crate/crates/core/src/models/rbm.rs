//! Gauss–Bernoulli restricted Boltzmann machine with binary hiddens
//! marginalized out:
//! `log p(x) = bᵀx − ||x||²/2 + Σ_h softplus((Bᵀx + c)_h) + const`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ScoreModel;
use crate::error::{check_dim, invalid, Result};
use crate::numeric::{logistic, rng_stream, softplus};

/// How the randomly generated RBM (and its perturbation) is parameterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmParams {
    pub dx: usize,
    pub dh: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for RbmParams {
    fn default() -> Self {
        Self { dx: 50, dh: 40, seed: 0, burn_in: 2000, thin: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussBernoulliRbm {
    /// `dx × dh`, row-major.
    weights: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

pub fn rbm_model(weights: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<GaussBernoulliRbm> {
    let (dx, dh) = (b.len(), c.len());
    if dx == 0 || dh == 0 {
        return Err(invalid("RBM needs at least one visible and one hidden unit"));
    }
    check_dim(dx * dh, weights.len())?;
    if weights.iter().chain(&b).chain(&c).any(|v| !v.is_finite()) {
        return Err(invalid("RBM parameters must be finite"));
    }
    Ok(GaussBernoulliRbm { weights, b, c })
}

impl GaussBernoulliRbm {
    /// Weights uniform on {−1, +1}, biases standard normal.
    pub fn random(params: &RbmParams) -> Result<Self> {
        let mut rng = rng_stream(params.seed, 0);
        let weights = (0..params.dx * params.dh)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let b = (0..params.dx).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c = (0..params.dh).map(|_| StandardNormal.sample(&mut rng)).collect();
        rbm_model(weights, b, c)
    }

    pub fn dx(&self) -> usize {
        self.b.len()
    }

    pub fn dh(&self) -> usize {
        self.c.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Copy with independent `N(0, sigma_per²)` noise added to every weight.
    pub fn perturbed(&self, sigma_per: f64, seed: u64) -> Result<Self> {
        if !(sigma_per >= 0.0) {
            return Err(invalid("perturbation scale must be nonnegative"));
        }
        if sigma_per == 0.0 {
            return Ok(self.clone());
        }
        let noise = Normal::new(0.0, sigma_per).map_err(|e| invalid(e.to_string()))?;
        let mut rng = rng_stream(seed, 1);
        let weights = self.weights.iter().map(|w| w + noise.sample(&mut rng)).collect();
        rbm_model(weights, self.b.clone(), self.c.clone())
    }

    fn hidden_preactivation(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
        let dh = self.dh();
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.weights[i * dh..(i + 1) * dh];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * xi;
            }
        }
    }

    /// Block Gibbs chain: `h | x ~ Bernoulli(σ(Bᵀx + c))`, `x | h ~ N(Bh + b, I)`.
    pub fn gibbs_sample(&self, n: usize, burn_in: usize, thin: usize, seed: u64) -> Vec<f64> {
        let (dx, dh) = (self.dx(), self.dh());
        let mut rng = rng_stream(seed, 2);
        let mut x: Vec<f64> = (0..dx).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut h = vec![0.0; dh];
        let mut pre = vec![0.0; dh];
        let mut out = Vec::with_capacity(n * dx);
        let thin = thin.max(1);
        let total = burn_in + n * thin;
        for step in 1..=total {
            self.hidden_preactivation(&x, &mut pre);
            for (hj, &p) in h.iter_mut().zip(&pre) {
                *hj = if rng.random::<f64>() < logistic(p) { 1.0 } else { 0.0 };
            }
            for i in 0..dx {
                let row = &self.weights[i * dh..(i + 1) * dh];
                let mean = self.b[i] + row.iter().zip(&h).map(|(w, hj)| w * hj).sum::<f64>();
                let g: f64 = StandardNormal.sample(&mut rng);
                x[i] = mean + g;
            }
            if step > burn_in && (step - burn_in) % thin == 0 {
                out.extend_from_slice(&x);
            }
        }
        out
    }
}

impl ScoreModel for GaussBernoulliRbm {
    fn dim(&self) -> usize {
        self.dx()
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        let dh = self.dh();
        let mut pre = vec![0.0; dh];
        self.hidden_preactivation(x, &mut pre);
        for p in pre.iter_mut() {
            *p = logistic(*p);
        }
        for i in 0..self.dx() {
            let row = &self.weights[i * dh..(i + 1) * dh];
            out[i] = self.b[i] - x[i] + row.iter().zip(&pre).map(|(w, s)| w * s).sum::<f64>();
        }
    }

    fn log_density(&self, x: &[f64]) -> Option<f64> {
        let mut pre = vec![0.0; self.dh()];
        self.hidden_preactivation(x, &mut pre);
        let lin: f64 = self.b.iter().zip(x).map(|(b, v)| b * v).sum();
        let quad: f64 = x.iter().map(|v| v * v).sum();
        Some(lin - 0.5 * quad + pre.iter().map(|&t| softplus(t)).sum::<f64>())
    }

    fn label(&self) -> &str {
        "rbm"
    }
}
