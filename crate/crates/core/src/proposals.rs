//! Importance densities over feature locations, with exact samplers.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, invalid, Result};
use crate::numeric::rng_stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Density proportional to `(1 + ||z − center||²/scale²)^{−(df+D)/2}`, a
    /// multivariate t with `df` degrees of freedom and scale `scale/√df`.
    Mvt { df: f64, scale: f64, center: Vec<f64> },
    /// Product of `(κ/π)·sech(κ(u − center_d))`.
    ProductSech { rate: f64, center: Vec<f64> },
}

pub fn mvt_proposal(df: f64, c_prime: f64, center: Vec<f64>) -> Result<Proposal> {
    if !(df > 0.0 && df.is_finite()) {
        return Err(invalid(format!("df must be positive, got {df}")));
    }
    if !(c_prime > 0.0 && c_prime.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {c_prime}")));
    }
    check_center(&center)?;
    Ok(Proposal::Mvt { df, scale: c_prime, center })
}

pub fn sech_proposal(kappa: f64, center: Vec<f64>) -> Result<Proposal> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid(format!("rate must be positive, got {kappa}")));
    }
    check_center(&center)?;
    Ok(Proposal::ProductSech { rate: kappa, center })
}

fn check_center(center: &[f64]) -> Result<()> {
    if center.is_empty() {
        return Err(invalid("proposal dimension must be at least 1"));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(invalid("proposal center must be finite"));
    }
    Ok(())
}

/// `(2/π)·atan(e^{κ(u − c)})`
pub fn sech_cdf(u: f64, kappa: f64, center: f64) -> f64 {
    2.0 / PI * (kappa * (u - center)).exp().atan()
}

/// Inverse of [`sech_cdf`]. Written as `2·atanh(tan(π(v − 1/2)/2))`, which is
/// `log tan(πv/2)` but exact at the median and accurate near it.
pub fn sech_inverse_cdf(v: f64, kappa: f64, center: f64) -> f64 {
    let v = v.clamp(1e-16, 1.0 - 1e-16);
    center + 2.0 * (0.5 * PI * (v - 0.5)).tan().atanh() / kappa
}

impl Proposal {
    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Proposal::Mvt { center, .. } | Proposal::ProductSech { center, .. } => center,
        }
    }

    pub fn recentered(&self, new_center: &[f64]) -> Self {
        let mut p = self.clone();
        match &mut p {
            Proposal::Mvt { center, .. } | Proposal::ProductSech { center, .. } => {
                *center = new_center.to_vec();
            }
        }
        p
    }

    /// Log of the normalizing constant, i.e. `log_density(center)`.
    pub fn log_normalizer(&self) -> f64 {
        let d = self.dim() as f64;
        match self {
            Proposal::Mvt { df, scale, .. } => {
                ln_gamma(0.5 * (df + d)) - ln_gamma(0.5 * df) - 0.5 * d * PI.ln() - d * scale.ln()
            }
            Proposal::ProductSech { rate, .. } => d * (rate / PI).ln(),
        }
    }

    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        Ok(self.log_density_unchecked(z))
    }

    pub(crate) fn log_density_unchecked(&self, z: &[f64]) -> f64 {
        let d = self.dim() as f64;
        match self {
            Proposal::Mvt { df, scale, center } => {
                let r2: f64 = z.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (scale * scale);
                self.log_normalizer() - 0.5 * (df + d) * r2.ln_1p()
            }
            Proposal::ProductSech { rate, center } => {
                self.log_normalizer() + z.iter().zip(center).map(|(a, c)| crate::numeric::log_sech(rate * (a - c))).sum::<f64>()
            }
        }
    }

    pub fn density(&self, z: &[f64]) -> Result<f64> {
        Ok(self.log_density(z)?.exp())
    }

    /// Draws `m` points, returned row-major.
    pub fn sample_with<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<f64> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(m * dim);
        match self {
            Proposal::Mvt { df, scale, center } => {
                let chi = ChiSquared::new(*df).expect("df validated at construction");
                for _ in 0..m {
                    // A shape below one lets the chi-square draw underflow to zero.
                    let w = loop {
                        let w: f64 = chi.sample(rng);
                        if w > 0.0 {
                            break w;
                        }
                    };
                    // The density above is a t with scale c'/√df, so c'·g/√χ² (not c'·g/√(χ²/df)).
                    let s = scale / w.sqrt();
                    for c in center {
                        let g: f64 = StandardNormal.sample(rng);
                        out.push(c + s * g);
                    }
                }
            }
            Proposal::ProductSech { rate, center } => {
                let unif = Uniform::new(0.0, 1.0).expect("valid range");
                for _ in 0..m {
                    for c in center {
                        out.push(sech_inverse_cdf(unif.sample(rng), *rate, *c));
                    }
                }
            }
        }
        out
    }

    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        self.sample_with(m, &mut rng_stream(seed, 0))
    }
}
