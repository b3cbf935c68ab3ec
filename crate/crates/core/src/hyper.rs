//! Default parameter selection: median heuristics and the derivation of every
//! estimator parameter from a target second-moment exponent `γ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::discrepancy::RPhiSDConfig;
use crate::error::{invalid, Error, Result};
use crate::features::FeatureSpec;
use crate::kernels::{Stationary, TiltFunction, SECH_SCALE};
use crate::models::SampleSet;
use crate::numeric::{median, rng_stream};
use crate::proposals::{mvt_proposal, sech_proposal};

pub const MEDIAN_SUBSAMPLE: usize = 1000;
pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_DF: f64 = 0.5;
pub const DEFAULT_M: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Untilted IMQ features, `r = 1`, multivariate t proposal.
    L1Imq,
    /// Tilted sech features, `r = 2`, product sech proposal.
    L2Sechexp,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "l1-imq" | "imq" => Ok(Family::L1Imq),
            "l2-sechexp" | "sechexp" | "sech" => Ok(Family::L2Sechexp),
            _ => Err(invalid(format!("unknown family '{s}' (expected l1-imq or l2-sechexp)"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::L1Imq => "l1-imq",
            Family::L2Sechexp => "l2-sechexp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `c = 4·med₂`, `df = 0.5`, `a⁻¹ = √(2π)·med₁`.
    #[default]
    Gof,
    /// `c = 1`, `a⁻¹ = √(2π)`.
    SampleQuality,
    /// `c = 10·med₂`, `df = 2.5`.
    Rbm,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gof" => Ok(Preset::Gof),
            "sample-quality" => Ok(Preset::SampleQuality),
            "rbm" => Ok(Preset::Rbm),
            _ => Err(invalid(format!("unknown preset '{s}' (expected gof, sample-quality or rbm)"))),
        }
    }
}

/// Explicit values that take precedence over the preset and the median
/// heuristics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub preset: Preset,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub df: Option<f64>,
    pub a: Option<f64>,
    pub a_prime: Option<f64>,
    pub r: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub subsample: Option<usize>,
}

/// Parameters specific to each family, kept in the config for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    L1Imq {
        c: f64,
        beta: f64,
        df: f64,
        c_prime: f64,
        beta_prime: f64,
        /// `β′ξr`, the exponent of the t density.
        proposal_exponent: f64,
        med2: Option<f64>,
    },
    L2Sechexp {
        a: f64,
        a_prime: f64,
        kappa: f64,
        med1: Option<f64>,
    },
}

/// A family plus overrides, turned into a configuration once a sample is
/// available (median heuristics depend on it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecipe {
    pub family: Family,
    pub gamma: f64,
    #[serde(default)]
    pub overrides: Overrides,
}

impl ConfigRecipe {
    pub fn new(family: Family, gamma: f64, overrides: Overrides) -> Self {
        Self { family, gamma, overrides }
    }

    pub fn build(&self, sample: &SampleSet) -> Result<RPhiSDConfig> {
        default_config(self.gamma, sample.dim(), self.family, Some(sample), &self.overrides)
    }
}

/// `α = γ/3`, `λ̄ = 1 − α/2`, `ξ = 4α/(2 + α)`.
pub fn schedule(gamma: f64) -> Result<(f64, f64, f64)> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    let alpha = gamma / 3.0;
    Ok((alpha, 1.0 - alpha / 2.0, 4.0 * alpha / (2.0 + alpha)))
}

/// Median of the nonzero pairwise `norm_order`-norm distances over a seeded
/// subsample of at most `subsample_size` points.
pub fn median_distance(sample: &SampleSet, norm_order: u32, subsample_size: usize, seed: u64) -> Result<f64> {
    if sample.len() < 2 {
        return Err(invalid("median heuristic needs at least two points"));
    }
    if norm_order != 1 && norm_order != 2 {
        return Err(invalid(format!("norm order must be 1 or 2, got {norm_order}")));
    }
    let idx: Vec<usize> = if sample.len() > subsample_size.max(2) {
        let mut v = index::sample(&mut rng_stream(seed, 0), sample.len(), subsample_size.max(2)).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..sample.len()).collect()
    };
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            let (x, y) = (sample.row(i), sample.row(j));
            let d = if norm_order == 1 {
                x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>()
            } else {
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            };
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(invalid("all subsampled points are identical; median distance is zero"));
    }
    Ok(median(&dists))
}

/// Builds a fully derived estimator configuration for `family`.
///
/// The sample is only consulted for median heuristics, and only when the
/// preset and overrides leave a bandwidth undetermined.
pub fn default_config(
    gamma: f64,
    dim: usize,
    family: Family,
    sample: Option<&SampleSet>,
    overrides: &Overrides,
) -> Result<RPhiSDConfig> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let (alpha, lambda_bar, xi) = schedule(gamma)?;
    if xi >= 1.0 {
        return Err(invalid(format!("gamma must be below 2 so that xi < 1, got {gamma}")));
    }
    let seed = overrides.seed.unwrap_or(0);
    let m = overrides.m.unwrap_or(DEFAULT_M);
    let subsample = overrides.subsample.unwrap_or(MEDIAN_SUBSAMPLE);
    let med = |order: u32| -> Result<f64> {
        let s = sample.ok_or_else(|| invalid("a sample is required for the median heuristic"))?;
        median_distance(s, order, subsample, seed)
    };
    let d = dim as f64;
    let zeros = vec![0.0; dim];

    let (r, xi_under, feature, proposal, params) = match family {
        Family::L1Imq => {
            let mut med2 = None;
            let c = match (overrides.c, overrides.preset) {
                (Some(c), _) => c,
                (None, Preset::SampleQuality) => 1.0,
                (None, preset) => {
                    let m2 = med(2)?;
                    med2 = Some(m2);
                    if preset == Preset::Rbm {
                        10.0 * m2
                    } else {
                        4.0 * m2
                    }
                }
            };
            let df = overrides.df.unwrap_or(if overrides.preset == Preset::Rbm { 2.5 } else { DEFAULT_DF });
            let beta = overrides.beta.unwrap_or(-0.5);
            if !(beta < 0.0) {
                return Err(invalid(format!("IMQ beta must be negative, got {beta}")));
            }
            if !(df > 0.0) {
                return Err(invalid(format!("df must be positive, got {df}")));
            }
            let c_prime = lambda_bar * c / 2.0;
            let xi_under = xi * d / (d + df);
            let beta_prime = -d / (2.0 * xi_under);
            // β′ = −D/(2ξ̲) makes r = −D/(2β′ξ̲) = 1 identically.
            let r = overrides.r.unwrap_or(1.0);
            let exponent = beta_prime * xi * r;
            let df_eff = -2.0 * exponent - d;
            if !(df_eff > 0.0) {
                return Err(invalid(format!("r = {r} leaves the t proposal with {df_eff} degrees of freedom")));
            }
            let feature = FeatureSpec::new(Stationary::Imq { c: c_prime, beta: beta_prime }, TiltFunction::unit())?;
            let proposal = mvt_proposal(df_eff, c_prime, zeros)?;
            let params = FamilyParams::L1Imq { c, beta, df, c_prime, beta_prime, proposal_exponent: exponent, med2 };
            (r, Some(xi_under), feature, proposal, params)
        }
        Family::L2Sechexp => {
            let mut med1 = None;
            let a = match (overrides.a, overrides.preset) {
                (Some(a), _) => a,
                (None, Preset::SampleQuality) => 1.0 / (2.0 * PI).sqrt(),
                (None, _) => {
                    let m1 = med(1)?;
                    med1 = Some(m1);
                    1.0 / ((2.0 * PI).sqrt() * m1)
                }
            };
            let a_prime = overrides.a_prime.unwrap_or(1.0);
            let r = overrides.r.unwrap_or(2.0);
            // ν ∝ F^{ξr} with F = Λ_{2a}; at r = 2 this is Λ_{4aξ}.
            let kappa = SECH_SCALE * 2.0 * a * xi * r;
            let feature = FeatureSpec::new(Stationary::Sech { a: 2.0 * a }, TiltFunction::sech_exp(a_prime, zeros.clone())?)?;
            let proposal = sech_proposal(kappa, zeros)?;
            (r, None, feature, proposal, FamilyParams::L2Sechexp { a, a_prime, kappa, med1 })
        }
    };

    let cfg = RPhiSDConfig {
        family: Some(family),
        r,
        m,
        seed,
        gamma,
        alpha,
        lambda_bar,
        xi,
        xi_under,
        feature,
        proposal,
        params: Some(params),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_alternative, AltSampler};

    #[test]
    fn schedule_at_quarter() {
        let (alpha, lambda_bar, xi) = schedule(0.25).unwrap();
        assert!((alpha - 1.0 / 12.0).abs() < 1e-15);
        assert!((lambda_bar - 23.0 / 24.0).abs() < 1e-15);
        assert!((xi - 0.16).abs() < 1e-15);
        assert!(schedule(0.0).is_err());
        assert!(default_config(2.0, 1, Family::L1Imq, None, &Overrides { c: Some(1.0), ..Default::default() }).is_err());
    }

    #[test]
    fn l1_imq_arithmetic() {
        let o = Overrides { c: Some(1.0), ..Default::default() };
        let cfg = default_config(0.25, 10, Family::L1Imq, None, &o).unwrap();
        assert!((cfg.xi_under.unwrap() - 16.0 / 105.0).abs() < 1e-12);
        assert_eq!(cfg.r, 1.0);
        let FamilyParams::L1Imq { beta_prime, proposal_exponent, c_prime, .. } = cfg.params.clone().unwrap() else {
            panic!()
        };
        assert!((beta_prime + 32.8125).abs() < 1e-12);
        assert!((proposal_exponent + 5.25).abs() < 1e-12);
        assert!((c_prime - 23.0 / 48.0).abs() < 1e-15);
        let crate::proposals::Proposal::Mvt { df, .. } = cfg.proposal else { panic!() };
        assert!((df - 0.5).abs() < 1e-12);
    }

    #[test]
    fn xi_exceeds_xi_under() {
        for dim in [1, 2, 5, 10, 20, 100] {
            for gamma in [0.05, 0.25, 0.5, 1.0, 1.99] {
                for df in [0.5, 1.0, 3.0] {
                    let o = Overrides { c: Some(1.0), df: Some(df), ..Default::default() };
                    let cfg = default_config(gamma, dim, Family::L1Imq, None, &o).unwrap();
                    let xu = cfg.xi_under.unwrap();
                    assert!(xu < cfg.xi && cfg.xi < 1.0);
                    let FamilyParams::L1Imq { beta_prime, .. } = cfg.params.clone().unwrap() else { panic!() };
                    assert!((-(dim as f64) / (2.0 * beta_prime * xu) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sechexp_defaults() {
        let o = Overrides { preset: Preset::SampleQuality, ..Default::default() };
        let cfg = default_config(0.25, 2, Family::L2Sechexp, None, &o).unwrap();
        assert_eq!(cfg.r, 2.0);
        let a = 1.0 / (2.0 * PI).sqrt();
        let FamilyParams::L2Sechexp { kappa, a_prime, .. } = cfg.params.clone().unwrap() else { panic!() };
        assert!((kappa - SECH_SCALE * 4.0 * a * 0.16).abs() < 1e-15);
        assert_eq!(a_prime, 1.0);
        assert_eq!(cfg.feature.stationary, Stationary::Sech { a: 2.0 * a });
    }

    #[test]
    fn presets_and_overrides() {
        let s = sample_alternative(&AltSampler::Gaussian { dim: 3 }, 300, 1).unwrap();
        let med2 = median_distance(&s, 2, MEDIAN_SUBSAMPLE, 0).unwrap();
        let gof = default_config(0.25, 3, Family::L1Imq, Some(&s), &Overrides::default()).unwrap();
        let rbm = default_config(0.25, 3, Family::L1Imq, Some(&s), &Overrides { preset: Preset::Rbm, ..Default::default() })
            .unwrap();
        let manual = default_config(
            0.25,
            3,
            Family::L1Imq,
            None,
            &Overrides { c: Some(10.0 * med2), df: Some(2.5), ..Default::default() },
        )
        .unwrap();
        let c_of = |cfg: &RPhiSDConfig| match cfg.params.clone().unwrap() {
            FamilyParams::L1Imq { c, df, .. } => (c, df),
            _ => unreachable!(),
        };
        assert_eq!(c_of(&gof), (4.0 * med2, 0.5));
        assert_eq!(c_of(&rbm), (10.0 * med2, 2.5));
        assert_eq!(rbm.feature, manual.feature);
        assert_eq!(rbm.proposal, manual.proposal);
        assert!(default_config(0.25, 3, Family::L1Imq, None, &Overrides::default()).is_err());
        assert!("l3-foo".parse::<Family>().is_err());
        assert_eq!("l2-sechexp".parse::<Family>().unwrap(), Family::L2Sechexp);
    }

    #[test]
    fn median_examples() {
        let two = SampleSet::new(vec![0.0, 0.0, 3.0, 0.0], 2).unwrap();
        assert_eq!(median_distance(&two, 2, 10, 0).unwrap(), 3.0);
        assert_eq!(median_distance(&two, 1, 10, 0).unwrap(), 3.0);
        let s = SampleSet::new(vec![0.0, 1.0, 1.5, 4.0, -2.0], 1).unwrap();
        let dup = s.concat(&s).unwrap();
        assert_eq!(median_distance(&s, 2, 100, 0).unwrap(), median_distance(&dup, 2, 100, 0).unwrap());
        let same = SampleSet::new(vec![1.0; 6], 2).unwrap();
        assert!(median_distance(&same, 2, 100, 0).is_err());
    }

    #[test]
    fn median_of_standard_normal() {
        // |X − X′| = √2·|N(0,1)|, whose median is √2·0.67449 ≈ 0.954.
        let s = sample_alternative(&AltSampler::Gaussian { dim: 1 }, 10_000, 3).unwrap();
        let m = median_distance(&s, 2, MEDIAN_SUBSAMPLE, 0).unwrap();
        assert!((m / (2f64.sqrt() * 0.674_489_750_196_081_7) - 1.0).abs() < 0.05, "{m}");
    }
}
