//! The importance-sampled feature Stein discrepancy (RΦSD), its quadrature
//! reference in one and two dimensions, and second-moment diagnostics.

use std::cell::RefCell;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::features::{AppliedFeature, FeatureSpec, FeatureWork};
use crate::hyper::{schedule, Family, FamilyParams, DEFAULT_GAMMA};
use crate::kernels::Stationary;
use crate::models::{SampleSet, ScoreModel};
use crate::numeric::{derive_seed, exact_sum, log_sum_exp, rng_stream};
use crate::proposals::Proposal;
use crate::quadrature::{integrate_plane, integrate_real_line, QuadConfig};

/// Everything needed to evaluate an RΦSD. Feature tilt and proposal centres
/// are replaced by the evaluated sample's mean on every call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RPhiSDConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub lambda_bar: f64,
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_under: Option<f64>,
    pub feature: FeatureSpec,
    pub proposal: Proposal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<FamilyParams>,
}

impl RPhiSDConfig {
    /// A configuration built from an explicit feature and proposal.
    pub fn custom(feature: FeatureSpec, proposal: Proposal, r: f64, m: usize, seed: u64) -> Result<Self> {
        let (alpha, lambda_bar, xi) = schedule(DEFAULT_GAMMA)?;
        let cfg = Self {
            family: None,
            r,
            m,
            seed,
            gamma: DEFAULT_GAMMA,
            alpha,
            lambda_bar,
            xi,
            xi_under: None,
            feature,
            proposal,
            params: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.r) {
            return Err(invalid(format!("r must lie in [1, 2], got {}", self.r)));
        }
        if self.m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.feature.stationary.validate()
    }

    pub fn with_m(&self, m: usize) -> Self {
        Self { m, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    pub value: f64,
    pub per_dim: Vec<f64>,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub elapsed_s: f64,
    /// `N × (D·M)` row-major values of `(T_dΦ)(x_n, Z_m)/(M ν(Z_m))^{1/r}`,
    /// column `d·M + m`.
    #[serde(skip)]
    pub feature_matrix: Option<Vec<f64>>,
}

/// Frozen feature locations for one sample.
pub(crate) struct Locations {
    pub feature: FeatureSpec,
    /// `M × D` row-major.
    pub z: Vec<f64>,
    pub log_nu: Vec<f64>,
}

pub(crate) fn draw_locations(sample: &SampleSet, cfg: &RPhiSDConfig) -> Locations {
    let feature = cfg.feature.recentered(sample.mean());
    let proposal = cfg.proposal.recentered(sample.mean());
    let z = proposal.sample_with(cfg.m, &mut rng_stream(cfg.seed, 0));
    let log_nu = z.chunks_exact(sample.dim()).map(|zm| proposal.log_density_unchecked(zm)).collect();
    Locations { feature, z, log_nu }
}

fn applied_columns(sample: &SampleSet, scores: &[f64], feature: &FeatureSpec, z: &[f64]) -> Vec<AppliedFeature> {
    let dim = sample.dim();
    z.par_chunks_exact(dim)
        .map_init(
            || FeatureWork::new(sample.len(), dim),
            |work, zm| {
                work.fill(feature, sample, scores, zm);
                work.applied(dim)
            },
        )
        .collect()
}

/// `log((1/M) Σ_m exp(v_m))`, or −∞ when every term is zero.
fn log_mean_exp(v: &[f64]) -> f64 {
    log_sum_exp(v) - (v.len() as f64).ln()
}

/// Per-dimension `((1/M) Σ_m |a_dm|^r/ν(Z_m))^{2/r}` from scaled columns.
fn per_dim_terms(cols: &[AppliedFeature], log_nu: &[f64], r: f64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| {
            let logs: Vec<f64> = cols.iter().zip(log_nu).map(|(c, ln)| r * c.log_abs(d) - ln).collect();
            (2.0 / r * log_mean_exp(&logs)).exp()
        })
        .collect()
}

pub(crate) fn check_inputs(sample: &SampleSet, model: &dyn ScoreModel, cfg: &RPhiSDConfig) -> Result<()> {
    cfg.validate()?;
    check_dim(model.dim(), sample.dim())?;
    if cfg.proposal.dim() != sample.dim() && cfg.proposal.dim() != 0 {
        return Err(Error::DimensionMismatch { expected: sample.dim(), found: cfg.proposal.dim() });
    }
    Ok(())
}

/// `RΦSD = [Σ_d((1/M) Σ_m |(Q_N T_dΦ)(Z_m)|^r/ν(Z_m))^{2/r}]^{1/2}` with
/// `Z_m ∼ ν` drawn from `cfg.seed`.
pub fn rphisd(sample: &SampleSet, model: &dyn ScoreModel, cfg: &RPhiSDConfig) -> Result<DiscrepancyResult> {
    let start = Instant::now();
    check_inputs(sample, model, cfg)?;
    let scores = sample.scores(model)?;
    let loc = draw_locations(sample, cfg);
    let cols = applied_columns(sample, &scores, &loc.feature, &loc.z);
    let per_dim = per_dim_terms(&cols, &loc.log_nu, cfg.r, sample.dim());
    Ok(DiscrepancyResult {
        value: exact_sum(per_dim.iter().cloned()).sqrt(),
        per_dim,
        r: cfg.r,
        m: cfg.m,
        seed: cfg.seed,
        elapsed_s: start.elapsed().as_secs_f64(),
        feature_matrix: None,
    })
}

/// Per-point features `(T_dΦ)(x_n, Z_m)/(M ν(Z_m))^{1/r}` for `points`
/// (`N × (D·M)`, column `d·M + m`) at frozen locations, together with the
/// sample-averaged columns.
pub(crate) fn feature_matrix(
    points: &SampleSet,
    scores: &[f64],
    loc: &Locations,
    r: f64,
) -> (Vec<AppliedFeature>, Vec<f64>) {
    let (n, dim) = (points.len(), points.dim());
    let m = loc.log_nu.len();
    let log_m = (m as f64).ln();
    let blocks: Vec<(AppliedFeature, Vec<f64>)> = loc
        .z
        .par_chunks_exact(dim)
        .zip(loc.log_nu.par_iter())
        .map(|(zm, &ln)| {
            let mut work = FeatureWork::new(n, dim);
            work.fill(&loc.feature, points, scores, zm);
            let shift = (log_m + ln) / r;
            let mut block = vec![0.0; n * dim];
            for (i, (&l, f)) in work.logs().iter().zip(work.factors().chunks_exact(dim)).enumerate() {
                let w = (l - shift).exp();
                for d in 0..dim {
                    block[i * dim + d] = w * f[d];
                }
            }
            (work.applied(dim), block)
        })
        .collect();
    let mut matrix = vec![0.0; n * dim * m];
    for (mi, (_, block)) in blocks.iter().enumerate() {
        for i in 0..n {
            for d in 0..dim {
                matrix[i * dim * m + d * m + mi] = block[i * dim + d];
            }
        }
    }
    (blocks.into_iter().map(|(c, _)| c).collect(), matrix)
}

/// [`rphisd`] that also keeps the per-point feature matrix used by the
/// goodness-of-fit test.
pub fn rphisd_with_features(sample: &SampleSet, model: &dyn ScoreModel, cfg: &RPhiSDConfig) -> Result<DiscrepancyResult> {
    let start = Instant::now();
    check_inputs(sample, model, cfg)?;
    let scores = sample.scores(model)?;
    let loc = draw_locations(sample, cfg);
    let (cols, matrix) = feature_matrix(sample, &scores, &loc, cfg.r);
    let per_dim = per_dim_terms(&cols, &loc.log_nu, cfg.r, sample.dim());
    Ok(DiscrepancyResult {
        value: exact_sum(per_dim.iter().cloned()).sqrt(),
        per_dim,
        r: cfg.r,
        m: cfg.m,
        seed: cfg.seed,
        elapsed_s: start.elapsed().as_secs_f64(),
        feature_matrix: Some(matrix),
    })
}

fn length_scale(s: &Stationary) -> f64 {
    match *s {
        Stationary::Imq { c, .. } => c,
        Stationary::Sech { a } => 1.0 / (crate::kernels::SECH_SCALE * a),
    }
}

/// Per-dimension `∫ |(Q_N T_dΦ)(z)|^r dz` by adaptive quadrature (D ≤ 2).
pub fn phisd_quadrature_terms(
    sample: &SampleSet,
    model: &dyn ScoreModel,
    feature: &FeatureSpec,
    r: f64,
    quad: &QuadConfig,
) -> Result<Vec<f64>> {
    let dim = sample.dim();
    check_dim(model.dim(), dim)?;
    if dim > 2 {
        return Err(Error::Unsupported(format!("quadrature reference needs D <= 2, got {dim}")));
    }
    let feature = feature.recentered(sample.mean());
    let scores = sample.scores(model)?;
    let spread = (sample.rows().map(|x| x.iter().zip(sample.mean()).map(|(a, m)| (a - m).powi(2)).sum::<f64>()).sum::<f64>()
        / sample.len() as f64)
        .sqrt();
    let scale = length_scale(&feature.stationary) + spread;
    let work = RefCell::new(FeatureWork::new(sample.len(), dim));
    let integrand = |z: &[f64], d: usize| -> f64 {
        let mut w = work.borrow_mut();
        w.fill(&feature, sample, &scores, z);
        let a = w.applied(dim);
        (r * a.log_abs(d)).exp()
    };
    let mean = sample.mean();
    (0..dim)
        .map(|d| {
            let value = if dim == 1 {
                integrate_real_line(|z| integrand(&[z], d), mean[0], scale, quad)?.value
            } else {
                integrate_plane(|z1, z2| integrand(&[z1, z2], d), [mean[0], mean[1]], [scale; 2], quad)?.value
            };
            Ok(value)
        })
        .collect()
}

/// `ΦSD = [Σ_d (∫|(Q_N T_dΦ)(z)|^r dz)^{2/r}]^{1/2}` by quadrature (D ≤ 2).
pub fn phisd_quadrature(
    sample: &SampleSet,
    model: &dyn ScoreModel,
    feature: &FeatureSpec,
    r: f64,
    quad: &QuadConfig,
) -> Result<f64> {
    let terms = phisd_quadrature_terms(sample, model, feature, r, quad)?;
    Ok(terms.iter().map(|t| t.powf(2.0 / r)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondMoments {
    pub gamma: f64,
    pub n_draws: usize,
    /// `E[Y_d]` with `Y_d = |(Q_N T_dΦ)(Z)|^r/ν(Z)`.
    pub mean: Vec<f64>,
    pub second: Vec<f64>,
    /// `E[Y_d²]/E[Y_d]^{2−γ}`.
    pub ratio_gamma: Vec<f64>,
}

pub fn second_moment_diagnostic(
    sample: &SampleSet,
    model: &dyn ScoreModel,
    cfg: &RPhiSDConfig,
    n_draws: usize,
) -> Result<SecondMoments> {
    if n_draws < 1000 {
        return Err(invalid(format!("second-moment diagnostic needs at least 1000 draws, got {n_draws}")));
    }
    let cfg = cfg.with_m(n_draws);
    check_inputs(sample, model, &cfg)?;
    let scores = sample.scores(model)?;
    let loc = draw_locations(sample, &cfg);
    let cols = applied_columns(sample, &scores, &loc.feature, &loc.z);
    let dim = sample.dim();
    let (mut mean, mut second, mut ratio) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for d in 0..dim {
        let logy: Vec<f64> = cols.iter().zip(&loc.log_nu).map(|(c, ln)| cfg.r * c.log_abs(d) - ln).collect();
        let l1 = log_mean_exp(&logy);
        let l2 = log_mean_exp(&logy.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        mean[d] = l1.exp();
        second[d] = l2.exp();
        ratio[d] = (l2 - (2.0 - cfg.gamma) * l1).exp();
    }
    Ok(SecondMoments { gamma: cfg.gamma, n_draws, mean, second, ratio_gamma: ratio })
}

/// Smallest `m` with `m ≥ 2c·log(1/δ)/ε²·E[Y]^{−γ}`.
pub fn concentration_sample_size(c: f64, gamma: f64, eps: f64, delta: f64, mean: f64) -> usize {
    (2.0 * c * (1.0 / delta).ln() / (eps * eps) * mean.powf(-gamma)).ceil() as usize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub label: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub reference: f64,
    /// `Pr[RΦSD > ΦSD/4]` over trials.
    pub prob: f64,
    pub se: f64,
    pub trials: usize,
}

/// How the reference ΦSD is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Quadrature,
    /// RΦSD with this many importance draws (and the experiment seed).
    LargeM(usize),
}

pub const REFERENCE_M: usize = 1_000_000;

impl Reference {
    pub fn for_dim(dim: usize) -> Self {
        if dim <= 2 {
            Reference::Quadrature
        } else {
            Reference::LargeM(REFERENCE_M)
        }
    }
}

/// For each labelled configuration and each `M`, the fraction of `trials`
/// independent importance samples whose RΦSD exceeds a quarter of the
/// reference ΦSD of `sample`.
pub fn efficiency_experiment(
    sample: &SampleSet,
    model: &dyn ScoreModel,
    cfgs: &[(String, RPhiSDConfig)],
    m_grid: &[usize],
    trials: usize,
    reference: Reference,
    seed: u64,
) -> Result<Vec<EfficiencyRow>> {
    if trials == 0 || m_grid.is_empty() {
        return Err(invalid("efficiency experiment needs trials and a nonempty M grid"));
    }
    let mut rows = Vec::new();
    for (label, cfg) in cfgs {
        let phisd = match reference {
            Reference::Quadrature => phisd_quadrature(sample, model, &cfg.feature, cfg.r, &QuadConfig::default())?,
            Reference::LargeM(m) => rphisd(sample, model, &cfg.with_m(m).with_seed(seed))?.value,
        };
        for &m in m_grid {
            let values: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| rphisd(sample, model, &cfg.with_m(m).with_seed(derive_seed(seed, t as u64))).map(|r| r.value))
                .collect::<Result<_>>()?;
            let hits = values.iter().filter(|&&v| v > phisd / 4.0).count();
            let p = hits as f64 / trials as f64;
            rows.push(EfficiencyRow {
                label: label.clone(),
                m,
                reference: phisd,
                prob: p,
                se: (p * (1.0 - p) / trials as f64).sqrt(),
                trials,
            });
        }
    }
    Ok(rows)
}
