//! Stochastic gradient Langevin dynamics and step-size selection by
//! discrepancy.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::rphisd;
use crate::error::{check_dim, invalid, Error, Result};
use crate::hyper::ConfigRecipe;
use crate::kernels::{ksd_squared, BaseKernel};
use crate::models::{SampleSet, ScoreModel};
use crate::numeric::{derive_seed, median, rng_stream};

pub const DEFAULT_MINIBATCH: usize = 30;
pub const DEFAULT_REPLICATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    pub step: f64,
    /// Iterations in total, burn-in included.
    pub n_iters: usize,
    pub burn_in: usize,
    /// Minibatch size; `None` uses the full score.
    pub minibatch: Option<usize>,
    pub init: Vec<f64>,
    pub seed: u64,
}

impl SgldConfig {
    /// `n_keep` retained states after discarding a 10% burn-in.
    pub fn retained(step: f64, n_keep: usize, init: Vec<f64>, seed: u64) -> Self {
        let burn_in = n_keep.div_ceil(9);
        Self { step, n_iters: n_keep + burn_in, burn_in, minibatch: Some(DEFAULT_MINIBATCH), init, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {}", self.step)));
        }
        if self.n_iters <= self.burn_in {
            return Err(invalid("n_iters must exceed burn_in"));
        }
        if self.minibatch == Some(0) {
            return Err(invalid("minibatch must be at least 1"));
        }
        Ok(())
    }
}

/// Runs `x ← x + (ε/2)ĝ(x) + N(0, εI)` without a Metropolis correction and
/// returns the states after burn-in.
pub fn run_sgld(model: &dyn ScoreModel, cfg: &SgldConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let dim = model.dim();
    check_dim(dim, cfg.init.len())?;
    let batch = match (cfg.minibatch, model.data_len()) {
        (Some(b), Some(n)) if b > n => return Err(invalid(format!("minibatch {b} exceeds dataset size {n}"))),
        (Some(b), Some(n)) => Some((b, n)),
        (Some(_), None) => None,
        (None, _) => None,
    };
    let mut rng = rng_stream(cfg.seed, 0);
    let mut x = cfg.init.clone();
    let mut g = vec![0.0; dim];
    let noise = cfg.step.sqrt();
    let mut out = Vec::with_capacity((cfg.n_iters - cfg.burn_in) * dim);
    for it in 0..cfg.n_iters {
        match batch {
            Some((b, n)) => {
                let idx = index::sample(&mut rng, n, b).into_vec();
                model.stochastic_score(&x, &idx, &mut g)?;
            }
            None => model.score(&x, &mut g),
        }
        for d in 0..dim {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[d] += 0.5 * cfg.step * g[d] + noise * e;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("SGLD diverged at iteration {it} with step {}", cfg.step)));
        }
        if it >= cfg.burn_in {
            out.extend_from_slice(&x);
        }
    }
    SampleSet::new(out, dim)
}

/// A sample-quality measure; smaller is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Rphisd { label: String, recipe: ConfigRecipe },
    Ksd { label: String, kernel: BaseKernel },
}

impl Measure {
    pub fn label(&self) -> &str {
        match self {
            Measure::Rphisd { label, .. } | Measure::Ksd { label, .. } => label,
        }
    }

    pub fn evaluate(&self, sample: &SampleSet, model: &dyn ScoreModel, seed: u64) -> Result<f64> {
        match self {
            Measure::Rphisd { recipe, .. } => Ok(rphisd(sample, model, &recipe.build(sample)?.with_seed(seed))?.value),
            Measure::Ksd { kernel, .. } => Ok(ksd_squared(sample, model, kernel)?.max(0.0).sqrt()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionRow {
    pub step: f64,
    pub measure: String,
    pub values: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
    /// `(measure, selected step)`, one per measure.
    pub selected: Vec<(String, f64)>,
}

/// Index of the smallest value; ties go to the first.
pub fn argmin(values: &[f64]) -> Option<usize> {
    values.iter().enumerate().fold(None, |best, (i, &v)| match best {
        Some((_, b)) if b <= v => best,
        _ => Some((i, v)),
    })
    .map(|(i, _)| i)
}

/// Runs `replicates` chains per step (sharing seeds across steps) and picks,
/// for each measure, the step with the smallest median discrepancy.
pub fn select_step_size(
    step_grid: &[f64],
    model: &dyn ScoreModel,
    base: &SgldConfig,
    measures: &[Measure],
    replicates: usize,
) -> Result<SelectionTable> {
    if step_grid.is_empty() || measures.is_empty() || replicates == 0 {
        return Err(invalid("step selection needs steps, measures and at least one replicate"));
    }
    let jobs: Vec<(usize, usize)> = (0..step_grid.len()).flat_map(|s| (0..replicates).map(move |r| (s, r))).collect();
    let values: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let seed = derive_seed(base.seed, r as u64);
            let cfg = SgldConfig { step: step_grid[s], seed, ..base.clone() };
            let chain = run_sgld(model, &cfg)?;
            measures.iter().map(|m| m.evaluate(&chain, model, derive_seed(seed, 1))).collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut selected = Vec::new();
    for (mi, measure) in measures.iter().enumerate() {
        let mut medians = Vec::with_capacity(step_grid.len());
        for (s, &step) in step_grid.iter().enumerate() {
            let vals: Vec<f64> = (0..replicates).map(|r| values[s * replicates + r][mi]).collect();
            let med = median(&vals);
            medians.push(med);
            rows.push(SelectionRow { step, measure: measure.label().to_string(), values: vals, median: med });
        }
        let best = argmin(&medians).expect("nonempty grid");
        selected.push((measure.label().to_string(), step_grid[best]));
    }
    Ok(SelectionTable { rows, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::{Family, Overrides, Preset};
    use crate::models::{flat_model, gaussian_model, GmmPosterior, GmmPosteriorParams};

    #[test]
    fn flat_target_is_a_random_walk() {
        let model = flat_model(2).unwrap();
        let eps = 0.3;
        let cfg = SgldConfig { step: eps, n_iters: 100_001, burn_in: 0, minibatch: None, init: vec![0.0; 2], seed: 1 };
        let chain = run_sgld(&model, &cfg).unwrap();
        let rows: Vec<&[f64]> = chain.rows().collect();
        let incs: Vec<f64> = rows.windows(2).map(|w| w[1][0] - w[0][0]).collect();
        let n = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / n;
        let var = incs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / eps - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "{var}");
    }

    #[test]
    fn reproducible() {
        let model = GmmPosterior::from_params(GmmPosteriorParams::default()).unwrap();
        let cfg = SgldConfig::retained(0.01, 200, vec![0.0, 0.0], 4);
        assert_eq!(run_sgld(&model, &cfg).unwrap(), run_sgld(&model, &cfg).unwrap());
        assert_eq!(run_sgld(&model, &cfg).unwrap().len(), 200);
    }

    #[test]
    fn gaussian_ar1_variance() {
        // x' = (1 − ε/2)x + √ε·g has stationary variance ε/(1 − (1 − ε/2)²) = 1/(1 − ε/4).
        let model = gaussian_model(1).unwrap();
        let eps = 0.01;
        let cfg = SgldConfig { step: eps, n_iters: 1_000_000, burn_in: 10_000, minibatch: None, init: vec![0.0], seed: 2 };
        let chain = run_sgld(&model, &cfg).unwrap();
        let x = chain.as_slice();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let expect = eps / (1.0 - (1.0 - eps / 2.0).powi(2));
        assert!((expect - 1.0 / (1.0 - eps / 4.0)).abs() < 1e-12);
        assert!((var / expect - 1.0).abs() < 0.1, "{var} vs {expect}");
    }

    #[test]
    fn stable_on_gmm_grid() {
        let model = GmmPosterior::from_params(GmmPosteriorParams::default()).unwrap();
        for step in [0.05, 0.01, 0.005, 0.001] {
            let chain = run_sgld(&model, &SgldConfig::retained(step, 1000, vec![0.0, 0.0], 7)).unwrap();
            assert!(chain.as_slice().iter().all(|v| v.is_finite()));
        }
        let mut bad = SgldConfig::retained(0.01, 10, vec![0.0, 0.0], 7);
        bad.minibatch = Some(1000);
        assert!(run_sgld(&model, &bad).is_err());
    }

    #[test]
    fn argmin_and_scale_invariance() {
        let v = [3.0, 1.0, 2.0, 1.0];
        assert_eq!(argmin(&v), Some(1));
        let scaled: Vec<f64> = v.iter().map(|x| x * 7.5).collect();
        assert_eq!(argmin(&scaled), argmin(&v));
        assert_eq!(argmin(&[]), None);
    }

    #[test]
    fn single_step_grid() {
        let model = GmmPosterior::from_params(GmmPosteriorParams::default()).unwrap();
        let measures = vec![
            Measure::Rphisd {
                label: "imq".into(),
                recipe: ConfigRecipe::new(Family::L1Imq, 0.25, Overrides { preset: Preset::SampleQuality, ..Default::default() }),
            },
            Measure::Ksd { label: "ksd".into(), kernel: BaseKernel::imq(1.0, -0.5).unwrap() },
        ];
        let base = SgldConfig::retained(0.01, 100, vec![0.0, 0.0], 1);
        let t = select_step_size(&[0.02], &model, &base, &measures, 2).unwrap();
        assert_eq!(t.selected, vec![("imq".to_string(), 0.02), ("ksd".to_string(), 0.02)]);
        let t2 = select_step_size(&[0.02], &model, &base, &measures, 2).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), serde_json::to_string(&t2).unwrap());
    }
}
