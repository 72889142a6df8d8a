//! Local linear approximation of a black-box scorer around one instance.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, RecourseError, Result};
use crate::glm::ModelParams;
use crate::models::BlackBoxScorer;
use crate::scalar::{all_finite, logit, Scalar};

/// Targets are logits clamped to this magnitude.
const LOGIT_CLAMP: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub n_samples: usize,
    /// Per-feature standard deviation of the perturbations.
    pub stddev: f64,
    /// Kernel width; `None` means `0.75·√d`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            n_samples: 1000,
            stddev: 1.0,
            kernel_width: None,
            ridge: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFit<T> {
    pub params: ModelParams<T>,
    /// Kernel-weighted mean squared residual in logit space.
    pub weighted_residual: T,
}

pub fn fit_local_linear<T: Scalar>(
    scorer: &dyn BlackBoxScorer<T>,
    x0: &[T],
    cfg: &SurrogateConfig,
) -> Result<ModelParams<T>> {
    fit_local_linear_report(scorer, x0, cfg).map(|f| f.params)
}

/// Weighted ridge regression of the scorer's logits on Gaussian samples
/// around `x0`. The intercept is not penalized.
pub fn fit_local_linear_report<T: Scalar>(
    scorer: &dyn BlackBoxScorer<T>,
    x0: &[T],
    cfg: &SurrogateConfig,
) -> Result<SurrogateFit<T>> {
    let d = x0.len();
    check_dim("surrogate input", scorer.dim(), d)?;
    if !all_finite(x0) {
        return Err(RecourseError::NonFinite("surrogate anchor".into()));
    }
    if cfg.n_samples < d + 1 {
        return Err(RecourseError::InvalidConfig(format!(
            "need at least {} samples, got {}",
            d + 1,
            cfg.n_samples
        )));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) || !(cfg.ridge >= 0.0) || !(cfg.stddev >= 0.0) {
        return Err(RecourseError::InvalidConfig(
            "kernel width must be positive; ridge and stddev non-negative".into(),
        ));
    }
    if cfg.stddev == 0.0 || !cfg.stddev.is_finite() {
        return Err(RecourseError::DegenerateDesign(
            "perturbation spread is zero; every sample equals the anchor".into(),
        ));
    }

    let noise =
        Normal::new(0.0, cfg.stddev).map_err(|e| RecourseError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offsets: Vec<Vec<f64>> = (0..cfg.n_samples)
        .map(|_| (0..d).map(|_| noise.sample(&mut rng)).collect())
        .collect();

    let targets: Vec<f64> = offsets
        .par_iter()
        .map(|u| {
            let z: Vec<T> = x0.iter().zip(u).map(|(&a, &e)| a + T::lit(e)).collect();
            let p = scorer.probability(&z)?.to_f64_lossy();
            Ok(logit(p).clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
        })
        .collect::<Result<_>>()?;
    let kernel: Vec<f64> = offsets
        .iter()
        .map(|u| (-u.iter().map(|e| e * e).sum::<f64>() / (width * width)).exp())
        .collect();

    // Columns: centred features, then the constant.
    let k = d + 1;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut row = vec![1.0; k];
    for ((u, &y), &w) in offsets.iter().zip(&targets).zip(&kernel) {
        row[..d].copy_from_slice(u);
        for a in 0..k {
            rhs[a] += w * row[a] * y;
            for b in 0..k {
                gram[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let total_weight = gram[(d, d)];
    if !(total_weight > 0.0) {
        return Err(RecourseError::DegenerateDesign(
            "all kernel weights vanished".into(),
        ));
    }
    for j in 0..d {
        let mean = gram[(j, d)] / total_weight;
        if gram[(j, j)] / total_weight - mean * mean <= 1e-12 {
            return Err(RecourseError::DegenerateDesign(format!(
                "feature {j} has no spread"
            )));
        }
        gram[(j, j)] += cfg.ridge;
    }
    let coef = gram
        .cholesky()
        .ok_or_else(|| RecourseError::DegenerateDesign("normal equations are singular".into()))?
        .solve(&rhs);

    let residual = offsets
        .iter()
        .zip(&targets)
        .zip(&kernel)
        .map(|((u, &y), &w)| {
            let pred = coef[d] + u.iter().zip(coef.iter()).map(|(a, c)| a * c).sum::<f64>();
            w * (y - pred) * (y - pred)
        })
        .sum::<f64>()
        / total_weight;

    let weights: Vec<T> = (0..d).map(|j| T::lit(coef[j])).collect();
    let shift: f64 = (0..d).map(|j| coef[j] * x0[j].to_f64_lossy()).sum();
    Ok(SurrogateFit {
        params: ModelParams::new(weights, T::lit(coef[d] - shift))?,
        weighted_residual: T::lit(residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DenseLayer, GlmScorer, MlpScorer, MlpWeights};

    struct Constant;

    impl BlackBoxScorer<f64> for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn probability(&self, _: &[f64]) -> Result<f64> {
            Ok(0.5)
        }
    }

    fn mlp() -> MlpScorer<f64> {
        MlpScorer::new(MlpWeights {
            layers: vec![
                DenseLayer {
                    w: vec![vec![1.5, -0.5], vec![-1.0, 2.0], vec![0.7, 0.7]],
                    b: vec![0.1, -0.2, 0.0],
                },
                DenseLayer {
                    w: vec![vec![1.0, -1.5, 2.0]],
                    b: vec![-0.3],
                },
            ],
        })
        .unwrap()
    }

    #[test]
    fn recovers_linear_model() {
        let theta = ModelParams::new(vec![0.8, -1.3], 0.4).unwrap();
        let cfg = SurrogateConfig {
            n_samples: 5000,
            ..SurrogateConfig::default()
        };
        let fit =
            fit_local_linear(&GlmScorer::logistic(theta.clone()), &[0.5, -0.2], &cfg).unwrap();
        assert!(fit.linf_distance(&theta) < 1e-2, "{fit:?}");
    }

    #[test]
    fn constant_scorer_gives_zero_model() {
        let fit =
            fit_local_linear(&Constant, &[1.0, 2.0, -3.0], &SurrogateConfig::default()).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() <= 1e-6));
        assert!(fit.intercept.unwrap().abs() <= 1e-6);
    }

    #[test]
    fn seeding_contract() {
        let net = mlp();
        let x0 = [0.2, -0.4];
        let cfg = SurrogateConfig::default();
        let a = fit_local_linear(&net, &x0, &cfg).unwrap();
        assert_eq!(a, fit_local_linear(&net, &x0, &cfg).unwrap());
        let b = fit_local_linear(&net, &x0, &SurrogateConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, b);
        assert!(a.linf_distance(&b) < 0.5);
    }

    #[test]
    fn linear_box_fits_better_than_network() {
        let x0 = [0.2, -0.4];
        let cfg = SurrogateConfig::default();
        let lin = GlmScorer::logistic(ModelParams::new(vec![1.0, -2.0], 0.5).unwrap());
        let r_lin = fit_local_linear_report(&lin, &x0, &cfg)
            .unwrap()
            .weighted_residual;
        let r_net = fit_local_linear_report(&mlp(), &x0, &cfg)
            .unwrap()
            .weighted_residual;
        assert!(r_lin <= r_net, "{r_lin} vs {r_net}");
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let cfg = SurrogateConfig {
            stddev: 0.0,
            ..SurrogateConfig::default()
        };
        assert!(matches!(
            fit_local_linear(&Constant, &[0.0; 3], &cfg),
            Err(RecourseError::DegenerateDesign(_))
        ));
        let few = SurrogateConfig {
            n_samples: 2,
            ..SurrogateConfig::default()
        };
        assert!(fit_local_linear(&Constant, &[0.0; 3], &few).is_err());
        assert!(fit_local_linear(&Constant, &[0.0; 2], &SurrogateConfig::default()).is_err());
    }
}
