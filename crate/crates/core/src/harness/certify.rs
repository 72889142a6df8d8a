//! Randomized certification of the exact solver against the grid oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::Neighborhood;
use crate::error::Result;
use crate::glm::{ModelParams, RecourseQuery};
use crate::solver::{minimax_oracle, optimal_robust_recourse, GridSpec, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub instances: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Allowed excess of the solver over the oracle.
    pub upper_slack: f64,
    /// Allowed shortfall of the solver below the oracle.
    pub lower_slack: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            instances: 216,
            seed: 0,
            dims: vec![1, 2, 3],
            alphas: vec![0.1, 0.5],
            lambdas: vec![0.05, 0.3, 1.0],
            upper_slack: 1e-2,
            lower_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyCase {
    pub dim: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub x0: Vec<f64>,
    pub theta0: ModelParams<f64>,
    pub solver_value: f64,
    pub oracle_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub cases: Vec<CertifyCase>,
    pub failures: usize,
    pub max_gap: f64,
}

/// Draws instances cycling through every (dimension, α, λ) combination:
/// weights, intercept in `[−1, 1]` and `x0` in `[−2, 2]`.
pub fn certification_instances(
    cfg: &CertifyConfig,
) -> Vec<(RecourseQuery<f64>, Neighborhood<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let combos: Vec<(usize, f64, f64)> = cfg
        .dims
        .iter()
        .flat_map(|&d| {
            cfg.alphas
                .iter()
                .flat_map(move |&a| cfg.lambdas.iter().map(move |&l| (d, a, l)))
        })
        .collect();
    (0..cfg.instances)
        .map(|k| {
            let (d, alpha, lambda) = combos[k % combos.len()];
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let b = rng.random_range(-1.0..=1.0);
            let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..=2.0)).collect();
            let q = RecourseQuery::new(x0, lambda).expect("finite instance");
            let n =
                Neighborhood::new(ModelParams::new(w, b).expect("finite"), alpha).expect("finite");
            (q, n)
        })
        .collect()
}

pub fn run_certification(cfg: &CertifyConfig) -> Result<CertifyReport> {
    let cases = certification_instances(cfg)
        .into_par_iter()
        .map(|(q, n)| {
            let plan = optimal_robust_recourse(&q, &n, &SolverConfig::default())?;
            let oracle = minimax_oracle(&q, &n, &GridSpec::default())?;
            let passed = plan.worst_case_total <= oracle.value + cfg.upper_slack
                && plan.worst_case_total >= oracle.value - cfg.lower_slack;
            Ok(CertifyCase {
                dim: q.dim(),
                alpha: n.alpha,
                lambda: q.lambda,
                x0: q.x0.clone(),
                theta0: n.base.clone(),
                solver_value: plan.worst_case_total,
                oracle_value: oracle.value,
                passed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let failures = cases.iter().filter(|c| !c.passed).count();
    let max_gap = cases
        .iter()
        .map(|c| c.solver_value - c.oracle_value)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CertifyReport {
        cases,
        failures,
        max_gap,
    })
}
