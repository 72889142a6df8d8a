//! Gradient baseline: alternate the exact adversary with subgradient steps.

use serde::{Deserialize, Serialize};

use crate::adversary::{best_response_unchecked, Neighborhood};
use crate::error::{check_dim, RecourseError, Result};
use crate::glm::{ModelParams, RecourseQuery};
use crate::scalar::Scalar;
use crate::solver::RecoursePlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct RoarConfig<T> {
    pub learning_rate: T,
    pub max_iters: usize,
    /// Stop once the largest coordinate move falls below this.
    pub tolerance: T,
    /// Unused by the deterministic update; kept so configs round-trip.
    pub seed: u64,
}

impl<T: Scalar> Default for RoarConfig<T> {
    fn default() -> Self {
        RoarConfig {
            learning_rate: T::lit(0.1),
            max_iters: 2000,
            tolerance: T::lit(1e-7),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoarOutcome<T> {
    pub plan: RecoursePlan<T>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn roar_recourse<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    cfg: &RoarConfig<T>,
) -> Result<RecoursePlan<T>> {
    roar_recourse_observed(q, n, cfg, |_, _| {}).map(|o| o.plan)
}

/// Runs the baseline and reports each iterate with the adversary chosen for it.
pub fn roar_recourse_observed<T: Scalar, F: FnMut(&[T], &ModelParams<T>)>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    cfg: &RoarConfig<T>,
    mut observe: F,
) -> Result<RoarOutcome<T>> {
    q.validate()?;
    check_dim("model", q.dim(), n.dim())?;
    if !(cfg.learning_rate > T::zero() && cfg.learning_rate.is_finite()) {
        return Err(RecourseError::InvalidConfig(
            "learning rate must be positive".into(),
        ));
    }

    let mut x = q.x0.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let theta = best_response_unchecked(n, &x);
        observe(&x, &theta);
        let slope = q.loss.derivative(theta.score_unchecked(&x));
        let mut largest = T::zero();
        for i in (0..x.len()).filter(|&i| !q.immutable[i]) {
            let g_loss = slope * theta.weights[i];
            let reg = q.lambda * q.cost.weights[i];
            let diff = x[i] - q.x0[i];
            // Minimum-norm element of the subdifferential.
            let g = if diff != T::zero() {
                g_loss + reg * diff.signum()
            } else if g_loss.abs() <= reg {
                T::zero()
            } else {
                g_loss - reg * g_loss.signum()
            };
            let mut next = x[i] - cfg.learning_rate * g;
            // A step that overshoots the anchor stops on it.
            if diff != T::zero() && (next - q.x0[i]) * diff < T::zero() {
                next = q.x0[i];
            }
            largest = largest.max((next - x[i]).abs());
            x[i] = next;
        }
        if largest < cfg.tolerance {
            converged = true;
            break;
        }
    }
    log::trace!("baseline finished after {iterations} iterations (converged: {converged})");
    Ok(RoarOutcome {
        plan: RecoursePlan::evaluate(q, n, x)?,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::corner_oracle;
    use crate::solver::{optimal_robust_recourse, SolverConfig};
    use crate::tradeoff::robustness;
    use proptest::prelude::*;

    #[test]
    fn heavy_regularization_returns_x0() {
        let q = RecourseQuery::<f64>::new(vec![0.3, -0.7], 2.0).unwrap();
        let n =
            Neighborhood::<f64>::new(ModelParams::new(vec![1.2, -0.8], 0.1).unwrap(), 0.3).unwrap();
        let out = roar_recourse_observed(&q, &n, &RoarConfig::default(), |_, _| {}).unwrap();
        assert_eq!(out.plan.x_prime, q.x0);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn one_dimensional_instance_reaches_robust_optimum() {
        let q = RecourseQuery::<f64>::new(vec![0.0], 0.1).unwrap();
        let n = Neighborhood::<f64>::new(ModelParams::without_intercept(vec![1.0]).unwrap(), 0.5)
            .unwrap();
        let plan = roar_recourse(&q, &n, &RoarConfig::default()).unwrap();
        let exact = optimal_robust_recourse(&q, &n, &SolverConfig::default()).unwrap();
        assert!(
            (plan.x_prime[0] - exact.x_prime[0]).abs() < 1e-2,
            "{:?}",
            plan.x_prime
        );
    }

    #[test]
    fn iterates_use_exact_adversary() {
        let q = RecourseQuery::<f64>::new(vec![-0.5, 0.4, 1.0], 0.1).unwrap();
        let n =
            Neighborhood::<f64>::new(ModelParams::new(vec![0.7, -0.3, 0.2], -0.4).unwrap(), 0.25)
                .unwrap();
        let mut seen = 0;
        roar_recourse_observed(&q, &n, &RoarConfig::default(), |x, theta| {
            let corner = corner_oracle(&n, x).unwrap();
            assert!((theta.score(x).unwrap() - corner.score(x).unwrap()).abs() < 1e-12);
            seen += 1;
        })
        .unwrap();
        assert!(seen > 1);
    }

    #[test]
    fn immutable_features_stay() {
        let q = RecourseQuery::<f64>::new(vec![-1.0, -1.0], 0.05)
            .unwrap()
            .with_immutable(vec![false, true])
            .unwrap();
        let n =
            Neighborhood::<f64>::new(ModelParams::new(vec![1.0, 1.0], 0.0).unwrap(), 0.1).unwrap();
        let plan = roar_recourse(&q, &n, &RoarConfig::default()).unwrap();
        assert_eq!(plan.x_prime[1], -1.0);
        assert!(plan.x_prime[0] > -1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn never_beats_the_exact_solver(
            x0 in prop::collection::vec(-2.0f64..2.0, 1..4),
            seed_w in prop::collection::vec(-1.0f64..1.0, 3),
            b in -1.0f64..1.0,
            alpha in 0.0f64..0.6,
            lambda in 0.05f64..1.0,
        ) {
            let d = x0.len();
            let q = RecourseQuery::new(x0, lambda).unwrap();
            let n = Neighborhood::new(ModelParams::new(seed_w[..d].to_vec(), b).unwrap(), alpha).unwrap();
            let plan = roar_recourse(&q, &n, &RoarConfig::default()).unwrap();
            prop_assert!(robustness(&q, &n, &plan.x_prime).unwrap() >= -1e-9);
        }
    }
}
