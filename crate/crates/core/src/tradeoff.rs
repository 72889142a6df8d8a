//! Robustness/consistency metrics and the blended learner that trades them off.
//!
//! For `β ∈ (0, 1)` the learner minimizes
//! `β · max_{θ ∈ ball} J(x, θ) + (1 − β) · J(x, θ̂)` by greedy coordinate
//! moves drawn from a fixed step grid. The endpoints delegate to the exact
//! solvers, so `β = 1` never looks at the prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{worst_case_score, Neighborhood};
use crate::error::{check_dim, RecourseError, Result};
use crate::glm::{ModelParams, RecourseQuery};
use crate::models::{predict_label, BlackBoxScorer, GlmScorer};
use crate::scalar::Scalar;
use crate::solver::{
    consistent_recourse, optimal_robust_recourse, RecoursePlan, SolverConfig, TraceStep,
};

/// `max_{θ ∈ ball} J(x, θ)`.
pub fn worst_case_total<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    x: &[T],
) -> Result<T> {
    check_dim("recourse", q.dim(), x.len())?;
    check_dim("model", q.dim(), n.dim())?;
    Ok(worst_unchecked(q, n, x))
}

fn worst_unchecked<T: Scalar>(q: &RecourseQuery<T>, n: &Neighborhood<T>, x: &[T]) -> T {
    q.loss.value(worst_case_score(n, x)) + q.lambda * q.weighted_l1(x)
}

fn total_checked<T: Scalar>(q: &RecourseQuery<T>, x: &[T], theta: &ModelParams<T>) -> Result<T> {
    check_dim("recourse", q.dim(), x.len())?;
    check_dim("model", q.dim(), theta.dim())?;
    Ok(q.total_cost_unchecked(x, theta))
}

/// Excess worst-case total cost of `x_prime` over the robust optimum.
pub fn robustness<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    x_prime: &[T],
) -> Result<T> {
    let x_r = optimal_robust_recourse(q, n, &SolverConfig::default())?;
    Ok(worst_case_total(q, n, x_prime)? - x_r.worst_case_total)
}

/// Excess total cost of `x_prime` under `theta_hat` over the consistent optimum.
pub fn consistency<T: Scalar>(
    q: &RecourseQuery<T>,
    theta_hat: &ModelParams<T>,
    x_prime: &[T],
) -> Result<T> {
    let x_c = consistent_recourse(q, theta_hat, &SolverConfig::default())?;
    Ok(total_checked(q, x_prime, theta_hat)? - q.total_cost_unchecked(&x_c.x_prime, theta_hat))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffQuery<T> {
    pub query: RecourseQuery<T>,
    pub neighborhood: Neighborhood<T>,
    /// Predicted future model; must lie in the ball.
    pub prediction: ModelParams<T>,
    /// Weight on the worst case; `1` ignores the prediction.
    pub beta: T,
}

impl<T: Scalar> TradeoffQuery<T> {
    pub fn validate(&self) -> Result<()> {
        self.query.validate()?;
        check_dim("model", self.query.dim(), self.neighborhood.dim())?;
        check_dim("prediction", self.query.dim(), self.prediction.dim())?;
        self.prediction.validate()?;
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(RecourseError::InvalidConfig(format!(
                "beta {} outside [0, 1]",
                self.beta
            )));
        }
        if self.prediction.intercept.is_some() != self.neighborhood.base.intercept.is_some()
            || !self.neighborhood.contains(&self.prediction, T::lit(1e-9))
        {
            return Err(RecourseError::InvalidConfig(
                "prediction lies outside the model neighborhood".into(),
            ));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: T) -> Self {
        TradeoffQuery {
            beta,
            ..self.clone()
        }
    }

    /// `β · worst case + (1 − β) · cost under the prediction`.
    pub fn objective(&self, x: &[T]) -> Result<T> {
        check_dim("recourse", self.query.dim(), x.len())?;
        Ok(self.objective_unchecked(x))
    }

    fn objective_unchecked(&self, x: &[T]) -> T {
        let worst = worst_unchecked(&self.query, &self.neighborhood, x);
        let predicted = self.query.total_cost_unchecked(x, &self.prediction);
        self.beta * worst + (T::one() - self.beta) * predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct BlendConfig<T> {
    /// Candidate moves per coordinate.
    pub steps: Vec<T>,
    /// Cap on applied moves; `None` means `4d`.
    pub max_rounds: Option<usize>,
    /// Minimum decrease for a move to be applied.
    pub min_improvement: T,
    pub solver: SolverConfig<T>,
}

impl<T: Scalar> Default for BlendConfig<T> {
    fn default() -> Self {
        BlendConfig {
            steps: default_steps(),
            max_rounds: None,
            min_improvement: T::lit(1e-9),
            solver: SolverConfig::default(),
        }
    }
}

/// `±0.01 · 2^k` for `k = 0..=12`.
pub fn default_steps<T: Scalar>() -> Vec<T> {
    (0..=12)
        .flat_map(|k| {
            let h = 0.01 * f64::from(1u32 << k);
            [T::lit(h), T::lit(-h)]
        })
        .collect()
}

/// Recourse for the blended objective of `tq`.
pub fn blended_recourse<T: Scalar>(
    tq: &TradeoffQuery<T>,
    cfg: &BlendConfig<T>,
) -> Result<RecoursePlan<T>> {
    tq.validate()?;
    let (q, n) = (&tq.query, &tq.neighborhood);
    if tq.beta == T::one() {
        return optimal_robust_recourse(q, n, &cfg.solver);
    }
    if tq.beta == T::zero() {
        let plan = consistent_recourse(q, &tq.prediction, &cfg.solver)?;
        return rescore(q, n, plan);
    }
    let x_r = optimal_robust_recourse(q, n, &cfg.solver)?;
    let x_c = consistent_recourse(q, &tq.prediction, &cfg.solver)?;
    blend_from_anchors(tq, cfg, &[&x_r.x_prime, &x_c.x_prime])
}

fn rescore<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    plan: RecoursePlan<T>,
) -> Result<RecoursePlan<T>> {
    let mut out = RecoursePlan::evaluate(q, n, plan.x_prime)?;
    out.saturated = plan.saturated;
    out.trace = plan.trace;
    Ok(out)
}

fn blend_from_anchors<T: Scalar>(
    tq: &TradeoffQuery<T>,
    cfg: &BlendConfig<T>,
    anchors: &[&Vec<T>],
) -> Result<RecoursePlan<T>> {
    let q = &tq.query;
    let d = q.dim();
    let mut x = q.x0.clone();
    let mut value = tq.objective_unchecked(&x);
    for a in anchors {
        let v = tq.objective_unchecked(a);
        if v < value {
            value = v;
            x = a.to_vec();
        }
    }

    let rounds = cfg.max_rounds.unwrap_or(4 * d);
    let mut trace = Vec::new();
    let mut probe = x.clone();
    for _ in 0..rounds {
        let mut best: Option<(usize, T, T)> = None;
        for j in (0..d).filter(|&j| !q.immutable[j]) {
            let start = x[j];
            for &h in &cfg.steps {
                probe[j] = start + h;
                let v = tq.objective_unchecked(&probe);
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((j, h, v));
                }
            }
            probe[j] = start;
        }
        match best {
            Some((j, h, v)) if v < value - cfg.min_improvement => {
                x[j] += h;
                probe[j] = x[j];
                value = v;
                trace.push(TraceStep {
                    coordinate: j,
                    coefficient: T::zero(),
                    delta: h,
                    adversary_updated: false,
                });
            }
            _ => break,
        }
    }
    let mut plan = RecoursePlan::evaluate(q, &tq.neighborhood, x)?;
    plan.trace = trace;
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TradeoffPoint<T> {
    pub beta: T,
    pub robustness: T,
    pub consistency: T,
    pub l1_cost: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_under: Option<T>,
    pub x_prime: Vec<T>,
}

/// One point per `β`, sharing the two reference optima across the sweep.
pub fn pareto_frontier<T: Scalar>(
    base: &TradeoffQuery<T>,
    betas: &[T],
    cfg: &BlendConfig<T>,
) -> Result<Vec<TradeoffPoint<T>>> {
    base.validate()?;
    if betas.is_empty() {
        return Err(RecourseError::Empty("beta grid"));
    }
    let (q, n, pred) = (&base.query, &base.neighborhood, &base.prediction);
    let x_r = optimal_robust_recourse(q, n, &cfg.solver)?;
    let x_c = consistent_recourse(q, pred, &cfg.solver)?;
    let robust_ref = x_r.worst_case_total;
    let consistent_ref = q.total_cost_unchecked(&x_c.x_prime, pred);

    betas
        .iter()
        .map(|&beta| {
            let tq = base.with_beta(beta);
            tq.validate()?;
            let x = if beta == T::one() {
                x_r.x_prime.clone()
            } else if beta == T::zero() {
                x_c.x_prime.clone()
            } else {
                blend_from_anchors(&tq, cfg, &[&x_r.x_prime, &x_c.x_prime])?.x_prime
            };
            Ok(TradeoffPoint {
                beta,
                robustness: worst_unchecked(q, n, &x) - robust_ref,
                consistency: q.total_cost_unchecked(&x, pred) - consistent_ref,
                l1_cost: q.weighted_l1(&x),
                validity_under: Some(
                    T::from_u8(predict_label(&GlmScorer::logistic(pred.clone()), &x)?)
                        .expect("label"),
                ),
                x_prime: x,
            })
        })
        .collect()
}

/// Realized excess cost under the correct model when the learner was fed
/// `prediction_used` with trust `beta`.
pub fn smoothness<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    prediction_used: &ModelParams<T>,
    correct_prediction: &ModelParams<T>,
    beta: T,
    cfg: &BlendConfig<T>,
) -> Result<T> {
    let tq = TradeoffQuery {
        query: q.clone(),
        neighborhood: n.clone(),
        prediction: prediction_used.clone(),
        beta,
    };
    let learned = blended_recourse(&tq, cfg)?;
    let ideal = consistent_recourse(q, correct_prediction, &cfg.solver)?;
    Ok(total_checked(q, &learned.x_prime, correct_prediction)?
        - q.total_cost_unchecked(&ideal.x_prime, correct_prediction))
}

/// Share of `recourses` that `scorer` labels desirable.
pub fn validity<T: Scalar>(scorer: &dyn BlackBoxScorer<T>, recourses: &[Vec<T>]) -> Result<T> {
    if recourses.is_empty() {
        return Err(RecourseError::Empty("recourse list"));
    }
    let hits = recourses
        .par_iter()
        .map(|x| predict_label(scorer, x).map(usize::from))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(T::from_usize(hits).expect("count") / T::from_usize(recourses.len()).expect("count"))
}

/// [`validity`] under a logistic model.
pub fn validity_under<T: Scalar>(theta: &ModelParams<T>, recourses: &[Vec<T>]) -> Result<T> {
    validity(&GlmScorer::logistic(theta.clone()), recourses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::eval_total_cost;
    use proptest::prelude::*;

    fn d1() -> (RecourseQuery<f64>, Neighborhood<f64>) {
        let q = RecourseQuery::<f64>::new(vec![0.0], 0.1).unwrap();
        let n = Neighborhood::<f64>::new(ModelParams::without_intercept(vec![1.0]).unwrap(), 0.5)
            .unwrap();
        (q, n)
    }

    fn instance(
        x0: Vec<f64>,
        w: Vec<f64>,
        b: f64,
        alpha: f64,
        lambda: f64,
        shift: Vec<f64>,
        beta: f64,
    ) -> TradeoffQuery<f64> {
        let base = ModelParams::new(w, b).unwrap();
        let prediction = ModelParams::new(
            base.weights
                .iter()
                .zip(&shift)
                .map(|(a, s)| a + s)
                .collect(),
            b + shift.last().copied().unwrap_or(0.0),
        )
        .unwrap();
        TradeoffQuery {
            query: RecourseQuery::new(x0, lambda).unwrap(),
            neighborhood: Neighborhood::new(base, alpha).unwrap(),
            prediction,
            beta,
        }
    }

    #[test]
    fn robustness_examples() {
        let (q, n) = d1();
        let x_r = optimal_robust_recourse(&q, &n, &SolverConfig::default()).unwrap();
        assert!(robustness(&q, &n, &x_r.x_prime).unwrap().abs() < 1e-12);
        let at_x0 = robustness(&q, &n, &[0.0]).unwrap();
        assert!((at_x0 - 0.192_744_757_521_265_2).abs() < 1e-9, "{at_x0}");
    }

    #[test]
    fn consistency_examples() {
        let (q, n) = d1();
        let theta = n.base.clone();
        let x_c = consistent_recourse(&q, &theta, &SolverConfig::default()).unwrap();
        assert!(consistency(&q, &theta, &x_c.x_prime).unwrap().abs() < 1e-12);
        let x_r = optimal_robust_recourse(&q, &n, &SolverConfig::default()).unwrap();
        let c = consistency(&q, &theta, &x_r.x_prime).unwrap();
        let expected = eval_total_cost(&q, &x_r.x_prime, &theta).unwrap()
            - eval_total_cost(&q, &x_c.x_prime, &theta).unwrap();
        assert!(c > 0.0 && (c - expected).abs() < 1e-15);
    }

    #[test]
    fn endpoints_match_exact_solvers() {
        let tq = instance(
            vec![-0.4, 0.3],
            vec![0.8, -0.5],
            -0.2,
            0.5,
            0.1,
            vec![0.3, -0.2, 0.1],
            1.0,
        );
        let cfg = BlendConfig::default();
        let robust = optimal_robust_recourse(&tq.query, &tq.neighborhood, &cfg.solver).unwrap();
        let plan = blended_recourse(&tq, &cfg).unwrap();
        assert!((plan.worst_case_total - robust.worst_case_total).abs() < 1e-3);

        let tq0 = tq.with_beta(0.0);
        let plan = blended_recourse(&tq0, &cfg).unwrap();
        let exact = consistent_recourse(&tq.query, &tq.prediction, &cfg.solver).unwrap();
        let got = eval_total_cost(&tq.query, &plan.x_prime, &tq.prediction).unwrap();
        let want = eval_total_cost(&tq.query, &exact.x_prime, &tq.prediction).unwrap();
        assert!((got - want).abs() < 1e-3);
    }

    #[test]
    fn one_dimensional_blend_matches_dense_grid() {
        let (q, n) = d1();
        let tq = TradeoffQuery {
            query: q,
            neighborhood: n,
            prediction: ModelParams::without_intercept(vec![1.3]).unwrap(),
            beta: 0.5,
        };
        let plan = blended_recourse(&tq, &BlendConfig::default()).unwrap();
        let got = tq.objective(&plan.x_prime).unwrap();
        let oracle = (-100_000..=100_000)
            .map(|k| tq.objective(&[f64::from(k) * 1e-4]).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(
            got <= oracle + 1e-2 && got >= oracle - 1e-9,
            "{got} vs {oracle}"
        );
    }

    #[test]
    fn rejects_prediction_outside_ball() {
        let tq = instance(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            0.0,
            0.1,
            0.1,
            vec![0.5, 0.0, 0.0],
            0.5,
        );
        assert!(blended_recourse(&tq, &BlendConfig::default()).is_err());
        let tq = instance(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            0.0,
            0.1,
            0.1,
            vec![0.0, 0.0, 0.0],
            1.5,
        );
        assert!(blended_recourse(&tq, &BlendConfig::default()).is_err());
    }

    #[test]
    fn frontier_endpoints_and_monotonicity() {
        let tq = instance(
            vec![-1.0, 0.5],
            vec![0.9, 0.6],
            -0.3,
            0.5,
            0.1,
            vec![-0.4, 0.5, 0.2],
            0.5,
        );
        let betas: Vec<f64> = (0..=10).map(|k| f64::from(k) / 10.0).collect();
        let pts = pareto_frontier(&tq, &betas, &BlendConfig::default()).unwrap();
        assert!(pts[10].robustness <= 1e-3);
        assert!(pts[0].consistency <= 1e-3);
        for w in pts.windows(2) {
            // Higher β: lower robustness, higher consistency.
            assert!(w[1].robustness <= w[0].robustness + 1e-3);
            assert!(w[1].consistency + 1e-3 >= w[0].consistency);
        }
        assert!(pts
            .iter()
            .all(|p| p.robustness >= -1e-9 && p.consistency >= -1e-9));
    }

    #[test]
    fn smoothness_examples() {
        let tq = instance(
            vec![-1.0, 0.5],
            vec![0.9, 0.6],
            -0.3,
            0.5,
            0.2,
            vec![0.2, -0.1, 0.3],
            0.0,
        );
        let cfg = BlendConfig::default();
        let (q, n, star) = (&tq.query, &tq.neighborhood, &tq.prediction);
        assert!(smoothness(q, n, star, star, 0.0, &cfg).unwrap().abs() < 1e-9);
        let other = ModelParams::new(vec![0.5, 0.9], -0.1).unwrap();
        let at_one = smoothness(q, n, star, star, 1.0, &cfg).unwrap();
        assert_eq!(at_one, smoothness(q, n, &other, star, 1.0, &cfg).unwrap());
        assert!(smoothness(q, n, &other, star, 0.3, &cfg).unwrap() >= -1e-9);
    }

    #[test]
    fn validity_examples() {
        let theta = ModelParams::<f64>::new(vec![1.0], 0.0).unwrap();
        assert_eq!(
            validity_under(&theta, &[vec![10.0], vec![10.0]]).unwrap(),
            1.0
        );
        assert_eq!(validity_under(&theta, &[vec![-10.0]]).unwrap(), 0.0);
        assert_eq!(
            validity_under(&theta, &[vec![10.0], vec![-10.0]]).unwrap(),
            0.5
        );
        assert!(validity_under(&theta, &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn blend_never_worse_than_anchors(
            x0 in prop::collection::vec(-2.0f64..2.0, 2),
            w in prop::collection::vec(-1.0f64..1.0, 2),
            b in -1.0f64..1.0,
            alpha in 0.05f64..0.6,
            lambda in 0.05f64..1.0,
            u in prop::collection::vec(-1.0f64..1.0, 3),
            beta in 0.05f64..0.95,
        ) {
            let shift: Vec<f64> = u.iter().map(|v| v * alpha).collect();
            let tq = instance(x0.clone(), w, b, alpha, lambda, shift, beta);
            let cfg = BlendConfig::default();
            let plan = blended_recourse(&tq, &cfg).unwrap();
            let v = tq.objective(&plan.x_prime).unwrap();
            prop_assert!(v <= tq.objective(&x0).unwrap());
            let x_r = optimal_robust_recourse(&tq.query, &tq.neighborhood, &cfg.solver).unwrap();
            let x_c = consistent_recourse(&tq.query, &tq.prediction, &cfg.solver).unwrap();
            prop_assert!(v <= tq.objective(&x_r.x_prime).unwrap() + 1e-2);
            prop_assert!(v <= tq.objective(&x_c.x_prime).unwrap() + 1e-2);
            prop_assert!(robustness(&tq.query, &tq.neighborhood, &plan.x_prime).unwrap() >= -1e-9);
            prop_assert!(consistency(&tq.query, &tq.prediction, &plan.x_prime).unwrap() >= -1e-9);
        }
    }
}
