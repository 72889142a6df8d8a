//! Exact robust recourse for generalized linear models.
//!
//! The adversary's response depends on the recourse only through the signs
//! of its coordinates, so the space of recourses splits into orthants with a
//! fixed worst-case model each. Within an orthant the problem is a weighted
//! L1-regularized problem against a fixed linear score, where the best move
//! is along the coordinate with the largest `|θ'_j| / c_j`. The solver walks
//! from `x0` greedily: it moves the best coordinate as far as its 1-D
//! subproblem asks, stopping at zero whenever the move would change the
//! orthant, updating the adversary there and continuing.
//!
//! Each coordinate crosses zero at most once, so the main loop runs at most
//! `d + 1` times.

mod oracle;
mod step;

pub use oracle::{minimax_oracle, GridSpec, OracleResult, MAX_ORACLE_DIM};
pub use step::{solve_coordinate_step, StepOutcome};

use serde::{Deserialize, Serialize};

use crate::adversary::{best_response_unchecked, Neighborhood};
use crate::error::{check_dim, RecourseError, Result};
use crate::glm::{ModelParams, RecourseQuery, Sign};
use crate::scalar::{all_finite, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct SolverConfig<T> {
    /// Relative bisection tolerance on the step length.
    pub tolerance: T,
    /// Upper bound on coordinate updates; `None` means `2d + 2`.
    pub max_passes: Option<usize>,
    pub use_closed_form_logistic: bool,
    /// Highest score a step will aim for when the loss has no finite
    /// minimizer (zero regularization).
    pub score_cap: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            tolerance: T::lit(1e-10),
            max_passes: None,
            use_closed_form_logistic: true,
            score_cap: T::lit(30.0),
        }
    }
}

/// One coordinate update performed by the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceStep<T> {
    pub coordinate: usize,
    /// Adversarial coefficient `θ'_i` when the coordinate was selected.
    pub coefficient: T,
    pub delta: T,
    /// The step stopped at zero and the adversary switched orthants.
    pub adversary_updated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RecoursePlan<T> {
    pub x_prime: Vec<T>,
    /// Weighted L1 distance from `x0`.
    pub l1_cost: T,
    /// `max_{θ ∈ ball} J(x', θ)`.
    pub worst_case_total: T,
    pub saturated: bool,
    pub trace: Vec<TraceStep<T>>,
}

impl<T: Scalar> RecoursePlan<T> {
    /// Plan for an arbitrary point, scored against `n`.
    pub fn evaluate(q: &RecourseQuery<T>, n: &Neighborhood<T>, x_prime: Vec<T>) -> Result<Self> {
        check_dim("recourse", q.dim(), x_prime.len())?;
        check_dim("model", q.dim(), n.dim())?;
        let adversary = best_response_unchecked(n, &x_prime);
        Ok(RecoursePlan {
            l1_cost: q.weighted_l1(&x_prime),
            worst_case_total: q.total_cost_unchecked(&x_prime, &adversary),
            x_prime,
            saturated: false,
            trace: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_inputs<T: Scalar>(q: &RecourseQuery<T>, n: &Neighborhood<T>) -> Result<()> {
    q.validate()?;
    check_dim("model", q.dim(), n.dim())?;
    n.base.validate()?;
    if !(n.alpha.is_finite() && n.alpha >= T::zero()) {
        return Err(RecourseError::NonFinite("alpha".into()));
    }
    if !all_finite(&q.cost.weights) {
        return Err(RecourseError::NonFinite("cost weights".into()));
    }
    Ok(())
}

/// Recourse minimizing the worst-case total cost over the ball `n`.
///
/// Features flagged immutable are never moved; the adversary still responds
/// to their fixed sign. Optimality is proved only for the case without
/// immutable features.
pub fn optimal_robust_recourse<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    cfg: &SolverConfig<T>,
) -> Result<RecoursePlan<T>> {
    check_inputs(q, n)?;
    let d = q.dim();
    let alpha = n.alpha;
    let base = &n.base.weights;

    let mut x = q.x0.clone();
    // Orthant the adversary currently responds to, per coordinate.
    let mut region = vec![Sign::Positive; d];
    let mut adv = vec![T::zero(); d];
    let mut active = vec![false; d];

    for i in 0..d {
        if q.x0[i] != T::zero() {
            region[i] = Sign::of(q.x0[i]);
            active[i] = !q.immutable[i];
        } else if base[i].abs() > alpha && !q.immutable[i] {
            // Starting at zero, the only orthant worth entering is the one
            // the base weight points to.
            region[i] = Sign::of(base[i]);
            active[i] = true;
        }
        adv[i] = base[i] - alpha * region[i].value::<T>();
    }
    let adv_intercept = n.base.intercept.map_or(T::zero(), |b| b - alpha);

    let max_passes = cfg.max_passes.unwrap_or(2 * d + 2);
    let mut trace = Vec::new();
    let mut saturated = false;

    for _ in 0..max_passes {
        let Some(i) = select_coordinate(&adv, &q.cost.weights, &active) else {
            break;
        };
        let slope = adv[i].abs();
        let direction = Sign::of(adv[i]);
        let s0 = x
            .iter()
            .zip(&adv)
            .fold(adv_intercept, |acc, (&xi, &wi)| acc + xi * wi);
        let step = solve_coordinate_step(q.loss, q.lambda, s0, slope, q.cost.weights[i], cfg);
        saturated |= step.saturated;
        if step.t == T::zero() {
            break;
        }

        let toward_zero = direction != region[i];
        if !toward_zero || step.t <= x[i].abs() {
            let delta = direction.value::<T>() * step.t;
            x[i] += delta;
            trace.push(TraceStep {
                coordinate: i,
                coefficient: adv[i],
                delta,
                adversary_updated: false,
            });
            break;
        }

        // The move would leave the orthant: stop at zero and let the
        // adversary respond to the opposite sign.
        let delta = -x[i];
        let coefficient = adv[i];
        x[i] = T::zero();
        let flipped = region[i].flip();
        let next = base[i] - alpha * flipped.value::<T>();
        let keeps_direction = next != T::zero() && Sign::of(next) == direction;
        if keeps_direction {
            region[i] = flipped;
            adv[i] = next;
        } else {
            active[i] = false;
        }
        trace.push(TraceStep {
            coordinate: i,
            coefficient,
            delta,
            adversary_updated: keeps_direction,
        });
    }

    let adversary = best_response_unchecked(n, &x);
    Ok(RecoursePlan {
        l1_cost: q.weighted_l1(&x),
        worst_case_total: q.total_cost_unchecked(&x, &adversary),
        x_prime: x,
        saturated,
        trace,
    })
}

/// Active coordinate with the largest `|θ'_j| / c_j`, lowest index on ties.
fn select_coordinate<T: Scalar>(adv: &[T], cost: &[T], active: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (j, ((&w, &c), &on)) in adv.iter().zip(cost).zip(active).enumerate() {
        if !on {
            continue;
        }
        let ratio = w.abs() / c;
        if best.is_none_or(|(_, r)| ratio > r) {
            best = Some((j, ratio));
        }
    }
    best.map(|(j, _)| j)
}

/// Recourse minimizing `J(·, θ̂)` for a single predicted model.
pub fn consistent_recourse<T: Scalar>(
    q: &RecourseQuery<T>,
    theta_hat: &ModelParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<RecoursePlan<T>> {
    let n = Neighborhood::new(theta_hat.clone(), T::zero())?;
    optimal_robust_recourse(q, &n, cfg)
}
