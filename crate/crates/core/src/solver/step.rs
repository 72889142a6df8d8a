//! One-dimensional subproblem: how far to move a single coordinate.
//!
//! Moving coordinate `i` by `t ≥ 0` in its improving direction raises the
//! score by `m·t` (with `m = |θ'_i|`) and costs `λ·c_i·t`, so the step solves
//!
//! ```text
//! min_{t ≥ 0}  loss(s0 + m·t) + λ·c_i·t
//! ```
//!
//! which is convex because the loss is convex in the score.

use crate::glm::LossKind;
use crate::scalar::Scalar;

use super::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    pub t: T,
    /// The optimum lies beyond the score cap and `t` stops there.
    pub saturated: bool,
}

impl<T: Scalar> StepOutcome<T> {
    fn zero() -> Self {
        StepOutcome {
            t: T::zero(),
            saturated: false,
        }
    }
}

/// Optimal step along one coordinate given the current score `s0`, the
/// adversary coefficient magnitude `slope` and the coordinate's cost weight.
pub fn solve_coordinate_step<T: Scalar>(
    loss: LossKind,
    lambda: T,
    s0: T,
    slope: T,
    cost_weight: T,
    cfg: &SolverConfig<T>,
) -> StepOutcome<T> {
    if !(slope > T::zero()) {
        return StepOutcome::zero();
    }
    if cfg.use_closed_form_logistic {
        closed_form(loss, lambda, s0, slope, cost_weight, cfg.score_cap)
    } else {
        bisection(loss, lambda, s0, slope, cost_weight, cfg)
    }
}

fn closed_form<T: Scalar>(
    loss: LossKind,
    lambda: T,
    s0: T,
    slope: T,
    cost_weight: T,
    cap: T,
) -> StepOutcome<T> {
    // Effective slope per unit of weighted cost.
    let a = slope / cost_weight;
    let (target, saturated) = match loss {
        // σ(s) = 1 − λ/a at the stationary point.
        LossKind::BinaryCrossEntropy => {
            if lambda >= a {
                return StepOutcome::zero();
            }
            if lambda == T::zero() {
                (cap, true)
            } else {
                let s = ((a - lambda) / lambda).ln();
                if s > cap {
                    (cap, true)
                } else {
                    (s, false)
                }
            }
        }
        // 2a(1 − s) = λ below the saturation point s = 1.
        LossKind::Squared => (T::one() - lambda / (T::lit(2.0) * a), false),
    };
    if s0 >= target {
        return StepOutcome::zero();
    }
    StepOutcome {
        t: (target - s0) / slope,
        saturated,
    }
}

fn bisection<T: Scalar>(
    loss: LossKind,
    lambda: T,
    s0: T,
    slope: T,
    cost_weight: T,
    cfg: &SolverConfig<T>,
) -> StepOutcome<T> {
    let penalty = lambda * cost_weight;
    let grad = |t: T| slope * loss.derivative(s0 + slope * t) + penalty;
    if grad(T::zero()) >= T::zero() {
        return StepOutcome::zero();
    }
    let t_cap = (cfg.score_cap - s0) / slope;
    if t_cap <= T::zero() {
        return StepOutcome::zero();
    }

    let mut lo = T::zero();
    let mut hi = T::one().min(t_cap);
    while grad(hi) < T::zero() {
        if hi >= t_cap {
            return StepOutcome {
                t: t_cap,
                saturated: true,
            };
        }
        lo = hi;
        hi = (hi * T::lit(2.0)).min(t_cap);
    }
    while hi - lo > cfg.tolerance * hi.max(T::one()) {
        let mid = (lo + hi) * T::lit(0.5);
        if grad(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    StepOutcome {
        t: (lo + hi) * T::lit(0.5),
        saturated: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(closed: bool) -> SolverConfig<f64> {
        SolverConfig {
            use_closed_form_logistic: closed,
            ..SolverConfig::default()
        }
    }

    /// Dense grid minimization of the 1-D objective, independent of both
    /// solver paths.
    fn grid_argmin(loss: LossKind, lambda: f64, s0: f64, m: f64, w: f64, hi: f64, h: f64) -> f64 {
        let n = (hi / h) as usize;
        (0..=n)
            .map(|k| k as f64 * h)
            .map(|t| (t, loss.value(s0 + m * t) + lambda * w * t))
            .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
            .0
    }

    #[test]
    fn logistic_closed_form_example() {
        let out =
            solve_coordinate_step(LossKind::BinaryCrossEntropy, 0.1, 0.0, 0.5, 1.0, &cfg(true));
        let expected = 2.0 * 4.0_f64.ln();
        assert!((out.t - expected).abs() < 1e-12);
        assert!(!out.saturated);
        let oracle = grid_argmin(LossKind::BinaryCrossEntropy, 0.1, 0.0, 0.5, 1.0, 6.0, 1e-4);
        assert!((oracle - expected).abs() < 2e-4);
    }

    #[test]
    fn large_lambda_gives_no_step() {
        for closed in [true, false] {
            let out = solve_coordinate_step(
                LossKind::BinaryCrossEntropy,
                1.0,
                0.0,
                0.2,
                1.0,
                &cfg(closed),
            );
            assert_eq!(out.t, 0.0);
        }
    }

    #[test]
    fn flat_coordinate_gives_no_step() {
        for loss in [LossKind::BinaryCrossEntropy, LossKind::Squared] {
            for closed in [true, false] {
                assert_eq!(
                    solve_coordinate_step(loss, 0.1, -1.0, 0.0, 1.0, &cfg(closed)).t,
                    0.0
                );
            }
        }
    }

    #[test]
    fn zero_lambda_saturates_at_cap() {
        for closed in [true, false] {
            let out = solve_coordinate_step(
                LossKind::BinaryCrossEntropy,
                0.0,
                0.0,
                0.5,
                1.0,
                &cfg(closed),
            );
            assert!(out.saturated);
            assert!((out.t - 60.0).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_cost_scales_the_threshold() {
        // a = 0.5 / 2 = 0.25 per unit cost; σ(s) = 1 − 0.1/0.25 → s = ln 1.5.
        let out =
            solve_coordinate_step(LossKind::BinaryCrossEntropy, 0.1, 0.0, 0.5, 2.0, &cfg(true));
        assert!((out.t - 1.5_f64.ln() / 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closed_form_matches_bisection(
            lambda in 0.01..1.0f64,
            s0 in -5.0..5.0f64,
            m in 0.05..3.0f64,
            w in 0.2..3.0f64,
            squared in any::<bool>(),
        ) {
            let loss = if squared { LossKind::Squared } else { LossKind::BinaryCrossEntropy };
            let a = solve_coordinate_step(loss, lambda, s0, m, w, &cfg(true));
            let b = solve_coordinate_step(loss, lambda, s0, m, w, &cfg(false));
            prop_assert_eq!(a.saturated, b.saturated);
            prop_assert!((a.t - b.t).abs() <= 1e-7 * a.t.max(1.0), "{} vs {}", a.t, b.t);
        }
    }
}
