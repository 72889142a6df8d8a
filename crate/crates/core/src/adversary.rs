//! Adversarial model responses inside an L∞ ball of parameters.
//!
//! For a fixed recourse the total cost depends on the model only through the
//! score, and the loss decreases in the score, so the adversary minimizes
//! `x·θ + b` over the box. That minimum is separable: every coordinate moves
//! by `α` against the sign of the matching feature, and the intercept (whose
//! feature is the constant `+1`) moves down by `α`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, RecourseError, Result};
use crate::glm::{sign, LossKind, ModelParams};
use crate::scalar::Scalar;

/// Largest number of perturbable coordinates (weights plus intercept)
/// [`corner_oracle`] will enumerate.
pub const MAX_CORNER_COORDS: usize = 20;

/// The set of parameters within `alpha` of `base` in L∞ norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Neighborhood<T> {
    pub base: ModelParams<T>,
    pub alpha: T,
}

impl<T: Scalar> Neighborhood<T> {
    pub fn new(base: ModelParams<T>, alpha: T) -> Result<Self> {
        base.validate()?;
        if !(alpha.is_finite() && alpha >= T::zero()) {
            return Err(RecourseError::InvalidConfig(format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        Ok(Neighborhood { base, alpha })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Whether `theta` lies in the ball, allowing `slack` on every coordinate.
    pub fn contains(&self, theta: &ModelParams<T>, slack: T) -> bool {
        theta.dim() == self.dim()
            && theta.intercept.is_some() == self.base.intercept.is_some()
            && theta.linf_distance(&self.base) <= self.alpha + slack
    }

    /// Clamps every coordinate of `theta` into the ball.
    pub fn project(&self, theta: &ModelParams<T>) -> ModelParams<T> {
        let clamp = |v: T, c: T| v.max(c - self.alpha).min(c + self.alpha);
        ModelParams {
            weights: theta
                .weights
                .iter()
                .zip(&self.base.weights)
                .map(|(&v, &c)| clamp(v, c))
                .collect(),
            intercept: self
                .base
                .intercept
                .map(|c| clamp(theta.intercept.unwrap_or(c), c)),
        }
    }
}

/// Closed-form worst case for recourse `x`: `θ0 − α·sign(x)` with
/// `sign(0) = +1`, and intercept `b0 − α`.
pub fn best_response<T: Scalar>(n: &Neighborhood<T>, x: &[T]) -> Result<ModelParams<T>> {
    check_dim("best_response", n.dim(), x.len())?;
    Ok(best_response_unchecked(n, x))
}

pub(crate) fn best_response_unchecked<T: Scalar>(n: &Neighborhood<T>, x: &[T]) -> ModelParams<T> {
    ModelParams {
        weights: n
            .base
            .weights
            .iter()
            .zip(x)
            .map(|(&w, &xi)| w - n.alpha * sign(xi))
            .collect(),
        intercept: n.base.intercept.map(|b| b - n.alpha),
    }
}

/// `max_{θ ∈ ball} J(x, θ)` evaluated through the closed-form response.
pub(crate) fn worst_case_score<T: Scalar>(n: &Neighborhood<T>, x: &[T]) -> T {
    let mut s = n.base.intercept.map_or(T::zero(), |b| b - n.alpha);
    for (&w, &xi) in n.base.weights.iter().zip(x) {
        s += xi * (w - n.alpha * sign(xi));
    }
    s
}

/// Exhaustive search over the `2^k` corners of the ball (`k` counts weights
/// plus the intercept, when present) for the corner minimizing `x·θ + b`.
///
/// Corners are visited in lexicographic order of their sign patterns with
/// `−α` before `+α`; the first minimum found is returned.
pub fn corner_oracle<T: Scalar>(n: &Neighborhood<T>, x: &[T]) -> Result<ModelParams<T>> {
    check_dim("corner_oracle", n.dim(), x.len())?;
    let k = n.dim() + usize::from(n.base.intercept.is_some());
    if k > MAX_CORNER_COORDS {
        return Err(RecourseError::DimensionTooLarge {
            dim: k,
            limit: MAX_CORNER_COORDS,
        });
    }
    let mut best: Option<(T, ModelParams<T>)> = None;
    for corner in enumerate_corners(n) {
        let value = corner.score_unchecked(x);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, corner));
        }
    }
    Ok(best.expect("at least one corner").1)
}

/// Every corner of the ball in lexicographic sign-pattern order.
pub fn enumerate_corners<T: Scalar>(n: &Neighborhood<T>) -> Vec<ModelParams<T>> {
    let k = n.dim() + usize::from(n.base.intercept.is_some());
    (0u64..(1u64 << k))
        .map(|pattern| corner_params(n, pattern, k))
        .collect()
}

/// Corner of the ball selected by `pattern`: bit `k − 1 − i` set means
/// coordinate `i` sits at `+α`, with the intercept as the last coordinate.
fn corner_params<T: Scalar>(n: &Neighborhood<T>, pattern: u64, k: usize) -> ModelParams<T> {
    let offset = |i: usize| {
        if pattern >> (k - 1 - i) & 1 == 1 {
            n.alpha
        } else {
            -n.alpha
        }
    };
    let d = n.dim();
    ModelParams {
        weights: n
            .base
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| w + offset(i))
            .collect(),
        intercept: n.base.intercept.map(|b| b + offset(d)),
    }
}

/// Adaptive-moment projected gradient ascent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct AscentConfig<T> {
    pub learning_rate: T,
    pub steps: usize,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    /// Extra runs started from uniformly random points of the ball.
    pub restarts: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for AscentConfig<T> {
    fn default() -> Self {
        AscentConfig {
            learning_rate: T::lit(0.001),
            steps: 1000,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            restarts: 0,
            seed: 0,
        }
    }
}

/// Mean cross-entropy toward label 1 of `recourses` under `theta`.
pub fn shared_model_objective<T: Scalar>(theta: &ModelParams<T>, recourses: &[Vec<T>]) -> T {
    let total: T = recourses
        .iter()
        .map(|x| LossKind::BinaryCrossEntropy.value(theta.score_unchecked(x)))
        .sum();
    total / T::from_usize(recourses.len()).expect("count")
}

/// One model in the ball that maximizes the mean loss of a whole recourse
/// set, found by projected Adam ascent. Returns the best iterate seen.
pub fn worst_case_shared_model<T: Scalar>(
    n: &Neighborhood<T>,
    recourses: &[Vec<T>],
    cfg: &AscentConfig<T>,
) -> Result<ModelParams<T>> {
    worst_case_shared_model_observed(n, recourses, cfg, |_| {})
}

/// [`worst_case_shared_model`] that also hands every projected iterate to
/// `observe`.
pub fn worst_case_shared_model_observed<T: Scalar, F: FnMut(&ModelParams<T>)>(
    n: &Neighborhood<T>,
    recourses: &[Vec<T>],
    cfg: &AscentConfig<T>,
    mut observe: F,
) -> Result<ModelParams<T>> {
    if recourses.is_empty() {
        return Err(RecourseError::Empty("recourse list"));
    }
    for x in recourses {
        check_dim("worst_case_shared_model", n.dim(), x.len())?;
    }
    if !(cfg.learning_rate > T::zero()) || cfg.steps == 0 {
        return Err(RecourseError::InvalidConfig(
            "ascent needs a positive learning rate and at least one step".into(),
        ));
    }

    let mut best = n.base.clone();
    let mut best_value = shared_model_objective(&best, recourses);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for run in 0..=cfg.restarts {
        let start = if run == 0 {
            n.base.clone()
        } else {
            random_point(n, &mut rng)
        };
        let (theta, value) = adam_ascent(n, recourses, cfg, start, &mut observe);
        if value > best_value {
            best = theta;
            best_value = value;
        }
    }
    Ok(best)
}

fn random_point<T: Scalar>(n: &Neighborhood<T>, rng: &mut ChaCha8Rng) -> ModelParams<T> {
    let mut jitter = |c: T| {
        let u: f64 = rng.random_range(-1.0..=1.0);
        c + n.alpha * T::lit(u)
    };
    ModelParams {
        weights: n.base.weights.iter().map(|&w| jitter(w)).collect(),
        intercept: n.base.intercept.map(jitter),
    }
}

fn adam_ascent<T: Scalar, F: FnMut(&ModelParams<T>)>(
    n: &Neighborhood<T>,
    recourses: &[Vec<T>],
    cfg: &AscentConfig<T>,
    start: ModelParams<T>,
    observe: &mut F,
) -> (ModelParams<T>, T) {
    let d = n.dim();
    let has_b = n.base.intercept.is_some();
    let k = d + usize::from(has_b);
    let count = T::from_usize(recourses.len()).expect("count");

    let mut theta = start;
    let mut best = theta.clone();
    let mut best_value = shared_model_objective(&theta, recourses);
    let mut m = vec![T::zero(); k];
    let mut v = vec![T::zero(); k];
    let (mut b1t, mut b2t) = (T::one(), T::one());

    for _ in 0..cfg.steps {
        // d/dθ log(1 + e^{-s}) = -σ(-s)·x, and the intercept sees x = 1.
        let mut grad = vec![T::zero(); k];
        for x in recourses {
            let s = theta.score_unchecked(x);
            let g = LossKind::BinaryCrossEntropy.derivative(s) / count;
            for (gi, &xi) in grad.iter_mut().zip(x) {
                *gi += g * xi;
            }
            if has_b {
                grad[d] += g;
            }
        }
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        let mut step = vec![T::zero(); k];
        for i in 0..k {
            m[i] = cfg.beta1 * m[i] + (T::one() - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (T::one() - cfg.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / (T::one() - b1t);
            let v_hat = v[i] / (T::one() - b2t);
            step[i] = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        for (w, s) in theta.weights.iter_mut().zip(&step) {
            *w += *s;
        }
        if let Some(b) = theta.intercept.as_mut() {
            *b += step[d];
        }
        theta = n.project(&theta);
        observe(&theta);

        let value = shared_model_objective(&theta, recourses);
        if value > best_value {
            best_value = value;
            best = theta.clone();
        }
    }
    (best, best_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hood(w: &[f64], b: f64, alpha: f64) -> Neighborhood<f64> {
        Neighborhood::new(ModelParams::new(w.to_vec(), b).unwrap(), alpha).unwrap()
    }

    #[test]
    fn best_response_examples() {
        let n = hood(&[0.5, 0.5], 0.0, 0.2);
        let r = best_response(&n, &[2.0, -1.0]).unwrap();
        assert!((r.weights[0] - 0.3).abs() < 1e-15 && (r.weights[1] - 0.7).abs() < 1e-15);
        assert_eq!(r.intercept, Some(-0.2));

        let r = best_response(&n, &[0.0, 3.0]).unwrap();
        assert!((r.weights[0] - 0.3).abs() < 1e-15 && (r.weights[1] - 0.3).abs() < 1e-15);
        assert_eq!(r.intercept, Some(-0.2));

        let n0 = hood(&[0.7, -1.3], 0.4, 0.0);
        assert_eq!(best_response(&n0, &[1.0, -2.0]).unwrap(), n0.base);
    }

    #[test]
    fn no_intercept_is_left_alone() {
        let n = Neighborhood::new(ModelParams::without_intercept(vec![1.0]).unwrap(), 0.5).unwrap();
        let r = best_response(&n, &[0.0]).unwrap();
        assert_eq!(r.weights, vec![0.5]);
        assert_eq!(r.intercept, None);
    }

    #[test]
    fn corner_oracle_edge_cases() {
        let n0 = hood(&[0.7, -1.3], 0.4, 0.0);
        assert_eq!(corner_oracle(&n0, &[1.0, -2.0]).unwrap(), n0.base);

        let n = hood(&[0.7, -1.3], 0.4, 0.25);
        let c = corner_oracle(&n, &[0.0, 0.0]).unwrap();
        assert_eq!(c.score(&[0.0, 0.0]).unwrap(), 0.4 - 0.25);
        // All-zero features tie on weights; the lexicographic tie-break picks −α.
        assert_eq!(c.weights, vec![0.7 - 0.25, -1.3 - 0.25]);

        let big = Neighborhood::new(ModelParams::new(vec![0.0; 20], 0.0).unwrap(), 0.1).unwrap();
        assert!(matches!(
            corner_oracle(&big, &[0.0; 20]),
            Err(RecourseError::DimensionTooLarge { dim: 21, .. })
        ));
    }

    #[test]
    fn shared_model_requires_recourses() {
        let n = hood(&[1.0], 0.0, 0.1);
        assert!(worst_case_shared_model(&n, &[], &AscentConfig::default()).is_err());
    }

    #[test]
    fn shared_model_single_point_brackets() {
        let n = hood(&[0.8, -0.4], 0.3, 0.2);
        let x = vec![vec![1.5, -0.5]];
        let found = worst_case_shared_model(&n, &x, &AscentConfig::default()).unwrap();
        let at_found = shared_model_objective(&found, &x);
        let at_base = shared_model_objective(&n.base, &x);
        let at_closed = shared_model_objective(&best_response(&n, &x[0]).unwrap(), &x);
        assert!(at_found >= at_base);
        assert!(at_found <= at_closed + 1e-6);
        // 1000 Adam steps of 1e-3 reach every face of a 0.2 box.
        assert!((at_found - at_closed).abs() < 1e-6);
    }

    #[test]
    fn shared_model_collapses_with_zero_radius() {
        let n = hood(&[0.8, -0.4], 0.3, 0.0);
        let x = vec![vec![1.5, -0.5], vec![-1.0, 2.0]];
        let found = worst_case_shared_model(&n, &x, &AscentConfig::default()).unwrap();
        assert_eq!(found, n.base);
    }

    #[test]
    fn shared_model_iterates_stay_in_box() {
        let n = hood(&[0.8, -0.4, 0.1], 0.3, 0.05);
        let x = vec![
            vec![1.5, -0.5, 0.2],
            vec![-1.0, 2.0, 0.0],
            vec![0.3, 0.3, -3.0],
        ];
        let cfg = AscentConfig {
            restarts: 2,
            seed: 9,
            learning_rate: 0.01,
            ..AscentConfig::default()
        };
        let mut seen = 0usize;
        worst_case_shared_model_observed(&n, &x, &cfg, |t| {
            seen += 1;
            assert!(n.contains(t, 1e-12));
        })
        .unwrap();
        assert_eq!(seen, 3 * cfg.steps);
    }

    proptest! {
        #[test]
        fn best_response_is_minimal_against_random_models(
            w in prop::collection::vec(-2.0..2.0f64, 1..5),
            b in -1.0..1.0f64,
            alpha in 0.0..1.0f64,
            xs in prop::collection::vec(-3.0..3.0f64, 5),
            us in prop::collection::vec(-1.0..1.0f64, 6),
        ) {
            let d = w.len();
            let n = Neighborhood::new(ModelParams::new(w, b).unwrap(), alpha).unwrap();
            let x = &xs[..d];
            let r = best_response(&n, x).unwrap();
            prop_assert!(n.contains(&r, 1e-12));
            let other = ModelParams::new(
                n.base.weights.iter().zip(&us).map(|(c, u)| c + alpha * u).collect(),
                b + alpha * us[5],
            ).unwrap();
            prop_assert!(r.score(x).unwrap() <= other.score(x).unwrap() + 1e-12);
        }

        #[test]
        fn best_response_depends_only_on_sign(
            w in prop::collection::vec(-2.0..2.0f64, 3),
            alpha in 0.0..1.0f64,
            x in prop::collection::vec(-3.0..3.0f64, 3),
            scale in prop::collection::vec(0.01..10.0f64, 3),
        ) {
            let n = Neighborhood::new(ModelParams::new(w, 0.0).unwrap(), alpha).unwrap();
            let y: Vec<f64> = x.iter().zip(&scale).map(|(a, s)| a * s).collect();
            prop_assert_eq!(best_response(&n, &x).unwrap(), best_response(&n, &y).unwrap());
        }
    }
}
