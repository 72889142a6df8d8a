//! Generalized linear model evaluation and the total-cost functional.
//!
//! A generalized linear classifier is `g(h(x))` with a linear score
//! `h(x) = w·x + b` and a non-decreasing link `g`. Every solver in the crate
//! minimizes the total cost
//!
//! ```text
//! J(x', θ) = loss(h_θ(x')) + λ · Σ_i c_i |x'_i − x0_i|
//! ```
//!
//! where the loss measures how far the score is from the desirable label 1.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, RecourseError, Result};
use crate::scalar::{all_finite, dot, sigmoid, Scalar};

/// Two-valued sign with `sign(0) = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn of<T: Scalar>(v: T) -> Sign {
        if v >= T::zero() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn value<T: Scalar>(self) -> T {
        match self {
            Sign::Positive => T::one(),
            Sign::Negative => -T::one(),
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// `+1` for non-negative input, `−1` otherwise.
pub fn sign<T: Scalar>(v: T) -> T {
    Sign::of(v).value()
}

/// Linear model parameters. The intercept is optional: a model without one
/// has no constant term for the adversary to perturb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelParams<T> {
    pub weights: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(weights: Vec<T>, intercept: T) -> Result<Self> {
        Self::build(weights, Some(intercept))
    }

    /// Parameters with no intercept term.
    pub fn without_intercept(weights: Vec<T>) -> Result<Self> {
        Self::build(weights, None)
    }

    fn build(weights: Vec<T>, intercept: Option<T>) -> Result<Self> {
        let params = ModelParams { weights, intercept };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(RecourseError::Empty("model weights"));
        }
        if !all_finite(&self.weights) || self.intercept.is_some_and(|b| !b.is_finite()) {
            return Err(RecourseError::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn intercept_or_zero(&self) -> T {
        self.intercept.unwrap_or_else(T::zero)
    }

    /// Linear score `w·x + b`.
    pub fn score(&self, x: &[T]) -> Result<T> {
        check_dim("score", self.dim(), x.len())?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[T]) -> T {
        dot(&self.weights, x) + self.intercept_or_zero()
    }

    /// L∞ distance over weights and intercept. A missing intercept on either
    /// side counts as zero.
    pub fn linf_distance(&self, other: &ModelParams<T>) -> T {
        let w = self
            .weights
            .iter()
            .zip(&other.weights)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        w.max((self.intercept_or_zero() - other.intercept_or_zero()).abs())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let params: ModelParams<T> = serde_json::from_str(s)?;
        params.validate()?;
        Ok(params)
    }
}

/// Free-function form of [`ModelParams::score`].
pub fn score<T: Scalar>(theta: &ModelParams<T>, x: &[T]) -> Result<T> {
    theta.score(x)
}

/// Link mapping a score to the probability of the desirable outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    #[default]
    Sigmoid,
    /// Identity clamped to `[0, 1]`.
    Identity,
}

impl LinkKind {
    pub fn apply<T: Scalar>(self, s: T) -> T {
        match self {
            LinkKind::Sigmoid => sigmoid(s),
            LinkKind::Identity => s.max(T::zero()).min(T::one()),
        }
    }
}

/// Loss toward label 1 expressed as a function of the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `log(1 + e^{−s})`, cross entropy of a sigmoid output against label 1.
    #[default]
    #[serde(alias = "bce")]
    BinaryCrossEntropy,
    /// `(min(s, 1) − 1)²`: squared distance of the identity output from 1,
    /// saturating once the score passes 1.
    Squared,
}

impl LossKind {
    pub fn value<T: Scalar>(self, s: T) -> T {
        match self {
            LossKind::BinaryCrossEntropy => {
                if s >= T::zero() {
                    (-s).exp().ln_1p()
                } else {
                    -s + s.exp().ln_1p()
                }
            }
            LossKind::Squared => {
                let gap = T::one() - s.min(T::one());
                gap * gap
            }
        }
    }

    /// Derivative with respect to the score; always `≤ 0`.
    pub fn derivative<T: Scalar>(self, s: T) -> T {
        match self {
            LossKind::BinaryCrossEntropy => -sigmoid(-s),
            LossKind::Squared => -T::lit(2.0) * (T::one() - s.min(T::one())),
        }
    }
}

/// Free-function form of [`LossKind::value`].
pub fn eval_loss<T: Scalar>(loss: LossKind, s: T) -> T {
    loss.value(s)
}

/// Per-feature price of moving one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CostSpec<T> {
    pub weights: Vec<T>,
}

impl<T: Scalar> CostSpec<T> {
    pub fn uniform(d: usize) -> Self {
        CostSpec {
            weights: vec![T::one(); d],
        }
    }

    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|&w| !(w.is_finite() && w > T::zero())) {
            return Err(RecourseError::InvalidConfig(
                "cost weights must be finite and strictly positive".into(),
            ));
        }
        Ok(CostSpec { weights })
    }
}

/// A single recourse request: the instance, the trade-off weight λ between
/// loss and movement cost, and which features are frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RecourseQuery<T> {
    pub x0: Vec<T>,
    pub lambda: T,
    #[serde(default)]
    pub loss: LossKind,
    pub cost: CostSpec<T>,
    /// `true` marks a feature that may not change.
    pub immutable: Vec<bool>,
}

impl<T: Scalar> RecourseQuery<T> {
    /// Cross-entropy query with unit costs and every feature mutable.
    pub fn new(x0: Vec<T>, lambda: T) -> Result<Self> {
        let d = x0.len();
        let q = RecourseQuery {
            x0,
            lambda,
            loss: LossKind::BinaryCrossEntropy,
            cost: CostSpec::uniform(d),
            immutable: vec![false; d],
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_cost(mut self, cost: CostSpec<T>) -> Result<Self> {
        check_dim("cost weights", self.dim(), cost.weights.len())?;
        self.cost = CostSpec::new(cost.weights)?;
        Ok(self)
    }

    pub fn with_immutable(mut self, mask: Vec<bool>) -> Result<Self> {
        check_dim("immutable mask", self.dim(), mask.len())?;
        self.immutable = mask;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0.is_empty() {
            return Err(RecourseError::Empty("x0"));
        }
        if !all_finite(&self.x0) {
            return Err(RecourseError::NonFinite("x0".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= T::zero()) {
            return Err(RecourseError::InvalidConfig(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        check_dim("cost weights", self.dim(), self.cost.weights.len())?;
        check_dim("immutable mask", self.dim(), self.immutable.len())?;
        CostSpec::new(self.cost.weights.clone()).map(|_| ())
    }

    /// `Σ c_i |x'_i − x0_i|`.
    pub fn weighted_l1(&self, x_prime: &[T]) -> T {
        x_prime
            .iter()
            .zip(&self.x0)
            .zip(&self.cost.weights)
            .fold(T::zero(), |acc, ((&x, &x0), &w)| acc + w * (x - x0).abs())
    }

    pub(crate) fn total_cost_unchecked(&self, x_prime: &[T], theta: &ModelParams<T>) -> T {
        self.loss.value(theta.score_unchecked(x_prime)) + self.lambda * self.weighted_l1(x_prime)
    }
}

/// Total cost `J(x', θ)` of recourse `x_prime` under parameters `theta`.
pub fn eval_total_cost<T: Scalar>(
    q: &RecourseQuery<T>,
    x_prime: &[T],
    theta: &ModelParams<T>,
) -> Result<T> {
    check_dim("recourse", q.dim(), x_prime.len())?;
    check_dim("model", q.dim(), theta.dim())?;
    Ok(q.total_cost_unchecked(x_prime, theta))
}

/// The classic one-feature construction used to argue that robust recourse
/// is non-convex: `x0 = 1` with a fixed intercept feature, `θ0 = [0, 0]`,
/// `α = 0.5`, `λ = 1` and squared loss.
///
/// [`as_printed`](NonConvexityExample::as_printed) evaluates the closed form
/// usually quoted for it, `exp(1 − |x|) + |x − 1|`, which has an upward cusp
/// at 0 and fails the midpoint test. That form plugs in a worst-case score of
/// `+0.5|x| − 0.5`. The minimizing adversary actually produces
/// `−0.5|x| − 0.5`, and [`worst_case`](NonConvexityExample::worst_case)
/// evaluates that version, which is convex: it is a pointwise maximum of
/// functions convex in `x`.
pub mod nonconvexity {
    use super::*;

    pub struct NonConvexityExample;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct MidpointViolation<T> {
        pub a: T,
        pub b: T,
        pub at_midpoint: T,
        pub chord: T,
    }

    impl NonConvexityExample {
        pub fn x0<T: Scalar>() -> T {
            T::one()
        }

        pub fn neighborhood<T: Scalar>() -> (ModelParams<T>, T) {
            (
                ModelParams::new(vec![T::zero()], T::zero()).expect("finite"),
                T::lit(0.5),
            )
        }

        pub fn as_printed<T: Scalar>(x: T) -> T {
            let half = T::lit(0.5);
            let e = (half * x * sign(x) - half).exp();
            T::one() / (e * e) + (x - T::one()).abs()
        }

        /// Worst-case total cost with the adversary's minimizing response and
        /// the given loss.
        pub fn worst_case<T: Scalar>(loss: LossKind, x: T) -> T {
            let (base, alpha) = Self::neighborhood::<T>();
            let w = base.weights[0] - alpha * sign(x);
            let b = base.intercept_or_zero() - alpha;
            loss.value(w * x + b) + (x - Self::x0::<T>()).abs()
        }
    }

    /// Scans pairs on `[lo, hi]` and returns the first midpoint-convexity
    /// violation exceeding `slack`.
    pub fn find_midpoint_violation<T: Scalar, F: Fn(T) -> T>(
        f: F,
        lo: T,
        hi: T,
        steps: usize,
        slack: T,
    ) -> Option<MidpointViolation<T>> {
        let h = (hi - lo) / T::from_usize(steps).expect("steps");
        let pts: Vec<T> = (0..=steps)
            .map(|k| lo + h * T::from_usize(k).expect("k"))
            .collect();
        for (i, &a) in pts.iter().enumerate() {
            for &b in &pts[i + 1..] {
                let mid = (a + b) * T::lit(0.5);
                let at_midpoint = f(mid);
                let chord = (f(a) + f(b)) * T::lit(0.5);
                if at_midpoint > chord + slack {
                    return Some(MidpointViolation {
                        a,
                        b,
                        at_midpoint,
                        chord,
                    });
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::nonconvexity::*;
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn theta(w: &[f64], b: f64) -> ModelParams<f64> {
        ModelParams::new(w.to_vec(), b).unwrap()
    }

    #[test]
    fn score_examples() {
        assert_eq!(theta(&[1.0, 0.0], 0.0).score(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(theta(&[1.0, 2.0], 0.5).score(&[1.0, 1.0]).unwrap(), 3.5);
        assert_eq!(theta(&[0.5, -0.5], -0.5).score(&[1.0, 1.0]).unwrap(), -0.5);
    }

    #[test]
    fn score_dimension_mismatch_names_both_lengths() {
        let err = theta(&[1.0, 2.0], 0.0).score(&[1.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('1'), "{msg}");
    }

    #[test]
    fn bce_examples() {
        let bce = LossKind::BinaryCrossEntropy;
        assert!((bce.value(0.0) - std::f64::consts::LN_2).abs() < TOL);
        assert!((bce.value(1.0_f64) - 0.313_261_687_518_222_86).abs() < TOL);
        let tail = bce.value(50.0_f64);
        assert!(tail < 1e-20 && tail > 0.0);
        assert!(bce.value(-800.0_f64).is_finite());
    }

    #[test]
    fn total_cost_examples() {
        let q = RecourseQuery::new(vec![0.0, 0.0], 0.1).unwrap();
        let t = theta(&[1.0, 0.0], 0.0);
        assert!(
            (eval_total_cost(&q, &[0.0, 0.0], &t).unwrap() - std::f64::consts::LN_2).abs() < TOL
        );
        assert!(
            (eval_total_cost(&q, &[1.0, 0.0], &t).unwrap() - 0.413_261_687_518_222_86).abs() < TOL
        );
        let q0 = RecourseQuery::new(vec![0.0, 0.0], 0.0).unwrap();
        let j = eval_total_cost(&q0, &[3.0, 3.0], &theta(&[1.0, 1.0], 0.0)).unwrap();
        assert!((j - 0.002_475_685_137_730_449_5).abs() < TOL);
    }

    #[test]
    fn squared_loss_is_one_sided() {
        let sq = LossKind::Squared;
        assert_eq!(sq.value(1.0), 0.0);
        assert_eq!(sq.value(3.0), 0.0);
        assert_eq!(sq.value(0.0), 1.0);
        assert_eq!(sq.value(-1.0), 4.0);
        assert_eq!(sq.derivative(2.0), 0.0);
    }

    #[test]
    fn identity_link_clamps() {
        assert_eq!(LinkKind::Identity.apply(-2.0), 0.0);
        assert_eq!(LinkKind::Identity.apply(0.3), 0.3);
        assert_eq!(LinkKind::Identity.apply(4.0), 1.0);
    }

    #[test]
    fn query_rejects_bad_inputs() {
        assert!(RecourseQuery::new(vec![f64::NAN], 0.1).is_err());
        assert!(RecourseQuery::new(vec![0.0], -1.0).is_err());
        assert!(RecourseQuery::new(vec![0.0], 0.1)
            .unwrap()
            .with_cost(CostSpec { weights: vec![0.0] })
            .is_err());
        assert!(ModelParams::new(vec![], 0.0).is_err());
        assert!(ModelParams::new(vec![f64::INFINITY], 0.0).is_err());
    }

    #[test]
    fn params_json_shape() {
        let t = theta(&[0.5, -1.0], 0.25);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"weights":[0.5,-1.0],"intercept":0.25}"#);
        let back = ModelParams::<f64>::from_json(&s).unwrap();
        assert_eq!(back, t);
        let bare = ModelParams::<f64>::from_json(r#"{"weights":[1.0]}"#).unwrap();
        assert_eq!(bare.intercept, None);
    }

    #[test]
    fn printed_counterexample_is_not_convex() {
        let v =
            find_midpoint_violation(NonConvexityExample::as_printed::<f64>, -3.0, 3.0, 60, 1e-9);
        assert!(v.is_some());
    }

    #[test]
    fn worst_case_of_counterexample_is_convex() {
        for loss in [LossKind::Squared, LossKind::BinaryCrossEntropy] {
            let v = find_midpoint_violation(
                |x| NonConvexityExample::worst_case::<f64>(loss, x),
                -4.0,
                4.0,
                80,
                1e-9,
            );
            assert!(v.is_none(), "{loss:?}: {v:?}");
        }
    }

    #[test]
    fn generic_over_f32() {
        let t = ModelParams::new(vec![1.0_f32, 2.0], 0.5).unwrap();
        let q = RecourseQuery::new(vec![0.0_f32, 0.0], 0.1).unwrap();
        let j = eval_total_cost(&q, &[1.0, 1.0], &t).unwrap();
        assert!((j - (LossKind::BinaryCrossEntropy.value(3.5_f32) + 0.2)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn total_cost_convex_in_recourse(
            w in prop::collection::vec(-2.0..2.0f64, 3),
            b in -1.0..1.0f64,
            x0 in prop::collection::vec(-2.0..2.0f64, 3),
            a in prop::collection::vec(-4.0..4.0f64, 3),
            c in prop::collection::vec(-4.0..4.0f64, 3),
            lambda in 0.0..1.5f64,
            squared in any::<bool>(),
        ) {
            let loss = if squared { LossKind::Squared } else { LossKind::BinaryCrossEntropy };
            let q = RecourseQuery::new(x0, lambda).unwrap().with_loss(loss);
            let t = ModelParams::new(w, b).unwrap();
            let mid: Vec<f64> = a.iter().zip(&c).map(|(p, r)| 0.5 * (p + r)).collect();
            let jm = eval_total_cost(&q, &mid, &t).unwrap();
            let ja = eval_total_cost(&q, &a, &t).unwrap();
            let jc = eval_total_cost(&q, &c, &t).unwrap();
            prop_assert!(jm <= 0.5 * (ja + jc) + 1e-9);
        }

        #[test]
        fn loss_monotone_decreasing(s1 in -40.0..40.0f64, gap in 0.0..10.0f64, squared in any::<bool>()) {
            let loss = if squared { LossKind::Squared } else { LossKind::BinaryCrossEntropy };
            prop_assert!(loss.value(s1) >= loss.value(s1 + gap));
        }

        #[test]
        fn no_cost_term_at_origin(
            x0 in prop::collection::vec(-5.0..5.0f64, 1..5),
            lambda in 0.0..10.0f64,
        ) {
            let d = x0.len();
            let q = RecourseQuery::new(x0.clone(), lambda).unwrap();
            let t = ModelParams::new(vec![0.3; d], -0.2).unwrap();
            let j = eval_total_cost(&q, &x0, &t).unwrap();
            prop_assert_eq!(j, q.loss.value(t.score(&x0).unwrap()));
        }
    }
}
