use crate::adversary::Neighborhood;
use crate::glm::ModelParams;

use super::config::PredictionSetSpec;

/// A predicted future model with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPrediction {
    pub id: String,
    pub params: ModelParams<f64>,
}

fn named(id: &str, params: ModelParams<f64>) -> NamedPrediction {
    NamedPrediction {
        id: id.to_string(),
        params,
    }
}

fn shifted(base: &ModelParams<f64>, delta: impl Fn(usize) -> f64) -> ModelParams<f64> {
    ModelParams {
        weights: base
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w + delta(i))
            .collect(),
        intercept: base.intercept,
    }
}

/// The base model and four weight shifts of size `α`: all up, all down and
/// the two alternating patterns.
pub fn corner_predictions(n: &Neighborhood<f64>) -> Vec<NamedPrediction> {
    let a = n.alpha;
    let alt = |i: usize| if i.is_multiple_of(2) { a } else { -a };
    vec![
        named("theta0", n.base.clone()),
        named("plus", shifted(&n.base, |_| a)),
        named("minus", shifted(&n.base, |_| -a)),
        named("alt_plus", shifted(&n.base, alt)),
        named("alt_minus", shifted(&n.base, |i| -alt(i))),
    ]
}

/// Perturbation size used when none is configured.
pub fn default_epsilon(n: &Neighborhood<f64>, correct: &ModelParams<f64>) -> f64 {
    correct.linf_distance(&n.base) / 2.0
}

/// The correct prediction and its `±ε`, `±2ε` shifts on every parameter,
/// all clamped into the ball.
pub fn epsilon_predictions(
    n: &Neighborhood<f64>,
    correct: &ModelParams<f64>,
    epsilon: f64,
) -> Vec<NamedPrediction> {
    let exact = n.project(correct);
    let around = |e: f64| {
        n.project(&ModelParams {
            weights: exact.weights.iter().map(|w| w + e).collect(),
            intercept: exact.intercept.map(|b| b + e),
        })
    };
    vec![
        named("exact", exact.clone()),
        named("plus_eps", around(epsilon)),
        named("minus_eps", around(-epsilon)),
        named("plus_2eps", around(2.0 * epsilon)),
        named("minus_2eps", around(-2.0 * epsilon)),
    ]
}

/// Predictions for a trade-off study. Explicit models are clamped into the
/// ball; the epsilon mode needs the correct prediction.
pub fn build_predictions(
    spec: &PredictionSetSpec,
    n: &Neighborhood<f64>,
    correct: Option<&ModelParams<f64>>,
    fallback_epsilon: Option<f64>,
) -> Option<Vec<NamedPrediction>> {
    match spec {
        PredictionSetSpec::Corner => Some(corner_predictions(n)),
        PredictionSetSpec::Epsilon { epsilon } => {
            let correct = correct?;
            let eps = epsilon
                .or(fallback_epsilon)
                .unwrap_or_else(|| default_epsilon(n, correct));
            Some(epsilon_predictions(n, correct, eps))
        }
        PredictionSetSpec::Explicit { models } => Some(
            models
                .iter()
                .enumerate()
                .map(|(k, m)| named(&format!("p{k}"), n.project(m)))
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::enumerate_corners;

    #[test]
    fn two_dimensional_corners_are_the_weight_corners() {
        let n = Neighborhood::new(
            ModelParams::without_intercept(vec![0.5, -1.0]).unwrap(),
            0.2,
        )
        .unwrap();
        let preds = corner_predictions(&n);
        assert_eq!(preds.len(), 5);
        let mut got: Vec<Vec<f64>> = preds[1..]
            .iter()
            .map(|p| p.params.weights.clone())
            .collect();
        let mut want: Vec<Vec<f64>> = enumerate_corners(&n)
            .into_iter()
            .map(|c| c.weights)
            .collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
        assert!(preds.iter().all(|p| n.contains(&p.params, 1e-12)));
    }

    #[test]
    fn epsilon_predictions_are_clamped() {
        let n = Neighborhood::new(ModelParams::new(vec![1.0, 1.0], 0.0).unwrap(), 0.5).unwrap();
        let correct = ModelParams::new(vec![1.4, 0.9], 0.1).unwrap();
        let preds = epsilon_predictions(&n, &correct, 0.2);
        assert_eq!(preds[0].params, correct);
        assert_eq!(preds[1].params.weights, vec![1.5, 1.1]);
        assert!(preds.iter().all(|p| n.contains(&p.params, 1e-12)));
        assert!((default_epsilon(&n, &correct) - 0.2).abs() < 1e-12);
    }
}
