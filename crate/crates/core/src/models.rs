//! Classifiers behind a common probability interface, plus a logistic trainer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, RecourseError, Result};
use crate::glm::{LinkKind, LossKind, ModelParams};
use crate::scalar::{all_finite, dot, sigmoid, Scalar};

/// Anything mapping a feature vector to the probability of the desirable label.
pub trait BlackBoxScorer<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn probability(&self, x: &[T]) -> Result<T>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmScorer<T> {
    pub params: ModelParams<T>,
    pub link: LinkKind,
}

impl<T: Scalar> GlmScorer<T> {
    pub fn logistic(params: ModelParams<T>) -> Self {
        GlmScorer {
            params,
            link: LinkKind::Sigmoid,
        }
    }
}

impl<T: Scalar> BlackBoxScorer<T> for GlmScorer<T> {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn probability(&self, x: &[T]) -> Result<T> {
        Ok(self.link.apply(self.params.score(x)?))
    }
}

/// One dense layer; `w` is stored output-major (`w[out][in]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseLayer<T> {
    pub w: Vec<Vec<T>>,
    pub b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MlpWeights<T> {
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> MlpWeights<T> {
    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .and_then(|l| l.w.first())
            .map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(RecourseError::Empty("network layers"));
        }
        let mut fan_in = self.input_dim();
        for (k, layer) in self.layers.iter().enumerate() {
            let shape_err = |detail: String| RecourseError::LayerShape { layer: k, detail };
            if layer.w.is_empty() {
                return Err(shape_err("no output units".into()));
            }
            if layer.b.len() != layer.w.len() {
                return Err(shape_err(format!(
                    "{} rows but {} biases",
                    layer.w.len(),
                    layer.b.len()
                )));
            }
            if let Some((r, row)) = layer.w.iter().enumerate().find(|(_, r)| r.len() != fan_in) {
                return Err(shape_err(format!(
                    "row {r} has {} inputs, expected {fan_in}",
                    row.len()
                )));
            }
            if !all_finite(&layer.b) || layer.w.iter().any(|r| !all_finite(r)) {
                return Err(RecourseError::NonFinite(format!("layer {k} parameters")));
            }
            fan_in = layer.w.len();
        }
        if fan_in != 1 {
            return Err(RecourseError::LayerShape {
                layer: self.layers.len() - 1,
                detail: format!("final layer has {fan_in} outputs, expected 1"),
            });
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let w: MlpWeights<T> = serde_json::from_str(s)?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// ReLU hidden layers followed by a sigmoid output unit.
pub fn mlp_forward<T: Scalar>(w: &MlpWeights<T>, x: &[T]) -> Result<T> {
    let mut act = x.to_vec();
    let last = w.layers.len().saturating_sub(1);
    for (k, layer) in w.layers.iter().enumerate() {
        if let Some(row) = layer.w.iter().find(|r| r.len() != act.len()) {
            return Err(RecourseError::LayerShape {
                layer: k,
                detail: format!("expects {} inputs, got {}", row.len(), act.len()),
            });
        }
        if layer.b.len() != layer.w.len() {
            return Err(RecourseError::LayerShape {
                layer: k,
                detail: format!("{} rows but {} biases", layer.w.len(), layer.b.len()),
            });
        }
        act = layer
            .w
            .iter()
            .zip(&layer.b)
            .map(|(row, &b)| {
                let z = dot(row, &act) + b;
                if k == last {
                    z
                } else {
                    z.max(T::zero())
                }
            })
            .collect();
    }
    match act.as_slice() {
        [s] => Ok(sigmoid(*s)),
        _ => Err(RecourseError::LayerShape {
            layer: last,
            detail: format!("final layer has {} outputs, expected 1", act.len()),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpScorer<T> {
    weights: MlpWeights<T>,
}

impl<T: Scalar> MlpScorer<T> {
    pub fn new(weights: MlpWeights<T>) -> Result<Self> {
        weights.validate()?;
        Ok(MlpScorer { weights })
    }

    pub fn weights(&self) -> &MlpWeights<T> {
        &self.weights
    }
}

impl<T: Scalar> BlackBoxScorer<T> for MlpScorer<T> {
    fn dim(&self) -> usize {
        self.weights.input_dim()
    }

    fn probability(&self, x: &[T]) -> Result<T> {
        mlp_forward(&self.weights, x)
    }
}

/// Desirable label iff the probability reaches one half.
pub fn predict_label<T: Scalar>(scorer: &dyn BlackBoxScorer<T>, x: &[T]) -> Result<u8> {
    Ok(u8::from(scorer.probability(x)? >= T::lit(0.5)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub max_epochs: usize,
    pub l2_penalty: T,
    /// Stop once the gradient's largest component falls below this.
    pub tolerance: T,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            learning_rate: T::lit(0.1),
            max_epochs: 500,
            l2_penalty: T::lit(1e-4),
            tolerance: T::lit(1e-6),
            seed: 0,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > T::zero()) || self.max_epochs == 0 {
            return Err(RecourseError::InvalidConfig(
                "learning rate and epoch budget must be positive".into(),
            ));
        }
        if !(self.l2_penalty >= T::zero()) || !(self.tolerance > T::zero()) {
            return Err(RecourseError::InvalidConfig(
                "l2 penalty must be non-negative and tolerance positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub params: ModelParams<T>,
    /// Objective after every accepted epoch, starting with the initial value.
    pub loss_history: Vec<T>,
    pub epochs: usize,
    pub converged: bool,
}

fn objective_and_gradient<T: Scalar>(ds: &Dataset<T>, w: &[T], b: T, l2: T) -> (T, Vec<T>, T) {
    let n = T::from_usize(ds.len()).expect("row count");
    let mut loss = T::zero();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = T::zero();
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        let s = dot(w, x) + b;
        // Label 0 is the positive-class loss evaluated at -s.
        let (l, r) = if y == 1 {
            (LossKind::BinaryCrossEntropy.value(s), sigmoid(s) - T::one())
        } else {
            (LossKind::BinaryCrossEntropy.value(-s), sigmoid(s))
        };
        loss += l;
        for (g, &xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    let half = T::lit(0.5);
    let penalty = half * l2 * dot(w, w);
    gw.iter_mut()
        .zip(w)
        .for_each(|(g, &wi)| *g = *g / n + l2 * wi);
    (loss / n + penalty, gw, gb / n)
}

/// Full-batch gradient descent on mean cross-entropy plus an L2 penalty.
pub fn train_logistic_report<T: Scalar>(
    ds: &Dataset<T>,
    cfg: &TrainConfig<T>,
) -> Result<TrainReport<T>> {
    cfg.validate()?;
    ds.validate()?;
    if ds.is_empty() {
        return Err(RecourseError::Empty("training data"));
    }
    if !(ds.labels.contains(&0) && ds.labels.contains(&1)) {
        return Err(RecourseError::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w: Vec<T> = (0..ds.dim())
        .map(|_| T::lit(rng.random_range(-1e-3..1e-3)))
        .collect();
    let mut b = T::zero();
    let (mut loss, mut gw, mut gb) = objective_and_gradient(ds, &w, b, cfg.l2_penalty);
    let mut lr = cfg.learning_rate;
    let mut history = vec![loss];
    let mut converged = false;
    let mut epochs = 0;
    let slack = T::lit(1e-12);

    while epochs < cfg.max_epochs {
        let gnorm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gnorm < cfg.tolerance {
            converged = true;
            break;
        }
        epochs += 1;
        loop {
            let w_new: Vec<T> = w.iter().zip(&gw).map(|(&wi, &g)| wi - lr * g).collect();
            let b_new = b - lr * gb;
            let (l_new, gw_new, gb_new) = objective_and_gradient(ds, &w_new, b_new, cfg.l2_penalty);
            if l_new <= loss + slack || lr < T::lit(1e-12) {
                w = w_new;
                b = b_new;
                loss = l_new;
                gw = gw_new;
                gb = gb_new;
                break;
            }
            lr *= T::lit(0.5);
        }
        history.push(loss);
    }
    log::debug!("logistic training: {epochs} epochs, loss {loss}, converged {converged}");
    Ok(TrainReport {
        params: ModelParams::new(w, b)?,
        loss_history: history,
        epochs,
        converged,
    })
}

pub fn train_logistic<T: Scalar>(ds: &Dataset<T>, cfg: &TrainConfig<T>) -> Result<ModelParams<T>> {
    train_logistic_report(ds, cfg).map(|r| r.params)
}

/// Fraction of rows whose predicted label matches the stored one.
pub fn accuracy<T: Scalar>(scorer: &dyn BlackBoxScorer<T>, ds: &Dataset<T>) -> Result<T> {
    if ds.is_empty() {
        return Err(RecourseError::Empty("dataset"));
    }
    check_dim("features", scorer.dim(), ds.dim())?;
    let mut hits = 0usize;
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        hits += usize::from(predict_label(scorer, x)? == y);
    }
    Ok(T::from_usize(hits).expect("count") / T::from_usize(ds.len()).expect("count"))
}
