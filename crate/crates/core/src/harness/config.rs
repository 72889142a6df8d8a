use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::AscentConfig;
use crate::data::SyntheticSpec;
use crate::error::{RecourseError, Result};
use crate::glm::ModelParams;
use crate::models::TrainConfig;
use crate::roar::RoarConfig;
use crate::surrogate::SurrogateConfig;
use crate::tradeoff::BlendConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
        /// Same columns drawn after the shift; trains the correct prediction.
        #[serde(default)]
        shifted_path: Option<PathBuf>,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Synthetic(_) => "synthetic".into(),
            DatasetSpec::Csv { path, .. } => path
                .file_stem()
                .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Logistic regression trained on each fold.
    Glm,
    /// Fixed network explained per instance by a local linear surrogate.
    Mlp {
        weights_path: PathBuf,
        /// Network standing in for the future model.
        #[serde(default)]
        correct_weights_path: Option<PathBuf>,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Glm => "glm",
            ModelSpec::Mlp { .. } => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PredictionSetSpec {
    /// Shift every weight by `±α` in four sign patterns, plus the base model.
    Corner,
    /// `±ε` and `±2ε` around the correct prediction, plus the prediction itself.
    Epsilon {
        #[serde(default)]
        epsilon: Option<f64>,
    },
    Explicit {
        models: Vec<ModelParams<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityGrid {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for ValidityGrid {
    fn default() -> Self {
        ValidityGrid {
            alphas: (1..=10).map(|k| f64::from(k) * 0.02).collect(),
            lambdas: vec![0.05, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    /// Ball radius; `None` uses 0.5 for trade-off studies and 0.2 for validity.
    pub alpha: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub predictions: PredictionSetSpec,
    /// Smoothness perturbation size; `None` uses half the distance between
    /// the correct prediction and the base model.
    pub epsilon: Option<f64>,
    /// Class-0 mean shift for the synthetic correct prediction; `None` uses alpha.
    pub shift: Option<f64>,
    /// Normalize features with training-fold statistics. `None` normalizes
    /// CSV data and leaves synthetic data raw.
    pub normalize: Option<bool>,
    pub folds: usize,
    pub seed: u64,
    /// Keep at most this many recourse instances per fold.
    pub max_instances_per_fold: Option<usize>,
    pub validity: ValidityGrid,
    pub train: TrainConfig<f64>,
    pub blend: BlendConfig<f64>,
    pub roar: RoarConfig<f64>,
    pub ascent: AscentConfig<f64>,
    pub surrogate: SurrogateConfig,
    /// Also write one JSON line per instance and prediction.
    pub write_instances: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Synthetic(SyntheticSpec::default()),
            model: ModelSpec::Glm,
            alpha: None,
            lambda_grid: vec![0.05, 0.1, 0.2, 0.5, 0.7, 1.0],
            beta_grid: (0..=10).map(|k| f64::from(k) / 10.0).collect(),
            predictions: PredictionSetSpec::Corner,
            epsilon: None,
            shift: None,
            normalize: None,
            folds: 5,
            seed: 0,
            max_instances_per_fold: None,
            validity: ValidityGrid::default(),
            train: TrainConfig::default(),
            blend: BlendConfig::default(),
            roar: RoarConfig::default(),
            ascent: AscentConfig::default(),
            surrogate: SurrogateConfig::default(),
            write_instances: false,
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            RecourseError::InvalidConfig(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            RecourseError::InvalidConfig(format!("{}: {e}", path.as_ref().display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Propagates the global seed into every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let DatasetSpec::Synthetic(spec) = &mut self.dataset {
            spec.seed = seed;
        }
        self.train.seed = seed;
        self.roar.seed = seed;
        self.ascent.seed = seed;
        self.surrogate.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RecourseError::InvalidConfig(m.into()));
        if self.lambda_grid.is_empty() || self.beta_grid.is_empty() {
            return bad("lambda and beta grids must be non-empty");
        }
        if self
            .lambda_grid
            .iter()
            .any(|&l| !(l >= 0.0 && l.is_finite()))
        {
            return bad("lambda values must be finite and non-negative");
        }
        if self.beta_grid.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
            return bad("beta values must lie in [0, 1]");
        }
        if self.alpha.is_some_and(|a| !(a >= 0.0 && a.is_finite())) {
            return bad("alpha must be finite and non-negative");
        }
        if self.epsilon.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
            return bad("epsilon must be finite and non-negative");
        }
        if self.folds < 2 {
            return bad("need at least two folds");
        }
        if self.validity.alphas.is_empty() || self.validity.lambdas.is_empty() {
            return bad("validity grids must be non-empty");
        }
        if self
            .validity
            .alphas
            .iter()
            .any(|&a| !(a >= 0.0 && a.is_finite()))
        {
            return bad("validity alphas must be finite and non-negative");
        }
        if self
            .validity
            .lambdas
            .iter()
            .any(|&l| !(l >= 0.0 && l.is_finite()))
        {
            return bad("validity lambdas must be finite and non-negative");
        }
        if self.max_instances_per_fold == Some(0) {
            return bad("max_instances_per_fold must be positive");
        }
        self.train.validate()
    }

    pub fn tradeoff_alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.5)
    }

    pub fn normalizes(&self) -> bool {
        self.normalize
            .unwrap_or(matches!(self.dataset, DatasetSpec::Csv { .. }))
    }
}
