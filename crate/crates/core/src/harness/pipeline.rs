//! Shared per-fold preparation: load, split, normalize, train, pick instances.

use rayon::prelude::*;

use crate::adversary::Neighborhood;
use crate::data::{
    generate_synthetic, ingest_csv, kfold, shifted_synthetic, Dataset, NormalizationStats,
};
use crate::error::{RecourseError, Result};
use crate::glm::{ModelParams, RecourseQuery};
use crate::models::{
    predict_label, train_logistic, BlackBoxScorer, GlmScorer, MlpScorer, MlpWeights,
};
use crate::solver::optimal_robust_recourse;
use crate::surrogate::{fit_local_linear, SurrogateConfig};
use crate::tradeoff::validity;

use super::config::{DatasetSpec, ExperimentConfig, ModelSpec};

#[derive(Debug, Clone)]
pub(crate) enum BaseModel {
    Glm(ModelParams<f64>),
    Mlp(MlpScorer<f64>),
}

impl BaseModel {
    fn scorer(&self) -> Box<dyn BlackBoxScorer<f64> + '_> {
        match self {
            BaseModel::Glm(p) => Box::new(GlmScorer::logistic(p.clone())),
            BaseModel::Mlp(m) => Box::new(m.clone()),
        }
    }
}

/// One recourse-receiving test row.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub row: usize,
    pub x0: Vec<f64>,
    /// Base model, or its local surrogate for networks.
    pub theta0: ModelParams<f64>,
    /// Correct future model, when the study needs one.
    pub correct: Option<ModelParams<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct FoldData {
    pub fold: usize,
    pub base: BaseModel,
    pub instances: Vec<Instance>,
}

/// SplitMix64 finalizer over (seed, fold, row).
pub fn derive_seed(seed: u64, fold: usize, row: usize) -> u64 {
    let mut z = seed
        .wrapping_add((fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((row as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loads the configured dataset, unnormalized.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset<f64>> {
    match spec {
        DatasetSpec::Synthetic(s) => generate_synthetic(s),
        DatasetSpec::Csv {
            path,
            label_column,
            positive_label,
            ..
        } => ingest_csv(path, label_column, positive_label),
    }
}

fn load_correct_dataset(cfg: &ExperimentConfig, alpha: f64) -> Result<Dataset<f64>> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(s) => shifted_synthetic(s, cfg.shift.unwrap_or(alpha)),
        DatasetSpec::Csv {
            shifted_path: Some(path),
            label_column,
            positive_label,
            ..
        } => ingest_csv(path, label_column, positive_label),
        DatasetSpec::Csv { .. } => Err(RecourseError::InvalidConfig(
            "a correct prediction needs dataset.shifted_path".into(),
        )),
    }
}

fn load_mlp(path: &std::path::Path) -> Result<MlpScorer<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        RecourseError::InvalidConfig(format!("cannot read {}: {e}", path.display()))
    })?;
    MlpScorer::new(MlpWeights::from_json(&text)?)
}

enum Correct {
    None,
    Glm(Dataset<f64>),
    Mlp(MlpScorer<f64>),
}

/// Splits the data and prepares every fold. `correct_alpha` requests a
/// correct-prediction model, built with that shift when synthetic.
pub(crate) fn prepare_folds(
    cfg: &ExperimentConfig,
    correct_alpha: Option<f64>,
) -> Result<Vec<FoldData>> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let mlp = match &cfg.model {
        ModelSpec::Glm => None,
        ModelSpec::Mlp { weights_path, .. } => Some(load_mlp(weights_path)?),
    };
    let correct = match (correct_alpha, &cfg.model) {
        (None, _) => Correct::None,
        (Some(a), ModelSpec::Glm) => {
            let c = load_correct_dataset(cfg, a)?;
            if c.dim() != data.dim() {
                return Err(RecourseError::Data(
                    "shifted dataset has different columns".into(),
                ));
            }
            Correct::Glm(c)
        }
        (
            Some(_),
            ModelSpec::Mlp {
                correct_weights_path: Some(p),
                ..
            },
        ) => Correct::Mlp(load_mlp(p)?),
        (Some(_), ModelSpec::Mlp { .. }) => {
            return Err(RecourseError::InvalidConfig(
                "a correct prediction needs model.correct_weights_path".into(),
            ))
        }
    };
    if let Some(m) = &mlp {
        if m.dim() != data.dim() {
            return Err(RecourseError::InvalidConfig(format!(
                "network expects {} features, data has {}",
                m.dim(),
                data.dim()
            )));
        }
    }

    let plan = kfold(data.len(), cfg.folds, cfg.seed)?;
    let mut folds = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let train_idx = plan.train_indices(fold);
        let test_idx = plan.test_indices(fold);
        let (mut train, mut test) = (data.subset(&train_idx), data.subset(&test_idx));
        let stats = if cfg.normalizes() {
            let s = NormalizationStats::fit(&train)?;
            train = s.apply(&train);
            test = s.apply(&test);
            Some(s)
        } else {
            None
        };

        let base = match &mlp {
            Some(m) => BaseModel::Mlp(m.clone()),
            None => BaseModel::Glm(train_logistic(&train, &cfg.train)?),
        };
        let correct_glm = match &correct {
            Correct::Glm(c) => {
                let idx = if c.len() == data.len() {
                    train_idx.clone()
                } else {
                    (0..c.len()).collect()
                };
                let mut ct = c.subset(&idx);
                if let Some(s) = &stats {
                    ct = s.apply(&ct);
                }
                Some(train_logistic(&ct, &cfg.train)?)
            }
            _ => None,
        };

        let scorer = base.scorer();
        let mut rows = Vec::new();
        for (k, x) in test.features.iter().enumerate() {
            if predict_label(scorer.as_ref(), x)? == 0 {
                rows.push((test_idx[k], x.clone()));
            }
        }
        drop(scorer);
        if let Some(cap) = cfg.max_instances_per_fold {
            rows.truncate(cap);
        }
        if rows.is_empty() {
            log::warn!("fold {fold}: no instances with the undesirable label, skipping");
            continue;
        }

        let surrogate_cfg = |row: usize| SurrogateConfig {
            seed: derive_seed(cfg.surrogate.seed, fold, row),
            ..cfg.surrogate.clone()
        };
        let instances = rows
            .into_par_iter()
            .map(|(row, x0)| {
                let theta0 = match &base {
                    BaseModel::Glm(p) => p.clone(),
                    BaseModel::Mlp(m) => fit_local_linear(m, &x0, &surrogate_cfg(row))?,
                };
                let correct = match &correct {
                    Correct::None => None,
                    Correct::Glm(_) => correct_glm.clone(),
                    Correct::Mlp(m) => Some(fit_local_linear(m, &x0, &surrogate_cfg(row))?),
                };
                Ok(Instance {
                    row,
                    x0,
                    theta0,
                    correct,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        folds.push(FoldData {
            fold,
            base,
            instances,
        });
    }
    if folds.is_empty() {
        return Err(RecourseError::Data(
            "no fold has instances needing recourse".into(),
        ));
    }
    Ok(folds)
}

/// λ whose robust recourses are most often valid under the base model;
/// ties go to the larger λ.
pub(crate) fn select_lambda(cfg: &ExperimentConfig, fold: &FoldData, alpha: f64) -> Result<f64> {
    let scorer = fold.base.scorer();
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &cfg.lambda_grid {
        let recourses = fold
            .instances
            .par_iter()
            .map(|inst| {
                let q = RecourseQuery::new(inst.x0.clone(), lambda)?;
                let n = Neighborhood::new(inst.theta0.clone(), alpha)?;
                Ok(optimal_robust_recourse(&q, &n, &cfg.blend.solver)?.x_prime)
            })
            .collect::<Result<Vec<_>>>()?;
        let v = validity(scorer.as_ref(), &recourses)?;
        if best.is_none_or(|(bv, bl)| v > bv || (v == bv && lambda > bl)) {
            best = Some((v, lambda));
        }
    }
    let (v, lambda) = best.expect("non-empty lambda grid");
    log::info!(
        "fold {}: selected lambda {lambda} (validity {v:.4})",
        fold.fold
    );
    Ok(lambda)
}
