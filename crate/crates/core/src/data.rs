//! Dataset synthesis, CSV ingestion, standardization and k-fold splitting.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{RecourseError, Result};
use crate::scalar::{all_finite, Scalar};

/// Two isotropic Gaussian classes with equally likely labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_points: usize,
    pub mu0: [f64; 2],
    pub mu1: [f64; 2],
    /// Per-coordinate variance of both classes.
    pub variance: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_points: 1000,
            mu0: [-2.0, -2.0],
            mu1: [2.0, 2.0],
            variance: 0.5,
            seed: 0,
        }
    }
}

/// Per-feature standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormalizationStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// Features with zero spread; they map to 0.
    pub constant: Vec<bool>,
}

impl<T: Scalar> NormalizationStats<T> {
    /// Mean and population standard deviation of every column.
    pub fn fit(ds: &Dataset<T>) -> Result<Self> {
        if ds.is_empty() {
            return Err(RecourseError::Empty("dataset"));
        }
        let d = ds.dim();
        let n = T::from_usize(ds.len()).expect("row count");
        let mut mean = vec![T::zero(); d];
        for row in &ds.features {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); d];
        for row in &ds.features {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<T> = var.into_iter().map(|s| (s / n).sqrt()).collect();
        let constant = std.iter().map(|&s| s <= T::epsilon()).collect();
        Ok(NormalizationStats {
            mean,
            std,
            constant,
        })
    }

    pub fn transform(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                if self.constant[i] {
                    T::zero()
                } else {
                    (v - self.mean[i]) / self.std[i]
                }
            })
            .collect()
    }

    /// Maps a point (for example a recourse) back to raw feature units.
    pub fn inverse(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| {
                if self.constant[i] {
                    self.mean[i]
                } else {
                    v * self.std[i] + self.mean[i]
                }
            })
            .collect()
    }

    pub fn apply(&self, ds: &Dataset<T>) -> Dataset<T> {
        Dataset {
            features: ds.features.iter().map(|r| self.transform(r)).collect(),
            labels: ds.labels.clone(),
            feature_names: ds.feature_names.clone(),
            normalization: Some(self.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub features: Vec<Vec<T>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub normalization: Option<NormalizationStats<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<Vec<T>>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let ds = Dataset {
            features,
            labels,
            feature_names,
            normalization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(RecourseError::Data(format!(
                "{} feature rows but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let d = self.feature_names.len();
        for (r, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return Err(RecourseError::Data(format!(
                    "row {r} has {} features, expected {d}",
                    row.len()
                )));
            }
            if !all_finite(row) {
                return Err(RecourseError::NonFinite(format!("dataset row {r}")));
            }
        }
        if let Some(bad) = self.labels.iter().find(|&&y| y > 1) {
            return Err(RecourseError::Data(format!("label {bad} is not binary")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ds: Dataset<T> = serde_json::from_str(s)?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Labels drawn uniformly, features from the Gaussian of the drawn label.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    if spec.n_points < 2 {
        return Err(RecourseError::InvalidConfig(
            "need at least two points".into(),
        ));
    }
    if !(spec.variance > 0.0 && spec.variance.is_finite()) {
        return Err(RecourseError::InvalidConfig(
            "variance must be positive".into(),
        ));
    }
    let noise = Normal::new(0.0, spec.variance.sqrt())
        .map_err(|e| RecourseError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let y = u8::from(rng.random_bool(0.5));
        let mu = if y == 1 { spec.mu1 } else { spec.mu0 };
        features.push(
            mu.iter()
                .map(|&m| T::lit(m + noise.sample(&mut rng)))
                .collect(),
        );
        labels.push(y);
    }
    Dataset::new(features, labels, vec!["x1".into(), "x2".into()])
}

/// [`generate_synthetic`] with the class-0 mean moved by `[shift, 0]`.
pub fn shifted_synthetic<T: Scalar>(spec: &SyntheticSpec, shift: f64) -> Result<Dataset<T>> {
    let mut moved = spec.clone();
    moved.mu0[0] += shift;
    generate_synthetic(&moved)
}

/// Reads a headered CSV with numeric feature columns and one label column.
/// Rows whose label equals `positive_label` get label 1, the rest 0.
pub fn ingest_csv<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_label: &str,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(RecourseError::Data(format!("{} is empty", path.display())));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| RecourseError::Data(format!("label column '{label_column}' not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // Line numbers are 1-based and count the header.
        let line = r + 2;
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                RecourseError::Data(format!(
                    "line {line}: column '{}' value '{cell}' is not numeric",
                    &headers[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(RecourseError::NonFinite(format!(
                    "line {line}, column '{}'",
                    &headers[i]
                )));
            }
            row.push(T::lit(v));
        }
        features.push(row);
        labels.push(u8::from(&record[label_idx] == positive_label));
    }
    if labels.is_empty() {
        return Err(RecourseError::Data(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    if !labels.contains(&1) {
        return Err(RecourseError::Data(format!(
            "positive label '{positive_label}' never occurs in column '{label_column}'"
        )));
    }
    Dataset::new(features, labels, feature_names)
}

/// Standardizes every feature of `ds` with statistics computed on `ds`.
pub fn normalize<T: Scalar>(ds: &Dataset<T>) -> Result<Dataset<T>> {
    Ok(NormalizationStats::fit(ds)?.apply(ds))
}

/// Balanced random assignment of `n` indices to `k` folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || k > n {
        return Err(RecourseError::InvalidConfig(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed,
    })
}
