//! Experiment orchestration: cross-validated studies written as CSV, SVG and
//! a column schema under `<out>/<study>/<dataset>_<model>.*`.

mod certify;
mod config;
mod pipeline;
mod predictions;
mod report;
mod studies;

pub use certify::{
    certification_instances, run_certification, CertifyCase, CertifyConfig, CertifyReport,
};
pub use config::{DatasetSpec, ExperimentConfig, ModelSpec, PredictionSetSpec, ValidityGrid};
pub use pipeline::{derive_seed, load_dataset};
pub use predictions::{
    build_predictions, corner_predictions, default_epsilon, epsilon_predictions, NamedPrediction,
};
pub use report::{line_chart, Series, StudyFiles};
pub use studies::{
    compute_smoothness, compute_tradeoff, compute_validity, run_smoothness_study,
    run_tradeoff_study, run_validity_study, InstanceRecord, SmoothnessReport, SmoothnessRow,
    TradeoffReport, TradeoffRow, ValidityReport, ValidityRow, METHOD_EXACT, METHOD_ROAR,
};
