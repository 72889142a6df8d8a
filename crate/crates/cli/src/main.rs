use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use recourse_core::adversary::Neighborhood;
use recourse_core::data::{generate_synthetic, Dataset, NormalizationStats};
use recourse_core::glm::{CostSpec, ModelParams, RecourseQuery};
use recourse_core::harness::{
    load_dataset, run_certification, run_smoothness_study, run_tradeoff_study, run_validity_study,
    CertifyConfig, DatasetSpec, ExperimentConfig, StudyFiles,
};
use recourse_core::models::{accuracy, train_logistic_report, GlmScorer};
use recourse_core::solver::optimal_robust_recourse;
use recourse_core::tradeoff::{blended_recourse, TradeoffQuery};
use recourse_core::{RecourseError, Result};

/// Robust and consistent recourse for linear classifiers.
#[derive(Parser)]
#[command(name = "recourse", version)]
struct Cli {
    /// JSON experiment configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for study files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as CSV.
    GenData {
        /// Destination file; defaults to `<out>/synthetic.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Fit logistic regression on the whole configured dataset.
    Train {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recourse for one instance, printed as JSON.
    Recourse(RecourseArgs),
    /// Robustness/consistency trade-off study.
    Pareto,
    /// Smoothness study around the correct prediction.
    Smoothness,
    /// Worst-case validity study against the baseline.
    Validity,
    /// Compare the exact solver against the grid oracle.
    OracleCheck {
        #[arg(long)]
        instances: Option<usize>,
    },
}

#[derive(Args)]
struct RecourseArgs {
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    x0: Vec<f64>,
    /// Base model weights.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    theta: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    intercept: Option<f64>,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    lambda: f64,
    /// Per-feature cost weights.
    #[arg(long, value_delimiter = ',')]
    cost: Option<Vec<f64>>,
    /// Predicted future weights; enables blending with `--beta`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "beta"
    )]
    prediction: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    prediction_intercept: Option<f64>,
    #[arg(long, requires = "prediction")]
    beta: Option<f64>,
}

fn params(weights: Vec<f64>, intercept: Option<f64>) -> Result<ModelParams<f64>> {
    match intercept {
        Some(b) => ModelParams::new(weights, b),
        None => ModelParams::without_intercept(weights),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(value: &serde_json::Value, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn files_json(files: &StudyFiles) -> serde_json::Value {
    json!({
        "csv": files.csv,
        "svg": files.svg,
        "schema": files.schema,
        "instances": files.instances,
    })
}

fn write_dataset_csv(path: &Path, ds: &Dataset<f64>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    w.write_record(&header)?;
    for (x, y) in ds.features.iter().zip(&ds.labels) {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.push(y.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn recourse(args: RecourseArgs) -> Result<serde_json::Value> {
    let mut q = RecourseQuery::new(args.x0, args.lambda)?;
    if let Some(c) = args.cost {
        q = q.with_cost(CostSpec::new(c)?)?;
    }
    let n = Neighborhood::new(params(args.theta, args.intercept)?, args.alpha)?;
    let plan = match (args.prediction, args.beta) {
        (Some(w), Some(beta)) => blended_recourse(
            &TradeoffQuery {
                query: q,
                neighborhood: n,
                prediction: params(w, args.prediction_intercept)?,
                beta,
            },
            &Default::default(),
        )?,
        _ => optimal_robust_recourse(&q, &n, &Default::default())?,
    };
    Ok(serde_json::to_value(plan)?)
}

/// Returns whether the command succeeded on its own terms.
fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::GenData { output, n_points } => {
            let DatasetSpec::Synthetic(mut spec) = cfg.dataset else {
                return Err(RecourseError::InvalidConfig(
                    "gen-data needs a synthetic dataset".into(),
                ));
            };
            if let Some(n) = n_points {
                spec.n_points = n;
            }
            let ds = generate_synthetic(&spec)?;
            let path = output.unwrap_or_else(|| cfg.out_dir.join("synthetic.csv"));
            write_dataset_csv(&path, &ds)?;
            emit(&json!({ "path": path, "rows": ds.len() }), None)?;
        }
        Command::Train { output } => {
            let mut ds = load_dataset(&cfg.dataset)?;
            let stats = if cfg.normalizes() {
                let s = NormalizationStats::fit(&ds)?;
                ds = s.apply(&ds);
                Some(s)
            } else {
                None
            };
            let report = train_logistic_report(&ds, &cfg.train)?;
            let acc = accuracy(&GlmScorer::logistic(report.params.clone()), &ds)?;
            log::info!("trained in {} epochs, accuracy {acc:.4}", report.epochs);
            let value = json!({
                "params": report.params,
                "normalization": stats,
                "accuracy": acc,
                "epochs": report.epochs,
                "converged": report.converged,
            });
            emit(&value, output.as_deref())?;
        }
        Command::Recourse(args) => emit(&recourse(args)?, None)?,
        Command::Pareto => {
            let (report, files) = run_tradeoff_study(&cfg)?;
            emit(
                &json!({ "files": files_json(&files), "roar_gap": report.roar_gap(), "lambdas": report.lambdas }),
                None,
            )?;
        }
        Command::Smoothness => {
            let (report, files) = run_smoothness_study(&cfg)?;
            emit(
                &json!({ "files": files_json(&files), "mean_epsilon": report.mean_epsilon }),
                None,
            )?;
        }
        Command::Validity => {
            let (report, files) = run_validity_study(&cfg)?;
            emit(
                &json!({ "files": files_json(&files), "rows": report.rows.len() }),
                None,
            )?;
        }
        Command::OracleCheck { instances } => {
            let mut check = CertifyConfig {
                seed: cfg.seed,
                ..CertifyConfig::default()
            };
            if let Some(k) = instances {
                check.instances = k;
            }
            let report = run_certification(&check)?;
            for case in report.cases.iter().filter(|c| !c.passed) {
                log::warn!(
                    "d={} alpha={} lambda={}: solver {} vs oracle {}",
                    case.dim,
                    case.alpha,
                    case.lambda,
                    case.solver_value,
                    case.oracle_value
                );
            }
            emit(
                &json!({
                    "instances": report.cases.len(),
                    "failures": report.failures,
                    "max_gap": report.max_gap,
                }),
                None,
            )?;
            return Ok(report.failures == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 2 })
        }
    }
}
