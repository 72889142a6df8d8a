use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{worst_case_shared_model, Neighborhood};
use crate::error::{RecourseError, Result};
use crate::glm::{ModelParams, RecourseQuery};
use crate::roar::roar_recourse;
use crate::solver::{consistent_recourse, optimal_robust_recourse};
use crate::tradeoff::{blended_recourse, pareto_frontier, worst_case_total, TradeoffQuery};

use super::config::{ExperimentConfig, ModelSpec, PredictionSetSpec};
use super::pipeline::{prepare_folds, select_lambda, FoldData, Instance};
use super::predictions::{
    build_predictions, default_epsilon, epsilon_predictions, NamedPrediction,
};
use super::report::{
    line_chart, study_stem, with_ext, write_csv, write_jsonl, write_schema, Series, StudyFiles,
};

/// Running mean keyed by an ordered label.
#[derive(Default)]
struct Means<K: Ord> {
    sums: BTreeMap<K, (Vec<f64>, usize)>,
}

impl<K: Ord> Means<K> {
    fn add(&mut self, key: K, values: &[f64]) {
        let e = self
            .sums
            .entry(key)
            .or_insert_with(|| (vec![0.0; values.len()], 0));
        e.0.iter_mut().zip(values).for_each(|(s, v)| *s += v);
        e.1 += 1;
    }

    fn into_means(self) -> impl Iterator<Item = (K, Vec<f64>, usize)> {
        self.sums.into_iter().map(|(k, (s, c))| {
            let n = c as f64;
            (k, s.into_iter().map(|v| v / n).collect(), c)
        })
    }
}

/// Per-instance record for re-checking metrics from the serialized plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub fold: usize,
    pub row: usize,
    pub method: String,
    pub prediction: String,
    pub beta: Option<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub x0: Vec<f64>,
    pub theta0: ModelParams<f64>,
    pub prediction_params: ModelParams<f64>,
    pub x_prime: Vec<f64>,
    pub robustness: f64,
    pub consistency: f64,
    pub l1_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub method: String,
    pub prediction: String,
    pub beta: Option<f64>,
    pub robustness: f64,
    pub consistency: f64,
    pub l1_cost: f64,
    /// Share of recourses valid under the prediction.
    pub validity: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffReport {
    pub alpha: f64,
    /// Selected λ per fold that had instances.
    pub lambdas: Vec<(usize, f64)>,
    pub rows: Vec<TradeoffRow>,
    pub records: Vec<InstanceRecord>,
}

impl TradeoffReport {
    /// Mean robustness of the baseline minus that of the exact solver,
    /// averaged over predictions.
    pub fn roar_gap(&self) -> f64 {
        let mean = |pred: &dyn Fn(&TradeoffRow) -> bool| {
            let v: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| pred(r))
                .map(|r| r.robustness)
                .collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        mean(&|r| r.method == "roar") - mean(&|r| r.method == "blend" && r.beta == Some(1.0))
    }
}

fn instance_predictions(
    cfg: &ExperimentConfig,
    n: &Neighborhood<f64>,
    inst: &Instance,
) -> Result<Vec<NamedPrediction>> {
    build_predictions(&cfg.predictions, n, inst.correct.as_ref(), cfg.epsilon).ok_or_else(|| {
        RecourseError::InvalidConfig("epsilon predictions need a correct-prediction model".into())
    })
}

fn needs_correct(cfg: &ExperimentConfig) -> bool {
    matches!(cfg.predictions, PredictionSetSpec::Epsilon { .. })
}

pub fn compute_tradeoff(cfg: &ExperimentConfig) -> Result<TradeoffReport> {
    let alpha = cfg.tradeoff_alpha();
    let folds = prepare_folds(cfg, needs_correct(cfg).then_some(alpha))?;
    let mut means: Means<(u8, String, usize)> = Means::default();
    let mut lambdas = Vec::new();
    let mut records = Vec::new();
    let mut order: Vec<String> = Vec::new();

    for fold in &folds {
        let lambda = select_lambda(cfg, fold, alpha)?;
        lambdas.push((fold.fold, lambda));
        let per_instance = fold
            .instances
            .par_iter()
            .map(|inst| tradeoff_instance(cfg, fold, inst, alpha, lambda))
            .collect::<Result<Vec<_>>>()?;
        for recs in per_instance {
            for r in recs {
                if !order.contains(&r.prediction) {
                    order.push(r.prediction.clone());
                }
                let pidx = order
                    .iter()
                    .position(|p| *p == r.prediction)
                    .expect("present");
                let (method, bidx) = match r.beta {
                    Some(b) => (
                        0,
                        cfg.beta_grid
                            .iter()
                            .position(|&x| x == b)
                            .expect("grid beta"),
                    ),
                    None => (1, 0),
                };
                let valid = f64::from(u8::from(r.prediction_params.score(&r.x_prime)? >= 0.0));
                means.add(
                    (method, format!("{pidx:04}"), bidx),
                    &[r.robustness, r.consistency, r.l1_cost, valid],
                );
                if cfg.write_instances {
                    records.push(r);
                }
            }
        }
    }

    let rows = means
        .into_means()
        .map(|((method, pidx, bidx), m, count)| TradeoffRow {
            method: if method == 0 { "blend" } else { "roar" }.into(),
            prediction: order[pidx.parse::<usize>().expect("padded index")].clone(),
            beta: (method == 0).then(|| cfg.beta_grid[bidx]),
            robustness: m[0],
            consistency: m[1],
            l1_cost: m[2],
            validity: m[3],
            instances: count,
        })
        .collect();
    Ok(TradeoffReport {
        alpha,
        lambdas,
        rows,
        records,
    })
}

fn tradeoff_instance(
    cfg: &ExperimentConfig,
    fold: &FoldData,
    inst: &Instance,
    alpha: f64,
    lambda: f64,
) -> Result<Vec<InstanceRecord>> {
    let q = RecourseQuery::new(inst.x0.clone(), lambda)?;
    let n = Neighborhood::new(inst.theta0.clone(), alpha)?;
    let preds = instance_predictions(cfg, &n, inst)?;
    let robust_ref = optimal_robust_recourse(&q, &n, &cfg.blend.solver)?.worst_case_total;
    let roar = roar_recourse(&q, &n, &cfg.roar)?;
    let roar_robustness = worst_case_total(&q, &n, &roar.x_prime)? - robust_ref;

    let record =
        |p: &NamedPrediction, method: &str, beta: Option<f64>, x: Vec<f64>, r: f64, c: f64| {
            InstanceRecord {
                fold: fold.fold,
                row: inst.row,
                method: method.into(),
                prediction: p.id.clone(),
                beta,
                alpha,
                lambda,
                x0: inst.x0.clone(),
                theta0: inst.theta0.clone(),
                prediction_params: p.params.clone(),
                l1_cost: q.weighted_l1(&x),
                x_prime: x,
                robustness: r,
                consistency: c,
            }
        };

    let mut out = Vec::new();
    for p in &preds {
        let tq = TradeoffQuery {
            query: q.clone(),
            neighborhood: n.clone(),
            prediction: p.params.clone(),
            beta: 1.0,
        };
        for pt in pareto_frontier(&tq, &cfg.beta_grid, &cfg.blend)? {
            out.push(record(
                p,
                "blend",
                Some(pt.beta),
                pt.x_prime,
                pt.robustness,
                pt.consistency,
            ));
        }
        let consistent_ref = consistent_recourse(&q, &p.params, &cfg.blend.solver)?;
        let c = q.total_cost_unchecked(&roar.x_prime, &p.params)
            - q.total_cost_unchecked(&consistent_ref.x_prime, &p.params);
        out.push(record(
            p,
            "roar",
            None,
            roar.x_prime.clone(),
            roar_robustness,
            c,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessRow {
    pub prediction: String,
    pub beta: f64,
    pub smoothness: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessReport {
    pub alpha: f64,
    pub lambdas: Vec<(usize, f64)>,
    /// Mean perturbation size across instances.
    pub mean_epsilon: f64,
    pub rows: Vec<SmoothnessRow>,
}

impl SmoothnessReport {
    pub fn value(&self, prediction: &str, beta: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.prediction == prediction && r.beta == beta)
            .map(|r| r.smoothness)
    }
}

pub fn compute_smoothness(cfg: &ExperimentConfig) -> Result<SmoothnessReport> {
    let alpha = cfg.tradeoff_alpha();
    let folds = prepare_folds(cfg, Some(alpha))?;
    let mut means: Means<(usize, usize)> = Means::default();
    let mut lambdas = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    let mut eps_sum = 0.0;
    let mut eps_count = 0usize;

    for fold in &folds {
        let lambda = select_lambda(cfg, fold, alpha)?;
        lambdas.push((fold.fold, lambda));
        let per_instance = fold
            .instances
            .par_iter()
            .map(|inst| {
                let q = RecourseQuery::new(inst.x0.clone(), lambda)?;
                let n = Neighborhood::new(inst.theta0.clone(), alpha)?;
                let correct = n.project(inst.correct.as_ref().expect("requested correct model"));
                let eps = cfg.epsilon.unwrap_or_else(|| default_epsilon(&n, &correct));
                let preds = epsilon_predictions(&n, &correct, eps);
                let ideal = consistent_recourse(&q, &correct, &cfg.blend.solver)?;
                let ideal_cost = q.total_cost_unchecked(&ideal.x_prime, &correct);
                let mut vals = Vec::new();
                for p in &preds {
                    for &beta in &cfg.beta_grid {
                        let tq = TradeoffQuery {
                            query: q.clone(),
                            neighborhood: n.clone(),
                            prediction: p.params.clone(),
                            beta,
                        };
                        let x = blended_recourse(&tq, &cfg.blend)?.x_prime;
                        vals.push((
                            p.id.clone(),
                            q.total_cost_unchecked(&x, &correct) - ideal_cost,
                        ));
                    }
                }
                Ok((eps, vals))
            })
            .collect::<Result<Vec<_>>>()?;
        for (eps, vals) in per_instance {
            eps_sum += eps;
            eps_count += 1;
            for (k, (id, v)) in vals.into_iter().enumerate() {
                if !ids.contains(&id) {
                    ids.push(id.clone());
                }
                let pidx = ids.iter().position(|p| *p == id).expect("present");
                means.add((pidx, k % cfg.beta_grid.len()), &[v]);
            }
        }
    }
    let rows = means
        .into_means()
        .map(|((p, b), m, count)| SmoothnessRow {
            prediction: ids[p].clone(),
            beta: cfg.beta_grid[b],
            smoothness: m[0],
            instances: count,
        })
        .collect();
    Ok(SmoothnessReport {
        alpha,
        lambdas,
        mean_epsilon: eps_sum / eps_count.max(1) as f64,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRow {
    pub method: String,
    pub alpha: f64,
    pub lambda: f64,
    /// Share of recourses valid under the shared worst-case model.
    pub validity: f64,
    pub mean_cost: f64,
    pub instances: usize,
    /// Not dominated in (higher validity, lower cost) within its method.
    pub pareto: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub rows: Vec<ValidityRow>,
}

impl ValidityReport {
    pub fn get(&self, method: &str, alpha: f64, lambda: f64) -> Option<&ValidityRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.alpha == alpha && r.lambda == lambda)
    }
}

pub const METHOD_EXACT: &str = "exact";
pub const METHOD_ROAR: &str = "roar";

pub fn compute_validity(cfg: &ExperimentConfig) -> Result<ValidityReport> {
    if !matches!(cfg.model, ModelSpec::Glm) {
        return Err(RecourseError::InvalidConfig(
            "the validity study supports the logistic model only".into(),
        ));
    }
    let folds = prepare_folds(cfg, None)?;
    let grid: Vec<(f64, f64)> = cfg
        .validity
        .alphas
        .iter()
        .flat_map(|&a| cfg.validity.lambdas.iter().map(move |&l| (a, l)))
        .collect();

    let cells = grid
        .par_iter()
        .map(|&(alpha, lambda)| {
            let mut totals = [(0usize, 0.0f64, 0usize); 2];
            for fold in &folds {
                let n = Neighborhood::new(fold.instances[0].theta0.clone(), alpha)?;
                let mut sets: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
                for inst in &fold.instances {
                    let q = RecourseQuery::new(inst.x0.clone(), lambda)?;
                    sets[0].push(optimal_robust_recourse(&q, &n, &cfg.blend.solver)?.x_prime);
                    sets[1].push(roar_recourse(&q, &n, &cfg.roar)?.x_prime);
                }
                for (m, xs) in sets.iter().enumerate() {
                    let worst = worst_case_shared_model(&n, xs, &cfg.ascent)?;
                    for (x, inst) in xs.iter().zip(&fold.instances) {
                        totals[m].0 += usize::from(worst.score(x)? >= 0.0);
                        totals[m].1 += x
                            .iter()
                            .zip(&inst.x0)
                            .map(|(a, b)| (a - b).abs())
                            .sum::<f64>();
                        totals[m].2 += 1;
                    }
                }
            }
            Ok([METHOD_EXACT, METHOD_ROAR]
                .iter()
                .zip(totals)
                .map(|(method, (valid, cost, count))| ValidityRow {
                    method: (*method).into(),
                    alpha,
                    lambda,
                    validity: valid as f64 / count as f64,
                    mean_cost: cost / count as f64,
                    instances: count,
                    pareto: false,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<ValidityRow> = cells.into_iter().flatten().collect();
    let flags: Vec<bool> = rows
        .iter()
        .map(|r| {
            !rows.iter().any(|o| {
                o.method == r.method
                    && o.validity >= r.validity
                    && o.mean_cost <= r.mean_cost
                    && (o.validity > r.validity || o.mean_cost < r.mean_cost)
            })
        })
        .collect();
    rows.iter_mut().zip(flags).for_each(|(r, f)| r.pareto = f);
    Ok(ValidityReport { rows })
}

fn files_for(cfg: &ExperimentConfig, study: &str) -> Result<std::path::PathBuf> {
    study_stem(&cfg.out_dir, study, &cfg.dataset.name(), cfg.model.name())
}

pub fn run_tradeoff_study(cfg: &ExperimentConfig) -> Result<(TradeoffReport, StudyFiles)> {
    let report = compute_tradeoff(cfg)?;
    let stem = files_for(cfg, "tradeoff")?;
    let files = StudyFiles {
        csv: with_ext(&stem, ".csv"),
        svg: with_ext(&stem, ".svg"),
        schema: with_ext(&stem, ".schema.json"),
        instances: cfg
            .write_instances
            .then(|| with_ext(&stem, ".instances.jsonl")),
    };
    write_csv(&files.csv, &report.rows)?;
    write_schema(
        &files.schema,
        "tradeoff",
        &[
            (
                "method",
                "blend: trust-weighted learner; roar: gradient baseline",
            ),
            ("prediction", "identifier of the predicted model"),
            ("beta", "weight on the worst case (empty for the baseline)"),
            (
                "robustness",
                "mean excess worst-case total cost over the robust optimum",
            ),
            (
                "consistency",
                "mean excess total cost under the prediction over its optimum",
            ),
            (
                "l1_cost",
                "mean weighted L1 distance from the original instance",
            ),
            (
                "validity",
                "share of recourses labelled desirable by the prediction",
            ),
            ("instances", "number of instances averaged"),
        ],
    )?;
    let mut series: Vec<Series> = Vec::new();
    for r in report.rows.iter().filter(|r| r.method == "blend") {
        match series.iter_mut().find(|s| s.name == r.prediction) {
            Some(s) => s.points.push((r.consistency, r.robustness)),
            None => series.push(Series {
                name: r.prediction.clone(),
                points: vec![(r.consistency, r.robustness)],
            }),
        }
    }
    let roar: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.method == "roar")
        .map(|r| (r.consistency, r.robustness))
        .collect();
    series.push(Series {
        name: "roar".into(),
        points: roar,
    });
    let title = format!("Robustness vs consistency (alpha = {})", report.alpha);
    std::fs::write(
        &files.svg,
        line_chart(&title, "consistency", "robustness", &series),
    )?;
    if let Some(p) = &files.instances {
        write_jsonl(p, &report.records)?;
    }
    Ok((report, files))
}

pub fn run_smoothness_study(cfg: &ExperimentConfig) -> Result<(SmoothnessReport, StudyFiles)> {
    let report = compute_smoothness(cfg)?;
    let stem = files_for(cfg, "smoothness")?;
    let files = StudyFiles {
        csv: with_ext(&stem, ".csv"),
        svg: with_ext(&stem, ".svg"),
        schema: with_ext(&stem, ".schema.json"),
        instances: None,
    };
    write_csv(&files.csv, &report.rows)?;
    write_schema(
        &files.schema,
        "smoothness",
        &[
            (
                "prediction",
                "exact, plus_eps, minus_eps, plus_2eps or minus_2eps",
            ),
            ("beta", "weight on the worst case"),
            (
                "smoothness",
                "mean excess total cost under the correct model",
            ),
            ("instances", "number of instances averaged"),
        ],
    )?;
    let mut series: Vec<Series> = Vec::new();
    for r in &report.rows {
        match series.iter_mut().find(|s| s.name == r.prediction) {
            Some(s) => s.points.push((r.beta, r.smoothness)),
            None => series.push(Series {
                name: r.prediction.clone(),
                points: vec![(r.beta, r.smoothness)],
            }),
        }
    }
    std::fs::write(
        &files.svg,
        line_chart("Smoothness", "beta", "excess cost", &series),
    )?;
    Ok((report, files))
}

pub fn run_validity_study(cfg: &ExperimentConfig) -> Result<(ValidityReport, StudyFiles)> {
    let report = compute_validity(cfg)?;
    let stem = files_for(cfg, "validity")?;
    let files = StudyFiles {
        csv: with_ext(&stem, ".csv"),
        svg: with_ext(&stem, ".svg"),
        schema: with_ext(&stem, ".schema.json"),
        instances: None,
    };
    write_csv(&files.csv, &report.rows)?;
    write_schema(
        &files.schema,
        "validity",
        &[
            ("method", "exact: robust solver; roar: gradient baseline"),
            ("alpha", "radius of the model neighborhood"),
            ("lambda", "cost regularization"),
            (
                "validity",
                "share of recourses valid under one shared worst-case model",
            ),
            ("mean_cost", "mean L1 distance from the original instance"),
            ("instances", "number of recourses"),
            (
                "pareto",
                "true when no other row of the method has higher validity at lower cost",
            ),
        ],
    )?;
    let series: Vec<Series> = [METHOD_EXACT, METHOD_ROAR]
        .iter()
        .map(|m| {
            let mut pts: Vec<(f64, f64)> = report
                .rows
                .iter()
                .filter(|r| r.method == *m && r.pareto)
                .map(|r| (r.mean_cost, r.validity))
                .collect();
            pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            Series {
                name: (*m).into(),
                points: pts,
            }
        })
        .collect();
    std::fs::write(
        &files.svg,
        line_chart("Worst-case validity", "mean cost", "validity", &series),
    )?;
    Ok((report, files))
}
