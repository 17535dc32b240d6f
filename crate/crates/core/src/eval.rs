//! Metrics, student-level cross-validation and the ablation comparisons.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{student_kfold, Dataset, FoldAssignment};
use crate::encoder::{encode_students, ModelFamily, ModelSpec, Vocabulary, WindowSet};
use crate::error::{Error, Result};
use crate::model::{train_with_eval, TrainConfig, TrainedModel};

/// Probability lower bound applied before taking logs.
pub const NLL_EPSILON: f64 = 1e-12;

/// Area under the ROC curve; tied scores contribute one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum over positives of (#negatives below + half the tied negatives).
    let mut credit = 0.0;
    let mut negatives_below = 0usize;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group_pos = order[start..end].iter().filter(|&&i| labels[i]).count();
        let group_neg = (end - start) - group_pos;
        credit += group_pos as f64 * (negatives_below as f64 + group_neg as f64 / 2.0);
        negatives_below += group_neg;
        start = end;
    }
    Ok(credit / (positives as f64 * negatives as f64))
}

/// Mean negative log-likelihood with probabilities clipped to `[eps, 1 - eps]`.
pub fn nll(probs: &[f64], labels: &[bool]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(NLL_EPSILON, 1.0 - NLL_EPSILON);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Fraction of rows where `p >= threshold` agrees with the label.
pub fn accuracy(probs: &[f64], labels: &[bool], threshold: f64) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let hits = probs.iter().zip(labels).filter(|(&p, &y)| (p >= threshold) == y).count();
    hits as f64 / probs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    /// `None` when the test fold holds a single class.
    pub auc: Option<f64>,
    pub nll: f64,
    pub acc: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub family: ModelFamily,
    pub dim: usize,
    pub folds: Vec<FoldMetrics>,
    pub auc: Option<Summary>,
    pub nll: Summary,
    pub acc: Summary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ModelResult {
    fn from_folds(spec: &ModelSpec, folds: Vec<FoldMetrics>) -> Self {
        let mut warnings = Vec::new();
        let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
        for f in folds.iter().filter(|f| f.auc.is_none()) {
            let msg = format!("{}: fold {} has single-class test labels; AUC excluded", spec.label(), f.fold);
            warn!("{msg}");
            warnings.push(msg);
        }
        let nlls: Vec<f64> = folds.iter().map(|f| f.nll).collect();
        let accs: Vec<f64> = folds.iter().map(|f| f.acc).collect();
        Self {
            family: spec.family,
            dim: spec.dim,
            auc: Summary::of(&aucs),
            nll: Summary::of(&nlls).expect("at least one fold"),
            acc: Summary::of(&accs).expect("at least one fold"),
            folds,
            warnings,
        }
    }

    pub fn mean_auc(&self) -> f64 {
        self.auc.map_or(f64::NAN, |s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub folds: usize,
    pub seed: u64,
    pub results: Vec<ModelResult>,
}

impl MetricsTable {
    pub fn get(&self, family: ModelFamily, dim: usize) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.family == family && r.dim == dim)
    }

    /// Aligned plain-text table, best AUC first.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<&ModelResult> = self.results.iter().collect();
        rows.sort_by(|a, b| b.mean_auc().total_cmp(&a.mean_auc()));
        let fmt = |s: Option<Summary>| s.map_or("undefined".to_owned(), |s| format!("{:.3} ± {:.3}", s.mean, s.std));
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>4} {:>15} {:>15} {:>15}", "model", "dim", "AUC", "NLL", "ACC");
        for r in rows {
            let _ = writeln!(
                out,
                "{:<18} {:>4} {:>15} {:>15} {:>15}",
                r.family.name(),
                r.dim,
                fmt(r.auc),
                fmt(Some(r.nll)),
                fmt(Some(r.acc))
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub train: TrainConfig,
    /// Keep fitted `d = 0` models of each fold.
    pub keep_linear_models: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            train: TrainConfig::default(),
            keep_linear_models: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldModel {
    pub fold: usize,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct CvRun {
    pub table: MetricsTable,
    pub assignment: FoldAssignment,
    /// Kept models, grouped by spec in the order the specs were given.
    pub models: Vec<(ModelSpec, Vec<FoldModel>)>,
}

/// Runs `k`-fold cross-validation at the student level for every spec.
///
/// Test students never contribute training rows; their own counters start
/// empty and evolve along their test-time history.
pub fn cross_validate(dataset: &Dataset, specs: &[ModelSpec], config: &CvConfig) -> Result<CvRun> {
    if specs.is_empty() {
        return Err(Error::config("no model specs to evaluate"));
    }
    let assignment = student_kfold(dataset, config.folds, config.seed)?;
    let vocabulary = Vocabulary::from(dataset);
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..config.folds).map(move |f| (s, f)))
        .collect();

    let outcomes: Vec<(FoldMetrics, Option<TrainedModel>)> = jobs
        .par_iter()
        .map(|&(s, fold)| {
            let spec = &specs[s];
            let train_design = encode_students(dataset, spec, &assignment.students_not_in(fold))?;
            let test_design = encode_students(dataset, spec, &assignment.students_in(fold))?;
            let mut train_cfg = config.train.clone();
            train_cfg.logistic.seed = config.seed;
            train_cfg.gibbs.seed = config.seed.wrapping_add(fold as u64);
            let (model, probs) = train_with_eval(&train_design, &vocabulary, &train_cfg, &test_design.rows)?;
            let labels = test_design.labels();
            let metrics = FoldMetrics {
                fold,
                auc: auc(&probs, &labels).ok(),
                nll: nll(&probs, &labels),
                acc: accuracy(&probs, &labels, 0.5),
                train_rows: train_design.len(),
                test_rows: test_design.len(),
                converged: model.training.converged,
            };
            let keep = config.keep_linear_models && spec.dim == 0;
            Ok((metrics, keep.then_some(model)))
        })
        .collect::<Result<_>>()?;

    let mut outcomes = outcomes.into_iter();
    let mut results = Vec::with_capacity(specs.len());
    let mut models = Vec::new();
    for spec in specs {
        let mut folds = Vec::with_capacity(config.folds);
        let mut kept = Vec::new();
        for fold in 0..config.folds {
            let (metrics, model) = outcomes.next().expect("one outcome per job");
            folds.push(metrics);
            if let Some(model) = model {
                kept.push(FoldModel { fold, model });
            }
        }
        results.push(ModelResult::from_folds(spec, folds));
        if !kept.is_empty() {
            models.push((spec.clone(), kept));
        }
    }
    Ok(CvRun {
        table: MetricsTable {
            folds: config.folds,
            seed: config.seed,
            results,
        },
        assignment,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedFold {
    pub fold: usize,
    pub baseline_auc: Option<f64>,
    pub variant_auc: Option<f64>,
    pub delta: Option<f64>,
}

/// `baseline - variant` AUC per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub baseline: ModelFamily,
    pub variant: ModelFamily,
    pub folds: Vec<PairedFold>,
    pub delta: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub dataset: String,
    pub table: MetricsTable,
    pub comparisons: Vec<Comparison>,
}

impl AblationReport {
    /// `dataset,model,fold,auc` rows for every model in the suite.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,model,fold,auc\n");
        for r in &self.table.results {
            for f in &r.folds {
                let auc = f.auc.map_or(String::new(), |a| format!("{a:.6}"));
                let _ = writeln!(out, "{},{},{},{}", self.dataset, r.family.name(), f.fold, auc);
            }
        }
        out
    }
}

const ABLATIONS: [(&str, ModelFamily, ModelFamily); 3] = [
    ("time-windows-vs-plain-counts", ModelFamily::Das3h, ModelFamily::Das3hPlaincounts),
    ("per-skill-vs-shared-window-weights", ModelFamily::Das3h, ModelFamily::Das3h1p),
    ("dash-items-vs-dash-kc", ModelFamily::DashItems, ModelFamily::DashKc),
];

/// The three paired `d = 0` ablations, evaluated on identical folds.
pub fn ablation_suite(dataset: &Dataset, name: &str, windows: &WindowSet, config: &CvConfig) -> Result<AblationReport> {
    let families = [
        ModelFamily::Das3h,
        ModelFamily::Das3hPlaincounts,
        ModelFamily::Das3h1p,
        ModelFamily::DashItems,
        ModelFamily::DashKc,
    ];
    let specs = families
        .iter()
        .map(|&f| ModelSpec::new(f, 0, windows.clone()))
        .collect::<Result<Vec<_>>>()?;
    let run = cross_validate(dataset, &specs, config)?;
    let comparisons = ABLATIONS
        .iter()
        .map(|&(name, baseline, variant)| {
            let base = run.table.get(baseline, 0).expect("baseline evaluated");
            let var = run.table.get(variant, 0).expect("variant evaluated");
            let folds: Vec<PairedFold> = base
                .folds
                .iter()
                .zip(&var.folds)
                .map(|(b, v)| PairedFold {
                    fold: b.fold,
                    baseline_auc: b.auc,
                    variant_auc: v.auc,
                    delta: b.auc.zip(v.auc).map(|(b, v)| b - v),
                })
                .collect();
            let deltas: Vec<f64> = folds.iter().filter_map(|f| f.delta).collect();
            Comparison {
                name: name.to_owned(),
                baseline,
                variant,
                delta: Summary::of(&deltas),
                folds,
            }
        })
        .collect();
    Ok(AblationReport {
        dataset: name.to_owned(),
        table: run.table,
        comparisons,
    })
}
