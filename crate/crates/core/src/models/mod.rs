//! Trainable predictors behind one prediction surface.
//!
//! Every explainer works through [`Predictor`], so any function of a feature
//! row can be explained once wrapped in [`FnModel`]. The concrete models are
//! a brute-force k-NN, a bagged CART forest, and an oracle that evaluates the
//! dataset rule itself.

mod forest;
mod knn;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use forest::{Forest, ForestParams};
pub use knn::Knn;

use crate::dataset::{Dataset, DatasetSpec, Task};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricType, PerformanceMetric};
use crate::seed;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_REPEATS: usize = 5;

/// Uniform prediction surface shared by trained models and wrapped functions.
pub trait Predictor: Sync {
    fn model_id(&self) -> &str;
    fn task(&self) -> Task;
    fn n_features(&self) -> usize;
    fn metric(&self) -> Option<PerformanceMetric>;

    /// Class-1 probability for classifiers, the prediction for regressors.
    /// The row width is the caller's responsibility.
    fn value(&self, row: &[f64]) -> f64;

    fn check_width(&self, rows: &[Vec<f64>]) -> Result<()> {
        match rows.iter().find(|r| r.len() != self.n_features()) {
            Some(r) => Err(Error::WidthMismatch {
                expected: self.n_features(),
                got: r.len(),
            }),
            None => Ok(()),
        }
    }

    fn values(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_width(rows)?;
        Ok(rows.iter().map(|r| self.value(r)).collect())
    }

    /// Hard labels (threshold 0.5, ties to class 1) or regression values.
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let v = self.values(rows)?;
        Ok(match self.task() {
            Task::Classification => v.into_iter().map(|p| if p >= 0.5 { 1.0 } else { 0.0 }).collect(),
            Task::Regression => v,
        })
    }

    fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.task() != Task::Classification {
            return Err(Error::Unsupported {
                op: "predict_proba",
                what: format!("regression model `{}`", self.model_id()),
            });
        }
        self.values(rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Forest,
    Oracle,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Forest => "forest",
            ModelKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_k() -> usize {
    DEFAULT_K
}
fn default_trees() -> usize {
    ForestParams::default().n_trees
}
fn default_depth() -> usize {
    ForestParams::default().max_depth
}

/// What to train, as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Forest {
        #[serde(default = "default_trees")]
        n_trees: usize,
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_features: Option<usize>,
    },
    Oracle,
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Knn { .. } => ModelKind::Knn,
            ModelParams::Forest { .. } => ModelKind::Forest,
            ModelParams::Oracle => ModelKind::Oracle,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => ModelParams::Knn { k: DEFAULT_K },
            ModelKind::Forest => {
                let p = ForestParams::default();
                ModelParams::Forest {
                    n_trees: p.n_trees,
                    max_depth: p.max_depth,
                    max_features: p.max_features,
                }
            }
            ModelKind::Oracle => ModelParams::Oracle,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Fitted {
    Knn(Knn),
    Forest(Forest),
    Oracle(DatasetSpec),
}

/// A fitted predictor plus its recorded test metric.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model_id: String,
    pub task: Task,
    pub kind: ModelKind,
    n_features: usize,
    fitted: Fitted,
    pub metric: Option<PerformanceMetric>,
}

impl TrainedModel {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    pub fn forest(&self) -> Option<&Forest> {
        match &self.fitted {
            Fitted::Forest(f) => Some(f),
            _ => None,
        }
    }

    /// Score on `test` and store the result as this model's metric.
    pub fn evaluate(&mut self, test: &Dataset) -> Result<PerformanceMetric> {
        let m = evaluate(self, test)?;
        self.metric = Some(m);
        Ok(m)
    }
}

impl Predictor for TrainedModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }
    fn task(&self) -> Task {
        self.task
    }
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn metric(&self) -> Option<PerformanceMetric> {
        self.metric
    }
    fn value(&self, row: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Knn(m) => m.value(row),
            Fitted::Forest(m) => m.value(row),
            Fitted::Oracle(spec) => spec.rule.eval(row),
        }
    }
}

pub fn train_knn(train: &Dataset, k: usize) -> Result<TrainedModel> {
    Ok(TrainedModel {
        model_id: ModelKind::Knn.to_string(),
        task: train.task(),
        kind: ModelKind::Knn,
        n_features: train.n_features(),
        fitted: Fitted::Knn(Knn::fit(train, k)?),
        metric: None,
    })
}

pub fn train_forest(train: &Dataset, params: &ForestParams, seed: u64) -> Result<TrainedModel> {
    Ok(TrainedModel {
        model_id: ModelKind::Forest.to_string(),
        task: train.task(),
        kind: ModelKind::Forest,
        n_features: train.n_features(),
        fitted: Fitted::Forest(Forest::fit(train, params, seed)?),
        metric: None,
    })
}

/// A perfect predictor that evaluates the rule; its metric is fixed at 1.
pub fn oracle_model(spec: &DatasetSpec) -> Result<TrainedModel> {
    spec.validate()?;
    let metric = match spec.task {
        Task::Classification => PerformanceMetric::auc(1.0),
        Task::Regression => PerformanceMetric::r2(1.0),
    };
    Ok(TrainedModel {
        model_id: ModelKind::Oracle.to_string(),
        task: spec.task,
        kind: ModelKind::Oracle,
        n_features: spec.n_features,
        fitted: Fitted::Oracle(spec.clone()),
        metric: Some(metric),
    })
}

/// Train one instance. `seed` is ignored by deterministic kinds.
pub fn train(train: &Dataset, params: &ModelParams, seed: u64) -> Result<TrainedModel> {
    match params {
        ModelParams::Knn { k } => train_knn(train, *k),
        ModelParams::Forest {
            n_trees,
            max_depth,
            max_features,
        } => train_forest(
            train,
            &ForestParams {
                n_trees: *n_trees,
                max_depth: *max_depth,
                max_features: *max_features,
            },
            seed,
        ),
        ModelParams::Oracle => oracle_model(&train.spec),
    }
}

/// AUC of class-1 probabilities or R² of predictions on `test`.
pub fn evaluate(model: &dyn Predictor, test: &Dataset) -> Result<PerformanceMetric> {
    let values = model.values(&test.rows)?;
    Ok(match model.task() {
        Task::Classification => PerformanceMetric::auc(metrics::auc(&test.targets, &values)?),
        Task::Regression => PerformanceMetric::r2(metrics::r2(&test.targets, &values)?),
    })
}

/// Winner of a repeated-training run, plus every candidate's score.
#[derive(Clone, Debug)]
pub struct BestOf {
    pub model: TrainedModel,
    pub candidate_metrics: Vec<f64>,
    pub best_index: usize,
}

/// Train `repeats` instances on sub-seeds `derive(seed, 0..repeats)` and keep
/// the one scoring highest on `test`; ties go to the lowest index.
pub fn train_best_of_with_candidates(
    train_set: &Dataset,
    test: &Dataset,
    params: &ModelParams,
    repeats: usize,
    seed: u64,
) -> Result<BestOf> {
    if repeats == 0 {
        return Err(Error::InvalidParams("repeats must be at least 1".into()));
    }
    let mut best: Option<(usize, TrainedModel)> = None;
    let mut candidate_metrics = Vec::with_capacity(repeats);
    for i in 0..repeats {
        let mut model = train(train_set, params, seed::derive(seed, i as u64))?;
        // The oracle's metric is fixed by construction.
        let score = match model.kind {
            ModelKind::Oracle => model.metric.map(|m| m.value).unwrap_or(1.0),
            _ => model.evaluate(test)?.value,
        };
        candidate_metrics.push(score);
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| score > b.metric.map(|m| m.value).unwrap_or(f64::NEG_INFINITY));
        if better {
            best = Some((i, model));
        }
    }
    let (best_index, model) = best.expect("repeats >= 1");
    debug_assert!(candidate_metrics
        .iter()
        .all(|&m| model.metric.unwrap().value >= m));
    Ok(BestOf {
        model,
        candidate_metrics,
        best_index,
    })
}

pub fn train_best_of(
    train_set: &Dataset,
    test: &Dataset,
    params: &ModelParams,
    repeats: usize,
    seed: u64,
) -> Result<TrainedModel> {
    Ok(train_best_of_with_candidates(train_set, test, params, repeats, seed)?.model)
}

/// Any function of a feature row, presented as a model.
pub struct FnModel<F> {
    id: String,
    task: Task,
    n_features: usize,
    metric: Option<PerformanceMetric>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(id: impl Into<String>, task: Task, n_features: usize, f: F) -> Self {
        FnModel {
            id: id.into(),
            task,
            n_features,
            metric: None,
            f,
        }
    }

    pub fn with_metric(mut self, value: f64) -> Self {
        self.metric = Some(PerformanceMetric {
            metric_type: match self.task {
                Task::Classification => MetricType::Auc,
                Task::Regression => MetricType::R2,
            },
            value,
        });
        self
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnModel<F> {
    fn model_id(&self) -> &str {
        &self.id
    }
    fn task(&self) -> Task {
        self.task
    }
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn metric(&self) -> Option<PerformanceMetric> {
        self.metric
    }
    fn value(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}
