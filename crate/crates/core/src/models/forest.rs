//! Bagged CART forest with per-split feature subsampling.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means ⌈√d⌉ (classification) or ⌈d/3⌉ (regression).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 8,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn value(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    /// Total impurity decrease per feature, summed over all trees.
    impurity_totals: Vec<f64>,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    task: Task,
    max_depth: usize,
    max_features: usize,
    n_features: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

/// Node impurity times node size: Gini·n for classes, SSE for regression.
fn weighted_impurity(task: Task, n: f64, sum: f64, sum_sq: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    match task {
        Task::Classification => {
            let p = sum / n;
            n * 2.0 * p * (1.0 - p)
        }
        Task::Regression => (sum_sq - sum * sum / n).max(0.0),
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.targets[i]).sum::<f64>() / idx.len() as f64
    }

    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.targets[i].powi(2)).sum();
        let parent = weighted_impurity(self.task, n, total, total_sq);
        if parent <= 0.0 {
            return None;
        }
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for feature in sample(rng, self.n_features, self.max_features).into_iter() {
            order.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let t = self.targets[order[k]];
                sum += t;
                sum_sq += t * t;
                let lo = self.rows[order[k]][feature];
                let hi = self.rows[order[k + 1]][feature];
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let child = weighted_impurity(self.task, nl, sum, sum_sq)
                    + weighted_impurity(self.task, n - nl, total - sum, total_sq - sum_sq);
                let gain = parent - child;
                if gain > 1e-12 * parent && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(&idx)));
        if depth >= self.max_depth || idx.len() < 2 {
            return id;
        }
        let Some(split) = self.best_split(&idx, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        self.importance[split.feature] += split.gain;
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl Forest {
    pub fn fit(train: &Dataset, params: &ForestParams, seed: u64) -> Result<Self> {
        if params.n_trees == 0 || params.max_depth == 0 {
            return Err(Error::InvalidParams(
                "forest needs n_trees >= 1 and max_depth >= 1".into(),
            ));
        }
        let n = train.n_samples();
        if n < 2 {
            return Err(Error::InvalidParams(format!(
                "forest needs at least two training rows, got {n}"
            )));
        }
        let d = train.n_features();
        let max_features = params
            .max_features
            .unwrap_or_else(|| match train.task() {
                Task::Classification => (d as f64).sqrt().ceil() as usize,
                Task::Regression => d.div_ceil(3),
            })
            .clamp(1, d);

        let mut importance = vec![0.0; d];
        let mut trees = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let mut rng = seed::rng(seed::derive(seed, t as u64));
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder {
                rows: &train.rows,
                targets: &train.targets,
                task: train.task(),
                max_depth: params.max_depth,
                max_features,
                n_features: d,
                nodes: Vec::new(),
                importance: vec![0.0; d],
            };
            b.grow(bootstrap, 0, &mut rng);
            for (acc, v) in importance.iter_mut().zip(&b.importance) {
                *acc += v;
            }
            trees.push(Tree { nodes: b.nodes });
        }
        Ok(Forest {
            trees,
            impurity_totals: importance,
        })
    }

    /// Mean over trees of the leaf class-1 proportion or leaf mean.
    pub fn value(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.value(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn impurity_totals(&self) -> &[f64] {
        &self.impurity_totals
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
