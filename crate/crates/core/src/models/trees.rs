//! Gradient-boosted regression trees with squared-error loss and exact
//! greedy splits.
//!
//! Splits are chosen by the largest reduction in the sum of squared residuals.
//! Ties go to the lowest feature index, then the lowest threshold. Thresholds
//! are midpoints between consecutive distinct values and samples with
//! `x <= threshold` go left. There is no subsampling and no leaf
//! regularization.

use serde::{Deserialize, Serialize};

use super::{exact, ModelError};

pub const DEFAULT_N_TREES: usize = 100;
pub const DEFAULT_MAX_DEPTH: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `None` for leaves.
    pub feature: Option<usize>,
    #[serde(with = "exact")]
    pub threshold: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
    #[serde(with = "exact")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match (node.feature, node.left, node.right) {
                (Some(f), Some(l), Some(r)) => i = if x[f] <= node.threshold { l } else { r },
                _ => return node.value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match (nodes[i].left, nodes[i].right) {
                (Some(l), Some(r)) => 1 + walk(nodes, l).max(walk(nodes, r)),
                _ => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    #[serde(with = "exact")]
    pub base: f64,
    #[serde(with = "exact")]
    pub learning_rate: f64,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_rounds(x, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, x: &[f64], rounds: usize) -> f64 {
        self.trees
            .iter()
            .take(rounds)
            .fold(self.base, |acc, t| acc + self.learning_rate * t.predict(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_trees: DEFAULT_N_TREES,
            max_depth: DEFAULT_MAX_DEPTH,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

impl BoostingParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::InvalidHyperparameter(
                "n_trees must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ModelError::InvalidHyperparameter(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    residuals: &'a [f64],
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let sum: f64 = idx.iter().map(|&i| self.residuals[i]).sum();
        let value = sum / idx.len() as f64;
        let scale = idx
            .iter()
            .map(|&i| self.residuals[i].abs())
            .fold(0.0, f64::max);
        // a mean at the rounding-noise floor is a zero mean
        if value.abs() <= idx.len() as f64 * f64::EPSILON * scale {
            0.0
        } else {
            value
        }
    }

    fn best_split(&self, idx: &[usize]) -> Option<Split> {
        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.residuals[i]).sum();
        let total_ss: f64 = idx.iter().map(|&i| self.residuals[i].powi(2)).sum();
        let parent = total * total / n;
        let n_features = self.rows[idx[0]].len();
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for pos in 0..order.len() - 1 {
                left_sum += self.residuals[order[pos]];
                let lo = self.rows[order[pos]][f];
                let hi = self.rows[order[pos + 1]][f];
                if lo == hi {
                    continue;
                }
                let n_left = (pos + 1) as f64;
                let right_sum = total - left_sum;
                let gain =
                    left_sum * left_sum / n_left + right_sum * right_sum / (n - n_left) - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * total_ss)
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            feature: None,
            threshold: 0.0,
            left: None,
            right: None,
            value: self.leaf_value(idx),
        });
        if depth >= self.max_depth || idx.len() < 2 {
            return id;
        }
        let Some(split) = self.best_split(idx) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        let l = self.grow(&left, depth + 1);
        let r = self.grow(&right, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(split.feature);
        node.threshold = split.threshold;
        node.left = Some(l);
        node.right = Some(r);
        id
    }
}

/// Fits a single regression tree to `residuals`.
pub fn fit_tree(rows: &[Vec<f64>], residuals: &[f64], max_depth: usize) -> Tree {
    let mut b = Builder {
        rows,
        residuals,
        max_depth,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..rows.len()).collect();
    b.grow(&idx, 0);
    Tree { nodes: b.nodes }
}

pub fn fit_ensemble(
    rows: &[Vec<f64>],
    targets: &[f64],
    params: &BoostingParams,
) -> Result<TreeEnsemble, ModelError> {
    params.validate()?;
    if rows.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if rows.len() != targets.len() {
        return Err(ModelError::Shape(format!(
            "{} rows, {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let base = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut pred = vec![base; rows.len()];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let residuals: Vec<f64> = targets.iter().zip(&pred).map(|(y, p)| y - p).collect();
        let tree = fit_tree(rows, &residuals, params.max_depth);
        for (p, x) in pred.iter_mut().zip(rows) {
            *p += params.learning_rate * tree.predict(x);
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        base,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        trees,
    })
}
