//! Choosing the fine-tuning language that maximizes predicted performance.
//!
//! Every (pivot, target) pair is scored by a trained model; the argmax over
//! pivots breaks ties toward the lexicographically smallest code.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{assemble_features, FeatureConfig, FeatureContext, FeatureError};
use crate::models::{ModelError, RegressionModel};

#[derive(Debug, Error)]
pub enum PivotError {
    #[error("no candidate pivots")]
    NoCandidates,
    #[error("no target languages")]
    NoTargets,
    #[error("features for pivot `{pivot}` -> `{target}`: {source}")]
    Feature {
        pivot: String,
        target: String,
        #[source]
        source: FeatureError,
    },
    #[error("prediction for pivot `{pivot}` -> `{target}`: {source}")]
    Model {
        pivot: String,
        target: String,
        #[source]
        source: ModelError,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, PivotError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotSelection {
    pub target: String,
    pub best_pivot: String,
    pub predicted: f64,
    /// Predicted score for every candidate pivot.
    pub full_row: BTreeMap<String, f64>,
}

/// Argmax over an already scored row; ties go to the smallest code.
fn argmax(row: &BTreeMap<String, f64>) -> Option<(&String, f64)> {
    // BTreeMap iterates in ascending key order, so a strict comparison keeps
    // the earliest code among equal scores
    row.iter().fold(None, |best, (p, &v)| match best {
        Some((_, bv)) if v <= bv => best,
        _ => Some((p, v)),
    })
}

/// Scores every candidate with `score` and returns the best one.
pub fn select_best_pivot_with<F>(
    target: &str,
    candidates: &[String],
    score: F,
) -> Result<PivotSelection>
where
    F: Fn(&str) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(PivotError::NoCandidates);
    }
    let full_row = candidates
        .iter()
        .map(|p| Ok((p.clone(), score(p)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let (best, predicted) = argmax(&full_row).expect("non-empty row");
    Ok(PivotSelection {
        target: target.to_string(),
        best_pivot: best.clone(),
        predicted,
        full_row,
    })
}

fn model_score(
    model: &RegressionModel,
    pivot: &str,
    target: &str,
    ctx: &FeatureContext,
    config: &FeatureConfig,
) -> Result<f64> {
    let pivots = [pivot.to_string()];
    let fv =
        assemble_features(target, &pivots, ctx, config).map_err(|source| PivotError::Feature {
            pivot: pivot.to_string(),
            target: target.to_string(),
            source,
        })?;
    crate::models::predict(model, &fv).map_err(|source| PivotError::Model {
        pivot: pivot.to_string(),
        target: target.to_string(),
        source,
    })
}

/// Context for counterfactual pivots: languages without a training set get
/// the median of the known training-set sizes.
pub fn counterfactual_context(ctx: &FeatureContext) -> FeatureContext {
    let median = ctx.median_train_size();
    ctx.clone().with_default_train_size(median)
}

pub fn select_best_pivot(
    model: &RegressionModel,
    target: &str,
    candidates: &[String],
    ctx: &FeatureContext,
    config: &FeatureConfig,
) -> Result<PivotSelection> {
    select_best_pivot_with(target, candidates, |p| {
        model_score(model, p, target, ctx, config)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotGrid {
    pub candidates: Vec<String>,
    pub targets: Vec<String>,
    /// `cells[pivot][target]`
    pub cells: BTreeMap<String, BTreeMap<String, f64>>,
    /// Mean prediction over targets, per pivot.
    pub pivot_averages: BTreeMap<String, f64>,
    /// Per-target argmax.
    pub selections: Vec<PivotSelection>,
    /// Mean over targets of each target's best predicted score.
    pub best_pivot_average: f64,
    /// Candidates scored with an assumed training-set size.
    pub assumed_train_size: Vec<String>,
}

/// Scores every (pivot, target) pair. `jobs` caps the worker threads; the
/// result does not depend on it.
pub fn pivot_matrix(
    model: &RegressionModel,
    targets: &[String],
    candidates: &[String],
    ctx: &FeatureContext,
    config: &FeatureConfig,
    jobs: usize,
) -> Result<PivotGrid> {
    if candidates.is_empty() {
        return Err(PivotError::NoCandidates);
    }
    if targets.is_empty() {
        return Err(PivotError::NoTargets);
    }
    let mut targets = targets.to_vec();
    targets.sort();
    targets.dedup();
    let mut candidates = candidates.to_vec();
    candidates.sort();
    candidates.dedup();

    let select = |t: &String| select_best_pivot(model, t, &candidates, ctx, config);
    let selections: Vec<PivotSelection> = if jobs <= 1 {
        targets.iter().map(select).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| PivotError::Pool(e.to_string()))?
            .install(|| targets.par_iter().map(select).collect::<Result<_>>())?
    };

    let mut cells: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for s in &selections {
        for (p, v) in &s.full_row {
            cells
                .entry(p.clone())
                .or_default()
                .insert(s.target.clone(), *v);
        }
    }
    let n = targets.len() as f64;
    let pivot_averages = cells
        .iter()
        .map(|(p, row)| (p.clone(), row.values().sum::<f64>() / n))
        .collect();
    let best_pivot_average = selections.iter().map(|s| s.predicted).sum::<f64>() / n;
    let uses_train_size = config.names().iter().any(|n| n == "log_train_size");
    let assumed_train_size = candidates
        .iter()
        .filter(|c| uses_train_size && !ctx.has_train_size(c))
        .cloned()
        .collect();
    Ok(PivotGrid {
        candidates,
        targets,
        cells,
        pivot_averages,
        selections,
        best_pivot_average,
        assumed_train_size,
    })
}

impl PivotGrid {
    /// `pivot,target,predicted` rows, pivots outer.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pivot", "target", "predicted"])?;
        for (p, row) in &self.cells {
            for (t, v) in row {
                w.write_record([p.as_str(), t, &v.to_string()])?;
            }
        }
        w.flush()
    }
}
