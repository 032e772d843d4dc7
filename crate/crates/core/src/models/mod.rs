//! Performance predictors behind a single fit/predict contract.

pub mod group_lasso;
pub mod prox;
pub mod trees;

use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub use group_lasso::{GroupLassoProblem, GroupLassoSolution, TaskData};
pub use prox::block_soft_threshold;
pub use trees::{BoostingParams, Tree, TreeEnsemble, TreeNode};

/// Version written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no training samples")]
    EmptyTraining,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("design matrix is all zeros but lambda > 0")]
    DegenerateDesign,
    #[error("feature names {found:?} do not match the model's {expected:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("cannot decode model: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Serializes floats as decimal strings with 17 significant digits so that
/// weights survive a JSON round trip bit for bit.
pub(crate) mod exact {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn to_text(v: f64) -> String {
        format!("{v:.16e}")
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_text(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&to_text(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|t| t.parse().map_err(D::Error::custom))
                .collect()
        }
    }
}

/// Per-feature centering and scaling fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    #[serde(with = "exact::vec")]
    pub means: Vec<f64>,
    /// 1.0 for constant features.
    #[serde(with = "exact::vec")]
    pub stds: Vec<f64>,
    /// Constant features are centered but not scaled.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Self {
            means: vec![0.0; d],
            stds: vec![1.0; d],
            constant: vec![false; d],
        }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        let mut stds = vec![1.0; d];
        let mut constant = vec![false; d];
        for j in 0..d {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            means[j] = m;
            if sd > 1e-12 * m.abs().max(1.0) {
                stds[j] = sd;
            } else {
                constant[j] = true;
            }
        }
        Self {
            means,
            stds,
            constant,
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mean,
    GroupLasso,
    BoostedTrees,
}

impl ModelKind {
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Mean => "Baseline",
            ModelKind::GroupLasso => "Group Lasso",
            ModelKind::BoostedTrees => "Boosted Trees",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTaskWeights {
    pub task_id: String,
    #[serde(with = "exact::vec")]
    pub weights: Vec<f64>,
    #[serde(with = "exact")]
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLassoParams {
    #[serde(with = "exact")]
    pub lambda: f64,
    #[serde(with = "exact")]
    pub tol: f64,
    pub max_iters: usize,
    /// One entry per task sharing the fit; the weight matrix W has these as columns.
    pub tasks: Vec<LinearTaskWeights>,
    /// Task whose weights `predict` uses.
    pub active: usize,
    #[serde(with = "exact")]
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Mean {
        #[serde(with = "exact")]
        value: f64,
    },
    GroupLasso(GroupLassoParams),
    BoostedTrees(TreeEnsemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub format_version: u32,
    pub feature_order: Vec<String>,
    pub standardizer: Standardizer,
    pub parameters: Parameters,
}

/// A prediction clamped to [0, 1] with the raw value kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub unclamped: f64,
}

impl RegressionModel {
    pub fn kind(&self) -> ModelKind {
        match self.parameters {
            Parameters::Mean { .. } => ModelKind::Mean,
            Parameters::GroupLasso(_) => ModelKind::GroupLasso,
            Parameters::BoostedTrees(_) => ModelKind::BoostedTrees,
        }
    }

    /// A single-task linear model; mostly useful for tests and hand-built models.
    pub fn linear(
        feature_order: Vec<String>,
        standardizer: Standardizer,
        weights: Vec<f64>,
        intercept: f64,
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            feature_order,
            standardizer,
            parameters: Parameters::GroupLasso(GroupLassoParams {
                lambda: 0.0,
                tol: group_lasso::DEFAULT_TOL,
                max_iters: 0,
                tasks: vec![LinearTaskWeights {
                    task_id: String::new(),
                    weights,
                    intercept,
                }],
                active: 0,
                objective: 0.0,
                iterations: 0,
                converged: true,
            }),
        }
    }

    /// Switches the task a multi-task linear model predicts for.
    pub fn with_active_task(mut self, task_id: &str) -> Result<Self> {
        if let Parameters::GroupLasso(p) = &mut self.parameters {
            p.active = p
                .tasks
                .iter()
                .position(|t| t.task_id == task_id)
                .ok_or_else(|| ModelError::UnknownTask(task_id.to_string()))?;
        }
        Ok(self)
    }

    fn check_features(&self, fv: &FeatureVector) -> Result<()> {
        if fv.names != self.feature_order {
            return Err(ModelError::FeatureMismatch {
                expected: self.feature_order.clone(),
                found: fv.names.clone(),
            });
        }
        if let Some(i) = fv.values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(format!("feature `{}`", fv.names[i])));
        }
        Ok(())
    }

    /// Unclamped model output for already-validated raw features.
    fn raw(&self, values: &[f64]) -> f64 {
        let x = self.standardizer.transform(values);
        match &self.parameters {
            Parameters::Mean { value } => *value,
            Parameters::GroupLasso(p) => {
                let t = &p.tasks[p.active];
                t.intercept + t.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()
            }
            Parameters::BoostedTrees(e) => e.predict(&x),
        }
    }

    pub fn predict_detailed(&self, fv: &FeatureVector) -> Result<Prediction> {
        self.check_features(fv)?;
        let unclamped = self.raw(&fv.values);
        Ok(Prediction {
            value: unclamped.clamp(0.0, 1.0),
            unclamped,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| ModelError::Decode(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Decode(format!(
                "unsupported format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Clamped prediction for one feature vector.
pub fn predict(model: &RegressionModel, features: &FeatureVector) -> Result<f64> {
    model.predict_detailed(features).map(|p| p.value)
}

/// Training samples for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSamples {
    pub task_id: String,
    pub samples: Vec<(FeatureVector, f64)>,
}

fn feature_order(samples: &[(FeatureVector, f64)]) -> Result<Vec<String>> {
    let first = samples.first().ok_or(ModelError::EmptyTraining)?;
    for (fv, y) in samples {
        if fv.names != first.0.names {
            return Err(ModelError::FeatureMismatch {
                expected: first.0.names.clone(),
                found: fv.names.clone(),
            });
        }
        if !y.is_finite() {
            return Err(ModelError::NonFinite("score".into()));
        }
        if let Some(i) = fv.values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(format!("feature `{}`", fv.names[i])));
        }
    }
    Ok(first.0.names.clone())
}

pub fn fit_mean_baseline(samples: &[(FeatureVector, f64)]) -> Result<RegressionModel> {
    let order = feature_order(samples)?;
    let value = samples.iter().map(|(_, y)| y).sum::<f64>() / samples.len() as f64;
    Ok(RegressionModel {
        format_version: MODEL_FORMAT_VERSION,
        standardizer: Standardizer::identity(order.len()),
        feature_order: order,
        parameters: Parameters::Mean { value },
    })
}

pub fn fit_boosted_trees(
    samples: &[(FeatureVector, f64)],
    params: &BoostingParams,
) -> Result<RegressionModel> {
    params.validate()?;
    let order = feature_order(samples)?;
    let raw: Vec<Vec<f64>> = samples.iter().map(|(fv, _)| fv.values.clone()).collect();
    let standardizer = Standardizer::fit(&raw);
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.transform(r)).collect();
    let y: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let ensemble = trees::fit_ensemble(&rows, &y, params)?;
    Ok(RegressionModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_order: order,
        standardizer,
        parameters: Parameters::BoostedTrees(ensemble),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupLassoSettings {
    pub lambda: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GroupLassoSettings {
    fn default() -> Self {
        Self {
            lambda: group_lasso::DEFAULT_LAMBDA,
            tol: group_lasso::DEFAULT_TOL,
            max_iters: group_lasso::DEFAULT_MAX_ITERS,
        }
    }
}

/// Fits a multi-task group lasso over `tasks` and returns a model predicting
/// for `active_task`.
///
/// Features are standardized with statistics pooled over all tasks; each task
/// is then centered with its own column and response means, which become the
/// unpenalized per-task intercepts.
pub fn fit_group_lasso(
    tasks: &[TaskSamples],
    active_task: &str,
    settings: &GroupLassoSettings,
) -> Result<RegressionModel> {
    let active = tasks
        .iter()
        .position(|t| t.task_id == active_task)
        .ok_or_else(|| ModelError::UnknownTask(active_task.to_string()))?;
    let mut order: Option<Vec<String>> = None;
    for t in tasks {
        let o = feature_order(&t.samples)?;
        match &order {
            Some(prev) if *prev != o => {
                return Err(ModelError::FeatureMismatch {
                    expected: prev.clone(),
                    found: o,
                })
            }
            _ => order = Some(o),
        }
    }
    let order = order.ok_or(ModelError::EmptyTraining)?;
    let d = order.len();
    let pooled: Vec<Vec<f64>> = tasks
        .iter()
        .flat_map(|t| t.samples.iter().map(|(fv, _)| fv.values.clone()))
        .collect();
    let standardizer = Standardizer::fit(&pooled);

    let mut centering = Vec::with_capacity(tasks.len());
    let mut data = Vec::with_capacity(tasks.len());
    for t in tasks {
        let n = t.samples.len();
        let mut x = Array2::<f64>::zeros((n, d));
        for (i, (fv, _)) in t.samples.iter().enumerate() {
            for (j, v) in standardizer.transform(&fv.values).into_iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        let y = Array1::from_iter(t.samples.iter().map(|(_, y)| *y));
        let x_mean = x.mean_axis(ndarray::Axis(0)).expect("non-empty task");
        let y_mean = y.sum() / n as f64;
        let x = &x - &x_mean;
        let y = y.mapv(|v| v - y_mean);
        centering.push((x_mean, y_mean));
        data.push(TaskData { x, y });
    }
    let problem = GroupLassoProblem {
        tasks: data,
        lambda: settings.lambda,
        tol: settings.tol,
        max_iters: settings.max_iters,
    };
    let sol = group_lasso::solve(&problem)?;
    let task_weights = tasks
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let w = sol.weights.column(k).to_owned();
            let (x_mean, y_mean) = &centering[k];
            LinearTaskWeights {
                task_id: t.task_id.clone(),
                intercept: y_mean - x_mean.dot(&w),
                weights: w.to_vec(),
            }
        })
        .collect();
    Ok(RegressionModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_order: order,
        standardizer,
        parameters: Parameters::GroupLasso(GroupLassoParams {
            lambda: settings.lambda,
            tol: settings.tol,
            max_iters: settings.max_iters,
            tasks: task_weights,
            active,
            objective: sol.objective,
            iterations: sol.iterations,
            converged: sol.converged,
        }),
    })
}

/// Which predictor to fit, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Mean,
    GroupLasso {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
    },
    BoostedTrees {
        #[serde(default = "default_n_trees")]
        n_trees: usize,
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
    },
}

fn default_lambda() -> f64 {
    group_lasso::DEFAULT_LAMBDA
}
fn default_tol() -> f64 {
    group_lasso::DEFAULT_TOL
}
fn default_max_iters() -> usize {
    group_lasso::DEFAULT_MAX_ITERS
}
fn default_n_trees() -> usize {
    trees::DEFAULT_N_TREES
}
fn default_max_depth() -> usize {
    trees::DEFAULT_MAX_DEPTH
}
fn default_learning_rate() -> f64 {
    trees::DEFAULT_LEARNING_RATE
}

impl ModelSpec {
    pub fn group_lasso() -> Self {
        ModelSpec::GroupLasso {
            lambda: default_lambda(),
            tol: default_tol(),
            max_iters: default_max_iters(),
        }
    }

    pub fn boosted_trees() -> Self {
        ModelSpec::BoostedTrees {
            n_trees: default_n_trees(),
            max_depth: default_max_depth(),
            learning_rate: default_learning_rate(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Mean => ModelKind::Mean,
            ModelSpec::GroupLasso { .. } => ModelKind::GroupLasso,
            ModelSpec::BoostedTrees { .. } => ModelKind::BoostedTrees,
        }
    }

    /// The mean baseline ignores features entirely.
    pub fn uses_features(&self) -> bool {
        !matches!(self, ModelSpec::Mean)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Mean => Ok(()),
            ModelSpec::GroupLasso {
                lambda,
                tol,
                max_iters,
            } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(ModelError::InvalidHyperparameter(format!(
                        "lambda must be >= 0, got {lambda}"
                    )));
                }
                if tol.is_nan() || tol <= 0.0 || max_iters == 0 {
                    return Err(ModelError::InvalidHyperparameter(
                        "tol must be > 0 and max_iters >= 1".into(),
                    ));
                }
                Ok(())
            }
            ModelSpec::BoostedTrees {
                n_trees,
                max_depth,
                learning_rate,
            } => BoostingParams {
                n_trees,
                max_depth,
                learning_rate,
            }
            .validate(),
        }
    }

    /// Fits this spec. `tasks[active]` is the task being predicted; other tasks
    /// are only used by the multi-task group lasso.
    pub fn fit(&self, tasks: &[TaskSamples], active: usize) -> Result<RegressionModel> {
        self.validate()?;
        let primary = tasks.get(active).ok_or(ModelError::EmptyTraining)?;
        match *self {
            ModelSpec::Mean => fit_mean_baseline(&primary.samples),
            ModelSpec::BoostedTrees {
                n_trees,
                max_depth,
                learning_rate,
            } => fit_boosted_trees(
                &primary.samples,
                &BoostingParams {
                    n_trees,
                    max_depth,
                    learning_rate,
                },
            ),
            ModelSpec::GroupLasso {
                lambda,
                tol,
                max_iters,
            } => {
                let non_empty: Vec<TaskSamples> = tasks
                    .iter()
                    .filter(|t| !t.samples.is_empty())
                    .cloned()
                    .collect();
                fit_group_lasso(
                    &non_empty,
                    &primary.task_id,
                    &GroupLassoSettings {
                        lambda,
                        tol,
                        max_iters,
                    },
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector {
            names: (0..values.len()).map(|i| format!("f{i}")).collect(),
            values: values.to_vec(),
            pivots: vec!["en".into()],
            target: "xx".into(),
        }
    }

    #[test]
    fn mean_baseline_examples() {
        let m = fit_mean_baseline(&[(fv(&[1.0]), 0.8), (fv(&[2.0]), 0.6)]).unwrap();
        assert!((predict(&m, &fv(&[9.0])).unwrap() - 0.7).abs() < 1e-15);
        let m = fit_mean_baseline(&[(fv(&[]), 0.5)]).unwrap();
        assert_eq!(predict(&m, &fv(&[])).unwrap(), 0.5);
        let m = fit_mean_baseline(&[(fv(&[]), 0.9), (fv(&[]), 0.7), (fv(&[]), 0.8)]).unwrap();
        assert!((predict(&m, &fv(&[])).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(fit_mean_baseline(&[]), Err(ModelError::EmptyTraining));
    }

    #[test]
    fn linear_prediction_and_clamping() {
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let zero =
            RegressionModel::linear(names.clone(), Standardizer::identity(3), vec![0.0; 3], 0.62);
        assert_eq!(predict(&zero, &fv(&[3.0, 1.0, 2.0])).unwrap(), 0.62);

        let m = RegressionModel::linear(
            names.clone(),
            Standardizer::identity(3),
            vec![1.0, 0.0, 0.0],
            0.5,
        );
        let p = m.predict_detailed(&fv(&[0.2, 5.0, 5.0])).unwrap();
        assert!((p.unclamped - 0.7).abs() < 1e-15);

        let p = m.predict_detailed(&fv(&[0.9, 0.0, 0.0])).unwrap();
        assert_eq!(p.value, 1.0);
        assert!((p.unclamped - 1.4).abs() < 1e-15);
    }

    #[test]
    fn predict_rejects_mismatched_or_non_finite_features() {
        let m = fit_mean_baseline(&[(fv(&[1.0, 2.0]), 0.5)]).unwrap();
        assert!(matches!(
            predict(&m, &fv(&[1.0])),
            Err(ModelError::FeatureMismatch { .. })
        ));
        let mut swapped = fv(&[1.0, 2.0]);
        swapped.names.reverse();
        assert!(matches!(
            predict(&m, &swapped),
            Err(ModelError::FeatureMismatch { .. })
        ));
        assert!(matches!(
            predict(&m, &fv(&[1.0, f64::INFINITY])),
            Err(ModelError::NonFinite(_))
        ));
    }

    #[test]
    fn standardizer_marks_constant_features() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert_eq!(s.stds, vec![1.0, 1.0]);
        assert_eq!(s.constant, vec![false, true]);
        assert_eq!(s.transform(&[3.0, 6.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let samples: Vec<_> = (0..12)
            .map(|i| {
                let x = i as f64 / 7.0;
                (
                    fv(&[x, (x * 3.1).sin()]),
                    0.3 + 0.04 * x + 0.01 * (x * 5.0).cos(),
                )
            })
            .collect();
        let trees = fit_boosted_trees(
            &samples,
            &BoostingParams {
                n_trees: 5,
                max_depth: 3,
                learning_rate: 0.3,
            },
        )
        .unwrap();
        let lasso = fit_group_lasso(
            &[TaskSamples {
                task_id: "t".into(),
                samples: samples.clone(),
            }],
            "t",
            &GroupLassoSettings::default(),
        )
        .unwrap();
        for model in [trees, lasso] {
            let json = model.to_json();
            let back = RegressionModel::from_json(&json).unwrap();
            assert_eq!(back, model);
            for (x, _) in &samples {
                assert_eq!(
                    predict(&back, x).unwrap().to_bits(),
                    predict(&model, x).unwrap().to_bits()
                );
            }
        }
        let text = r#"{"format_version":9,"feature_order":[],"standardizer":{"means":[],"stds":[],"constant":[]},"parameters":{"kind":"mean","value":"5e-1"}}"#;
        assert!(matches!(
            RegressionModel::from_json(text),
            Err(ModelError::Decode(_))
        ));
    }

    #[test]
    fn multi_task_model_switches_active_task() {
        let a: Vec<_> = (0..6)
            .map(|i| (fv(&[i as f64]), 0.1 + 0.05 * i as f64))
            .collect();
        let b: Vec<_> = (0..6)
            .map(|i| (fv(&[i as f64]), 0.9 - 0.02 * i as f64))
            .collect();
        let tasks = [
            TaskSamples {
                task_id: "a".into(),
                samples: a,
            },
            TaskSamples {
                task_id: "b".into(),
                samples: b,
            },
        ];
        let settings = GroupLassoSettings {
            lambda: 0.0,
            tol: 1e-14,
            ..Default::default()
        };
        let m = fit_group_lasso(&tasks, "a", &settings).unwrap();
        assert!((predict(&m, &fv(&[2.0])).unwrap() - 0.2).abs() < 1e-8);
        let m = m.with_active_task("b").unwrap();
        assert!((predict(&m, &fv(&[2.0])).unwrap() - 0.86).abs() < 1e-8);
        assert!(matches!(
            m.with_active_task("zz"),
            Err(ModelError::UnknownTask(_))
        ));
    }

    #[test]
    fn spec_defaults_follow_published_hyperparameters() {
        let spec: ModelSpec = toml::from_str("kind = \"boosted_trees\"").unwrap();
        assert_eq!(
            spec,
            ModelSpec::BoostedTrees {
                n_trees: 100,
                max_depth: 10,
                learning_rate: 0.1
            }
        );
        let spec: ModelSpec = toml::from_str("kind = \"group_lasso\"").unwrap();
        assert_eq!(
            spec,
            ModelSpec::GroupLasso {
                lambda: 0.005,
                tol: 1e-6,
                max_iters: 10_000
            }
        );
    }
}
