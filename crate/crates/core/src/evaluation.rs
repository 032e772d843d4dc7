//! Leave-one-language-out (LOLO) evaluation and method comparison.
//!
//! Each fold withholds every record whose target is one language, fits on the
//! rest and predicts the withheld records. A language is one fold no matter
//! how many pivot rows it has; its error is the mean absolute error over its
//! records, and the headline MAE averages the per-language errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{self, DataError, Delimiter, PerformanceRecord, ScoreScale};
use crate::features::{assemble_features, FeatureConfig, FeatureContext, FeatureError};
use crate::models::{ModelError, ModelKind, ModelSpec, TaskSamples};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("LOLO needs at least 2 distinct target languages, found {0}")]
    TooFewTargets(usize),
    #[error("records mix tasks or metrics: {0}")]
    MixedTasks(String),
    #[error("features for {pivots} -> {target}: {source}")]
    Feature {
        pivots: String,
        target: String,
        #[source]
        source: FeatureError,
    },
    #[error("fold `{target}`: {source}")]
    Fold {
        target: String,
        #[source]
        source: ModelError,
    },
    #[error("fold `{0}` has no training records")]
    EmptyFold(String),
    #[error("no prediction pairs")]
    Empty,
    #[error("reports disagree on {0}")]
    ReportMismatch(String),
    #[error("external method `{method}` scores unknown target `{target}`")]
    UnknownTarget { method: String, target: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// 100 times the mean absolute error over (predicted, actual) pairs.
pub fn mae_x100(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let total: f64 = pairs.iter().map(|(p, a)| (p - a).abs()).sum();
    Ok(100.0 * total / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageResult {
    /// Mean prediction over the language's records.
    pub predicted: f64,
    pub actual: f64,
    /// Mean absolute error over the language's records.
    pub abs_error: f64,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub pivots: Vec<String>,
    pub target: String,
    pub predicted: f64,
    pub unclamped: f64,
    pub actual: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task_id: String,
    pub metric: String,
    pub method: String,
    pub kind: ModelKind,
    pub per_language: BTreeMap<String, LanguageResult>,
    pub per_record: Vec<RecordResult>,
    /// Mean of per-language errors, times 100.
    pub mae_x100: f64,
    /// Mean over individual (pivot set, target) rows, times 100.
    pub per_record_mae_x100: f64,
    pub n_folds: usize,
    pub strict_lolo: bool,
}

impl EvaluationReport {
    pub fn recomputed_mae_x100(&self) -> f64 {
        let n = self.per_language.len() as f64;
        100.0 * self.per_language.values().map(|r| r.abs_error).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoloOptions {
    /// Also drop training records that use the held-out language as a pivot.
    pub strict_lolo: bool,
    pub jobs: usize,
}

impl Default for LoloOptions {
    fn default() -> Self {
        Self {
            strict_lolo: false,
            jobs: 1,
        }
    }
}

struct Sample {
    record: PerformanceRecord,
    features: crate::features::FeatureVector,
}

fn featurize(
    records: &[PerformanceRecord],
    ctx: &FeatureContext,
    config: &FeatureConfig,
) -> Result<Vec<Sample>> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    sorted
        .into_iter()
        .map(|record| {
            let features = assemble_features(&record.target, &record.pivots, ctx, config).map_err(
                |source| EvalError::Feature {
                    pivots: record.pivots.join(";"),
                    target: record.target.clone(),
                    source,
                },
            )?;
            Ok(Sample { record, features })
        })
        .collect()
}

fn single_task(records: &[PerformanceRecord]) -> Result<(String, String)> {
    let first = records.first().ok_or(EvalError::TooFewTargets(0))?;
    if let Some(r) = records
        .iter()
        .find(|r| r.task_id != first.task_id || r.metric != first.metric)
    {
        return Err(EvalError::MixedTasks(format!(
            "({}, {}) vs ({}, {})",
            first.task_id, first.metric, r.task_id, r.metric
        )));
    }
    Ok((first.task_id.clone(), first.metric.clone()))
}

fn in_fold_training(record: &PerformanceRecord, held_out: &str, strict: bool) -> bool {
    record.target != held_out && !(strict && record.pivots.iter().any(|p| p == held_out))
}

pub(crate) fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))
}

/// Runs LOLO for one task.
///
/// `auxiliary` holds record sets of other tasks; they only enter the
/// multi-task group lasso, and the held-out language is removed from all of
/// them in every fold.
pub fn lolo_evaluate(
    records: &[PerformanceRecord],
    auxiliary: &[Vec<PerformanceRecord>],
    spec: &ModelSpec,
    ctx: &FeatureContext,
    feature_config: &FeatureConfig,
    options: &LoloOptions,
) -> Result<EvaluationReport> {
    let (task_id, metric) = single_task(records)?;
    let targets: BTreeSet<String> = records.iter().map(|r| r.target.clone()).collect();
    if targets.len() < 2 {
        return Err(EvalError::TooFewTargets(targets.len()));
    }
    spec.validate().map_err(|source| EvalError::Fold {
        target: "<all>".into(),
        source,
    })?;
    let empty = FeatureConfig::empty();
    let config = if spec.uses_features() {
        feature_config
    } else {
        &empty
    };
    let samples = featurize(records, ctx, config)?;
    let aux_samples = if matches!(spec, ModelSpec::GroupLasso { .. }) {
        auxiliary
            .iter()
            .map(|recs| {
                let (id, _) = single_task(recs)?;
                Ok((id, featurize(recs, ctx, config)?))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let run_fold = |held_out: &String| -> Result<Vec<RecordResult>> {
        let pick = |s: &[Sample]| -> Vec<(crate::features::FeatureVector, f64)> {
            s.iter()
                .filter(|s| in_fold_training(&s.record, held_out, options.strict_lolo))
                .map(|s| (s.features.clone(), s.record.score))
                .collect()
        };
        let primary = pick(&samples);
        if primary.is_empty() {
            return Err(EvalError::EmptyFold(held_out.clone()));
        }
        let mut tasks = vec![TaskSamples {
            task_id: task_id.clone(),
            samples: primary,
        }];
        tasks.extend(aux_samples.iter().map(|(id, s)| TaskSamples {
            task_id: id.clone(),
            samples: pick(s),
        }));
        let model = spec.fit(&tasks, 0).map_err(|source| EvalError::Fold {
            target: held_out.clone(),
            source,
        })?;
        samples
            .iter()
            .filter(|s| &s.record.target == held_out)
            .map(|s| {
                let p = model
                    .predict_detailed(&s.features)
                    .map_err(|source| EvalError::Fold {
                        target: held_out.clone(),
                        source,
                    })?;
                Ok(RecordResult {
                    pivots: s.record.pivots.clone(),
                    target: s.record.target.clone(),
                    predicted: p.value,
                    unclamped: p.unclamped,
                    actual: s.record.score,
                    abs_error: (p.value - s.record.score).abs(),
                })
            })
            .collect()
    };

    let targets: Vec<String> = targets.into_iter().collect();
    let folds: Vec<Result<Vec<RecordResult>>> = if options.jobs <= 1 {
        targets.iter().map(run_fold).collect()
    } else {
        worker_pool(options.jobs)?.install(|| targets.par_iter().map(run_fold).collect())
    };

    let mut per_language = BTreeMap::new();
    let mut per_record = Vec::new();
    for (target, fold) in targets.iter().zip(folds) {
        let rows = fold?;
        let n = rows.len() as f64;
        per_language.insert(
            target.clone(),
            LanguageResult {
                predicted: rows.iter().map(|r| r.predicted).sum::<f64>() / n,
                actual: rows.iter().map(|r| r.actual).sum::<f64>() / n,
                abs_error: rows.iter().map(|r| r.abs_error).sum::<f64>() / n,
                n_records: rows.len(),
            },
        );
        per_record.extend(rows);
    }
    let lang_pairs: Vec<(f64, f64)> = per_language.values().map(|r| (r.abs_error, 0.0)).collect();
    let record_pairs: Vec<(f64, f64)> =
        per_record.iter().map(|r| (r.predicted, r.actual)).collect();
    Ok(EvaluationReport {
        task_id,
        metric,
        method: spec.kind().display_name().to_string(),
        kind: spec.kind(),
        mae_x100: mae_x100(&lang_pairs)?,
        per_record_mae_x100: mae_x100(&record_pairs)?,
        n_folds: per_language.len(),
        per_language,
        per_record,
        strict_lolo: options.strict_lolo,
    })
}

/// Externally produced estimates (e.g. scores on machine-translated test
/// sets) for one method on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMethod {
    pub name: String,
    pub task_id: String,
    /// target -> (predicted, actual)
    pub per_target: BTreeMap<String, (f64, f64)>,
}

/// Parses `method,task,target,predicted,actual` rows.
pub fn ingest_external_scores(
    text: &str,
    delimiter: Delimiter,
    scale: ScoreScale,
) -> Result<Vec<ExternalMethod>> {
    // the performance-table parser does the validation; the method column
    // doubles as the pivot set so (method, task, target) is the unique key
    let schema = datastore::PerformanceSchema {
        model: "method".into(),
        task: "task".into(),
        pivots: "method".into(),
        target: "target".into(),
        metric: "task".into(),
        score: "predicted".into(),
    };
    let predicted = datastore::ingest_performance_table(text, &schema, delimiter, scale)?;
    let schema = datastore::PerformanceSchema {
        score: "actual".into(),
        ..schema
    };
    let actual = datastore::ingest_performance_table(text, &schema, delimiter, scale)?;
    let mut out: BTreeMap<(String, String), ExternalMethod> = BTreeMap::new();
    for (p, a) in predicted.into_iter().zip(actual) {
        out.entry((p.model_id.clone(), p.task_id.clone()))
            .or_insert_with(|| ExternalMethod {
                name: p.model_id.clone(),
                task_id: p.task_id.clone(),
                per_target: BTreeMap::new(),
            })
            .per_target
            .insert(p.target, (p.score, a.score));
    }
    Ok(out.into_values().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Baseline,
    External,
    BoostedTrees,
    GroupLasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub kind: RowKind,
    pub mae_x100: f64,
    /// Number of target languages the method scored.
    pub coverage: usize,
    /// Absolute error x 100 per target; `None` where the method has no estimate.
    pub per_language: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub task_id: String,
    pub targets: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Lines up LOLO reports and external estimates for one task.
///
/// Rows are ordered baseline, external methods, boosted trees, group lasso;
/// input order is kept within each group.
pub fn compare_methods(
    reports: &[EvaluationReport],
    external: &[ExternalMethod],
) -> Result<ComparisonTable> {
    let first = reports.first().ok_or(EvalError::Empty)?;
    let targets: Vec<String> = first.per_language.keys().cloned().collect();
    for r in reports {
        if r.task_id != first.task_id {
            return Err(EvalError::ReportMismatch(format!(
                "task: {} vs {}",
                first.task_id, r.task_id
            )));
        }
        if !r.per_language.keys().eq(targets.iter()) {
            return Err(EvalError::ReportMismatch(format!(
                "target languages of `{}`",
                r.method
            )));
        }
    }
    let mut rows = Vec::new();
    for r in reports {
        rows.push(ComparisonRow {
            method: r.method.clone(),
            kind: match r.kind {
                ModelKind::Mean => RowKind::Baseline,
                ModelKind::BoostedTrees => RowKind::BoostedTrees,
                ModelKind::GroupLasso => RowKind::GroupLasso,
            },
            mae_x100: r.mae_x100,
            coverage: r.per_language.len(),
            per_language: r
                .per_language
                .iter()
                .map(|(t, l)| (t.clone(), Some(100.0 * l.abs_error)))
                .collect(),
        });
    }
    for ext in external {
        if ext.task_id != first.task_id {
            return Err(EvalError::ReportMismatch(format!(
                "external `{}` is for task {}",
                ext.name, ext.task_id
            )));
        }
        if let Some(t) = ext.per_target.keys().find(|t| !targets.contains(t)) {
            return Err(EvalError::UnknownTarget {
                method: ext.name.clone(),
                target: t.clone(),
            });
        }
        let per_language: BTreeMap<String, Option<f64>> = targets
            .iter()
            .map(|t| {
                let err = ext.per_target.get(t).map(|(p, a)| 100.0 * (p - a).abs());
                (t.clone(), err)
            })
            .collect();
        let pairs: Vec<(f64, f64)> = ext.per_target.values().copied().collect();
        rows.push(ComparisonRow {
            method: ext.name.clone(),
            kind: RowKind::External,
            mae_x100: mae_x100(&pairs)?,
            coverage: pairs.len(),
            per_language,
        });
    }
    rows.sort_by_key(|r| r.kind);
    Ok(ComparisonTable {
        task_id: first.task_id.clone(),
        targets,
        rows,
    })
}

impl ComparisonTable {
    /// Aligned plain-text rendering.
    pub fn render(&self) -> String {
        let mut header = vec!["method".to_string(), "mae_x100".into(), "coverage".into()];
        header.extend(self.targets.iter().cloned());
        let mut lines = vec![header];
        for r in &self.rows {
            let mut cells = vec![
                r.method.clone(),
                format!("{:.2}", r.mae_x100),
                format!("{}/{}", r.coverage, self.targets.len()),
            ];
            cells.extend(self.targets.iter().map(|t| match r.per_language.get(t) {
                Some(Some(e)) => format!("{e:.2}"),
                _ => "-".into(),
            }));
            lines.push(cells);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| {
                lines
                    .iter()
                    .map(|l| l[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = format!("task: {}\n", self.task_id);
        for l in &lines {
            let row: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", row.join("  ").trim_end());
        }
        out
    }

    /// Rows of `target,method,abs_error_x100` for plotting; absent cells are skipped.
    pub fn write_per_language_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "method", "abs_error_x100"])?;
        for t in &self.targets {
            for r in &self.rows {
                if let Some(Some(e)) = r.per_language.get(t) {
                    w.write_record([t.as_str(), &r.method, &e.to_string()])?;
                }
            }
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pivot: &str, target: &str, score: f64) -> PerformanceRecord {
        PerformanceRecord {
            model_id: "mbert".into(),
            task_id: "xnli".into(),
            pivots: vec![pivot.into()],
            target: target.into(),
            metric: "acc".into(),
            score,
        }
    }

    fn empty_ctx() -> FeatureContext {
        FeatureContext::new(
            Default::default(),
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
        )
    }

    fn baseline(records: &[PerformanceRecord]) -> Result<EvaluationReport> {
        lolo_evaluate(
            records,
            &[],
            &ModelSpec::Mean,
            &empty_ctx(),
            &FeatureConfig::default(),
            &LoloOptions::default(),
        )
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae_x100(&[(0.5, 0.5)]).unwrap(), 0.0);
        assert!((mae_x100(&[(0.6, 0.5), (0.4, 0.5)]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mae_x100(&[(1.0, 0.0)]).unwrap(), 100.0);
        assert!(matches!(mae_x100(&[]), Err(EvalError::Empty)));
    }

    #[test]
    fn two_fold_baseline() {
        let r = baseline(&[rec("en", "de", 0.8), rec("en", "fr", 0.6)]).unwrap();
        assert_eq!(r.per_language["de"].predicted, 0.6);
        assert_eq!(r.per_language["fr"].predicted, 0.8);
        assert!((r.mae_x100 - 20.0).abs() < 1e-12);
        assert_eq!(r.n_folds, 2);
        assert!((r.recomputed_mae_x100() - r.mae_x100).abs() < 1e-9);
    }

    #[test]
    fn single_target_is_rejected() {
        assert!(matches!(
            baseline(&[rec("en", "de", 0.8), rec("fr", "de", 0.6)]),
            Err(EvalError::TooFewTargets(1))
        ));
        let mut mixed = vec![rec("en", "de", 0.8), rec("en", "fr", 0.6)];
        mixed[1].task_id = "pawsx".into();
        assert!(matches!(baseline(&mixed), Err(EvalError::MixedTasks(_))));
    }

    #[test]
    fn pivot_side_records_respect_strict_flag() {
        // target sw never appears as a target elsewhere, but is a pivot once
        let records = vec![
            rec("en", "sw", 0.5),
            rec("en", "de", 0.8),
            rec("sw", "de", 0.2),
            rec("en", "fr", 0.7),
        ];
        let loose = baseline(&records).unwrap();
        // loose: fold sw trains on the three other rows
        assert!((loose.per_language["sw"].predicted - (0.8 + 0.2 + 0.7) / 3.0).abs() < 1e-15);
        let strict = lolo_evaluate(
            &records,
            &[],
            &ModelSpec::Mean,
            &empty_ctx(),
            &FeatureConfig::default(),
            &LoloOptions {
                strict_lolo: true,
                jobs: 1,
            },
        )
        .unwrap();
        assert!((strict.per_language["sw"].predicted - 0.75).abs() < 1e-15);
        // both aggregations are present and distinct when a language has two rows
        assert_eq!(strict.per_language["de"].n_records, 2);
        assert_eq!(strict.per_record.len(), 4);
    }

    fn report(kind: ModelKind, mae: f64) -> EvaluationReport {
        let mut per_language = BTreeMap::new();
        for t in ["ar", "bn"] {
            per_language.insert(
                t.to_string(),
                LanguageResult {
                    predicted: 0.5 + mae / 100.0,
                    actual: 0.5,
                    abs_error: mae / 100.0,
                    n_records: 1,
                },
            );
        }
        EvaluationReport {
            task_id: "TyDiQA-GoldP".into(),
            metric: "f1".into(),
            method: kind.display_name().into(),
            kind,
            per_language,
            per_record: Vec::new(),
            mae_x100: mae,
            per_record_mae_x100: mae,
            n_folds: 2,
            strict_lolo: false,
        }
    }

    #[test]
    fn comparison_follows_table_layout() {
        let reports = [
            report(ModelKind::GroupLasso, 4.73),
            report(ModelKind::Mean, 7.82),
            report(ModelKind::BoostedTrees, 5.04),
        ];
        let translate = ExternalMethod {
            name: "Translate".into(),
            task_id: "TyDiQA-GoldP".into(),
            per_target: [("ar", (0.5777, 0.5)), ("bn", (0.4223, 0.5))]
                .into_iter()
                .map(|(t, v)| (t.to_string(), v))
                .collect(),
        };
        let table = compare_methods(&reports, &[translate]).unwrap();
        let methods: Vec<&str> = table.rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(
            methods,
            ["Baseline", "Translate", "Boosted Trees", "Group Lasso"]
        );
        let maes: Vec<f64> = table.rows.iter().map(|r| r.mae_x100).collect();
        for (got, want) in maes.iter().zip([7.82, 7.77, 5.04, 4.73]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        let text = table.render();
        assert!(text.lines().nth(1).unwrap().starts_with("method"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn partial_external_coverage_and_mismatches() {
        let ext = ExternalMethod {
            name: "Translate".into(),
            task_id: "TyDiQA-GoldP".into(),
            per_target: [("ar".to_string(), (0.6, 0.5))].into_iter().collect(),
        };
        let table =
            compare_methods(&[report(ModelKind::Mean, 5.0)], std::slice::from_ref(&ext)).unwrap();
        let row = &table.rows[1];
        assert_eq!(row.coverage, 1);
        assert_eq!(row.per_language["bn"], None);
        assert!((row.mae_x100 - 10.0).abs() < 1e-9);
        let mut buf = Vec::new();
        table.write_per_language_csv(&mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 + 1);

        let single = compare_methods(&[report(ModelKind::Mean, 5.0)], &[]).unwrap();
        assert_eq!(single.rows.len(), 1);

        let mut other = report(ModelKind::GroupLasso, 3.0);
        other.task_id = "XNLI".into();
        assert!(matches!(
            compare_methods(&[report(ModelKind::Mean, 5.0), other], &[]),
            Err(EvalError::ReportMismatch(_))
        ));
        let mut stray = ext;
        stray.per_target.insert("zz".into(), (0.1, 0.2));
        assert!(matches!(
            compare_methods(&[report(ModelKind::Mean, 5.0)], &[stray]),
            Err(EvalError::UnknownTarget { .. })
        ));
    }

    #[test]
    fn external_scores_are_normalized() {
        let text = "method,task,target,predicted,actual\nTranslate,XNLI,sw,52.1,49.7\nTranslate,XNLI,ur,0.55,0.572\n";
        let ext = ingest_external_scores(text, Delimiter::Auto, ScoreScale::Auto).unwrap();
        assert_eq!(ext.len(), 1);
        let (p, a) = ext[0].per_target["sw"];
        assert!((p - 0.521).abs() < 1e-12 && (a - 0.497).abs() < 1e-12);
    }
}
