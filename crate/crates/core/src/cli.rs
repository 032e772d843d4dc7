//! Subcommand implementations behind the `perfpred` binary.
//!
//! Every command writes into the configured run directory. JSON outputs are
//! deterministic; the wall-clock timestamp lives only in `metadata.json`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::audit;
use crate::config::{ConfigError, Inputs, RunConfig};
use crate::datastore::BenchmarkRegistry;
use crate::evaluation::{self, LoloOptions};
use crate::features::{assemble_features, FeatureConfig};
use crate::models::{self, ModelSpec, RegressionModel, TaskSamples};
use crate::pivot;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input data (exit code 1).
    #[error(transparent)]
    Validation(#[from] ConfigError),
    /// Failure while fitting, evaluating or writing results (exit code 2).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn runtime<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(ConfigError::Invalid(msg.into()))
}

/// Output directory handle; creates the directory on first use.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(runtime(&root.display().to_string()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(runtime(&p.display().to_string()))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(runtime(name))?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn write_with<F>(&self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> std::result::Result<(), Box<dyn std::error::Error>>,
    {
        let mut buf = Vec::new();
        f(&mut buf).map_err(runtime(name))?;
        self.write(name, buf)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    unix_time: u64,
}

/// Writes the resolved config and the metadata file, then returns the run dir.
fn start_run(cfg: &RunConfig, command: &str) -> Result<RunDir> {
    let dir = RunDir::create(&cfg.output_dir)?;
    dir.write("resolved_config.toml", cfg.to_toml())?;
    let unix_time = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    dir.write_json(
        "metadata.json",
        &Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            unix_time,
        },
    )?;
    Ok(dir)
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    for w in &inputs.warnings {
        log::warn!("{w}");
    }
    Ok(inputs)
}

fn require_records(inputs: &Inputs) -> Result<()> {
    if inputs.records.is_empty() {
        return Err(invalid("data.performance is missing or holds no records"));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ValidationSummary {
    pub records: usize,
    pub tasks: Vec<String>,
    pub metrics: Vec<String>,
    pub targets: usize,
    pub pivots: usize,
    pub auxiliary_records: Vec<usize>,
    pub profiles: usize,
    pub vocabularies: usize,
    pub tokenizer_languages: usize,
    pub train_sizes: usize,
    pub matrices: Vec<String>,
    pub registry_tasks: Option<usize>,
    pub external_methods: usize,
    pub warnings: Vec<String>,
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationSummary> {
    let inputs = load_inputs(cfg)?;
    let r = &inputs.records;
    let set =
        |f: &dyn Fn(&crate::datastore::PerformanceRecord) -> Vec<String>| -> BTreeSet<String> {
            r.iter().flat_map(f).collect()
        };
    let ctx = &inputs.context;
    let summary = ValidationSummary {
        records: r.len(),
        tasks: set(&|x| vec![x.task_id.clone()]).into_iter().collect(),
        metrics: set(&|x| vec![x.metric.clone()]).into_iter().collect(),
        targets: set(&|x| vec![x.target.clone()]).len(),
        pivots: set(&|x| x.pivots.clone()).len(),
        auxiliary_records: inputs.auxiliary.iter().map(Vec::len).collect(),
        profiles: ctx.profiles().len(),
        vocabularies: ctx.vocabulary_count(),
        tokenizer_languages: ctx.tokenizer_count(),
        train_sizes: ctx.train_sizes().len(),
        matrices: cfg.data.matrices.keys().map(|f| f.to_string()).collect(),
        registry_tasks: inputs.registry.as_ref().map(BenchmarkRegistry::len),
        external_methods: inputs.external.len(),
        warnings: inputs.warnings.clone(),
    };
    let dir = start_run(cfg, "validate")?;
    dir.write_json("validation.json", &summary)?;
    Ok(summary)
}

pub fn cmd_featurize(cfg: &RunConfig) -> Result<PathBuf> {
    let inputs = load_inputs(cfg)?;
    require_records(&inputs)?;
    let names = cfg.features.names();
    let mut records = inputs.records.clone();
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let dir = start_run(cfg, "featurize")?;
    dir.write_with("features.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["model", "task", "pivots", "target", "metric", "score"];
        header.extend(names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &records {
            let fv = assemble_features(&r.target, &r.pivots, &inputs.context, &cfg.features)?;
            let mut row = vec![
                r.model_id.clone(),
                r.task_id.clone(),
                r.pivots.join(";"),
                r.target.clone(),
                r.metric.clone(),
                r.score.to_string(),
            ];
            row.extend(fv.values.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Fits `spec` on every record of the primary task plus the auxiliary tasks.
fn fit_all(spec: &ModelSpec, inputs: &Inputs, features: &FeatureConfig) -> Result<RegressionModel> {
    let empty = FeatureConfig::empty();
    let config = if spec.uses_features() {
        features
    } else {
        &empty
    };
    let samples = |records: &[crate::datastore::PerformanceRecord]| -> Result<TaskSamples> {
        let mut sorted = records.to_vec();
        sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let task_id = sorted
            .first()
            .map(|r| r.task_id.clone())
            .unwrap_or_default();
        let samples = sorted
            .iter()
            .map(|r| {
                assemble_features(&r.target, &r.pivots, &inputs.context, config)
                    .map(|fv| (fv, r.score))
                    .map_err(|e| invalid(format!("{} -> {}: {e}", r.pivots.join(";"), r.target)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TaskSamples { task_id, samples })
    };
    let mut tasks = vec![samples(&inputs.records)?];
    if matches!(spec, ModelSpec::GroupLasso { .. }) {
        for aux in &inputs.auxiliary {
            tasks.push(samples(aux)?);
        }
    }
    spec.fit(&tasks, 0).map_err(runtime("fit"))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    let inputs = load_inputs(cfg)?;
    require_records(&inputs)?;
    let spec = cfg
        .models
        .first()
        .ok_or_else(|| invalid("no model configured"))?;
    let model = fit_all(spec, &inputs, &cfg.features)?;
    let dir = start_run(cfg, "train")?;
    dir.write("model.json", model.to_json() + "\n")
}

pub fn cmd_lolo(cfg: &RunConfig) -> Result<evaluation::ComparisonTable> {
    let inputs = load_inputs(cfg)?;
    require_records(&inputs)?;
    if cfg.models.is_empty() {
        return Err(invalid("no model configured"));
    }
    let options = LoloOptions {
        strict_lolo: cfg.strict_lolo,
        jobs: cfg.jobs,
    };
    let reports = cfg
        .models
        .iter()
        .map(|spec| {
            evaluation::lolo_evaluate(
                &inputs.records,
                &inputs.auxiliary,
                spec,
                &inputs.context,
                &cfg.features,
                &options,
            )
            .map_err(runtime(spec.kind().display_name()))
        })
        .collect::<Result<Vec<_>>>()?;
    let table =
        evaluation::compare_methods(&reports, &inputs.external).map_err(runtime("comparison"))?;
    let dir = start_run(cfg, "lolo")?;
    dir.write_json("report.json", &reports)?;
    dir.write_json("comparison.json", &table)?;
    dir.write("comparison.txt", table.render())?;
    dir.write_with("per_language.csv", |buf| {
        Ok(table.write_per_language_csv(buf)?)
    })?;
    Ok(table)
}

fn load_model(path: Option<&Path>) -> Result<RegressionModel> {
    let path = path.ok_or_else(|| invalid("model_path is not set"))?;
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    RegressionModel::from_json(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// A saved mean baseline has no feature columns, whatever the config enables.
fn features_for(model: &RegressionModel, cfg: &RunConfig) -> FeatureConfig {
    if model.feature_order.is_empty() {
        FeatureConfig::empty()
    } else {
        cfg.features.clone()
    }
}

#[derive(Debug, Serialize)]
pub struct PredictionRow {
    pub pivots: String,
    pub target: String,
    pub predicted: f64,
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PredictionRow>> {
    let inputs = load_inputs(cfg)?;
    let model = load_model(cfg.predict.model_path.as_deref())?;
    let p = &cfg.predict;
    if p.pivots.is_empty() || p.targets.is_empty() {
        return Err(invalid(
            "predict.pivots and predict.targets must be non-empty",
        ));
    }
    let ctx = pivot::counterfactual_context(&inputs.context);
    let features = features_for(&model, cfg);
    let mut rows = Vec::new();
    for t in &p.targets {
        let fv = assemble_features(t, &p.pivots, &ctx, &features)
            .map_err(|e| invalid(format!("{} -> {t}: {e}", p.pivots.join(";"))))?;
        let predicted = models::predict(&model, &fv).map_err(runtime(t))?;
        rows.push(PredictionRow {
            pivots: p.pivots.join(";"),
            target: t.clone(),
            predicted,
        });
    }
    let dir = start_run(cfg, "predict")?;
    dir.write_with("predictions.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(rows)
}

pub fn cmd_pivot(cfg: &RunConfig) -> Result<pivot::PivotGrid> {
    let inputs = load_inputs(cfg)?;
    let model = match &cfg.pivot.model_path {
        Some(p) => load_model(Some(p))?,
        None => {
            require_records(&inputs)?;
            let spec = cfg
                .pivot
                .model
                .as_ref()
                .or(cfg.models.first())
                .ok_or_else(|| invalid("no model configured"))?;
            fit_all(spec, &inputs, &cfg.features)?
        }
    };
    let candidates: Vec<String> = if cfg.pivot.candidates.is_empty() {
        inputs
            .context
            .profiles()
            .codes()
            .map(String::from)
            .collect()
    } else {
        cfg.pivot.candidates.clone()
    };
    let targets: Vec<String> = if cfg.pivot.targets.is_empty() {
        let set: BTreeSet<String> = inputs.records.iter().map(|r| r.target.clone()).collect();
        set.into_iter().collect()
    } else {
        cfg.pivot.targets.clone()
    };
    let features = features_for(&model, cfg);
    let ctx = pivot::counterfactual_context(&inputs.context);
    let grid = pivot::pivot_matrix(&model, &targets, &candidates, &ctx, &features, cfg.jobs)
        .map_err(|e| match e {
            pivot::PivotError::NoCandidates | pivot::PivotError::NoTargets => {
                invalid(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        })?;
    if !grid.assumed_train_size.is_empty() {
        log::info!(
            "median training-set size assumed for {} pivot(s)",
            grid.assumed_train_size.len()
        );
    }
    let dir = start_run(cfg, "pivot")?;
    dir.write_with("pivot_grid.csv", |buf| Ok(grid.write_csv(buf)?))?;
    dir.write_json("pivot.json", &grid)?;
    Ok(grid)
}

pub fn cmd_audit(cfg: &RunConfig) -> Result<audit::CoverageReport> {
    let inputs = load_inputs(cfg)?;
    let registry = inputs
        .registry
        .clone()
        .unwrap_or_else(BenchmarkRegistry::bundled);
    let counts = audit::language_task_counts(&registry, inputs.context.profiles());
    for w in &counts.warnings {
        log::info!("{w}");
    }
    let report = audit::coverage_report(
        &registry,
        inputs.context.profiles(),
        cfg.audit.low_coverage_threshold,
    )
    .map_err(|e| invalid(e.to_string()))?;
    let dir = start_run(cfg, "audit")?;
    dir.write_json("report.json", &report)?;
    dir.write_with("audit_yearwise.csv", |b| Ok(report.write_yearwise_csv(b)?))?;
    dir.write_with(
        "audit_langcount_rcdf.csv",
        |b| Ok(report.write_rcdf_csv(b)?),
    )?;
    if !report.per_language_task_count.is_empty() {
        dir.write_with("per_language.csv", |b| Ok(report.write_language_csv(b)?))?;
    }
    dir.write_with("audit_families.csv", |b| Ok(report.write_family_csv(b)?))?;
    Ok(report)
}
