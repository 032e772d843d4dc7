//! Declarative run configuration.
//!
//! A run is described by one TOML file. Relative paths are resolved against
//! the directory holding that file. Command-line flags override the matching
//! fields, and the resolved configuration is written next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{
    self, BenchmarkRegistry, DataError, Delimiter, DistanceMatrix, Facet, PerformanceRecord,
    PerformanceSchema, ProfileStore, ScoreScale,
};
use crate::evaluation::{self, ExternalMethod};
use crate::features::{tokenizer_quality, FeatureConfig, FeatureContext, FeatureError};
use crate::models::ModelSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("{field}: path does not exist: {path}")]
    MissingPath { field: String, path: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: DataError,
    },
    #[error("{context}: {source}")]
    Feature {
        context: String,
        #[source]
        source: FeatureError,
    },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Primary performance table (one task and metric).
    pub performance: Option<PathBuf>,
    /// Tables for other tasks, used as auxiliary tasks by the group lasso.
    pub auxiliary: Vec<PathBuf>,
    pub profiles: Option<PathBuf>,
    /// Unit of the pre-training size column.
    pub pretrain_unit: Option<String>,
    pub vocabularies: Option<PathBuf>,
    pub tokenization: Option<PathBuf>,
    pub train_sizes: Option<PathBuf>,
    /// Facet name to `lang_a,lang_b,value` file.
    pub matrices: BTreeMap<Facet, PathBuf>,
    /// Benchmark registry; the bundled one is used when absent.
    pub registry: Option<PathBuf>,
    /// `method,task,target,predicted,actual` estimates from other methods.
    pub external: Option<PathBuf>,
    /// Metric to keep when the performance table holds several.
    pub metric: Option<String>,
    pub delimiter: Delimiter,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PivotSection {
    /// Candidate pivot languages; defaults to every profiled language.
    pub candidates: Vec<String>,
    /// Target languages; defaults to every target in the performance table.
    pub targets: Vec<String>,
    /// Model to fit on all records; defaults to `models[0]`.
    pub model: Option<ModelSpec>,
    /// Use a saved model instead of fitting one.
    pub model_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub model_path: Option<PathBuf>,
    pub pivots: Vec<String>,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub low_coverage_threshold: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            low_coverage_threshold: crate::audit::DEFAULT_LOW_COVERAGE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Recorded for provenance; nothing in the pipeline draws random numbers.
    pub seed: u64,
    pub jobs: usize,
    pub strict_lolo: bool,
    pub score_scale: ScoreScale,
    pub data: DataPaths,
    pub features: FeatureConfig,
    pub models: Vec<ModelSpec>,
    pub pivot: PivotSection,
    pub predict: PredictSection,
    pub audit: AuditSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("run"),
            seed: 0,
            jobs: 1,
            strict_lolo: false,
            score_scale: ScoreScale::Auto,
            data: DataPaths::default(),
            features: FeatureConfig::default(),
            models: vec![ModelSpec::Mean],
            pivot: PivotSection::default(),
            predict: PredictSection::default(),
            audit: AuditSection::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })
    }

    /// Reads a config file and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let path = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        rebase(base, &mut self.output_dir);
        let d = &mut self.data;
        for p in [
            &mut d.performance,
            &mut d.profiles,
            &mut d.vocabularies,
            &mut d.tokenization,
            &mut d.train_sizes,
            &mut d.registry,
            &mut d.external,
        ] {
            rebase_opt(base, p);
        }
        d.auxiliary.iter_mut().for_each(|p| rebase(base, p));
        d.matrices.values_mut().for_each(|p| rebase(base, p));
        rebase_opt(base, &mut self.pivot.model_path);
        rebase_opt(base, &mut self.predict.model_path);
    }

    /// Checks that every referenced input exists and every model spec is valid.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        let mut paths: Vec<(String, &PathBuf)> = Vec::new();
        let named = [
            ("data.performance", &d.performance),
            ("data.profiles", &d.profiles),
            ("data.vocabularies", &d.vocabularies),
            ("data.tokenization", &d.tokenization),
            ("data.train_sizes", &d.train_sizes),
            ("data.registry", &d.registry),
            ("data.external", &d.external),
            ("pivot.model_path", &self.pivot.model_path),
            ("predict.model_path", &self.predict.model_path),
        ];
        for (name, p) in named {
            if let Some(p) = p {
                paths.push((name.to_string(), p));
            }
        }
        for (i, p) in d.auxiliary.iter().enumerate() {
            paths.push((format!("data.auxiliary[{i}]"), p));
        }
        for (f, p) in &d.matrices {
            paths.push((format!("data.matrices.{f}"), p));
        }
        for (field, p) in paths {
            if !p.exists() {
                return Err(ConfigError::MissingPath {
                    field,
                    path: p.display().to_string(),
                });
            }
        }
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be >= 1".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate()
                .map_err(|e| ConfigError::Invalid(format!("models[{i}]: {e}")))?;
        }
        if let Some(m) = &self.pivot.model {
            m.validate()
                .map_err(|e| ConfigError::Invalid(format!("pivot.model: {e}")))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Everything a run reads from disk.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub records: Vec<PerformanceRecord>,
    pub auxiliary: Vec<Vec<PerformanceRecord>>,
    pub context: FeatureContext,
    pub registry: Option<BenchmarkRegistry>,
    pub external: Vec<ExternalMethod>,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    datastore::read_to_string(path).map_err(|source| ConfigError::Data {
        context: path.display().to_string(),
        source,
    })
}

fn ctx<T>(path: &Path, r: datastore::Result<T>) -> Result<T> {
    r.map_err(|source| ConfigError::Data {
        context: path.display().to_string(),
        source,
    })
}

fn load_records(
    path: &Path,
    delim: Delimiter,
    scale: ScoreScale,
    metric: Option<&str>,
) -> Result<Vec<PerformanceRecord>> {
    let text = read(path)?;
    let mut records = ctx(
        path,
        datastore::ingest_performance_table(&text, &PerformanceSchema::default(), delim, scale),
    )?;
    if let Some(m) = metric {
        records.retain(|r| r.metric == m);
    }
    Ok(records)
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let d = &cfg.data;
        let delim = d.delimiter;
        let mut warnings = Vec::new();
        let metric = d.metric.as_deref();

        let records = match &d.performance {
            Some(p) => load_records(p, delim, cfg.score_scale, metric)?,
            None => Vec::new(),
        };
        let auxiliary = d
            .auxiliary
            .iter()
            .map(|p| load_records(p, delim, cfg.score_scale, None))
            .collect::<Result<Vec<_>>>()?;

        let profiles = match &d.profiles {
            Some(p) => {
                let unit = d.pretrain_unit.as_deref().unwrap_or("tokens");
                ctx(
                    p,
                    datastore::ingest_language_profiles(&read(p)?, delim, unit),
                )?
            }
            None => ProfileStore::default(),
        };

        let mut matrices = BTreeMap::new();
        for (facet, p) in &d.matrices {
            let loaded: datastore::Loaded<DistanceMatrix> = ctx(
                p,
                datastore::ingest_distance_matrix(&read(p)?, *facet, delim),
            )?;
            warnings.extend(loaded.warnings.into_iter().map(|w| format!("{facet}: {w}")));
            matrices.insert(*facet, loaded.data);
        }

        let vocabularies = match &d.vocabularies {
            Some(p) => {
                let loaded = ctx(p, datastore::ingest_vocabularies(&read(p)?, delim))?;
                warnings.extend(loaded.warnings);
                loaded.data
            }
            None => BTreeMap::new(),
        };

        let mut tokenizer = BTreeMap::new();
        if let Some(p) = &d.tokenization {
            for (lang, words) in ctx(p, datastore::ingest_tokenization(&read(p)?, delim))? {
                let q = tokenizer_quality(&words).map_err(|source| ConfigError::Feature {
                    context: format!("{}: language `{lang}`", p.display()),
                    source,
                })?;
                tokenizer.insert(lang, q);
            }
        }

        let train_sizes = match &d.train_sizes {
            Some(p) => ctx(p, datastore::ingest_train_sizes(&read(p)?, delim))?,
            None => BTreeMap::new(),
        };

        let registry = match &d.registry {
            Some(p) => Some(ctx(
                p,
                datastore::ingest_benchmark_registry(&read(p)?, delim),
            )?),
            None => None,
        };

        let external = match &d.external {
            Some(p) => evaluation::ingest_external_scores(&read(p)?, delim, cfg.score_scale)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?,
            None => Vec::new(),
        };

        Ok(Self {
            records,
            auxiliary,
            context: FeatureContext::new(profiles, matrices, vocabularies, tokenizer, train_sizes),
            registry,
            external,
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides_parse() {
        let cfg = RunConfig::from_toml(
            r#"
            output_dir = "out"
            jobs = 4
            [data]
            performance = "perf.csv"
            [data.matrices]
            syntactic = "syn.csv"
            [features]
            imputation = "zero"
            [[models]]
            kind = "mean"
            [[models]]
            kind = "group_lasso"
            lambda = 0.01
            "#,
            "inline",
        )
        .unwrap();
        assert_eq!(cfg.jobs, 4);
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(
            cfg.models[1],
            ModelSpec::GroupLasso {
                lambda: 0.01,
                tol: 1e-6,
                max_iters: 10000
            }
        );
        assert_eq!(
            cfg.features.imputation,
            crate::features::ImputationPolicy::Zero
        );
        assert_eq!(cfg.features.enabled.len(), 10);
        assert!(cfg.data.matrices.contains_key(&Facet::Syntactic));
        assert_eq!(cfg.audit.low_coverage_threshold, 20);

        let back = RunConfig::from_toml(&cfg.to_toml(), "round trip").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            RunConfig::from_toml("jbos = 2", "inline"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut cfg = RunConfig::from_toml("[data]\nprofiles = \"p.csv\"\n", "inline").unwrap();
        cfg.resolve_paths(Path::new("/tmp/x"));
        assert_eq!(
            cfg.data.profiles.as_deref(),
            Some(Path::new("/tmp/x/p.csv"))
        );
        assert_eq!(cfg.output_dir, Path::new("/tmp/x/run"));
        match cfg.validate() {
            Err(ConfigError::MissingPath { field, path }) => {
                assert_eq!(field, "data.profiles");
                assert_eq!(path, "/tmp/x/p.csv");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_model_spec_rejected() {
        let cfg = RunConfig::from_toml(
            "[[models]]\nkind = \"boosted_trees\"\nn_trees = 0\n",
            "inline",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
