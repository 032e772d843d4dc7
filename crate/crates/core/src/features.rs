//! Feature families for one (pivot set, target) configuration.
//!
//! Emitted order is canonical and independent of how the configuration lists
//! the enabled features:
//!
//! | # | name                   | family          |
//! |---|------------------------|-----------------|
//! | 1 | `log_pretrain_target`  | target          |
//! | 2 | `fertility_target`     | target          |
//! | 3 | `continued_pct_target` | target          |
//! | 4 | `log_pretrain_pivot`   | pivot           |
//! | 5 | `subword_overlap`      | pivot x target  |
//! | 6 | `sim_syntactic`        | pivot x target  |
//! | 7 | `sim_phonological`     | pivot x target  |
//! | 8 | `sim_genetic`          | pivot x target  |
//! | 9 | `sim_geographic`       | pivot x target  |
//! |10 | `log_train_size`       | training data   |
//!
//! With the raw geographic transform, feature 9 is emitted as `dist_geographic`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{DistanceMatrix, Facet, ProfileStore, TokenizedWord, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("no tokenized words supplied")]
    EmptyTokenization,
    #[error("word `{0}` has a subword count of zero")]
    ZeroSubwords(String),
    #[error("no language profile for `{0}`")]
    MissingProfile(String),
    #[error("no {facet} entry for ({pivot}, {target})")]
    MissingEntry {
        facet: Facet,
        pivot: String,
        target: String,
    },
    #[error("no {0} matrix loaded")]
    MissingMatrix(Facet),
    #[error("no vocabulary for `{0}`")]
    MissingVocabulary(String),
    #[error("no tokenizer statistics for `{0}`")]
    MissingTokenizer(String),
    #[error("no training-set size for pivot `{0}`")]
    MissingTrainSize(String),
    #[error("nothing to impute {0} from")]
    NoImputationSource(&'static str),
    #[error("pivot set is empty")]
    EmptyPivots,
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// Jaccard index of two subword vocabularies; 0 when both are empty.
pub fn subword_overlap(vp: &Vocabulary, vt: &Vocabulary) -> f64 {
    jaccard(&vp.subwords, &vt.subwords)
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenizerQuality {
    /// Mean subwords per word.
    pub fertility: f64,
    /// Fraction of words split into two or more subwords.
    pub continued_pct: f64,
}

pub fn tokenizer_quality(words: &[TokenizedWord]) -> Result<TokenizerQuality> {
    if words.is_empty() {
        return Err(FeatureError::EmptyTokenization);
    }
    if let Some(w) = words.iter().find(|w| w.subwords == 0) {
        return Err(FeatureError::ZeroSubwords(w.word.clone()));
    }
    let n = words.len() as f64;
    let total: usize = words.iter().map(|w| w.subwords).sum();
    let continued = words.iter().filter(|w| w.subwords >= 2).count();
    Ok(TokenizerQuality {
        fertility: total as f64 / n,
        continued_pct: continued as f64 / n,
    })
}

/// What to do when an input needed by a feature is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputationPolicy {
    Strict,
    /// Mean of the same quantity over the available data.
    #[default]
    Mean,
    Zero,
}

/// How per-pivot features are reduced over a multi-pivot set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoTransform {
    /// 1 / (1 + d / d_max)
    #[default]
    Similarity,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    LogPretrainTarget,
    FertilityTarget,
    ContinuedPctTarget,
    LogPretrainPivot,
    SubwordOverlap,
    SimSyntactic,
    SimPhonological,
    SimGenetic,
    SimGeographic,
    LogTrainSize,
}

impl FeatureName {
    pub const CANONICAL: [FeatureName; 10] = [
        FeatureName::LogPretrainTarget,
        FeatureName::FertilityTarget,
        FeatureName::ContinuedPctTarget,
        FeatureName::LogPretrainPivot,
        FeatureName::SubwordOverlap,
        FeatureName::SimSyntactic,
        FeatureName::SimPhonological,
        FeatureName::SimGenetic,
        FeatureName::SimGeographic,
        FeatureName::LogTrainSize,
    ];

    pub fn column_name(self, geo: GeoTransform) -> &'static str {
        match self {
            FeatureName::LogPretrainTarget => "log_pretrain_target",
            FeatureName::FertilityTarget => "fertility_target",
            FeatureName::ContinuedPctTarget => "continued_pct_target",
            FeatureName::LogPretrainPivot => "log_pretrain_pivot",
            FeatureName::SubwordOverlap => "subword_overlap",
            FeatureName::SimSyntactic => "sim_syntactic",
            FeatureName::SimPhonological => "sim_phonological",
            FeatureName::SimGenetic => "sim_genetic",
            FeatureName::SimGeographic => match geo {
                GeoTransform::Similarity => "sim_geographic",
                GeoTransform::Raw => "dist_geographic",
            },
            FeatureName::LogTrainSize => "log_train_size",
        }
    }

    fn facet(self) -> Option<Facet> {
        match self {
            FeatureName::SimSyntactic => Some(Facet::Syntactic),
            FeatureName::SimPhonological => Some(Facet::Phonological),
            FeatureName::SimGenetic => Some(Facet::Genetic),
            FeatureName::SimGeographic => Some(Facet::Geographic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub enabled: Vec<FeatureName>,
    pub imputation: ImputationPolicy,
    pub aggregation: Aggregation,
    pub geo_transform: GeoTransform,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            enabled: FeatureName::CANONICAL.to_vec(),
            imputation: ImputationPolicy::default(),
            aggregation: Aggregation::default(),
            geo_transform: GeoTransform::default(),
        }
    }
}

impl FeatureConfig {
    /// A configuration that emits no features (enough for the mean baseline).
    pub fn empty() -> Self {
        Self {
            enabled: Vec::new(),
            ..Self::default()
        }
    }

    /// Enabled features in canonical order, deduplicated.
    pub fn ordered(&self) -> Vec<FeatureName> {
        let set: BTreeSet<_> = self.enabled.iter().copied().collect();
        FeatureName::CANONICAL
            .into_iter()
            .filter(|f| set.contains(f))
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.ordered()
            .into_iter()
            .map(|f| f.column_name(self.geo_transform).to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub pivots: Vec<String>,
    pub target: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

fn log_size(n: f64) -> f64 {
    (1.0 + n).log10()
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Every input feature assembly reads, plus the imputation means derived from it.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    profiles: ProfileStore,
    matrices: BTreeMap<Facet, DistanceMatrix>,
    vocabularies: BTreeMap<String, Vocabulary>,
    tokenizer: BTreeMap<String, TokenizerQuality>,
    train_sizes: BTreeMap<String, f64>,
    default_train_size: Option<f64>,
    means: Means,
}

#[derive(Debug, Clone, Default)]
struct Means {
    log_pretrain: Option<f64>,
    overlap: Option<f64>,
    fertility: Option<f64>,
    continued: Option<f64>,
    train_size: Option<f64>,
}

impl FeatureContext {
    pub fn new(
        profiles: ProfileStore,
        matrices: BTreeMap<Facet, DistanceMatrix>,
        vocabularies: BTreeMap<String, Vocabulary>,
        tokenizer: BTreeMap<String, TokenizerQuality>,
        train_sizes: BTreeMap<String, f64>,
    ) -> Self {
        let vocabs: Vec<&Vocabulary> = vocabularies.values().collect();
        let overlap = mean(
            vocabs
                .iter()
                .enumerate()
                .flat_map(|(i, a)| vocabs[i + 1..].iter().map(move |b| subword_overlap(a, b))),
        );
        let means = Means {
            log_pretrain: mean(
                profiles
                    .profiles
                    .values()
                    .map(|p| log_size(p.pretrain_tokens)),
            ),
            overlap,
            fertility: mean(tokenizer.values().map(|q| q.fertility)),
            continued: mean(tokenizer.values().map(|q| q.continued_pct)),
            train_size: mean(train_sizes.values().copied()),
        };
        Self {
            profiles,
            matrices,
            vocabularies,
            tokenizer,
            train_sizes,
            default_train_size: None,
            means,
        }
    }

    /// Size assumed for pivots without a known training set.
    pub fn with_default_train_size(mut self, size: Option<f64>) -> Self {
        self.default_train_size = size;
        self
    }

    pub fn vocabulary_count(&self) -> usize {
        self.vocabularies.len()
    }

    pub fn tokenizer_count(&self) -> usize {
        self.tokenizer.len()
    }

    pub fn profiles(&self) -> &ProfileStore {
        &self.profiles
    }

    pub fn matrix(&self, facet: Facet) -> Option<&DistanceMatrix> {
        self.matrices.get(&facet)
    }

    pub fn train_sizes(&self) -> &BTreeMap<String, f64> {
        &self.train_sizes
    }

    pub fn has_train_size(&self, code: &str) -> bool {
        self.train_sizes.contains_key(code)
    }

    /// Median of the known training-set sizes.
    pub fn median_train_size(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.train_sizes.values().copied().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        })
    }

    fn impute(
        &self,
        policy: ImputationPolicy,
        mean: Option<f64>,
        what: &'static str,
        strict_err: impl FnOnce() -> FeatureError,
    ) -> Result<f64> {
        match policy {
            ImputationPolicy::Strict => Err(strict_err()),
            ImputationPolicy::Zero => Ok(0.0),
            ImputationPolicy::Mean => mean.ok_or(FeatureError::NoImputationSource(what)),
        }
    }

    fn log_pretrain(&self, code: &str, policy: ImputationPolicy) -> Result<f64> {
        match self.profiles.get(code) {
            Some(p) => Ok(log_size(p.pretrain_tokens)),
            None => self.impute(policy, self.means.log_pretrain, "pre-training size", || {
                FeatureError::MissingProfile(code.to_string())
            }),
        }
    }

    fn overlap(&self, p: &str, t: &str, policy: ImputationPolicy) -> Result<f64> {
        match (self.vocabularies.get(p), self.vocabularies.get(t)) {
            (Some(a), Some(b)) => Ok(subword_overlap(a, b)),
            (a, _) => {
                let missing = if a.is_none() { p } else { t };
                self.impute(policy, self.means.overlap, "subword overlap", || {
                    FeatureError::MissingVocabulary(missing.to_string())
                })
            }
        }
    }

    fn tokenizer_stats(&self, t: &str, policy: ImputationPolicy) -> Result<TokenizerQuality> {
        match self.tokenizer.get(t) {
            Some(q) => Ok(*q),
            None => {
                let missing = || FeatureError::MissingTokenizer(t.to_string());
                Ok(TokenizerQuality {
                    fertility: self.impute(policy, self.means.fertility, "fertility", missing)?,
                    continued_pct: self.impute(
                        policy,
                        self.means.continued,
                        "continued words",
                        missing,
                    )?,
                })
            }
        }
    }

    fn train_size(&self, p: &str, policy: ImputationPolicy) -> Result<f64> {
        if let Some(&s) = self.train_sizes.get(p) {
            return Ok(s);
        }
        if let Some(s) = self.default_train_size {
            return Ok(s);
        }
        self.impute(policy, self.means.train_size, "training size", || {
            FeatureError::MissingTrainSize(p.to_string())
        })
    }
}

/// Relatedness between `p` and `t` on one facet, oriented so that larger
/// means closer unless the raw geographic transform is requested.
pub fn typological_similarity(
    p: &str,
    t: &str,
    facet: Facet,
    matrix: &DistanceMatrix,
    policy: ImputationPolicy,
    geo: GeoTransform,
) -> Result<f64> {
    let raw = match matrix.get(p, t) {
        Some(v) => v,
        None => match policy {
            ImputationPolicy::Strict => {
                return Err(FeatureError::MissingEntry {
                    facet,
                    pivot: p.to_string(),
                    target: t.to_string(),
                })
            }
            ImputationPolicy::Zero => return Ok(0.0),
            ImputationPolicy::Mean => matrix
                .mean()
                .ok_or(FeatureError::NoImputationSource("typological relatedness"))?,
        },
    };
    if facet.is_similarity() || geo == GeoTransform::Raw {
        return Ok(raw);
    }
    let d_max = matrix.max();
    Ok(if d_max > 0.0 {
        1.0 / (1.0 + raw / d_max)
    } else {
        1.0
    })
}

/// Builds the feature vector for `target` under the pivot set `pivots`.
pub fn assemble_features(
    target: &str,
    pivots: &[String],
    ctx: &FeatureContext,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let order = config.ordered();
    if order.is_empty() {
        return Ok(FeatureVector {
            names: Vec::new(),
            values: Vec::new(),
            pivots: pivots.to_vec(),
            target: target.to_string(),
        });
    }
    if pivots.is_empty() {
        return Err(FeatureError::EmptyPivots);
    }
    let policy = config.imputation;
    let aggregate = |vals: Vec<f64>| -> f64 {
        match config.aggregation {
            Aggregation::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
            Aggregation::Max => vals.into_iter().fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let per_pivot = |f: &dyn Fn(&str) -> Result<f64>| -> Result<f64> {
        let vals = pivots.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
        Ok(aggregate(vals))
    };

    let mut tok: Option<TokenizerQuality> = None;
    let mut values = Vec::with_capacity(order.len());
    for feat in &order {
        let v = match feat {
            FeatureName::LogPretrainTarget => ctx.log_pretrain(target, policy)?,
            FeatureName::FertilityTarget | FeatureName::ContinuedPctTarget => {
                let q = match tok {
                    Some(q) => q,
                    None => *tok.insert(ctx.tokenizer_stats(target, policy)?),
                };
                if *feat == FeatureName::FertilityTarget {
                    q.fertility
                } else {
                    q.continued_pct
                }
            }
            FeatureName::LogPretrainPivot => per_pivot(&|p| ctx.log_pretrain(p, policy))?,
            FeatureName::SubwordOverlap => per_pivot(&|p| ctx.overlap(p, target, policy))?,
            FeatureName::SimSyntactic
            | FeatureName::SimPhonological
            | FeatureName::SimGenetic
            | FeatureName::SimGeographic => {
                let facet = feat.facet().expect("relatedness feature");
                match ctx.matrix(facet) {
                    Some(m) => per_pivot(&|p| {
                        typological_similarity(p, target, facet, m, policy, config.geo_transform)
                    })?,
                    None if policy == ImputationPolicy::Zero => 0.0,
                    None => return Err(FeatureError::MissingMatrix(facet)),
                }
            }
            FeatureName::LogTrainSize => {
                let total = pivots
                    .iter()
                    .map(|p| ctx.train_size(p, policy))
                    .sum::<Result<f64>>()?;
                log_size(total)
            }
        };
        values.push(v);
    }
    Ok(FeatureVector {
        names: config.names(),
        values,
        pivots: pivots.to_vec(),
        target: target.to_string(),
    })
}
