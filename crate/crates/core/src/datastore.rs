//! Ingestion and validation of every external table the toolkit consumes.
//!
//! All tabular inputs are UTF-8 delimited text with a header row. Lines
//! starting with `#` are treated as comments. Row indices reported in errors
//! are 1-based data-row indices (the header is not counted).
//!
//! Every store is immutable once loaded; the `write_*` functions emit the
//! same formats the `ingest_*` functions read.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled survey of 18 multilingual benchmarks (language and family counts only).
pub const BUNDLED_REGISTRY: &str = include_str!("../data/benchmark_registry.csv");

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row}: score {score} outside [0, 100]")]
    ScoreOutOfRange { row: usize, score: f64 },
    #[error("duplicate key {key} in rows {first} and {second}")]
    DuplicateKey {
        key: String,
        first: usize,
        second: usize,
    },
    #[error("duplicate language code `{code}` in rows {first} and {second}")]
    DuplicateCode {
        code: String,
        first: usize,
        second: usize,
    },
    #[error("row {row}: negative pre-training size {value} for `{code}`")]
    NegativeSize {
        row: usize,
        code: String,
        value: f64,
    },
    #[error("row {row}: joshi class {value} for `{code}` outside 0..=5")]
    InvalidJoshiClass {
        row: usize,
        code: String,
        value: i64,
    },
    #[error("typology facet `{facet}` has dimension {found} for `{code}`, expected {expected}")]
    TypologyDimension {
        facet: String,
        code: String,
        expected: usize,
        found: usize,
    },
    #[error("conflicting entries for ({a}, {b}): {first} vs {second}")]
    AsymmetricEntry {
        a: String,
        b: String,
        first: f64,
        second: f64,
    },
    #[error("{facet} entry ({a}, {b}) = {value} outside its valid range")]
    EntryOutOfRange {
        facet: Facet,
        a: String,
        b: String,
        value: f64,
    },
    #[error("task `{task}` declares {declared} languages but lists {listed}")]
    CountMismatch {
        task: String,
        declared: usize,
        listed: usize,
    },
    #[error("row {row}: cannot parse release year `{value}`")]
    BadYear { row: usize, value: String },
    #[error("row {row}: invalid field: {message}")]
    InvalidField { row: usize, message: String },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// A value together with non-fatal observations made while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub data: T,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Auto,
    Comma,
    Tab,
}

impl Delimiter {
    fn resolve(self, text: &str) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
            Delimiter::Auto => {
                let header = text
                    .lines()
                    .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
                    .unwrap_or("");
                if header.contains('\t') {
                    b'\t'
                } else {
                    b','
                }
            }
        }
    }
}

/// How raw scores are interpreted on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScale {
    /// Values in (1, 100] are percentages; values in [0, 1] are fractions.
    #[default]
    Auto,
    Percent,
    Fraction,
}

/// Maps a raw score onto [0, 1]. Returns `None` when the value is out of range
/// for the chosen scale.
pub fn normalize_score(raw: f64, scale: ScoreScale) -> Option<f64> {
    if !raw.is_finite() {
        return None;
    }
    match scale {
        ScoreScale::Auto => {
            if (0.0..=1.0).contains(&raw) {
                Some(raw)
            } else if raw > 1.0 && raw <= 100.0 {
                Some(raw / 100.0)
            } else {
                None
            }
        }
        ScoreScale::Percent => (0.0..=100.0).contains(&raw).then(|| raw / 100.0),
        ScoreScale::Fraction => (0.0..=1.0).contains(&raw).then_some(raw),
    }
}

fn reader(text: &str, delimiter: Delimiter, flexible: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter.resolve(text))
        .comment(Some(b'#'))
        .flexible(flexible)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn optional_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<&str> {
    rec.get(idx).ok_or_else(|| DataError::MalformedRow {
        row,
        message: format!("missing field {}", idx + 1),
    })
}

fn parse_f64(text: &str, row: usize, what: &str) -> Result<f64> {
    text.parse::<f64>().map_err(|_| DataError::MalformedRow {
        row,
        message: format!("cannot parse {what} `{text}` as a number"),
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(s)
}

fn split_list(text: &str) -> Vec<String> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

// ---------------------------------------------------------------------------
// Performance records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub model_id: String,
    pub task_id: String,
    /// Ordered, non-empty pivot set.
    pub pivots: Vec<String>,
    pub target: String,
    pub metric: String,
    /// Fraction in [0, 1].
    pub score: f64,
}

impl PerformanceRecord {
    pub fn key(&self) -> (String, String, Vec<String>, String, String) {
        (
            self.model_id.clone(),
            self.task_id.clone(),
            self.pivots.clone(),
            self.target.clone(),
            self.metric.clone(),
        )
    }

    /// Canonical ordering used wherever record order must not matter.
    pub fn sort_key(&self) -> (&str, &str, &str, &str, &[String]) {
        (
            &self.task_id,
            &self.metric,
            &self.model_id,
            &self.target,
            &self.pivots,
        )
    }
}

/// Column names for the performance table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerformanceSchema {
    pub model: String,
    pub task: String,
    pub pivots: String,
    pub target: String,
    pub metric: String,
    pub score: String,
}

impl Default for PerformanceSchema {
    fn default() -> Self {
        Self {
            model: "model".into(),
            task: "task".into(),
            pivots: "pivots".into(),
            target: "target".into(),
            metric: "metric".into(),
            score: "score".into(),
        }
    }
}

/// Parses a performance table. Pivots are `;`-separated.
pub fn ingest_performance_table(
    text: &str,
    schema: &PerformanceSchema,
    delimiter: Delimiter,
    scale: ScoreScale,
) -> Result<Vec<PerformanceRecord>> {
    let mut rdr = reader(text, delimiter, false);
    let headers = rdr.headers()?.clone();
    let cols = [
        column(&headers, &schema.model)?,
        column(&headers, &schema.task)?,
        column(&headers, &schema.pivots)?,
        column(&headers, &schema.target)?,
        column(&headers, &schema.metric)?,
        column(&headers, &schema.score)?,
    ];

    let mut out = Vec::new();
    let mut seen: BTreeMap<_, usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let get = |k: usize| field(&rec, cols[k], row);
        let pivots = split_list(get(2)?);
        let target = get(3)?.to_string();
        if pivots.is_empty() || target.is_empty() {
            return Err(DataError::MalformedRow {
                row,
                message: "pivots and target must be non-empty".into(),
            });
        }
        let raw = parse_f64(get(5)?, row, "score")?;
        let score =
            normalize_score(raw, scale).ok_or(DataError::ScoreOutOfRange { row, score: raw })?;
        let record = PerformanceRecord {
            model_id: get(0)?.to_string(),
            task_id: get(1)?.to_string(),
            pivots,
            target,
            metric: get(4)?.to_string(),
            score,
        };
        if let Some(&first) = seen.get(&record.key()) {
            return Err(DataError::DuplicateKey {
                key: format!(
                    "({}, {}, {}, {}, {})",
                    record.model_id,
                    record.task_id,
                    record.pivots.join(";"),
                    record.target,
                    record.metric
                ),
                first,
                second: row,
            });
        }
        seen.insert(record.key(), row);
        out.push(record);
    }
    Ok(out)
}

pub fn write_performance_table<W: Write>(records: &[PerformanceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "task", "pivots", "target", "metric", "score"])?;
    for r in records {
        w.write_record([
            r.model_id.as_str(),
            &r.task_id,
            &r.pivots.join(";"),
            &r.target,
            &r.metric,
            &r.score.to_string(),
        ])?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Language profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "Indo-European")]
    IndoEuropean,
    #[serde(rename = "Sino-Tibetan")]
    SinoTibetan,
    #[serde(rename = "Niger-Congo")]
    NigerCongo,
    #[serde(rename = "Afro-Asiatic")]
    AfroAsiatic,
    #[serde(rename = "Austronesian")]
    Austronesian,
    #[serde(rename = "Trans-New-Guinea")]
    TransNewGuinea,
    Other,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::IndoEuropean,
        Family::SinoTibetan,
        Family::NigerCongo,
        Family::AfroAsiatic,
        Family::Austronesian,
        Family::TransNewGuinea,
        Family::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::IndoEuropean => "Indo-European",
            Family::SinoTibetan => "Sino-Tibetan",
            Family::NigerCongo => "Niger-Congo",
            Family::AfroAsiatic => "Afro-Asiatic",
            Family::Austronesian => "Austronesian",
            Family::TransNewGuinea => "Trans-New-Guinea",
            Family::Other => "Other",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Family::ALL
            .into_iter()
            .find(|f| {
                f.as_str()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase()
                    == norm
            })
            .ok_or_else(|| format!("unknown language family `{s}`"))
    }
}

/// One dimension of a typology vector; `None` marks a missing value.
pub type TypologyVector = Vec<Option<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub code: String,
    pub pretrain_tokens: f64,
    pub joshi_class: Option<u8>,
    pub family: Option<Family>,
    /// Facet name to vector; a facet present with `None` means "declared but absent".
    pub typology: BTreeMap<String, Option<TypologyVector>>,
    /// (latitude, longitude) in degrees.
    pub coords: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileStore {
    /// Unit of `pretrain_tokens` for this dataset (tokens, sentences, ...).
    pub unit: String,
    pub profiles: BTreeMap<String, LanguageProfile>,
}

impl ProfileStore {
    pub fn get(&self, code: &str) -> Option<&LanguageProfile> {
        self.profiles.get(code)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}

const TYPOLOGY_PREFIX: &str = "typology.";

fn parse_typology(text: &str, row: usize) -> Result<Option<TypologyVector>> {
    if text.is_empty() {
        return Ok(None);
    }
    text.split(';')
        .map(|v| {
            let v = v.trim();
            if v == "_" || v == "?" || v == "--" {
                Ok(None)
            } else {
                parse_f64(v, row, "typology value").map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Parses language profiles.
///
/// Required columns: `code`, `pretrain_size`. Optional: `joshi_class`,
/// `family`, `latitude`, `longitude`, and any number of `typology.<facet>`
/// columns holding `;`-separated values with `_` for missing dimensions.
pub fn ingest_language_profiles(
    text: &str,
    delimiter: Delimiter,
    unit: &str,
) -> Result<ProfileStore> {
    let mut rdr = reader(text, delimiter, false);
    let headers = rdr.headers()?.clone();
    let code_col = column(&headers, "code")?;
    let size_col = column(&headers, "pretrain_size")?;
    let joshi_col = optional_column(&headers, "joshi_class");
    let family_col = optional_column(&headers, "family");
    let lat_col = optional_column(&headers, "latitude");
    let lon_col = optional_column(&headers, "longitude");
    let typ_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(TYPOLOGY_PREFIX).map(|f| (i, f.to_string())))
        .collect();

    let mut rows: BTreeMap<String, usize> = BTreeMap::new();
    let mut profiles = BTreeMap::new();
    let mut dims: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let code = field(&rec, code_col, row)?.to_string();
        if code.is_empty() {
            return Err(DataError::MalformedRow {
                row,
                message: "empty language code".into(),
            });
        }
        if let Some(&first) = rows.get(&code) {
            return Err(DataError::DuplicateCode {
                code,
                first,
                second: row,
            });
        }
        let size = parse_f64(field(&rec, size_col, row)?, row, "pretrain_size")?;
        if size < 0.0 || !size.is_finite() {
            return Err(DataError::NegativeSize {
                row,
                code,
                value: size,
            });
        }
        let opt = |col: Option<usize>| col.and_then(|c| rec.get(c)).filter(|s| !s.is_empty());
        let joshi_class = match opt(joshi_col) {
            None => None,
            Some(s) => {
                let v: i64 = s.parse().map_err(|_| DataError::InvalidField {
                    row,
                    message: format!("joshi_class `{s}`"),
                })?;
                if !(0..=5).contains(&v) {
                    return Err(DataError::InvalidJoshiClass {
                        row,
                        code,
                        value: v,
                    });
                }
                Some(v as u8)
            }
        };
        let family = opt(family_col)
            .map(|s| s.parse::<Family>())
            .transpose()
            .map_err(|message| DataError::InvalidField { row, message })?;
        let coords = match (opt(lat_col), opt(lon_col)) {
            (Some(a), Some(b)) => Some((
                parse_f64(a, row, "latitude")?,
                parse_f64(b, row, "longitude")?,
            )),
            _ => None,
        };
        let mut typology = BTreeMap::new();
        for (col, facet) in &typ_cols {
            let vec = parse_typology(rec.get(*col).unwrap_or(""), row)?;
            if let Some(v) = &vec {
                match dims.get(facet) {
                    Some((expected, _)) if *expected != v.len() => {
                        return Err(DataError::TypologyDimension {
                            facet: facet.clone(),
                            code,
                            expected: *expected,
                            found: v.len(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        dims.insert(facet.clone(), (v.len(), code.clone()));
                    }
                }
            }
            typology.insert(facet.clone(), vec);
        }
        rows.insert(code.clone(), row);
        profiles.insert(
            code.clone(),
            LanguageProfile {
                code,
                pretrain_tokens: size,
                joshi_class,
                family,
                typology,
                coords,
            },
        );
    }
    Ok(ProfileStore {
        unit: unit.to_string(),
        profiles,
    })
}

pub fn write_language_profiles<W: Write>(store: &ProfileStore, out: W) -> Result<()> {
    let facets: BTreeSet<&String> = store
        .profiles
        .values()
        .flat_map(|p| p.typology.keys())
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "code",
        "pretrain_size",
        "joshi_class",
        "family",
        "latitude",
        "longitude",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(facets.iter().map(|f| format!("{TYPOLOGY_PREFIX}{f}")));
    w.write_record(&header)?;
    for p in store.profiles.values() {
        let mut row = vec![
            p.code.clone(),
            p.pretrain_tokens.to_string(),
            p.joshi_class.map(|c| c.to_string()).unwrap_or_default(),
            p.family.map(|f| f.to_string()).unwrap_or_default(),
            p.coords.map(|c| c.0.to_string()).unwrap_or_default(),
            p.coords.map(|c| c.1.to_string()).unwrap_or_default(),
        ];
        for f in &facets {
            let cell = match p.typology.get(*f) {
                Some(Some(v)) => v
                    .iter()
                    .map(|x| x.map(|x| x.to_string()).unwrap_or_else(|| "_".into()))
                    .collect::<Vec<_>>()
                    .join(";"),
                _ => String::new(),
            };
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Vocabularies and tokenization samples
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub code: String,
    pub subwords: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<I, S>(code: &str, subwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            code: code.to_string(),
            subwords: subwords.into_iter().map(Into::into).collect(),
        }
    }
}

/// Parses a two-column `lang,subword` listing. A row with an empty subword
/// declares a language with an empty vocabulary, which is reported as a warning.
pub fn ingest_vocabularies(
    text: &str,
    delimiter: Delimiter,
) -> Result<Loaded<BTreeMap<String, Vocabulary>>> {
    let mut rdr = reader(text, delimiter, true);
    let headers = rdr.headers()?.clone();
    let lang_col = column(&headers, "lang")?;
    let sub_col = column(&headers, "subword")?;
    let mut vocabs: BTreeMap<String, Vocabulary> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let lang = field(&rec, lang_col, row)?.to_string();
        let sub = rec.get(sub_col).unwrap_or("");
        let entry = vocabs.entry(lang.clone()).or_insert_with(|| Vocabulary {
            code: lang,
            subwords: BTreeSet::new(),
        });
        if !sub.is_empty() {
            entry.subwords.insert(sub.to_string());
        }
    }
    let warnings = vocabs
        .values()
        .filter(|v| v.subwords.is_empty())
        .map(|v| format!("vocabulary for `{}` is empty", v.code))
        .collect();
    Ok(Loaded {
        data: vocabs,
        warnings,
    })
}

pub fn write_vocabularies<W: Write>(vocabs: &BTreeMap<String, Vocabulary>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lang", "subword"])?;
    for v in vocabs.values() {
        if v.subwords.is_empty() {
            w.write_record([v.code.as_str(), ""])?;
        }
        for s in &v.subwords {
            w.write_record([v.code.as_str(), s])?;
        }
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// One tokenized word from a reference corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedWord {
    pub word: String,
    pub subwords: usize,
}

/// Parses `lang,word,subwords` rows into per-language samples.
pub fn ingest_tokenization(
    text: &str,
    delimiter: Delimiter,
) -> Result<BTreeMap<String, Vec<TokenizedWord>>> {
    let mut rdr = reader(text, delimiter, false);
    let headers = rdr.headers()?.clone();
    let lang_col = column(&headers, "lang")?;
    let word_col = column(&headers, "word")?;
    let n_col = column(&headers, "subwords")?;
    let mut out: BTreeMap<String, Vec<TokenizedWord>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let n_text = field(&rec, n_col, row)?;
        let subwords: usize =
            n_text
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| DataError::MalformedRow {
                    row,
                    message: format!("subword count `{n_text}` must be an integer >= 1"),
                })?;
        out.entry(field(&rec, lang_col, row)?.to_string())
            .or_default()
            .push(TokenizedWord {
                word: field(&rec, word_col, row)?.to_string(),
                subwords,
            });
    }
    Ok(out)
}

/// Parses `lang,size` training-set sizes.
pub fn ingest_train_sizes(text: &str, delimiter: Delimiter) -> Result<BTreeMap<String, f64>> {
    let mut rdr = reader(text, delimiter, false);
    let headers = rdr.headers()?.clone();
    let lang_col = column(&headers, "lang")?;
    let size_col = column(&headers, "size")?;
    let mut out = BTreeMap::new();
    let mut rows = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let lang = field(&rec, lang_col, row)?.to_string();
        let size = parse_f64(field(&rec, size_col, row)?, row, "size")?;
        if size < 0.0 || !size.is_finite() {
            return Err(DataError::NegativeSize {
                row,
                code: lang,
                value: size,
            });
        }
        if let Some(first) = rows.insert(lang.clone(), row) {
            return Err(DataError::DuplicateCode {
                code: lang,
                first,
                second: row,
            });
        }
        out.insert(lang, size);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Typology distance matrices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    Syntactic,
    Phonological,
    Genetic,
    Geographic,
}

impl Facet {
    pub const ALL: [Facet; 4] = [
        Facet::Syntactic,
        Facet::Phonological,
        Facet::Genetic,
        Facet::Geographic,
    ];

    /// Similarity facets live in [0, 1] with a unit diagonal; geographic is a
    /// non-negative distance with a zero diagonal.
    pub fn is_similarity(self) -> bool {
        !matches!(self, Facet::Geographic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Syntactic => "syntactic",
            Facet::Phonological => "phonological",
            Facet::Genetic => "genetic",
            Facet::Geographic => "geographic",
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Facet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Facet::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown facet `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub facet: Facet,
    /// Symmetric: both (a, b) and (b, a) are stored.
    entries: BTreeMap<(String, String), f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from pair listings, applying symmetric closure and the
    /// diagonal invariant.
    pub fn from_pairs<I>(facet: Facet, pairs: I) -> Result<Loaded<Self>>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let diag = if facet.is_similarity() { 1.0 } else { 0.0 };
        let mut entries: BTreeMap<(String, String), f64> = BTreeMap::new();
        let mut warnings = Vec::new();
        for (a, b, value) in pairs {
            let in_range = value.is_finite()
                && if facet.is_similarity() {
                    (0.0..=1.0).contains(&value)
                } else {
                    value >= 0.0
                };
            if !in_range {
                return Err(DataError::EntryOutOfRange { facet, a, b, value });
            }
            if a == b {
                if value != diag {
                    warnings.push(format!(
                        "{facet} diagonal ({a}, {a}) = {value} overridden to {diag}"
                    ));
                }
                entries.insert((a.clone(), b), diag);
                continue;
            }
            for key in [(a.clone(), b.clone()), (b.clone(), a.clone())] {
                match entries.get(&key) {
                    Some(&prev) if (prev - value).abs() > 1e-9 => {
                        return Err(DataError::AsymmetricEntry {
                            a,
                            b,
                            first: prev,
                            second: value,
                        })
                    }
                    Some(_) => {}
                    None => {
                        entries.insert(key, value);
                    }
                }
            }
        }
        Ok(Loaded {
            data: Self { facet, entries },
            warnings,
        })
    }

    /// Looks up an entry. The diagonal is defined for every code.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return Some(if self.facet.is_similarity() { 1.0 } else { 0.0 });
        }
        self.entries.get(&(a.to_string(), b.to_string())).copied()
    }

    /// Mean over distinct unordered off-diagonal pairs; `None` when there are none.
    pub fn mean(&self) -> Option<f64> {
        let (sum, n) = self
            .entries
            .iter()
            .filter(|((a, b), _)| a < b)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Largest off-diagonal entry (0 when there are none).
    pub fn max(&self) -> f64 {
        self.entries
            .iter()
            .filter(|((a, b), _)| a != b)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.entries
            .keys()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .collect()
    }

    /// Number of stored unordered off-diagonal pairs.
    pub fn n_pairs(&self) -> usize {
        self.entries.keys().filter(|(a, b)| a < b).count()
    }

    /// Unordered pairs with a <= b, in sorted order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.entries
            .iter()
            .filter(|((a, b), _)| a <= b)
            .map(|((a, b), v)| (a.as_str(), b.as_str(), *v))
    }
}

/// Parses the three-column `lang_a,lang_b,value` listing for one facet.
pub fn ingest_distance_matrix(
    text: &str,
    facet: Facet,
    delimiter: Delimiter,
) -> Result<Loaded<DistanceMatrix>> {
    let mut rdr = reader(text, delimiter, false);
    let headers = rdr.headers()?.clone();
    let a_col = column(&headers, "lang_a")?;
    let b_col = column(&headers, "lang_b")?;
    let v_col = column(&headers, "value")?;
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        pairs.push((
            field(&rec, a_col, row)?.to_string(),
            field(&rec, b_col, row)?.to_string(),
            parse_f64(field(&rec, v_col, row)?, row, "value")?,
        ));
    }
    DistanceMatrix::from_pairs(facet, pairs)
}

pub fn write_distance_matrix<W: Write>(matrix: &DistanceMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lang_a", "lang_b", "value"])?;
    for (a, b, v) in matrix.pairs() {
        w.write_record([a, b, &v.to_string()])?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Benchmark registry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    pub task_id: String,
    pub task_type: String,
    pub release_year: i32,
    pub n_languages: usize,
    pub n_families: usize,
    pub languages: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BenchmarkRegistry {
    pub tasks: Vec<BenchmarkTask>,
}

impl BenchmarkRegistry {
    pub fn bundled() -> Self {
        ingest_benchmark_registry(BUNDLED_REGISTRY, Delimiter::Comma)
            .expect("bundled registry is valid")
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Parses `task_id,type,year,n_languages,n_families[,language_list]`.
pub fn ingest_benchmark_registry(text: &str, delimiter: Delimiter) -> Result<BenchmarkRegistry> {
    let mut rdr = reader(text, delimiter, true);
    // header is positional; names are not enforced beyond the column count
    let headers = rdr.headers()?.clone();
    if headers.len() < 5 {
        return Err(DataError::MissingColumn(
            "task_id,type,year,n_languages,n_families".into(),
        ));
    }
    let mut tasks = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if rec.len() < 5 {
            return Err(DataError::MalformedRow {
                row,
                message: format!("expected at least 5 fields, found {}", rec.len()),
            });
        }
        let task_id = rec[0].to_string();
        let year_text = &rec[2];
        let release_year: i32 = year_text
            .parse()
            .ok()
            .filter(|y| *y >= 1990)
            .ok_or_else(|| DataError::BadYear {
                row,
                value: year_text.to_string(),
            })?;
        let count = |idx: usize, what: &str| -> Result<usize> {
            rec[idx].parse().map_err(|_| DataError::MalformedRow {
                row,
                message: format!("cannot parse {what} `{}`", &rec[idx]),
            })
        };
        let n_languages = count(3, "n_languages")?;
        let n_families = count(4, "n_families")?;
        if n_languages < 1 {
            return Err(DataError::MalformedRow {
                row,
                message: "n_languages must be >= 1".into(),
            });
        }
        let languages = rec
            .get(5)
            .filter(|s| !s.is_empty())
            .map(|s| split_list(s).into_iter().collect::<BTreeSet<_>>());
        if let Some(langs) = &languages {
            if langs.len() != n_languages {
                return Err(DataError::CountMismatch {
                    task: task_id,
                    declared: n_languages,
                    listed: langs.len(),
                });
            }
        }
        tasks.push(BenchmarkTask {
            task_id,
            task_type: rec[1].to_string(),
            release_year,
            n_languages,
            n_families,
            languages,
        });
    }
    Ok(BenchmarkRegistry { tasks })
}

pub fn write_benchmark_registry<W: Write>(registry: &BenchmarkRegistry, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record([
        "task_id",
        "type",
        "year",
        "n_languages",
        "n_families",
        "language_list",
    ])?;
    for t in &registry.tasks {
        let langs = t
            .languages
            .as_ref()
            .map(|l| l.iter().cloned().collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            t.task_id.as_str(),
            &t.task_type,
            &t.release_year.to_string(),
            &t.n_languages.to_string(),
            &t.n_families.to_string(),
            &langs,
        ])?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}
