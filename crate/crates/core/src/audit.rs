//! Language coverage statistics for multilingual benchmarks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{BenchmarkRegistry, Family, Loaded, ProfileStore};

/// Threshold for the "tasks below N languages" summary.
pub const DEFAULT_LOW_COVERAGE_THRESHOLD: usize = 20;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("benchmark registry is empty")]
    EmptyRegistry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageCoverage {
    pub count: usize,
    pub joshi_class: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataQuality {
    /// Tasks that carry no language list and are left out of the
    /// per-language and family statistics.
    pub tasks_without_languages: Vec<String>,
    /// Listed languages with no profile family, counted as `Other`.
    pub languages_without_family: Vec<String>,
    /// Listed languages with no resource class.
    pub languages_without_joshi_class: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_tasks: usize,
    /// Cumulative number of tasks released up to and including each year,
    /// with every year between the first and last release present.
    pub yearwise_cumulative: BTreeMap<i32, usize>,
    /// k -> number of tasks with at least k languages, for k = 1..=max.
    pub langcount_rcdf: BTreeMap<usize, usize>,
    pub per_language_task_count: BTreeMap<String, LanguageCoverage>,
    pub family_fractions: BTreeMap<String, BTreeMap<Family, f64>>,
    pub median_languages: f64,
    pub max_languages: usize,
    pub low_coverage_threshold: usize,
    pub tasks_below_threshold: usize,
    pub data_quality: DataQuality,
}

impl CoverageReport {
    pub fn rcdf(&self, k: usize) -> usize {
        if k == 0 {
            return self.n_tasks;
        }
        self.langcount_rcdf.get(&k).copied().unwrap_or(0)
    }
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Per-language task counts over the tasks that list their languages.
pub fn language_task_counts(
    registry: &BenchmarkRegistry,
    profiles: &ProfileStore,
) -> Loaded<BTreeMap<String, LanguageCoverage>> {
    let mut counts: BTreeMap<String, LanguageCoverage> = BTreeMap::new();
    let mut excluded = Vec::new();
    for task in &registry.tasks {
        let Some(langs) = &task.languages else {
            excluded.push(task.task_id.clone());
            continue;
        };
        for code in langs {
            counts
                .entry(code.clone())
                .or_insert_with(|| LanguageCoverage {
                    count: 0,
                    joshi_class: profiles.get(code).and_then(|p| p.joshi_class),
                })
                .count += 1;
        }
    }
    let mut warnings = Vec::new();
    if !excluded.is_empty() {
        excluded.sort();
        warnings.push(format!(
            "{} task(s) without a language list excluded: {}",
            excluded.len(),
            excluded.join(", ")
        ));
    }
    Loaded {
        data: counts,
        warnings,
    }
}

pub fn coverage_report(
    registry: &BenchmarkRegistry,
    profiles: &ProfileStore,
    low_coverage_threshold: usize,
) -> Result<CoverageReport, AuditError> {
    if registry.is_empty() {
        return Err(AuditError::EmptyRegistry);
    }
    let tasks = &registry.tasks;

    let mut per_year: BTreeMap<i32, usize> = BTreeMap::new();
    for t in tasks {
        *per_year.entry(t.release_year).or_default() += 1;
    }
    let first = *per_year.keys().next().expect("non-empty");
    let last = *per_year.keys().next_back().expect("non-empty");
    let mut running = 0;
    let yearwise_cumulative = (first..=last)
        .map(|y| {
            running += per_year.get(&y).copied().unwrap_or(0);
            (y, running)
        })
        .collect();

    let mut sizes: Vec<usize> = tasks.iter().map(|t| t.n_languages).collect();
    let max_languages = sizes.iter().copied().max().unwrap_or(0);
    let langcount_rcdf = (1..=max_languages)
        .map(|k| (k, sizes.iter().filter(|&&n| n >= k).count()))
        .collect();
    let median_languages = median(&mut sizes);
    let tasks_below_threshold = sizes
        .iter()
        .filter(|&&n| n < low_coverage_threshold)
        .count();

    let per_language_task_count = language_task_counts(registry, profiles).data;

    let mut quality = DataQuality::default();
    let mut no_family = BTreeSet::new();
    let mut family_fractions = BTreeMap::new();
    for t in tasks {
        let Some(langs) = &t.languages else {
            quality.tasks_without_languages.push(t.task_id.clone());
            continue;
        };
        if langs.is_empty() {
            continue;
        }
        let mut counts: BTreeMap<Family, usize> = BTreeMap::new();
        for code in langs {
            let family = profiles.get(code).and_then(|p| p.family);
            if family.is_none() {
                no_family.insert(code.clone());
            }
            *counts.entry(family.unwrap_or(Family::Other)).or_default() += 1;
        }
        let n = langs.len() as f64;
        family_fractions.insert(
            t.task_id.clone(),
            counts.into_iter().map(|(f, c)| (f, c as f64 / n)).collect(),
        );
    }
    quality.tasks_without_languages.sort();
    quality.languages_without_family = no_family.into_iter().collect();
    quality.languages_without_joshi_class = per_language_task_count
        .iter()
        .filter(|(_, c)| c.joshi_class.is_none())
        .map(|(code, _)| code.clone())
        .collect();

    Ok(CoverageReport {
        n_tasks: tasks.len(),
        yearwise_cumulative,
        langcount_rcdf,
        per_language_task_count,
        family_fractions,
        median_languages,
        max_languages,
        low_coverage_threshold,
        tasks_below_threshold,
        data_quality: quality,
    })
}

/// Plot-ready CSV exports, one per chart.
impl CoverageReport {
    pub fn write_yearwise_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["year", "cumulative_tasks"])?;
        for (y, c) in &self.yearwise_cumulative {
            w.write_record([y.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_rcdf_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["min_languages", "tasks"])?;
        for (k, c) in &self.langcount_rcdf {
            w.write_record([k.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_language_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["language", "tasks", "joshi_class"])?;
        for (code, c) in &self.per_language_task_count {
            let class = c.joshi_class.map(|j| j.to_string()).unwrap_or_default();
            w.write_record([code.clone(), c.count.to_string(), class])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_family_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["task", "family", "fraction"])?;
        for (task, fams) in &self.family_fractions {
            for (f, frac) in fams {
                w.write_record([task.clone(), f.to_string(), frac.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
