//! JSON evaluation config and the end-to-end evaluation pipeline.

use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestPlan};
use crate::costs::{measure_costs, DEFAULT_REPETITIONS};
use crate::error::{Error, Result};
use crate::measures::{ApplicationProfile, MeasureReport};
use crate::profiles::ProfileRegistry;
use crate::report::{assemble, emit_report, save_profiles, save_run, RunArtifact};
use crate::series::{
    clean_with, ingest_csv, ingest_features_csv, parse_timestamp, split, FeatureRow, FeatureTable, Granularity,
    IntervalSeries, TrainTestSplit, DEFAULT_MAX_MISSING_FRACTION,
};
use crate::synthetic::{generate_synthetic, is_holiday, semester_of, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub granularity: Granularity,
    pub entities: Vec<CsvEntity>,
    #[serde(default = "default_missing")]
    pub max_missing_fraction: f64,
}

fn default_missing() -> f64 {
    DEFAULT_MAX_MISSING_FRACTION
}

/// Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvEntity {
    pub series: PathBuf,
    /// Without a feature file, calendar features are derived from timestamps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitRule {
    /// First test interval, `YYYY-MM-DDTHH:MM`.
    Boundary(String),
    /// Hold out the trailing `n` days.
    TestDays(usize),
}

/// A named default profile or a full custom profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Custom(ApplicationProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub data: DataSource,
    pub split: SplitRule,
    pub plans: Vec<BacktestPlan>,
    /// Empty means every shipped default.
    #[serde(default)]
    pub profiles: Vec<ProfileRef>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_measure_costs")]
    pub measure_costs: bool,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_measure_costs() -> bool {
    true
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

impl Config {
    pub fn from_json(s: &str) -> Result<Config> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file; relative CSV paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Config::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Csv(src) = &mut cfg.data {
            for e in &mut src.entities {
                e.series = base.join(&e.series);
                if let Some(f) = &mut e.features {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn registry(&self) -> Result<ProfileRegistry> {
        let defaults = ProfileRegistry::defaults();
        if self.profiles.is_empty() {
            return Ok(defaults);
        }
        let mut r = ProfileRegistry::empty();
        for p in &self.profiles {
            match p {
                ProfileRef::Named(name) => r.insert(defaults.get(name)?.clone())?,
                ProfileRef::Custom(custom) => r.insert(custom.clone())?,
            }
        }
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plans.is_empty() {
            return Err(Error::Config("no plans".into()));
        }
        let mut names: Vec<&str> = self.plans.iter().map(|p| p.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("plan names must be unique".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        self.registry().map(drop)
    }
}

/// Day-of-week, slot, semester and holiday features from timestamps alone.
pub fn calendar_features(s: &IntervalSeries) -> FeatureTable {
    let base = FeatureTable::calendar_for(s);
    let rows = base
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let date = s.timestamp(i).date();
            FeatureRow {
                semester: Some(semester_of(date)),
                holiday_flag: Some(is_holiday(date)),
                ..r.clone()
            }
        })
        .collect();
    FeatureTable::new(s.start(), s.granularity(), rows).expect("calendar rows are valid")
}

/// Clean series with aligned features, one per entity.
pub fn load_entities(data: &DataSource, seed: u64) -> Result<Vec<(IntervalSeries, FeatureTable)>> {
    match data {
        DataSource::Synthetic(spec) => Ok(generate_synthetic(seed, spec)?
            .into_iter()
            .map(|e| (e.series, e.features))
            .collect()),
        DataSource::Csv(src) => src
            .entities
            .iter()
            .map(|e| {
                let raw = ingest_csv(&e.series, src.granularity)?;
                let features = match &e.features {
                    Some(p) => ingest_features_csv(p, src.granularity)?,
                    None => calendar_features(&raw),
                };
                features.check_aligned(&raw)?;
                Ok((raw, features))
            })
            .collect(),
    }
}

pub fn split_entity(series: &IntervalSeries, features: &FeatureTable, rule: &SplitRule, max_missing: f64) -> Result<TrainTestSplit> {
    let clean = clean_with(series, max_missing)?;
    let boundary = match rule {
        SplitRule::Boundary(s) => {
            parse_timestamp(s).ok_or_else(|| Error::Config(format!("bad split boundary {s:?}")))?
        }
        SplitRule::TestDays(days) => {
            let end = clean.timestamp(clean.len() - 1) + clean.granularity().step();
            end - Duration::days(*days as i64)
        }
    };
    split(&clean, features, boundary)
}

/// Paths and reports written by an evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub reports: Vec<MeasureReport>,
    pub runs_dir: PathBuf,
    pub report_files: Vec<PathBuf>,
}

/// Run every plan on every entity, serially, saving run and cost artifacts
/// under `<out>/runs` and the reports under `<out>`.
pub fn evaluate(cfg: &Config, out: &Path) -> Result<Evaluation> {
    cfg.validate()?;
    let registry = cfg.registry()?;
    let max_missing = match &cfg.data {
        DataSource::Csv(src) => src.max_missing_fraction,
        DataSource::Synthetic(_) => DEFAULT_MAX_MISSING_FRACTION,
    };
    let runs_dir = out.join("runs");
    let mut runs = Vec::new();
    for (series, features) in load_entities(&cfg.data, cfg.seed)? {
        let data = split_entity(&series, &features, &cfg.split, max_missing)?;
        for plan in &cfg.plans {
            log::info!("{} / {}", series.entity_id(), plan.name);
            let outcome = run_backtest(plan, &data)?;
            let cost = if cfg.measure_costs {
                Some(measure_costs(plan, &data, cfg.repetitions)?)
            } else {
                None
            };
            let artifact = RunArtifact::new(series.entity_id(), series.granularity(), &outcome);
            save_run(&runs_dir, &artifact, cost.as_ref())?;
            runs.push((artifact, cost));
        }
    }
    save_profiles(&runs_dir, &registry)?;
    let reports = assemble(&runs, &registry)?;
    let report_files = emit_report(out, &reports)?;
    Ok(Evaluation {
        reports,
        runs_dir,
        report_files,
    })
}
