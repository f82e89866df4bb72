//! Run artifacts and measure reports (wide CSV, JSON, long CSV).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestOutcome, BacktestPlan};
use crate::error::{Error, Result};
use crate::measures::{
    Applicability, CellKey, CostRecord, Dimension, ForecastRun, MeasureInfo, MeasureReport, MEASURES,
};
use crate::profiles::ProfileRegistry;
use crate::series::{format_timestamp, Granularity};

pub const RUN_SUFFIX: &str = ".run.json";
pub const COST_SUFFIX: &str = ".cost.json";
pub const PROFILES_FILE: &str = "profiles.json";

pub const ID_COLUMNS: [&str; 4] = ["entity", "model", "granularity", "profile"];

/// A backtest's aligned observations and predictions, as saved to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub entity: String,
    pub granularity: Granularity,
    pub plan: BacktestPlan,
    pub timestamps: Vec<String>,
    pub run: ForecastRun,
    pub fits: usize,
}

impl RunArtifact {
    pub fn new(entity: &str, granularity: Granularity, outcome: &BacktestOutcome) -> RunArtifact {
        RunArtifact {
            entity: entity.to_string(),
            granularity,
            plan: outcome.plan.clone(),
            timestamps: outcome.timestamps.iter().map(|&t| format_timestamp(t)).collect(),
            run: outcome.run.clone(),
            fits: outcome.fits(),
        }
    }

    /// File stem shared by the run and cost artifacts.
    pub fn stem(&self) -> String {
        format!("{}__{}", self.entity, self.plan.name)
    }

    pub fn key(&self) -> CellKey {
        CellKey {
            entity: self.entity.clone(),
            model: self.plan.name.clone(),
            family: self.plan.model.family(),
            granularity: self.granularity,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run serializes")
    }
}

/// Write `<stem>.run.json` and, if given, `<stem>.cost.json` into `dir`.
pub fn save_run(dir: &Path, run: &RunArtifact, cost: Option<&CostRecord>) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{}{RUN_SUFFIX}", run.stem())), run.to_json())?;
    if let Some(c) = cost {
        fs::write(
            dir.join(format!("{}{COST_SUFFIX}", run.stem())),
            serde_json::to_string_pretty(c)?,
        )?;
    }
    Ok(())
}

pub fn save_profiles(dir: &Path, registry: &ProfileRegistry) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(PROFILES_FILE), serde_json::to_string_pretty(registry)?)?;
    Ok(())
}

/// Runs (sorted by file name) with their cost records, plus the saved
/// profiles or the defaults if none were saved.
pub fn load_runs(dir: &Path) -> Result<(Vec<(RunArtifact, Option<CostRecord>)>, ProfileRegistry)> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut runs = Vec::new();
    for path in names {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(RUN_SUFFIX) else {
            continue;
        };
        let run: RunArtifact = serde_json::from_str(&fs::read_to_string(&path)?)?;
        let cost_path = dir.join(format!("{stem}{COST_SUFFIX}"));
        let cost = if cost_path.exists() {
            Some(serde_json::from_str(&fs::read_to_string(cost_path)?)?)
        } else {
            None
        };
        runs.push((run, cost));
    }
    let profiles_path = dir.join(PROFILES_FILE);
    let registry = if profiles_path.exists() {
        let r: ProfileRegistry = serde_json::from_str(&fs::read_to_string(profiles_path)?)?;
        r.validate()?;
        r
    } else {
        ProfileRegistry::defaults()
    };
    Ok((runs, registry))
}

/// One report per run and profile, runs outermost.
pub fn assemble(runs: &[(RunArtifact, Option<CostRecord>)], registry: &ProfileRegistry) -> Result<Vec<MeasureReport>> {
    if runs.is_empty() {
        return Err(Error::Config("no runs to report".into()));
    }
    let mut out = Vec::with_capacity(runs.len() * registry.len());
    for (run, cost) in runs {
        for profile in registry.iter() {
            out.push(MeasureReport::compute(&run.key(), &run.run, profile, cost.as_ref())?);
        }
    }
    Ok(out)
}

fn header() -> Vec<&'static str> {
    ID_COLUMNS.iter().copied().chain(MEASURES.iter().map(|m| m.name)).collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Wide CSV, one row per report, canonical column order. Absent values are
/// empty cells; numbers use the shortest exact decimal form.
pub fn write_csv<W: Write>(reports: &[MeasureReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header())?;
    for r in reports {
        let mut row = vec![
            r.entity.clone(),
            r.model.clone(),
            r.granularity.to_string(),
            r.profile.clone(),
        ];
        for (info, v) in MEASURES.iter().zip(r.values()) {
            row.push(if info.name == "cd" {
                r.cd.map(|c| c.to_string()).unwrap_or_default()
            } else {
                cell(v)
            });
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<MeasureReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if head != header() {
        return Err(Error::Config(format!("unexpected report header {head:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Config(format!("report row {}: bad {what}", line + 1));
        let num = |i: usize| -> Result<Option<f64>> {
            let s = &rec[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(header()[i]))
            }
        };
        let granularity = match &rec[2] {
            "15min" => Granularity::Min15,
            "24hour" => Granularity::Hour24,
            _ => return Err(bad("granularity")),
        };
        let cd = if rec[10].is_empty() {
            None
        } else {
            Some(rec[10].parse().map_err(|_| bad("cd"))?)
        };
        out.push(MeasureReport {
            entity: rec[0].to_string(),
            model: rec[1].to_string(),
            granularity,
            profile: rec[3].to_string(),
            mape: num(4)?,
            cvrmse: num(5)?,
            mae: num(6)?,
            rmse: num(7)?,
            rim: num(8)?,
            vab: num(9)?,
            cd,
            cc_t: num(11)?,
            cc_p: num(12)?,
            dbpe: num(13)?,
            rel: num(14)?,
            tcc: num(15)?,
            cbm: num(16)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureTag {
    pub name: String,
    pub dimension: Dimension,
    pub applicability: Applicability,
}

impl From<&MeasureInfo> for MeasureTag {
    fn from(m: &MeasureInfo) -> Self {
        MeasureTag {
            name: m.name.to_string(),
            dimension: m.dimension,
            applicability: m.applicability,
        }
    }
}

/// JSON report: the measure taxonomy followed by the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub measures: Vec<MeasureTag>,
    pub rows: Vec<MeasureReport>,
}

pub fn to_json(reports: &[MeasureReport]) -> String {
    let doc = JsonReport {
        measures: MEASURES.iter().map(MeasureTag::from).collect(),
        rows: reports.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

pub fn from_json(s: &str) -> Result<Vec<MeasureReport>> {
    Ok(serde_json::from_str::<JsonReport>(s)?.rows)
}

fn tag<T: Serialize>(v: T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum serializes to a string"),
    }
}

/// Long format for plotting: one row per present measure value.
pub fn write_long_csv<W: Write>(reports: &[MeasureReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ID_COLUMNS.iter().chain(&["measure", "value", "dimension", "applicability"]))?;
    for r in reports {
        for (info, v) in MEASURES.iter().zip(r.values()) {
            let Some(v) = v else { continue };
            out.write_record([
                r.entity.as_str(),
                &r.model,
                r.granularity.as_str(),
                &r.profile,
                info.name,
                &v.to_string(),
                &tag(info.dimension),
                &tag(info.applicability),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn render(reports: &[MeasureReport], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(to_json(reports)),
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(reports, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv is utf-8"))
        }
    }
}

/// Write `report.csv`, `report.json` and `report_long.csv` into `dir`.
pub fn emit_report(dir: &Path, reports: &[MeasureReport]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let wide = dir.join("report.csv");
    write_csv(reports, fs::File::create(&wide)?)?;
    let json = dir.join("report.json");
    fs::write(&json, to_json(reports))?;
    let long = dir.join("report_long.csv");
    write_long_csv(reports, fs::File::create(&long)?)?;
    Ok(vec![wide, json, long])
}
