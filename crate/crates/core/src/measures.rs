//! Forecast performance measures over aligned (observed, predicted, baseline)
//! runs.
//!
//! All error and reliability measures return fractions, never percentages;
//! formatting belongs to the caller. Costs are in seconds.
//!
//! Application-independent measures: MAPE, CVRMSE, MAE, RMSE, RIM, VAB, CD, CC.
//! Application-dependent measures, parameterized by an [`ApplicationProfile`]:
//! DBPE, REL, TCC, CBM.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Granularity;

/// Observed, predicted and optional baseline values over the same intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRun {
    observed: Vec<f64>,
    predicted: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline: Option<Vec<f64>>,
}

impl ForecastRun {
    pub fn new(observed: Vec<f64>, predicted: Vec<f64>, baseline: Option<Vec<f64>>) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::EmptyRun);
        }
        if predicted.len() != observed.len() {
            return Err(Error::LengthMismatch(format!(
                "{} observed vs {} predicted",
                observed.len(),
                predicted.len()
            )));
        }
        if let Some(b) = &baseline {
            if b.len() != observed.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} observed vs {} baseline",
                    observed.len(),
                    b.len()
                )));
            }
        }
        if let Some((index, &value)) = observed
            .iter()
            .enumerate()
            .find(|(_, &o)| !(o > 0.0 && o.is_finite()))
        {
            return Err(Error::NonPositiveObserved { index, value });
        }
        Ok(Self {
            observed,
            predicted,
            baseline,
        })
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn baseline(&self) -> Option<&[f64]> {
        self.baseline.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// e_i = p_i - o_i
    pub fn residual(&self, i: usize) -> f64 {
        self.predicted[i] - self.observed[i]
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.observed.iter().copied().zip(self.predicted.iter().copied())
    }

    fn require_baseline(&self) -> Result<&[f64]> {
        self.baseline.as_deref().ok_or(Error::MissingBaseline)
    }
}

/// Penalties and cost schedule describing how an application uses forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationProfile {
    pub name: String,
    /// Over-prediction penalty.
    pub alpha: f64,
    /// Under-prediction penalty.
    pub beta: f64,
    /// Relative error tolerance for REL, as a fraction.
    pub error_tolerance: f64,
    /// Trainings per duration.
    pub tau: f64,
    /// Prediction uses per duration.
    pub pi: f64,
    pub duration: String,
    /// Forecast horizon in intervals.
    pub horizon: usize,
    /// Per-model-family (tau, pi) where they differ from the defaults above.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schedules: BTreeMap<ModelFamily, CostSchedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    pub tau: f64,
    pub pi: f64,
}

/// Model families distinguished by the cost schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Baseline,
    #[serde(rename = "rt")]
    RegressionTree,
    #[serde(rename = "ts")]
    TimeSeries,
}

const PENALTY_SUM_TOLERANCE: f64 = 1e-9;

impl ApplicationProfile {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidProfile {
                name: self.name.clone(),
                reason,
            })
        };
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return fail(format!("penalties must be nonnegative (alpha={}, beta={})", self.alpha, self.beta));
        }
        if (self.alpha + self.beta - 2.0).abs() > PENALTY_SUM_TOLERANCE {
            return fail(format!("alpha + beta must equal 2, got {}", self.alpha + self.beta));
        }
        if !(self.error_tolerance > 0.0 && self.error_tolerance < 1.0) {
            return fail(format!("error tolerance {} not in (0, 1)", self.error_tolerance));
        }
        for s in std::iter::once(self.default_schedule()).chain(self.schedules.values().copied()) {
            if !(s.tau >= 0.0) {
                return fail(format!("tau {} is negative", s.tau));
            }
            if !(s.pi >= 1.0) {
                return fail(format!("pi {} is below 1", s.pi));
            }
        }
        Ok(())
    }

    pub fn default_schedule(&self) -> CostSchedule {
        CostSchedule {
            tau: self.tau,
            pi: self.pi,
        }
    }

    pub fn schedule_for(&self, family: ModelFamily) -> CostSchedule {
        self.schedules
            .get(&family)
            .copied()
            .unwrap_or_else(|| self.default_schedule())
    }
}

/// Unit costs of one model: wallclock seconds per training and per
/// prediction use, plus the unique-value counts of its features.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostRecord {
    /// Median training seconds.
    pub cc_t: f64,
    /// Median seconds for one prediction use at the plan horizon.
    pub cc_p: f64,
    #[serde(default)]
    pub cc_t_mean: f64,
    #[serde(default)]
    pub cc_p_mean: f64,
    #[serde(default)]
    pub repetitions: usize,
    /// Unique-value counts of static (time-invariant) features.
    pub static_counts: BTreeMap<String, usize>,
    /// Unique-value counts of dynamic (periodically acquired) features.
    pub dynamic_counts: BTreeMap<String, usize>,
}

impl CostRecord {
    pub fn from_unit_costs(cc_t: f64, cc_p: f64) -> Self {
        CostRecord {
            cc_t,
            cc_p,
            cc_t_mean: cc_t,
            cc_p_mean: cc_p,
            ..CostRecord::default()
        }
    }

    pub fn n_s(&self) -> usize {
        self.static_counts.len()
    }

    pub fn n_d(&self) -> usize {
        self.dynamic_counts.len()
    }

    pub fn data_cost(&self) -> u64 {
        let s: Vec<usize> = self.static_counts.values().copied().collect();
        let d: Vec<usize> = self.dynamic_counts.values().copied().collect();
        cd(&s, &d)
    }
}

pub fn mape(run: &ForecastRun) -> f64 {
    run.pairs().map(|(o, p)| (p - o).abs() / o).sum::<f64>() / run.len() as f64
}

pub fn mae(run: &ForecastRun) -> f64 {
    run.pairs().map(|(o, p)| (p - o).abs()).sum::<f64>() / run.len() as f64
}

pub fn rmse(run: &ForecastRun) -> f64 {
    (run.pairs().map(|(o, p)| (p - o) * (p - o)).sum::<f64>() / run.len() as f64).sqrt()
}

pub fn cvrmse(run: &ForecastRun) -> f64 {
    let mean_obs = run.observed.iter().sum::<f64>() / run.len() as f64;
    rmse(run) / mean_obs
}

fn three_way(ord: Option<Ordering>) -> f64 {
    match ord {
        Some(Ordering::Less) => 1.0,
        Some(Ordering::Equal) => 0.0,
        _ => -1.0,
    }
}

/// Relative improvement: mean of +1/0/-1 per interval as the model is
/// closer than, as close as, or farther than the baseline.
pub fn rim(run: &ForecastRun) -> Result<f64> {
    let b = run.require_baseline()?;
    let total: f64 = run
        .pairs()
        .zip(b)
        .map(|((o, p), &b)| three_way((p - o).abs().partial_cmp(&(b - o).abs())))
        .sum();
    Ok(total / run.len() as f64)
}

/// Denominator for VAB's volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Volatility {
    /// n - 1 denominator.
    #[default]
    Sample,
    /// n denominator.
    Population,
}

pub fn vab(run: &ForecastRun) -> Result<f64> {
    vab_with(run, Volatility::Sample)
}

/// Volatility adjusted benefit: mean relative improvement over the baseline
/// divided by the standard deviation of those improvements.
pub fn vab_with(run: &ForecastRun, volatility: Volatility) -> Result<f64> {
    let b = run.require_baseline()?;
    let n = run.len();
    if n < 2 && volatility == Volatility::Sample {
        return Err(Error::ZeroVolatility);
    }
    let d: Vec<f64> = run
        .pairs()
        .zip(b)
        .map(|((o, p), &b)| (b - o).abs() / o - (p - o).abs() / o)
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let ss: f64 = d.iter().map(|x| (x - mean) * (x - mean)).sum();
    let denom = match volatility {
        Volatility::Sample => (n - 1) as f64,
        Volatility::Population => n as f64,
    };
    let sigma = (ss / denom).sqrt();
    if sigma == 0.0 || d.iter().all(|&x| x == d[0]) {
        return Err(Error::ZeroVolatility);
    }
    Ok(mean / sigma)
}

/// Data collection cost: total unique values over static and dynamic features.
pub fn cd(static_unique_counts: &[usize], dynamic_unique_counts: &[usize]) -> u64 {
    static_unique_counts
        .iter()
        .chain(dynamic_unique_counts)
        .map(|&c| c as u64)
        .sum()
}

/// Compute cost in seconds: one training plus one prediction use.
pub fn cc(record: &CostRecord) -> f64 {
    record.cc_t + record.cc_p
}

/// Linlin loss: alpha per unit of over-prediction, beta per unit of under-prediction.
pub fn linlin(predicted: f64, observed: f64, alpha: f64, beta: f64) -> f64 {
    match predicted.partial_cmp(&observed) {
        Some(Ordering::Greater) => alpha * (predicted - observed),
        Some(Ordering::Less) => beta * (observed - predicted),
        _ => 0.0,
    }
}

pub fn dbpe(run: &ForecastRun, profile: &ApplicationProfile) -> Result<f64> {
    profile.validate()?;
    dbpe_with(run, profile.alpha, profile.beta)
}

/// Domain bias percentage error with explicit penalties; `alpha + beta` must be 2.
pub fn dbpe_with(run: &ForecastRun, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0) || (alpha + beta - 2.0).abs() > PENALTY_SUM_TOLERANCE {
        return Err(Error::InvalidProfile {
            name: format!("alpha={alpha}, beta={beta}"),
            reason: "penalties must be nonnegative and sum to 2".into(),
        });
    }
    let total: f64 = run.pairs().map(|(o, p)| linlin(p, o, alpha, beta) / o).sum();
    Ok(total / run.len() as f64)
}

pub fn rel(run: &ForecastRun, profile: &ApplicationProfile) -> Result<f64> {
    profile.validate()?;
    Ok(rel_with_tolerance(run, profile.error_tolerance))
}

/// Reliability threshold estimate: mean of +1/0/-1 per interval as the
/// relative error is below, at, or above the tolerance.
pub fn rel_with_tolerance(run: &ForecastRun, tolerance: f64) -> f64 {
    let total: f64 = run
        .pairs()
        .map(|(o, p)| three_way(((p - o).abs() / o).partial_cmp(&tolerance)))
        .sum();
    total / run.len() as f64
}

pub fn tcc(record: &CostRecord, profile: &ApplicationProfile) -> Result<f64> {
    profile.validate()?;
    Ok(tcc_with(record, profile.default_schedule()))
}

pub fn tcc_for(record: &CostRecord, profile: &ApplicationProfile, family: ModelFamily) -> Result<f64> {
    profile.validate()?;
    Ok(tcc_with(record, profile.schedule_for(family)))
}

/// Total compute cost over a duration: cc_t * tau + cc_p * pi.
pub fn tcc_with(record: &CostRecord, schedule: CostSchedule) -> f64 {
    record.cc_t * schedule.tau + record.cc_p * schedule.pi
}

/// Cost-benefit: (1 - error) per second of total compute cost.
pub fn cbm(error_value: f64, tcc_seconds: f64) -> Result<f64> {
    if !(tcc_seconds > 0.0) {
        return Err(Error::ZeroCost);
    }
    Ok((1.0 - error_value) / tcc_seconds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    ScaleIndependentError,
    ScaleDependentError,
    Reliability,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applicability {
    ApplicationIndependent,
    ApplicationDependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeasureInfo {
    pub name: &'static str,
    pub dimension: Dimension,
    pub applicability: Applicability,
}

const fn info(name: &'static str, dimension: Dimension, applicability: Applicability) -> MeasureInfo {
    MeasureInfo {
        name,
        dimension,
        applicability,
    }
}

use Applicability::*;
use Dimension::*;

/// Report columns in canonical order with their taxonomy tags.
pub const MEASURES: [MeasureInfo; 13] = [
    info("mape", ScaleIndependentError, ApplicationIndependent),
    info("cvrmse", ScaleIndependentError, ApplicationIndependent),
    info("mae", ScaleDependentError, ApplicationIndependent),
    info("rmse", ScaleDependentError, ApplicationIndependent),
    info("rim", Reliability, ApplicationIndependent),
    info("vab", Reliability, ApplicationIndependent),
    info("cd", Cost, ApplicationIndependent),
    info("cc_t", Cost, ApplicationIndependent),
    info("cc_p", Cost, ApplicationIndependent),
    info("dbpe", ScaleIndependentError, ApplicationDependent),
    info("rel", Reliability, ApplicationDependent),
    info("tcc", Cost, ApplicationDependent),
    info("cbm", Cost, ApplicationDependent),
];

pub fn measure_info(name: &str) -> Option<MeasureInfo> {
    MEASURES.iter().copied().find(|m| m.name == name)
}

/// All measures for one (entity, model, granularity, profile) cell. A value
/// is `None` when its inputs were not supplied or it is undefined for the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub entity: String,
    pub model: String,
    pub granularity: Granularity,
    pub profile: String,
    pub mape: Option<f64>,
    pub cvrmse: Option<f64>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub rim: Option<f64>,
    pub vab: Option<f64>,
    pub cd: Option<u64>,
    pub cc_t: Option<f64>,
    pub cc_p: Option<f64>,
    pub dbpe: Option<f64>,
    pub rel: Option<f64>,
    pub tcc: Option<f64>,
    pub cbm: Option<f64>,
}

/// Identifies the cell a report describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub entity: String,
    pub model: String,
    pub family: ModelFamily,
    pub granularity: Granularity,
}

impl MeasureReport {
    pub fn compute(
        key: &CellKey,
        run: &ForecastRun,
        profile: &ApplicationProfile,
        cost: Option<&CostRecord>,
    ) -> Result<MeasureReport> {
        profile.validate()?;
        let dbpe_value = dbpe(run, profile)?;
        let tcc_value = cost.map(|c| tcc_with(c, profile.schedule_for(key.family)));
        let cbm_value = tcc_value.and_then(|t| cbm(dbpe_value, t).ok());
        Ok(MeasureReport {
            entity: key.entity.clone(),
            model: key.model.clone(),
            granularity: key.granularity,
            profile: profile.name.clone(),
            mape: Some(mape(run)),
            cvrmse: Some(cvrmse(run)),
            mae: Some(mae(run)),
            rmse: Some(rmse(run)),
            rim: rim(run).ok(),
            vab: vab(run).ok(),
            cd: cost.map(CostRecord::data_cost),
            cc_t: cost.map(|c| c.cc_t),
            cc_p: cost.map(|c| c.cc_p),
            dbpe: Some(dbpe_value),
            rel: Some(rel(run, profile)?),
            tcc: tcc_value,
            cbm: cbm_value,
        })
    }

    pub fn cc(&self) -> Option<f64> {
        Some(self.cc_t? + self.cc_p?)
    }

    /// Measure values in canonical column order.
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.mape,
            self.cvrmse,
            self.mae,
            self.rmse,
            self.rim,
            self.vab,
            self.cd.map(|c| c as f64),
            self.cc_t,
            self.cc_p,
            self.dbpe,
            self.rel,
            self.tcc,
            self.cbm,
        ]
    }

    /// Copy with wallclock-derived fields cleared, for determinism checks.
    pub fn without_wallclock(&self) -> MeasureReport {
        MeasureReport {
            cc_t: None,
            cc_p: None,
            tcc: None,
            cbm: None,
            ..self.clone()
        }
    }
}
