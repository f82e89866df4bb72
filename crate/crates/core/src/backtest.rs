//! Rolling-origin backtests.
//!
//! The evaluation span (the first `eval_intervals` of the test split) is cut
//! into consecutive blocks of `cadence` intervals. Each block gets one
//! origin, one fit on the trailing training window and one prediction:
//!
//! * horizon-free models (seasonal means, regression tree) are fitted on the
//!   data before the block start and predict the block from its timestamps or
//!   feature rows;
//! * ARIMA is fitted on the data before `block_end - horizon`, forecasts
//!   `horizon` steps and keeps the last `cadence` of them, so every target is
//!   predicted from the origin scheduled for its block and nothing is blended.
//!
//! A time-of-day mask selects which targets enter the run. Blocks without any
//! masked target are skipped, so the fit count equals the number of uses.

use std::ops::Range;
use std::time::Instant;

use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::arima::{fit_css, ArimaFit, ArimaSpec};
use crate::baselines::{fit_seasonal, predict_seasonal, Keying, SeasonalMeanModel};
use crate::error::{Error, Result};
use crate::measures::{ForecastRun, ModelFamily};
use crate::rtree::{fit_tree_with_grown, TreeNode, TreeParams};
use crate::series::{DayOfWeek, FeatureRow, FeatureTable, Granularity, IntervalSeries, TrainTestSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    DayOfWeek,
    TimeOfWeek,
    RegressionTree(TreeParams),
    Arima(ArimaSpec),
}

impl ModelKind {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelKind::DayOfWeek | ModelKind::TimeOfWeek => ModelFamily::Baseline,
            ModelKind::RegressionTree(_) => ModelFamily::RegressionTree,
            ModelKind::Arima(_) => ModelFamily::TimeSeries,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelKind::DayOfWeek => "DoW".into(),
            ModelKind::TimeOfWeek => "ToW".into(),
            ModelKind::RegressionTree(_) => "RT".into(),
            ModelKind::Arima(spec) => spec.label(),
        }
    }

    /// True if predictions depend on how far ahead the target lies.
    pub fn uses_horizon(&self) -> bool {
        matches!(self, ModelKind::Arima(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// A single origin covering the whole evaluation span.
    Once,
    /// Retrain every `n` intervals.
    Every(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingWindow {
    /// Everything before the origin.
    All,
    /// The trailing `n` intervals before the origin.
    Intervals(usize),
}

/// Keeps intervals starting in `[start, end)` on the selected days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeMask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveTime>,
    /// Exclusive; `None` means end of day.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveTime>,
    #[serde(default)]
    pub weekdays_only: bool,
}

impl TimeMask {
    pub fn hours(start: u32, end: u32, weekdays_only: bool) -> TimeMask {
        let t = |h: u32| (h < 24).then(|| NaiveTime::from_hms_opt(h, 0, 0).expect("valid hour"));
        TimeMask {
            start: t(start),
            end: t(end),
            weekdays_only,
        }
    }

    pub fn validate(&self, g: Granularity) -> Result<()> {
        let on_grid = |t: NaiveTime| t.second() == 0 && t.nanosecond() == 0 && t.minute() % 15 == 0;
        for t in [self.start, self.end].into_iter().flatten() {
            if g == Granularity::Hour24 {
                return Err(Error::InvalidPlan("time-of-day mask on 24hour data".into()));
            }
            if !on_grid(t) {
                return Err(Error::InvalidPlan(format!("mask bound {t} is off the 15min grid")));
            }
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if e <= s {
                return Err(Error::InvalidPlan(format!("mask end {e} not after start {s}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, ts: NaiveDateTime) -> bool {
        let t = ts.time();
        (!self.weekdays_only || DayOfWeek::of(ts).is_weekday())
            && self.start.is_none_or(|s| t >= s)
            && self.end.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestPlan {
    pub name: String,
    pub model: ModelKind,
    pub cadence: Cadence,
    /// Training window for seasonal-mean and tree models. ARIMA uses the
    /// window in its spec; a different value here is rejected.
    #[serde(default = "default_window")]
    pub window: TrainingWindow,
    /// Forecast horizon in intervals.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<TimeMask>,
    /// Evaluate only the first `n` test intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_intervals: Option<usize>,
}

fn default_window() -> TrainingWindow {
    TrainingWindow::All
}

fn default_horizon() -> usize {
    1
}

impl BacktestPlan {
    pub fn new(name: impl Into<String>, model: ModelKind, cadence: Cadence, horizon: usize) -> BacktestPlan {
        BacktestPlan {
            name: name.into(),
            model,
            cadence,
            window: TrainingWindow::All,
            horizon,
            mask: None,
            eval_intervals: None,
        }
    }

    pub fn with_window(mut self, window: TrainingWindow) -> Self {
        self.window = window;
        self
    }

    pub fn with_mask(mut self, mask: TimeMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_eval_intervals(mut self, n: usize) -> Self {
        self.eval_intervals = Some(n);
        self
    }

    /// Length of the evaluation span for a test split of `test_len` intervals.
    pub fn eval_span(&self, test_len: usize) -> Result<usize> {
        let span = self.eval_intervals.unwrap_or(test_len);
        if span == 0 || span > test_len {
            return Err(Error::InvalidPlan(format!(
                "evaluation span {span} not in 1..={test_len}"
            )));
        }
        Ok(span)
    }

    pub fn cadence_len(&self, span: usize) -> usize {
        match self.cadence {
            Cadence::Once => span,
            Cadence::Every(n) => n,
        }
    }

    /// Trailing window length, or `None` for all history.
    pub fn window_len(&self) -> Option<usize> {
        match (&self.model, self.window) {
            (ModelKind::Arima(spec), _) => Some(spec.window),
            (_, TrainingWindow::All) => None,
            (_, TrainingWindow::Intervals(n)) => Some(n),
        }
    }

    pub fn validate(&self, g: Granularity, test_len: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(format!("{}: {m}", self.name)));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        let span = self.eval_span(test_len)?;
        let c = self.cadence_len(span);
        if c == 0 || span % c != 0 {
            return bad(format!("cadence {c} does not divide evaluation span {span}"));
        }
        match (&self.model, self.window) {
            (ModelKind::Arima(spec), w) => {
                spec.validate()?;
                if c > self.horizon {
                    return bad(format!("cadence {c} exceeds forecast horizon {}", self.horizon));
                }
                if let TrainingWindow::Intervals(n) = w {
                    if n != spec.window {
                        return bad(format!("window {n} differs from ARIMA window {}", spec.window));
                    }
                }
            }
            (_, TrainingWindow::Intervals(0)) => return bad("training window must be positive".into()),
            _ => {}
        }
        if let (ModelKind::DayOfWeek, Granularity::Min15) | (ModelKind::TimeOfWeek, Granularity::Hour24) =
            (&self.model, g)
        {
            return bad(format!("{} does not apply to {g} data", self.model.label()));
        }
        if let Some(mask) = &self.mask {
            mask.validate(g)?;
        }
        Ok(())
    }
}

/// Train followed by test, as one contiguous clean history.
pub struct History {
    pub series: IntervalSeries,
    pub features: FeatureTable,
    pub kwh: Vec<f64>,
    /// Index of the first test interval.
    pub test_start: usize,
}

impl History {
    pub fn from_split(data: &TrainTestSplit) -> Result<History> {
        let series = data.history();
        let kwh = series.kwh()?;
        Ok(History {
            features: data.history_features(),
            kwh,
            series,
            test_start: data.train.len(),
        })
    }

    pub fn timestamps(&self, r: Range<usize>) -> Vec<NaiveDateTime> {
        r.map(|i| self.series.timestamp(i)).collect()
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Seasonal(SeasonalMeanModel),
    Tree(TreeNode),
    Arima(ArimaFit),
}

impl FittedModel {
    pub fn to_json(&self) -> String {
        match self {
            FittedModel::Seasonal(m) => m.to_json(),
            FittedModel::Tree(t) => t.to_json(),
            FittedModel::Arima(a) => a.to_json(),
        }
    }
}

/// Where and how one block is fitted and predicted, in history indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub origin: usize,
    pub train: Range<usize>,
    pub targets: Range<usize>,
}

/// Fit the plan's model on `h.kwh[train]`.
pub fn fit_model(plan: &BacktestPlan, h: &History, train: Range<usize>) -> Result<FittedModel> {
    match &plan.model {
        ModelKind::DayOfWeek => Ok(FittedModel::Seasonal(fit_seasonal(
            &h.series.slice(train),
            Keying::DayOfWeek,
        )?)),
        ModelKind::TimeOfWeek => Ok(FittedModel::Seasonal(fit_seasonal(
            &h.series.slice(train),
            Keying::TimeOfWeek,
        )?)),
        ModelKind::RegressionTree(params) => {
            let rows: &[FeatureRow] = &h.features.rows()[train.clone()];
            let (tree, _) = fit_tree_with_grown(rows, &h.kwh[train], params)?;
            Ok(FittedModel::Tree(tree))
        }
        ModelKind::Arima(spec) => Ok(FittedModel::Arima(fit_css(&h.kwh[train], spec)?)),
    }
}

/// Predict `o.targets` from a model fitted at `o.origin`.
pub fn predict_block(m: &FittedModel, plan: &BacktestPlan, h: &History, o: &Origin) -> Result<Vec<f64>> {
    match m {
        FittedModel::Seasonal(s) => predict_seasonal(s, &h.timestamps(o.targets.clone())),
        FittedModel::Tree(t) => Ok(h.features.rows()[o.targets.clone()]
            .iter()
            .map(|r| t.predict(r))
            .collect()),
        FittedModel::Arima(a) => {
            let steps = o.targets.end - o.origin;
            let f = a.forecast(steps.max(plan.horizon))?;
            Ok(f[steps - o.targets.len()..steps].to_vec())
        }
    }
}

/// Origins of every block holding at least one masked target.
pub fn plan_origins(plan: &BacktestPlan, h: &History) -> Result<Vec<Origin>> {
    let test_len = h.kwh.len() - h.test_start;
    plan.validate(h.series.granularity(), test_len)?;
    let span = plan.eval_span(test_len)?;
    let c = plan.cadence_len(span);
    let mut out = Vec::new();
    for k in 0..span / c {
        let targets = h.test_start + k * c..h.test_start + (k + 1) * c;
        if let Some(mask) = &plan.mask {
            if !targets.clone().any(|i| mask.contains(h.series.timestamp(i))) {
                continue;
            }
        }
        let origin = if plan.model.uses_horizon() {
            targets.end - plan.horizon
        } else {
            targets.start
        };
        let train = match plan.window_len() {
            None => 0..origin,
            Some(w) if w <= origin => origin - w..origin,
            Some(w) => return Err(Error::InsufficientHistory { origin, need: w }),
        };
        out.push(Origin { origin, train, targets });
    }
    if out.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BacktestOutcome {
    pub plan: BacktestPlan,
    pub timestamps: Vec<NaiveDateTime>,
    pub run: ForecastRun,
    /// Origin timestamps, one per fit.
    pub origins: Vec<NaiveDateTime>,
    /// Summed wallclock seconds spent fitting and predicting.
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

impl BacktestOutcome {
    pub fn fits(&self) -> usize {
        self.origins.len()
    }
}

/// Baseline predictions: the seasonal mean matching the granularity, fitted
/// once on the training split.
pub fn baseline_model(data: &TrainTestSplit) -> Result<SeasonalMeanModel> {
    fit_seasonal(&data.train, Keying::for_granularity(data.train.granularity()))
}

pub fn run_backtest(plan: &BacktestPlan, data: &TrainTestSplit) -> Result<BacktestOutcome> {
    let h = History::from_split(data)?;
    let origins = plan_origins(plan, &h)?;
    let baseline = baseline_model(data)?;

    let mut timestamps = Vec::new();
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    let mut origin_ts = Vec::with_capacity(origins.len());
    let (mut train_seconds, mut predict_seconds) = (0.0, 0.0);
    for o in &origins {
        let t0 = Instant::now();
        let model = fit_model(plan, &h, o.train.clone())?;
        let t1 = Instant::now();
        let block = predict_block(&model, plan, &h, o)?;
        train_seconds += (t1 - t0).as_secs_f64();
        predict_seconds += t1.elapsed().as_secs_f64();
        origin_ts.push(h.series.timestamp(o.origin));
        for (i, p) in o.targets.clone().zip(block) {
            let ts = h.series.timestamp(i);
            if plan.mask.as_ref().is_none_or(|m| m.contains(ts)) {
                timestamps.push(ts);
                observed.push(h.kwh[i]);
                predicted.push(p);
            }
        }
    }
    let base = predict_seasonal(&baseline, &timestamps)?;
    let run = ForecastRun::new(observed, predicted, Some(base))?;
    log::debug!("{}: {} fits, {} targets", plan.name, origins.len(), run.len());
    Ok(BacktestOutcome {
        plan: plan.clone(),
        timestamps,
        run,
        origins: origin_ts,
        train_seconds,
        predict_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::mape;
    use crate::series::{parse_timestamp, split};

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn data(start: &str, g: Granularity, kwh: &[f64], boundary: &str) -> TrainTestSplit {
        let s = IntervalSeries::from_kwh("e", ts(start), g, kwh).unwrap();
        let f = FeatureTable::calendar_for(&s);
        split(&s, &f, ts(boundary)).unwrap()
    }

    #[test]
    fn dow_once_covers_whole_test() {
        let kwh: Vec<f64> = (0..730).map(|i| 100.0 + (i % 7) as f64).collect();
        let d = data("2010-01-03T00:00", Granularity::Hour24, &kwh, "2011-01-02T00:00");
        let plan = BacktestPlan::new("dow", ModelKind::DayOfWeek, Cadence::Once, 1);
        let out = run_backtest(&plan, &d).unwrap();
        assert_eq!(out.run.len(), d.test.len());
        assert_eq!(out.fits(), 1);
        assert_eq!(mape(&out.run), 0.0);
        assert_eq!(out.run.baseline().unwrap(), out.run.predicted());
    }

    #[test]
    fn arima_weekly_on_noise_free_ar1() {
        let kwh: Vec<f64> = (0..400).map(|t| 50.0 + 30.0 * 0.98f64.powi(t)).collect();
        let d = data("2010-01-03T00:00", Granularity::Hour24, &kwh, "2010-10-30T00:00");
        let spec = ArimaSpec::new(1, 0, 0, 200);
        let plan = BacktestPlan::new("ar", ModelKind::Arima(spec), Cadence::Every(7), 7).with_eval_intervals(98);
        let out = run_backtest(&plan, &d).unwrap();
        assert_eq!(out.fits(), 14);
        assert!(mape(&out.run) < 1e-3, "{}", mape(&out.run));
        // h-step recursion from each origin
        let h = History::from_split(&d).unwrap();
        for (k, o) in plan_origins(&plan, &h).unwrap().iter().enumerate() {
            let mut x = kwh[o.origin - 1];
            for j in 0..7 {
                x = 50.0 + 0.98 * (x - 50.0);
                let p = out.run.predicted()[7 * k + j];
                assert!((p - x).abs() < 1e-3 * x, "origin {k} step {j}: {p} vs {x}");
            }
        }
    }

    #[test]
    fn arima_keeps_last_cadence_steps_of_each_forecast() {
        let kwh: Vec<f64> = (0..300).map(|i| 100.0 + 10.0 * ((i as f64) * 0.3).sin()).collect();
        let d = data("2010-01-03T00:00", Granularity::Hour24, &kwh, "2010-09-01T00:00");
        let spec = ArimaSpec::new(2, 0, 0, 150);
        let plan = BacktestPlan::new("ar", ModelKind::Arima(spec), Cadence::Every(2), 4).with_eval_intervals(20);
        let h = History::from_split(&d).unwrap();
        let origins = plan_origins(&plan, &h).unwrap();
        assert_eq!(origins.len(), 10);
        assert_eq!(origins[0].origin, h.test_start - 2);
        assert_eq!(origins[0].targets, h.test_start..h.test_start + 2);
        let out = run_backtest(&plan, &d).unwrap();
        let fit = fit_css(&h.kwh[origins[3].train.clone()], &spec).unwrap();
        let f = fit.forecast(4).unwrap();
        assert_eq!(&out.run.predicted()[6..8], &f[2..4]);
    }

    #[test]
    fn dr_mask_counts() {
        let n = 96 * 7 * 3;
        let kwh: Vec<f64> = (0..n).map(|i| 10.0 + (i % 672) as f64 / 100.0).collect();
        let d = data("2010-01-03T00:00", Granularity::Min15, &kwh, "2010-01-17T00:00");
        let plan = BacktestPlan::new("tow", ModelKind::TimeOfWeek, Cadence::Once, 1).with_mask(TimeMask::hours(13, 17, true));
        let out = run_backtest(&plan, &d).unwrap();
        assert_eq!(out.run.len(), 80);
        for t in &out.timestamps {
            assert!(DayOfWeek::of(*t).is_weekday() && (13..17).contains(&t.hour()));
        }

        // with a 2-hour cadence only three blocks per weekday touch 13:00-17:00
        let plan = BacktestPlan::new("tow", ModelKind::TimeOfWeek, Cadence::Every(8), 1).with_mask(TimeMask::hours(13, 17, true));
        let out = run_backtest(&plan, &d).unwrap();
        assert_eq!(out.fits(), 15);
        assert_eq!(out.run.len(), 80);
    }

    #[test]
    fn plan_errors() {
        let kwh = vec![5.0; 96 * 14];
        let d = data("2010-01-03T00:00", Granularity::Min15, &kwh, "2010-01-10T00:00");
        let tow = |c| BacktestPlan::new("p", ModelKind::TimeOfWeek, c, 1);
        let night = TimeMask {
            start: NaiveTime::from_hms_opt(1, 0, 0),
            end: NaiveTime::from_hms_opt(2, 0, 0),
            weekdays_only: true,
        };
        assert!(matches!(run_backtest(&tow(Cadence::Every(5)), &d), Err(Error::InvalidPlan(_))));
        assert!(matches!(
            run_backtest(&tow(Cadence::Once).with_window(TrainingWindow::Intervals(96 * 8)), &d),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(matches!(
            run_backtest(&BacktestPlan::new("p", ModelKind::DayOfWeek, Cadence::Once, 1), &d),
            Err(Error::InvalidPlan(_))
        ));
        let spec = ArimaSpec::new(1, 0, 0, 100);
        assert!(matches!(
            run_backtest(&BacktestPlan::new("p", ModelKind::Arima(spec), Cadence::Every(8), 4), &d),
            Err(Error::InvalidPlan(_))
        ));
        // a weekday-only mask over a weekend-only evaluation span
        let weekend = data("2010-01-03T00:00", Granularity::Min15, &kwh, "2010-01-16T00:00");
        assert!(matches!(
            run_backtest(&tow(Cadence::Once).with_mask(night), &weekend),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn regression_tree_weekly_retrain() {
        let kwh: Vec<f64> = (0..400).map(|i| if i % 7 == 0 || i % 7 == 6 { 60.0 } else { 100.0 }).collect();
        let d = data("2010-01-03T00:00", Granularity::Hour24, &kwh, "2010-12-05T00:00");
        let plan = BacktestPlan::new("rt", ModelKind::RegressionTree(TreeParams::default()), Cadence::Every(7), 1)
            .with_window(TrainingWindow::Intervals(140))
            .with_eval_intervals(63);
        let out = run_backtest(&plan, &d).unwrap();
        assert_eq!(out.fits(), 9);
        assert_eq!(mape(&out.run), 0.0);
    }

    #[test]
    fn plan_json_shape() {
        let plan = BacktestPlan::new("ts", ModelKind::Arima(ArimaSpec::new(1, 1, 1, 2000)), Cadence::Every(8), 8)
            .with_mask(TimeMask::hours(13, 17, true));
        let s = serde_json::to_string(&plan).unwrap();
        assert!(s.contains(r#""kind":"arima""#), "{s}");
        assert!(s.contains(r#""every":8"#), "{s}");
        let back: BacktestPlan = serde_json::from_str(&s).unwrap();
        assert_eq!(back, plan);
        let tree: BacktestPlan = serde_json::from_str(
            r#"{"name":"rt","model":{"kind":"regression_tree","min_leaf":3},"cadence":"once","mask":{"start":"06:00","end":"22:00"}}"#,
        )
        .unwrap();
        assert_eq!(tree.model, ModelKind::RegressionTree(TreeParams { min_leaf: 3, ..Default::default() }));
        assert_eq!(tree.mask.unwrap().end, NaiveTime::from_hms_opt(22, 0, 0));
    }
}
