//! Measured unit costs times the use count should reproduce the wallclock of
//! actually running the backtest. Kept in its own test binary so no other
//! test competes for the CPU while timing.

use chrono::{Duration, NaiveDate};
use loadeval::arima::ArimaSpec;
use loadeval::backtest::{run_backtest, BacktestPlan, Cadence, ModelKind, TimeMask, TrainingWindow};
use loadeval::costs::measure_costs;
use loadeval::measures::{tcc_with, CostSchedule};
use loadeval::series::{midnight, split};
use loadeval::synthetic::{generate_synthetic, SyntheticSpec};
use loadeval::Granularity;

#[test]
fn afternoon_arima_tcc_matches_summed_backtest_wallclock() {
    let spec = SyntheticSpec {
        granularity: Granularity::Min15,
        days: 21,
        start: NaiveDate::from_ymd_opt(2010, 1, 3).unwrap(),
        ar_coefficient: 0.9,
        ar_sigma: 0.02,
        ..SyntheticSpec::default()
    };
    let e = generate_synthetic(2, &spec).unwrap().remove(0);
    let d = split(&e.series, &e.features, midnight(spec.start) + Duration::days(14)).unwrap();
    // refit every 2 hours, used three times per weekday for 1-5PM
    let plan = BacktestPlan::new("ts", ModelKind::Arima(ArimaSpec::new(2, 0, 1, 96 * 7)), Cadence::Every(8), 24)
        .with_window(TrainingWindow::Intervals(96 * 7))
        .with_mask(TimeMask::hours(13, 17, true));

    // Wallclock of identical work drifts on shared hosts by more than the
    // tolerance over a few seconds, so each backtest is paired with a cost
    // measurement taken immediately after it and the paired ratios compared.
    let mut ratios: Vec<f64> = (0..61)
        .map(|_| {
            let out = run_backtest(&plan, &d).unwrap();
            assert_eq!(out.fits(), 15);
            let actual = out.train_seconds + out.predict_seconds;
            let c = measure_costs(&plan, &d, 1).unwrap();
            assert_eq!(c.cc_t, 0.0);
            tcc_with(&c, CostSchedule { tau: 0.0, pi: 15.0 }) / actual
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let ratio = ratios[ratios.len() / 2];
    assert!((ratio - 1.0).abs() <= 0.05, "tcc / summed wallclock = {ratio} ({ratios:?})");
}
