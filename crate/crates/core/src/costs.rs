//! Wallclock and data-collection costs of a backtest plan.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::backtest::{fit_model, plan_origins, predict_block, BacktestPlan, History, ModelKind, Origin};
use crate::error::Result;
use crate::measures::CostRecord;
use crate::rtree::usable_features;
use crate::series::TrainTestSplit;

pub const DEFAULT_REPETITIONS: usize = 10;
/// Cap on repetition widening when the timer reads zero.
const MAX_REPETITIONS: usize = 10_000;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Run `f` `reps` times and return per-call seconds. If the median reads as
/// zero the repetition count is doubled until the timer resolves it.
fn time_repeated(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<Vec<f64>> {
    let mut reps = reps.max(1);
    loop {
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = Instant::now();
            f()?;
            samples.push(t.elapsed().as_secs_f64());
        }
        let mut sorted = samples.clone();
        if median(&mut sorted) > 0.0 || reps >= MAX_REPETITIONS {
            return Ok(samples);
        }
        log::warn!("timer resolution coarser than measured call; widening to {} repetitions", reps * 2);
        reps *= 2;
    }
}

/// Origins timed per repetition, evenly spaced over the plan.
const SAMPLED_ORIGINS: usize = 16;

/// Prediction uses to time: up to `SAMPLED_ORIGINS` of the plan's origins,
/// each predicting `horizon` intervals (ARIMA keeps its scheduled block).
fn sampled_uses(plan: &BacktestPlan, h: &History) -> Result<Vec<Origin>> {
    let all = plan_origins(plan, h)?;
    let n = all.len();
    let k = n.min(SAMPLED_ORIGINS);
    Ok((0..k)
        .map(|j| {
            let o = all[j * n / k].clone();
            if plan.model.uses_horizon() {
                o
            } else {
                let end = (o.origin + plan.horizon).min(h.kwh.len());
                Origin {
                    targets: o.origin..end,
                    ..o
                }
            }
        })
        .collect())
}

/// Unique-value counts of the model's inputs over the history.
///
/// Univariate models consume one reading per interval, counted as one
/// dynamic input per interval. The tree's inputs are its usable features,
/// split into static (calendar) and dynamic (weather) groups.
pub fn data_counts(plan: &BacktestPlan, h: &History) -> (BTreeMap<String, usize>, BTreeMap<String, usize>) {
    let mut stat = BTreeMap::new();
    let mut dynamic = BTreeMap::new();
    match &plan.model {
        ModelKind::RegressionTree(params) => {
            for f in usable_features(h.features.rows(), params) {
                let unique: BTreeSet<u64> = h
                    .features
                    .rows()
                    .iter()
                    .filter_map(|r| f.value(r))
                    .map(f64::to_bits)
                    .collect();
                let target = if f.is_static() { &mut stat } else { &mut dynamic };
                target.insert(f.name().to_string(), unique.len());
            }
        }
        _ => {
            dynamic.insert("kwh".to_string(), h.kwh.len());
        }
    }
    (stat, dynamic)
}

/// Median (and mean) wallclock of one training and one prediction use over
/// `repetitions` runs. Each run times isolated fits and predictions at a
/// spread of the plan's origins and averages them.
///
/// ARIMA is refitted for every use, so its whole fit-and-forecast time is
/// charged to prediction and its training cost is zero.
pub fn measure_costs(plan: &BacktestPlan, data: &TrainTestSplit, repetitions: usize) -> Result<CostRecord> {
    let h = History::from_split(data)?;
    let uses = sampled_uses(plan, &h)?;
    let k = uses.len() as f64;
    let (train, predict) = if let ModelKind::Arima(_) = plan.model {
        let per_use = time_repeated(repetitions, || {
            for o in &uses {
                let m = fit_model(plan, &h, o.train.clone())?;
                predict_block(&m, plan, &h, o)?;
            }
            Ok(())
        })?;
        (vec![0.0; per_use.len()], per_use.iter().map(|t| t / k).collect())
    } else {
        let train = time_repeated(repetitions, || {
            uses.iter().try_for_each(|o| fit_model(plan, &h, o.train.clone()).map(drop))
        })?;
        let models = uses
            .iter()
            .map(|o| fit_model(plan, &h, o.train.clone()))
            .collect::<Result<Vec<_>>>()?;
        let predict = time_repeated(repetitions, || {
            uses.iter()
                .zip(&models)
                .try_for_each(|(o, m)| predict_block(m, plan, &h, o).map(drop))
        })?;
        let per = |v: Vec<f64>| v.iter().map(|t| t / k).collect::<Vec<f64>>();
        (per(train), per(predict))
    };
    let (static_counts, dynamic_counts) = data_counts(plan, &h);
    Ok(CostRecord {
        cc_t: median(&mut train.clone()),
        cc_p: median(&mut predict.clone()),
        cc_t_mean: mean(&train),
        cc_p_mean: mean(&predict),
        repetitions: predict.len(),
        static_counts,
        dynamic_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::Cadence;
    use crate::rtree::TreeParams;
    use crate::series::{split, midnight, Granularity};
    use crate::synthetic::{generate_synthetic, SyntheticSpec};
    use chrono::Duration;

    fn synthetic(g: Granularity, days: usize, test_days: i64) -> TrainTestSplit {
        let spec = SyntheticSpec {
            granularity: g,
            days,
            ..SyntheticSpec::default()
        };
        let e = generate_synthetic(11, &spec).unwrap().remove(0);
        let boundary = midnight(spec.start) + Duration::days(days as i64 - test_days);
        split(&e.series, &e.features, boundary).unwrap()
    }

    #[test]
    fn univariate_data_cost_is_interval_count() {
        // three years of days, as in a 2008-2010 daily history
        let d = synthetic(Granularity::Hour24, 1096, 365);
        let plan = BacktestPlan::new("dow", ModelKind::DayOfWeek, Cadence::Once, 1);
        let c = measure_costs(&plan, &d, 3).unwrap();
        assert_eq!(c.data_cost(), 1096);
        assert!(c.cc_p > 0.0 && c.cc_p.is_finite());
        assert!(c.cc_t > 0.0);
        assert_eq!(c.n_s(), 0);
        assert_eq!(c.n_d(), 1);
    }

    #[test]
    fn tree_data_cost_sums_feature_unique_counts() {
        let d = synthetic(Granularity::Hour24, 730, 100);
        let plan = BacktestPlan::new("rt", ModelKind::RegressionTree(TreeParams::default()), Cadence::Once, 1);
        let c = measure_costs(&plan, &d, 2).unwrap();
        let rows = d.history_features();
        let unique = |get: fn(&crate::FeatureRow) -> f64| {
            rows.rows().iter().map(|r| get(r).to_bits()).collect::<BTreeSet<_>>().len() as u64
        };
        let max_t = unique(|r| r.max_temp.unwrap());
        let avg_t = unique(|r| r.avg_temp.unwrap());
        assert_eq!(c.data_cost(), 7 + 3 + 2 + max_t + avg_t);
        assert_eq!(c.n_s(), 3);
        assert_eq!(c.n_d(), 2);
    }
}
