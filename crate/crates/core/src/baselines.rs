//! Seasonal-mean baselines: day-of-week means for 24-hour data and
//! time-of-week means (7 x 96 bins) for 15-min data.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{time_of_day_slot, DayOfWeek, Granularity, IntervalSeries, SLOTS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keying {
    DayOfWeek,
    TimeOfWeek,
}

impl Keying {
    pub fn for_granularity(g: Granularity) -> Keying {
        match g {
            Granularity::Hour24 => Keying::DayOfWeek,
            Granularity::Min15 => Keying::TimeOfWeek,
        }
    }

    pub fn granularity(self) -> Granularity {
        match self {
            Keying::DayOfWeek => Granularity::Hour24,
            Keying::TimeOfWeek => Granularity::Min15,
        }
    }

    pub fn bins(self) -> usize {
        match self {
            Keying::DayOfWeek => 7,
            Keying::TimeOfWeek => 7 * SLOTS_PER_DAY,
        }
    }

    /// Sunday-first; time-of-week bin = day * 96 + (slot - 1).
    pub fn bin(self, ts: NaiveDateTime) -> usize {
        let day = DayOfWeek::of(ts).index();
        match self {
            Keying::DayOfWeek => day,
            Keying::TimeOfWeek => day * SLOTS_PER_DAY + time_of_day_slot(ts) as usize - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalMeanModel {
    pub keying: Keying,
    pub means: Vec<f64>,
    #[serde(default)]
    pub counts: Vec<usize>,
}

pub fn fit_seasonal(train: &IntervalSeries, keying: Keying) -> Result<SeasonalMeanModel> {
    if keying.granularity() != train.granularity() {
        return Err(Error::GranularityMismatch(format!(
            "{keying:?} keying needs {} data, got {}",
            keying.granularity(),
            train.granularity()
        )));
    }
    let kwh = train.kwh()?;
    // per-bin sums are offset by the bin's first reading, so constant bins stay exact
    let mut firsts = vec![0.0; keying.bins()];
    let mut sums = vec![0.0; keying.bins()];
    let mut counts = vec![0usize; keying.bins()];
    for (i, v) in kwh.iter().enumerate() {
        let b = keying.bin(train.timestamp(i));
        if counts[b] == 0 {
            firsts[b] = *v;
        }
        sums[b] += v - firsts[b];
        counts[b] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyBin(empty));
    }
    let means = firsts
        .iter()
        .zip(sums.iter().zip(&counts))
        .map(|(f, (s, &c))| f + s / c as f64)
        .collect();
    Ok(SeasonalMeanModel {
        keying,
        means,
        counts,
    })
}

impl SeasonalMeanModel {
    pub fn predict_one(&self, ts: NaiveDateTime) -> Result<f64> {
        let g = self.keying.granularity();
        if !g.on_grid(ts) {
            return Err(Error::CadenceViolation(ts, g.as_str()));
        }
        Ok(self.means[self.keying.bin(ts)])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

pub fn predict_seasonal(m: &SeasonalMeanModel, index: &[NaiveDateTime]) -> Result<Vec<f64>> {
    index.iter().map(|&ts| m.predict_one(ts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::parse_timestamp;
    use proptest::prelude::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn daily(start: &str, kwh: &[f64]) -> IntervalSeries {
        IntervalSeries::from_kwh("e", ts(start), Granularity::Hour24, kwh).unwrap()
    }

    #[test]
    fn monday_mean_is_group_mean() {
        // 2010-01-03 is a Sunday; two full weeks with Mondays at 100 and 200.
        let mut v = vec![50.0; 14];
        v[1] = 100.0;
        v[8] = 200.0;
        let m = fit_seasonal(&daily("2010-01-03T00:00", &v), Keying::DayOfWeek).unwrap();
        assert_eq!(m.means[DayOfWeek::Mon.index()], 150.0);
        assert_eq!(m.counts[DayOfWeek::Mon.index()], 2);
        let p = predict_seasonal(&m, &[ts("2010-01-04T00:00"), ts("2012-06-04T00:00")]).unwrap();
        assert_eq!(p, vec![150.0, 150.0]);
    }

    #[test]
    fn constant_series_gives_constant_means() {
        let m = fit_seasonal(&daily("2010-01-01T00:00", &[7.5; 21]), Keying::DayOfWeek).unwrap();
        assert!(m.means.iter().all(|&x| x == 7.5));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_seasonal(&daily("2010-01-01T00:00", &[1.0; 6]), Keying::DayOfWeek),
            Err(Error::EmptyBin(_))
        ));
        assert!(matches!(
            fit_seasonal(&daily("2010-01-01T00:00", &[1.0; 7]), Keying::TimeOfWeek),
            Err(Error::GranularityMismatch(_))
        ));
        let m = fit_seasonal(&daily("2010-01-01T00:00", &[1.0; 7]), Keying::DayOfWeek).unwrap();
        assert!(m.predict_one(ts("2010-01-01T00:15")).is_err());
    }

    #[test]
    fn time_of_week_bins() {
        assert_eq!(Keying::TimeOfWeek.bin(ts("2010-01-03T00:00")), 0);
        assert_eq!(Keying::TimeOfWeek.bin(ts("2010-01-04T00:15")), 97);
        assert_eq!(Keying::TimeOfWeek.bin(ts("2010-01-09T23:45")), 671);
    }

    #[test]
    fn json_shape() {
        let m = fit_seasonal(&daily("2010-01-01T00:00", &[2.0; 7]), Keying::DayOfWeek).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["keying"], "day_of_week");
        assert_eq!(v["means"].as_array().unwrap().len(), 7);
    }

    proptest! {
        #[test]
        fn scaling_and_permutation(vals in prop::collection::vec(1.0f64..1000.0, 672 * 2), k in 0.01f64..100.0) {
            let s = IntervalSeries::from_kwh("e", ts("2010-01-03T00:00"), Granularity::Min15, &vals).unwrap();
            let m = fit_seasonal(&s, Keying::TimeOfWeek).unwrap();
            let ms = fit_seasonal(&s.scaled(k), Keying::TimeOfWeek).unwrap();
            for (a, b) in m.means.iter().zip(&ms.means) {
                prop_assert!((b - k * a).abs() <= 1e-9 * b.abs());
            }
            // swapping the two weeks permutes training order but not bins
            let mut swapped = vals[672..].to_vec();
            swapped.extend_from_slice(&vals[..672]);
            let s2 = IntervalSeries::from_kwh("e", ts("2010-01-03T00:00"), Granularity::Min15, &swapped).unwrap();
            let m2 = fit_seasonal(&s2, Keying::TimeOfWeek).unwrap();
            for (a, b) in m.means.iter().zip(&m2.means) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }
    }
}
