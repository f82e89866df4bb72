//! Seeded synthetic consumption data with calendar and weather features.
//!
//! Each reading is a product of a seasonal shape (weekday/weekend level,
//! within-day profile, semester-break dip), a cooling load driven by the
//! daily maximum temperature, and a multiplicative disturbance made of an
//! AR(1) deviation plus white noise. Every component is returned alongside
//! the series so tests can check models against the generating process.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{
    midnight, time_of_day_slot, DayOfWeek, FeatureRow, FeatureTable, Granularity, IntervalSeries, Semester,
    SLOTS_PER_DAY,
};

/// Temperature above which cooling load starts, in °F.
pub const COOLING_BASE_F: f64 = 65.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub entities: usize,
    pub start: NaiveDate,
    pub days: usize,
    pub granularity: Granularity,
    /// Mean kWh per interval on a weekday before other effects.
    pub base_kwh: f64,
    /// Fractional drop on weekends.
    pub weekly_amplitude: f64,
    /// Fractional swing of the within-day profile (15-min data only).
    pub daily_amplitude: f64,
    /// Fractional drop during summer semester and on holidays.
    pub break_depth: f64,
    /// Fractional load increase per °F of daily max above the cooling base.
    pub temperature_coupling: f64,
    /// Lag-one coefficient of the multiplicative AR(1) deviation.
    pub ar_coefficient: f64,
    /// Innovation standard deviation of the AR(1) deviation.
    pub ar_sigma: f64,
    /// Standard deviation of multiplicative white noise.
    pub noise_sigma: f64,
    /// Probability that an interior reading is Missing.
    pub missing_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            entities: 1,
            start: NaiveDate::from_ymd_opt(2010, 1, 3).expect("valid date"),
            days: 3 * 364,
            granularity: Granularity::Hour24,
            base_kwh: 100.0,
            weekly_amplitude: 0.3,
            daily_amplitude: 0.4,
            break_depth: 0.2,
            temperature_coupling: 0.01,
            ar_coefficient: 0.0,
            ar_sigma: 0.0,
            noise_sigma: 0.03,
            missing_rate: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.entities == 0 || self.days == 0 {
            return bad("entities and days must be positive".into());
        }
        if !(self.base_kwh > 0.0 && self.base_kwh.is_finite()) {
            return bad(format!("base_kwh {} must be positive", self.base_kwh));
        }
        for (name, v) in [
            ("weekly_amplitude", self.weekly_amplitude),
            ("daily_amplitude", self.daily_amplitude),
            ("break_depth", self.break_depth),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} {v} not in [0, 1)"));
            }
        }
        if !(self.ar_coefficient.abs() < 1.0) {
            return bad(format!("ar_coefficient {} must satisfy |phi| < 1", self.ar_coefficient));
        }
        for (name, v) in [
            ("temperature_coupling", self.temperature_coupling),
            ("ar_sigma", self.ar_sigma),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be nonnegative"));
            }
        }
        if !(0.0..0.1).contains(&self.missing_rate) {
            return bad(format!("missing_rate {} not in [0, 0.1)", self.missing_rate));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.days * self.granularity.intervals_per_day()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generating components, one value per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Deterministic calendar shape in kWh.
    pub seasonal: Vec<f64>,
    /// Multiplicative cooling factor (1 + coupling * degrees above base).
    pub weather_factor: Vec<f64>,
    /// AR(1) deviation.
    pub ar: Vec<f64>,
    pub noise: Vec<f64>,
    /// Readings before Missing values are punched in.
    pub complete: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEntity {
    pub series: IntervalSeries,
    pub features: FeatureTable,
    pub truth: GroundTruth,
}

/// Semester by calendar date: Spring Jan 1 - May 15, Summer May 16 - Aug 20,
/// Fall otherwise.
pub fn semester_of(date: NaiveDate) -> Semester {
    match (date.month(), date.day()) {
        (1..=4, _) | (5, 1..=15) => Semester::Spring,
        (5, _) | (6 | 7, _) | (8, 1..=20) => Semester::Summer,
        _ => Semester::Fall,
    }
}

/// Fixed-date holidays: Jan 1, Jul 4, Nov 11, Dec 25.
pub fn is_holiday(date: NaiveDate) -> bool {
    matches!((date.month(), date.day()), (1, 1) | (7, 4) | (11, 11) | (12, 25))
}

/// Daily weather for `days` days from `start`: (max, avg) in °F, 0.1 resolution.
pub fn daily_weather(start: NaiveDate, days: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let jitter = Normal::new(0.0, 3.0).expect("valid sigma");
    let spread = Normal::new(10.0, 1.5).expect("valid sigma");
    (0..days)
        .map(|d| {
            let date = start + Duration::days(d as i64);
            let phase = 2.0 * std::f64::consts::PI * (date.ordinal() as f64 - 105.0) / 365.25;
            let max = 70.0 + 15.0 * phase.sin() + jitter.sample(rng);
            let avg = max - Distribution::<f64>::sample(&spread, rng).abs();
            ((max * 10.0).round() / 10.0, (avg * 10.0).round() / 10.0)
        })
        .collect()
}

/// Within-day profile with mean one over the day, peaking mid-afternoon.
fn daily_shape(slot: u8, amplitude: f64) -> f64 {
    let hour = (slot as f64 - 0.5) / 4.0;
    1.0 + amplitude * (2.0 * std::f64::consts::PI * (hour - 8.0) / 24.0).sin()
}

fn seasonal_level(spec: &SyntheticSpec, ts: NaiveDateTime) -> f64 {
    let date = ts.date();
    let mut level = spec.base_kwh;
    if !DayOfWeek::of(ts).is_weekday() {
        level *= 1.0 - spec.weekly_amplitude;
    }
    if spec.granularity == Granularity::Min15 {
        level *= daily_shape(time_of_day_slot(ts), spec.daily_amplitude);
    }
    if semester_of(date) == Semester::Summer || is_holiday(date) {
        level *= 1.0 - spec.break_depth;
    }
    level
}

fn feature_row(ts: NaiveDateTime, granularity: Granularity, weather: (f64, f64)) -> FeatureRow {
    let date = ts.date();
    let min15 = granularity == Granularity::Min15;
    FeatureRow {
        day_of_week: Some(DayOfWeek::of(ts)),
        time_of_day_slot: min15.then(|| time_of_day_slot(ts)),
        semester: Some(semester_of(date)),
        holiday_flag: Some(is_holiday(date)),
        max_temp: Some(weather.0),
        avg_temp: (!min15).then_some(weather.1),
    }
}

fn entity_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate `spec.entities` series sharing one weather history. Entity `i`
/// has base load scaled by `1 + 0.5 i`.
pub fn generate_synthetic(seed: u64, spec: &SyntheticSpec) -> Result<Vec<SyntheticEntity>> {
    spec.validate()?;
    let weather = daily_weather(spec.start, spec.days, &mut entity_rng(seed, 0));
    let g = spec.granularity;
    let n = spec.len();
    let start = midnight(spec.start);
    let timestamps: Vec<NaiveDateTime> = (0..n).map(|i| start + g.step() * i as i32).collect();
    let per_day = g.intervals_per_day();
    debug_assert!(per_day == 1 || per_day == SLOTS_PER_DAY);

    let rows: Vec<FeatureRow> = timestamps
        .iter()
        .enumerate()
        .map(|(i, &ts)| feature_row(ts, g, weather[i / per_day]))
        .collect();
    let features = FeatureTable::new(start, g, rows)?;

    let ar_shock = Normal::new(0.0, spec.ar_sigma).expect("validated sigma");
    let noise_dist = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let mut out = Vec::with_capacity(spec.entities);
    for e in 0..spec.entities {
        let mut rng = entity_rng(seed, e as u64 + 1);
        let scale = 1.0 + 0.5 * e as f64;
        let mut truth = GroundTruth {
            seasonal: Vec::with_capacity(n),
            weather_factor: Vec::with_capacity(n),
            ar: Vec::with_capacity(n),
            noise: Vec::with_capacity(n),
            complete: Vec::with_capacity(n),
        };
        // start the AR deviation from its stationary distribution
        let stationary_sd = spec.ar_sigma / (1.0 - spec.ar_coefficient.powi(2)).sqrt();
        let mut dev = stationary_sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        for (i, &ts) in timestamps.iter().enumerate() {
            if i > 0 {
                dev = spec.ar_coefficient * dev + ar_shock.sample(&mut rng);
            }
            let noise = noise_dist.sample(&mut rng);
            let seasonal = scale * seasonal_level(spec, ts);
            let cooling = 1.0 + spec.temperature_coupling * (weather[i / per_day].0 - COOLING_BASE_F).max(0.0);
            let value = seasonal * cooling * (1.0 + dev + noise);
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "spec produces nonpositive consumption {value} at interval {i}"
                )));
            }
            truth.seasonal.push(seasonal);
            truth.weather_factor.push(cooling);
            truth.ar.push(dev);
            truth.noise.push(noise);
            truth.complete.push(value);
        }
        let values = truth
            .complete
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let interior = i > 0 && i + 1 < n;
                let drop = spec.missing_rate > 0.0 && interior && rng.random_bool(spec.missing_rate);
                (!drop).then_some(v)
            })
            .collect();
        let series = IntervalSeries::new(format!("site{}", e + 1), start, g, values)?;
        out.push(SyntheticEntity {
            series,
            features: features.clone(),
            truth,
        });
    }
    Ok(out)
}
