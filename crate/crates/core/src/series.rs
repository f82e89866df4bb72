//! Interval kWh series, aligned feature tables, and the preprocessing steps
//! applied before any model sees the data: CSV ingestion, gap interpolation,
//! daily aggregation, and the train/test split.
//!
//! Timestamps are naive local calendar time. There is no time-zone arithmetic;
//! DST transition days are ordinary grid days.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
pub const SLOTS_PER_DAY: usize = 96;
/// Default upper bound on the fraction of Missing readings `clean` accepts.
pub const DEFAULT_MAX_MISSING_FRACTION: f64 = 0.10;

/// A reading is either a kWh value or Missing.
pub type Reading = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(rename = "15min")]
    Min15,
    #[serde(rename = "24hour")]
    Hour24,
}

impl Granularity {
    pub fn step(self) -> Duration {
        match self {
            Granularity::Min15 => Duration::minutes(15),
            Granularity::Hour24 => Duration::days(1),
        }
    }

    pub fn intervals_per_day(self) -> usize {
        match self {
            Granularity::Min15 => SLOTS_PER_DAY,
            Granularity::Hour24 => 1,
        }
    }

    pub fn on_grid(self, ts: NaiveDateTime) -> bool {
        match self {
            Granularity::Min15 => ts.minute() % 15 == 0 && ts.second() == 0,
            Granularity::Hour24 => ts.hour() == 0 && ts.minute() == 0 && ts.second() == 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Min15 => "15min",
            Granularity::Hour24 => "24hour",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DayOfWeek {
    Sun,
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Sun,
        DayOfWeek::Mon,
        DayOfWeek::Tue,
        DayOfWeek::Wed,
        DayOfWeek::Thu,
        DayOfWeek::Fri,
        DayOfWeek::Sat,
    ];

    /// Sunday = 0.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn of(ts: NaiveDateTime) -> Self {
        Self::ALL[ts.weekday().num_days_from_sunday() as usize]
    }

    pub fn is_weekday(self) -> bool {
        !matches!(self, DayOfWeek::Sat | DayOfWeek::Sun)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayOfWeek::Sun => "Sun",
            DayOfWeek::Mon => "Mon",
            DayOfWeek::Tue => "Tue",
            DayOfWeek::Wed => "Wed",
            DayOfWeek::Thu => "Thu",
            DayOfWeek::Fri => "Fri",
            DayOfWeek::Sat => "Sat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Semester {
    Fall,
    Spring,
    Summer,
}

impl Semester {
    pub const ALL: [Semester; 3] = [Semester::Fall, Semester::Spring, Semester::Summer];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|x| x.as_str().eq_ignore_ascii_case(s.trim()))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Semester::Fall => "Fall",
            Semester::Spring => "Spring",
            Semester::Summer => "Summer",
        }
    }
}

/// 15-minute slot of the day, 1..=96.
pub fn time_of_day_slot(ts: NaiveDateTime) -> u8 {
    ((ts.hour() * 60 + ts.minute()) / 15 + 1) as u8
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    // chrono accepts some sloppy forms (single-digit fields); require the exact shape.
    if s.len() != 16 {
        return None;
    }
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).ok()
}

/// Canonical kWh text: at most six fractional digits, trailing zeros trimmed.
pub fn format_kwh(v: f64) -> String {
    let mut s = format!("{v:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

/// Uniformly spaced kWh readings for one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSeries {
    entity_id: String,
    start: NaiveDateTime,
    granularity: Granularity,
    values: Vec<Reading>,
}

impl IntervalSeries {
    pub fn new(
        entity_id: impl Into<String>,
        start: NaiveDateTime,
        granularity: Granularity,
        values: Vec<Reading>,
    ) -> Result<Self> {
        if !granularity.on_grid(start) {
            return Err(Error::CadenceViolation(start, granularity.as_str()));
        }
        for (index, v) in values.iter().enumerate() {
            if let Some(v) = *v {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonPositive { index, value: v });
                }
            }
        }
        Ok(Self {
            entity_id: entity_id.into(),
            start,
            granularity,
            values,
        })
    }

    /// Convenience constructor for fully observed data.
    pub fn from_kwh(
        entity_id: impl Into<String>,
        start: NaiveDateTime,
        granularity: Granularity,
        kwh: &[f64],
    ) -> Result<Self> {
        Self::new(
            entity_id,
            start,
            granularity,
            kwh.iter().map(|&v| Some(v)).collect(),
        )
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn values(&self) -> &[Reading] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + self.granularity.step() * i as i32
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        (0..self.len()).map(|i| self.timestamp(i)).collect()
    }

    /// Index of `ts` if it lies on this series' grid (it may be past the end).
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        if ts < self.start || !self.granularity.on_grid(ts) {
            return None;
        }
        let minutes = (ts - self.start).num_minutes();
        let step = self.granularity.step().num_minutes();
        (minutes % step == 0).then_some((minutes / step) as usize)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_clean(&self) -> bool {
        self.values.iter().all(|v| matches!(v, Some(x) if *x > 0.0))
    }

    /// Plain kWh values; errors if any reading is Missing.
    pub fn kwh(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.ok_or(Error::NotClean))
            .collect()
    }

    pub fn slice(&self, range: Range<usize>) -> IntervalSeries {
        IntervalSeries {
            entity_id: self.entity_id.clone(),
            start: self.timestamp(range.start),
            granularity: self.granularity,
            values: self.values[range].to_vec(),
        }
    }

    /// Multiply every present reading by `k`.
    pub fn scaled(&self, k: f64) -> IntervalSeries {
        IntervalSeries {
            values: self.values.iter().map(|v| v.map(|x| x * k)).collect(),
            ..self.clone()
        }
    }

    /// Append `other`, which must start right where `self` ends.
    pub fn concat(&self, other: &IntervalSeries) -> Result<IntervalSeries> {
        if other.granularity != self.granularity {
            return Err(Error::GranularityMismatch(
                "cannot concatenate series of different granularity".into(),
            ));
        }
        if other.start != self.timestamp(self.len()) {
            return Err(Error::LengthMismatch(
                "concatenated series are not contiguous".into(),
            ));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(IntervalSeries {
            values,
            ..self.clone()
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["timestamp", "kwh"])?;
        for (i, v) in self.values.iter().enumerate() {
            let kwh = v.map(format_kwh).unwrap_or_default();
            out.write_record([format_timestamp(self.timestamp(i)), kwh])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn emit_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Read a `timestamp,kwh` CSV; the entity id is taken from the file stem.
pub fn ingest_csv(path: impl AsRef<Path>, granularity: Granularity) -> Result<IntervalSeries> {
    let path = path.as_ref();
    let entity = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "entity".to_owned());
    let file = std::fs::File::open(path)?;
    parse_csv(file, entity, granularity)
}

pub fn parse_csv<R: Read>(
    reader: R,
    entity_id: impl Into<String>,
    granularity: Granularity,
) -> Result<IntervalSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows: BTreeMap<NaiveDateTime, Reading> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let ts_raw = record.get(0).unwrap_or("");
        let ts = parse_timestamp(ts_raw).ok_or_else(|| Error::MalformedTimestamp {
            line,
            value: ts_raw.to_owned(),
        })?;
        if !granularity.on_grid(ts) {
            return Err(Error::CadenceViolation(ts, granularity.as_str()));
        }
        let kwh_raw = record.get(1).unwrap_or("");
        let kwh = if kwh_raw.is_empty() {
            None
        } else {
            let v: f64 = kwh_raw.parse().map_err(|_| Error::MalformedValue {
                line,
                value: kwh_raw.to_owned(),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::MalformedValue {
                    line,
                    value: kwh_raw.to_owned(),
                });
            }
            Some(v)
        };
        if rows.insert(ts, kwh).is_some() {
            return Err(Error::DuplicateTimestamp(ts));
        }
    }
    let (&start, _) = rows.iter().next().ok_or(Error::EmptySeries)?;
    let (&last, _) = rows.iter().next_back().expect("nonempty");
    let step = granularity.step().num_minutes();
    let len = ((last - start).num_minutes() / step) as usize + 1;
    let mut values = vec![None; len];
    for (ts, v) in rows {
        let idx = ((ts - start).num_minutes() / step) as usize;
        values[idx] = v;
    }
    IntervalSeries::new(entity_id, start, granularity, values)
}

/// Fill Missing readings by linear interpolation using the default missing bound.
pub fn clean(s: &IntervalSeries) -> Result<IntervalSeries> {
    clean_with(s, DEFAULT_MAX_MISSING_FRACTION)
}

pub fn clean_with(s: &IntervalSeries, max_missing_fraction: f64) -> Result<IntervalSeries> {
    let n = s.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if s.values[0].is_none() {
        return Err(Error::EdgeMissing(s.entity_id.clone(), "leading"));
    }
    if s.values[n - 1].is_none() {
        return Err(Error::EdgeMissing(s.entity_id.clone(), "trailing"));
    }
    let fraction = s.missing_count() as f64 / n as f64;
    if fraction > max_missing_fraction {
        return Err(Error::TooManyMissing {
            fraction,
            bound: max_missing_fraction,
        });
    }

    let mut out: Vec<f64> = Vec::with_capacity(n);
    let mut left = 0usize;
    let mut i = 0usize;
    while i < n {
        match s.values[i] {
            Some(v) => {
                out.push(v);
                left = i;
                i += 1;
            }
            None => {
                let right = (i..n)
                    .find(|&j| s.values[j].is_some())
                    .expect("last reading is present");
                let (a, b) = (out[left], s.values[right].unwrap());
                let span = (right - left) as f64;
                for j in i..right {
                    let w = (j - left) as f64 / span;
                    out.push(a + (b - a) * w);
                }
                i = right;
            }
        }
    }
    for (index, &v) in out.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::NonPositive { index, value: v });
        }
    }
    Ok(IntervalSeries {
        values: out.into_iter().map(Some).collect(),
        ..s.clone()
    })
}

/// Sum each day's 96 quarter-hour readings into one 24-hour reading.
pub fn aggregate_daily(s: &IntervalSeries) -> Result<IntervalSeries> {
    if s.granularity != Granularity::Min15 {
        return Err(Error::GranularityMismatch(
            "daily aggregation needs a 15-min series".into(),
        ));
    }
    if s.start.time() != chrono::NaiveTime::MIN {
        return Err(Error::PartialDay(format!(
            "series starts at {} rather than midnight",
            format_timestamp(s.start)
        )));
    }
    if s.len() % SLOTS_PER_DAY != 0 {
        return Err(Error::PartialDay(format!(
            "{} readings is not a whole number of days",
            s.len()
        )));
    }
    let kwh = s.kwh()?;
    let daily = kwh
        .chunks_exact(SLOTS_PER_DAY)
        .map(|day| Some(day.iter().sum::<f64>()))
        .collect();
    IntervalSeries::new(s.entity_id.clone(), s.start, Granularity::Hour24, daily)
}

/// Calendar, schedule and weather features for one interval. Any field may be
/// Missing; which fields are populated depends on the table's granularity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub day_of_week: Option<DayOfWeek>,
    pub time_of_day_slot: Option<u8>,
    pub semester: Option<Semester>,
    pub holiday_flag: Option<bool>,
    pub max_temp: Option<f64>,
    pub avg_temp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    start: NaiveDateTime,
    granularity: Granularity,
    rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(start: NaiveDateTime, granularity: Granularity, rows: Vec<FeatureRow>) -> Result<Self> {
        if !granularity.on_grid(start) {
            return Err(Error::CadenceViolation(start, granularity.as_str()));
        }
        for (i, row) in rows.iter().enumerate() {
            let ok = match granularity {
                Granularity::Min15 => {
                    matches!(row.time_of_day_slot, Some(1..=96)) && row.avg_temp.is_none()
                }
                Granularity::Hour24 => row.time_of_day_slot.is_none(),
            };
            if !ok {
                return Err(Error::GranularityMismatch(format!(
                    "feature row {i}: time_of_day_slot must be present (1-96) iff 15-min, avg_temp only for 24-hour"
                )));
            }
        }
        Ok(Self {
            start,
            granularity,
            rows,
        })
    }

    /// A table of calendar-only features (day of week and slot) for `s`.
    pub fn calendar_for(s: &IntervalSeries) -> FeatureTable {
        let rows = (0..s.len())
            .map(|i| {
                let ts = s.timestamp(i);
                FeatureRow {
                    day_of_week: Some(DayOfWeek::of(ts)),
                    time_of_day_slot: (s.granularity == Granularity::Min15)
                        .then(|| time_of_day_slot(ts)),
                    ..FeatureRow::default()
                }
            })
            .collect();
        FeatureTable {
            start: s.start,
            granularity: s.granularity,
            rows,
        }
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn slice(&self, range: Range<usize>) -> FeatureTable {
        FeatureTable {
            start: self.start + self.granularity.step() * range.start as i32,
            granularity: self.granularity,
            rows: self.rows[range].to_vec(),
        }
    }

    pub fn concat(&self, other: &FeatureTable) -> Result<FeatureTable> {
        let next = self.start + self.granularity.step() * self.rows.len() as i32;
        if other.granularity != self.granularity || other.start != next {
            return Err(Error::LengthMismatch(
                "concatenated feature tables are not contiguous".into(),
            ));
        }
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        Ok(FeatureTable { rows, ..self.clone() })
    }

    /// Check that this table is aligned row-for-row with `s`.
    pub fn check_aligned(&self, s: &IntervalSeries) -> Result<()> {
        if self.granularity != s.granularity || self.start != s.start || self.len() != s.len() {
            return Err(Error::LengthMismatch(format!(
                "feature table ({} rows from {}) is not aligned with series {} ({} readings from {})",
                self.len(),
                format_timestamp(self.start),
                s.entity_id,
                s.len(),
                format_timestamp(s.start)
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "timestamp",
            "day_of_week",
            "time_of_day_slot",
            "semester",
            "holiday_flag",
            "max_temp",
            "avg_temp",
        ])?;
        let step = self.granularity.step();
        for (i, r) in self.rows.iter().enumerate() {
            out.write_record([
                format_timestamp(self.start + step * i as i32),
                r.day_of_week.map(|d| d.as_str().to_owned()).unwrap_or_default(),
                r.time_of_day_slot.map(|s| s.to_string()).unwrap_or_default(),
                r.semester.map(|s| s.as_str().to_owned()).unwrap_or_default(),
                r.holiday_flag.map(|h| h.to_string()).unwrap_or_default(),
                r.max_temp.map(format_kwh).unwrap_or_default(),
                r.avg_temp.map(format_kwh).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn emit_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn ingest_features_csv(path: impl AsRef<Path>, granularity: Granularity) -> Result<FeatureTable> {
    let file = std::fs::File::open(path)?;
    parse_features_csv(file, granularity)
}

/// Parse a feature CSV. Gaps in the index become all-Missing rows.
pub fn parse_features_csv<R: Read>(reader: R, granularity: Granularity) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows: BTreeMap<NaiveDateTime, FeatureRow> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |k: usize| record.get(k).unwrap_or("").trim();
        let bad = |k: usize| Error::MalformedValue {
            line,
            value: field(k).to_owned(),
        };
        let ts = parse_timestamp(field(0)).ok_or_else(|| Error::MalformedTimestamp {
            line,
            value: field(0).to_owned(),
        })?;
        if !granularity.on_grid(ts) {
            return Err(Error::CadenceViolation(ts, granularity.as_str()));
        }
        let opt = |k: usize| (!field(k).is_empty()).then(|| field(k));
        let row = FeatureRow {
            day_of_week: opt(1)
                .map(|v| DayOfWeek::parse(v).ok_or_else(|| bad(1)))
                .transpose()?,
            time_of_day_slot: opt(2)
                .map(|v| v.parse::<u8>().map_err(|_| bad(2)))
                .transpose()?,
            semester: opt(3)
                .map(|v| Semester::parse(v).ok_or_else(|| bad(3)))
                .transpose()?,
            holiday_flag: opt(4)
                .map(|v| match v.to_ascii_lowercase().as_str() {
                    "true" | "1" => Ok(true),
                    "false" | "0" => Ok(false),
                    _ => Err(bad(4)),
                })
                .transpose()?,
            max_temp: opt(5)
                .map(|v| v.parse::<f64>().map_err(|_| bad(5)))
                .transpose()?,
            avg_temp: opt(6)
                .map(|v| v.parse::<f64>().map_err(|_| bad(6)))
                .transpose()?,
        };
        if rows.insert(ts, row).is_some() {
            return Err(Error::DuplicateTimestamp(ts));
        }
    }
    let (&start, _) = rows.iter().next().ok_or(Error::EmptySeries)?;
    let (&last, _) = rows.iter().next_back().expect("nonempty");
    let step = granularity.step().num_minutes();
    let len = ((last - start).num_minutes() / step) as usize + 1;
    let mut table = vec![FeatureRow::default(); len];
    for (ts, row) in rows {
        table[((ts - start).num_minutes() / step) as usize] = row;
    }
    // Gap rows still get their calendar-derived slot so the table stays valid.
    if granularity == Granularity::Min15 {
        for (i, row) in table.iter_mut().enumerate() {
            if row.time_of_day_slot.is_none() {
                row.time_of_day_slot =
                    Some(time_of_day_slot(start + Duration::minutes(step * i as i64)));
            }
        }
    }
    FeatureTable::new(start, granularity, table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTestSplit {
    pub train: IntervalSeries,
    pub train_features: FeatureTable,
    pub test: IntervalSeries,
    pub test_features: FeatureTable,
    pub boundary: NaiveDateTime,
}

impl TrainTestSplit {
    /// Train followed by test as one contiguous series.
    pub fn history(&self) -> IntervalSeries {
        self.train
            .concat(&self.test)
            .expect("split halves are contiguous")
    }

    pub fn history_features(&self) -> FeatureTable {
        self.train_features
            .concat(&self.test_features)
            .expect("split halves are contiguous")
    }
}

/// Partition at `boundary`: readings before it train, readings from it on test.
pub fn split(s: &IntervalSeries, f: &FeatureTable, boundary: NaiveDateTime) -> Result<TrainTestSplit> {
    f.check_aligned(s)?;
    let k = s.index_of(boundary).ok_or(Error::BadBoundary(boundary))?;
    if k == 0 || k >= s.len() {
        return Err(Error::BadBoundary(boundary));
    }
    Ok(TrainTestSplit {
        train: s.slice(0..k),
        train_features: f.slice(0..k),
        test: s.slice(k..s.len()),
        test_features: f.slice(k..s.len()),
        boundary,
    })
}

pub fn midnight(date: NaiveDate) -> NaiveDateTime {
    date.and_time(chrono::NaiveTime::MIN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn series(values: Vec<Reading>) -> IntervalSeries {
        IntervalSeries::new("e", ts("2010-01-04T00:00"), Granularity::Min15, values).unwrap()
    }

    #[test]
    fn ingest_four_rows() {
        let csv = "timestamp,kwh\n2010-01-01T00:00,1\n2010-01-01T00:15,2\n2010-01-01T00:30,3\n2010-01-01T00:45,4\n";
        let s = parse_csv(csv.as_bytes(), "a", Granularity::Min15).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.values()[3], Some(4.0));
    }

    #[test]
    fn ingest_materializes_gap() {
        let csv = "timestamp,kwh\n2010-01-01T00:30,3\n2010-01-01T00:00,1\n";
        let s = parse_csv(csv.as_bytes(), "a", Granularity::Min15).unwrap();
        assert_eq!(s.values(), &[Some(1.0), None, Some(3.0)]);
        assert_eq!(s.start(), ts("2010-01-01T00:00"));
    }

    #[test]
    fn ingest_rejects_off_grid_and_duplicates() {
        let off = "timestamp,kwh\n2010-01-01T00:07,1\n";
        assert!(matches!(
            parse_csv(off.as_bytes(), "a", Granularity::Min15),
            Err(Error::CadenceViolation(..))
        ));
        let dup = "timestamp,kwh\n2010-01-01T00:00,1\n2010-01-01T00:00,2\n";
        assert!(matches!(
            parse_csv(dup.as_bytes(), "a", Granularity::Min15),
            Err(Error::DuplicateTimestamp(_))
        ));
        let bad = "timestamp,kwh\n2010/01/01 00:00,1\n";
        assert!(matches!(
            parse_csv(bad.as_bytes(), "a", Granularity::Min15),
            Err(Error::MalformedTimestamp { .. })
        ));
        let noon = "timestamp,kwh\n2010-01-01T12:00,1\n";
        assert!(matches!(
            parse_csv(noon.as_bytes(), "a", Granularity::Hour24),
            Err(Error::CadenceViolation(..))
        ));
    }

    #[test]
    fn clean_interpolates() {
        let s = series(vec![Some(100.0), None, Some(200.0)]);
        assert_eq!(clean_with(&s, 0.5).unwrap().kwh().unwrap(), vec![100.0, 150.0, 200.0]);
        let s = series(vec![Some(100.0), None, None, Some(400.0)]);
        assert_eq!(
            clean_with(&s, 0.5).unwrap().kwh().unwrap(),
            vec![100.0, 200.0, 300.0, 400.0]
        );
    }

    #[test]
    fn clean_errors() {
        let s = series(vec![None, Some(100.0), Some(200.0)]);
        assert!(matches!(clean_with(&s, 0.5), Err(Error::EdgeMissing(_, "leading"))));
        let s = series(vec![Some(100.0), Some(200.0), None]);
        assert!(matches!(clean_with(&s, 0.5), Err(Error::EdgeMissing(_, "trailing"))));
        let s = series(vec![Some(100.0), None, Some(200.0)]);
        assert!(matches!(clean(&s), Err(Error::TooManyMissing { .. })));
        let s = series(vec![Some(100.0), Some(0.0), Some(200.0)]);
        assert!(matches!(clean(&s), Err(Error::NonPositive { index: 1, .. })));
    }

    #[test]
    fn aggregate_days() {
        let s = series(vec![Some(1.0); 96]);
        let d = aggregate_daily(&s).unwrap();
        assert_eq!(d.granularity(), Granularity::Hour24);
        assert_eq!(d.kwh().unwrap(), vec![96.0]);

        let mut v = vec![Some(2.0); 96];
        v.extend(vec![Some(3.0); 96]);
        assert_eq!(aggregate_daily(&series(v)).unwrap().kwh().unwrap(), vec![192.0, 288.0]);

        assert!(matches!(
            aggregate_daily(&series(vec![Some(1.0); 100])),
            Err(Error::PartialDay(_))
        ));
        let late = IntervalSeries::from_kwh("e", ts("2010-01-04T00:15"), Granularity::Min15, &[1.0; 96])
            .unwrap();
        assert!(matches!(aggregate_daily(&late), Err(Error::PartialDay(_))));
    }

    #[test]
    fn split_cases() {
        let s = IntervalSeries::from_kwh("e", ts("2010-01-01T00:00"), Granularity::Hour24, &[1.0; 10])
            .unwrap();
        let f = FeatureTable::calendar_for(&s);
        let sp = split(&s, &f, ts("2010-01-08T00:00")).unwrap();
        assert_eq!(sp.train.len(), 7);
        assert_eq!(sp.test.len(), 3);
        assert_eq!(sp.test_features.len(), 3);
        assert_eq!(sp.history(), s);
        assert!(matches!(split(&s, &f, ts("2010-01-01T00:00")), Err(Error::BadBoundary(_))));
        assert!(matches!(split(&s, &f, ts("2010-01-05T12:00")), Err(Error::BadBoundary(_))));
        assert!(matches!(split(&s, &f, ts("2010-01-11T00:00")), Err(Error::BadBoundary(_))));
    }

    #[test]
    fn feature_csv_round_trip() {
        let s = IntervalSeries::from_kwh("e", ts("2010-01-01T00:00"), Granularity::Min15, &[1.0; 4])
            .unwrap();
        let mut f = FeatureTable::calendar_for(&s);
        f.rows[1].semester = Some(Semester::Spring);
        f.rows[2].holiday_flag = Some(true);
        f.rows[3].max_temp = Some(71.25);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = parse_features_csv(buf.as_slice(), Granularity::Min15).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn format_kwh_trims() {
        assert_eq!(format_kwh(100.0), "100");
        assert_eq!(format_kwh(1.5), "1.5");
        assert_eq!(format_kwh(0.1234567), "0.123457");
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(vals in prop::collection::vec(prop::option::weighted(0.9, 1.0f64..500.0), 2..60)) {
            let mut vals = vals;
            vals[0] = Some(10.0);
            let last = vals.len() - 1;
            vals[last] = Some(20.0);
            let s = series(vals);
            let once = clean_with(&s, 1.0).unwrap();
            prop_assert_eq!(clean_with(&once, 1.0).unwrap(), once);
        }

        #[test]
        fn aggregate_commutes_with_scaling(vals in prop::collection::vec(0.1f64..50.0, 192), k in 0.01f64..100.0) {
            let s = series(vals.into_iter().map(Some).collect());
            let a = aggregate_daily(&s.scaled(k)).unwrap().kwh().unwrap();
            let b = aggregate_daily(&s).unwrap().kwh().unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - k * y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn csv_round_trip_is_bit_exact(micro in prop::collection::vec(1u64..10_000_000_000, 1..50)) {
            let vals: Vec<f64> = micro.iter().map(|&m| format_kwh(m as f64 / 1e6).parse().unwrap()).collect();
            let s = IntervalSeries::from_kwh("e", ts("2010-03-01T00:00"), Granularity::Min15, &vals).unwrap();
            let text = s.to_csv_string();
            let back = parse_csv(text.as_bytes(), "e", Granularity::Min15).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_csv_string(), text);
        }
    }
}
