//! Hourly wind-farm data: CSV ingestion, calendar-month sliding windows and
//! min-max feature scaling.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Timestamp format used by the CSV reader and writer.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";

/// Slack allowed on the `[0, 1]` bound for normalized power.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// One hourly observation for a single wind farm.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub timestamp: NaiveDateTime,
    pub zone: u32,
    /// Power as a fraction of nominal capacity; `None` on forecast-horizon rows.
    pub power: Option<f64>,
    pub u10: f64,
    pub v10: f64,
    pub u100: f64,
    pub v100: f64,
}

impl TimeSeriesRecord {
    pub fn has_power(&self) -> bool {
        self.power.is_some()
    }
}

/// Header names for each field of [`TimeSeriesRecord`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub zone: String,
    pub power: String,
    pub u10: String,
    pub v10: String,
    pub u100: String,
    pub v100: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            timestamp: "TIMESTAMP".into(),
            zone: "ZONEID".into(),
            power: "TARGETVAR".into(),
            u10: "U10".into(),
            v10: "V10".into(),
            u100: "U100".into(),
            v100: "V100".into(),
        }
    }
}

impl ColumnMapping {
    fn names(&self) -> [&str; 7] {
        [
            &self.timestamp,
            &self.zone,
            &self.power,
            &self.u10,
            &self.v10,
            &self.u100,
            &self.v100,
        ]
    }
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!(
                "month {month} out of range"
            )));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of(ts: NaiveDateTime) -> Self {
        YearMonth {
            year: ts.year(),
            month: ts.month(),
        }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn pred(self) -> Self {
        if self.month == 1 {
            YearMonth {
                year: self.year - 1,
                month: 12,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month - 1,
            }
        }
    }

    /// Shift by a signed number of months.
    pub fn offset(self, months: i32) -> Self {
        let index = self.year * 12 + self.month as i32 - 1 + months;
        YearMonth {
            year: index.div_euclid(12),
            month: index.rem_euclid(12) as u32 + 1,
        }
    }

    /// First hour of the month (00:00 on day 1).
    pub fn start(self) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(self.year, self.month, 1)
            .expect("validated month")
            .and_hms_opt(0, 0, 0)
            .expect("midnight")
    }

    /// First hour of the following month.
    pub fn end(self) -> NaiveDateTime {
        self.succ().start()
    }

    pub fn hours(self) -> i64 {
        (self.end() - self.start()).num_hours()
    }

    /// Inclusive range of months.
    pub fn range_inclusive(first: YearMonth, last: YearMonth) -> Vec<YearMonth> {
        let mut out = Vec::new();
        let mut m = first;
        while m <= last {
            out.push(m);
            m = m.succ();
        }
        out
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year = y.parse::<i32>().map_err(|_| bad())?;
        let month = m.parse::<u32>().map_err(|_| bad())?;
        YearMonth::new(year, month)
    }
}

/// Half-open timestamp interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TimeRange {
    pub fn contains(&self, ts: NaiveDateTime) -> bool {
        self.start <= ts && ts < self.end
    }

    pub fn hours(&self) -> i64 {
        (self.end - self.start).num_hours()
    }
}

/// Three training months followed immediately by one test month.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlidingWindowSplit {
    pub test_month: YearMonth,
    pub train_range: TimeRange,
    pub test_range: TimeRange,
}

/// Number of calendar months used for training before each test month.
pub const TRAIN_MONTHS: i32 = 3;

impl SlidingWindowSplit {
    pub fn for_test_month(test_month: YearMonth) -> Self {
        SlidingWindowSplit {
            test_month,
            train_range: TimeRange {
                start: test_month.offset(-TRAIN_MONTHS).start(),
                end: test_month.start(),
            },
            test_range: TimeRange {
                start: test_month.start(),
                end: test_month.end(),
            },
        }
    }

    pub fn train_months(&self) -> Vec<YearMonth> {
        (1..=TRAIN_MONTHS)
            .rev()
            .map(|k| self.test_month.offset(-k))
            .collect()
    }
}

fn parse_timestamp(raw: &str) -> std::result::Result<NaiveDateTime, String> {
    let ts = NaiveDateTime::parse_from_str(raw.trim(), TIMESTAMP_FORMAT)
        .map_err(|e| format!("bad timestamp {raw:?}: {e}"))?;
    if ts.minute() != 0 || ts.second() != 0 {
        return Err(format!("timestamp {raw:?} is not on the hour"));
    }
    Ok(ts)
}

fn parse_f64(raw: &str, column: &str) -> std::result::Result<f64, String> {
    let v = raw
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("column {column}: cannot parse {raw:?} as a number"))?;
    if !v.is_finite() {
        return Err(format!("column {column}: non-finite value {raw:?}"));
    }
    Ok(v)
}

/// Load and validate an hourly CSV file.
///
/// Records come back sorted by `(zone, timestamp)`. Rows with an empty power
/// cell are kept with `power = None`. Within each zone the file must list
/// hours in strictly increasing order with a one-hour step.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnMapping) -> Result<Vec<TimeSeriesRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(file, path, schema)
}

/// Same as [`load_csv`] over any reader; `origin` is used in error messages.
pub fn read_csv<R: Read>(
    reader: R,
    origin: &Path,
    schema: &ColumnMapping,
) -> Result<Vec<TimeSeriesRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(schema.names()) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: 1,
                message: format!("missing column {name:?}"),
            })?;
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let cell = |k: usize| {
            row.get(idx[k])
                .ok_or_else(|| parse_err(format!("missing field {}", schema.names()[k])))
        };

        let timestamp = parse_timestamp(cell(0)?).map_err(parse_err)?;
        let zone = cell(1)?
            .trim()
            .parse::<u32>()
            .map_err(|_| parse_err(format!("bad zone id {:?}", cell(1).unwrap_or(""))))?;
        let raw_power = cell(2)?.trim();
        let power = if raw_power.is_empty() || raw_power.eq_ignore_ascii_case("na") {
            None
        } else {
            let p = parse_f64(raw_power, &schema.power).map_err(parse_err)?;
            if !(-POWER_TOLERANCE..=1.0 + POWER_TOLERANCE).contains(&p) {
                return Err(Error::Validation(format!(
                    "{}: line {line}: power {p} outside [0, 1]",
                    origin.display()
                )));
            }
            Some(p.clamp(0.0, 1.0))
        };
        let mut comps = [0.0; 4];
        for (k, c) in comps.iter_mut().enumerate() {
            *c = parse_f64(cell(3 + k)?, schema.names()[3 + k]).map_err(parse_err)?;
        }
        records.push(TimeSeriesRecord {
            timestamp,
            zone,
            power,
            u10: comps[0],
            v10: comps[1],
            u100: comps[2],
            v100: comps[3],
        });
    }

    check_hourly(&records)?;
    records.sort_by_key(|r| (r.zone, r.timestamp));
    Ok(records)
}

/// Checks the per-zone one-hour step, in the order given.
fn check_hourly(records: &[TimeSeriesRecord]) -> Result<()> {
    let mut last: HashMap<u32, NaiveDateTime> = HashMap::new();
    for r in records {
        if let Some(prev) = last.insert(r.zone, r.timestamp) {
            if r.timestamp <= prev {
                return Err(Error::Integrity(format!(
                    "zone {}: timestamp {} does not follow {}",
                    r.zone,
                    r.timestamp.format(TIMESTAMP_FORMAT),
                    prev.format(TIMESTAMP_FORMAT)
                )));
            }
            if r.timestamp - prev != Duration::hours(1) {
                return Err(Error::Integrity(format!(
                    "zone {}: gap between {} and {}",
                    r.zone,
                    prev.format(TIMESTAMP_FORMAT),
                    r.timestamp.format(TIMESTAMP_FORMAT)
                )));
            }
        }
    }
    Ok(())
}

/// Write records in the default column layout.
pub fn write_csv<W: Write>(
    writer: W,
    records: &[TimeSeriesRecord],
    schema: &ColumnMapping,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.names())?;
    for r in records {
        w.write_record([
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.zone.to_string(),
            r.power.map(|p| p.to_string()).unwrap_or_default(),
            r.u10.to_string(),
            r.v10.to_string(),
            r.u100.to_string(),
            r.v100.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Records belonging to one zone, in timestamp order.
pub fn select_zone(records: &[TimeSeriesRecord], zone: u32) -> Vec<TimeSeriesRecord> {
    records.iter().filter(|r| r.zone == zone).cloned().collect()
}

/// Records whose timestamp lies in `range`.
pub fn slice_range<'a>(
    records: &'a [TimeSeriesRecord],
    range: &TimeRange,
) -> Vec<&'a TimeSeriesRecord> {
    records
        .iter()
        .filter(|r| range.contains(r.timestamp))
        .collect()
}

/// One split per test month from `first_test_month` to `last_test_month`.
///
/// Every training month must contain at least one row with observed power,
/// and every test month at least one row.
pub fn make_windows(
    records: &[TimeSeriesRecord],
    first_test_month: YearMonth,
    last_test_month: YearMonth,
) -> Result<Vec<SlidingWindowSplit>> {
    if last_test_month < first_test_month {
        return Err(Error::InvalidArgument(format!(
            "last test month {last_test_month} precedes first {first_test_month}"
        )));
    }
    let mut observed = HashMap::<YearMonth, usize>::new();
    let mut any = HashMap::<YearMonth, usize>::new();
    for r in records {
        let m = YearMonth::of(r.timestamp);
        *any.entry(m).or_default() += 1;
        if r.has_power() {
            *observed.entry(m).or_default() += 1;
        }
    }

    let mut splits = Vec::new();
    for test_month in YearMonth::range_inclusive(first_test_month, last_test_month) {
        let split = SlidingWindowSplit::for_test_month(test_month);
        for m in split.train_months() {
            if observed.get(&m).copied().unwrap_or(0) == 0 {
                return Err(Error::Coverage {
                    month: m.to_string(),
                });
            }
        }
        if any.get(&test_month).copied().unwrap_or(0) == 0 {
            return Err(Error::Coverage {
                month: test_month.to_string(),
            });
        }
        splits.push(split);
    }
    Ok(splits)
}

/// Per-column min-max scaling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub mins: Array1<f64>,
    pub maxs: Array1<f64>,
}

impl MinMaxScaler {
    /// Fit on training rows only.
    pub fn fit(x: ArrayView2<'_, f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "cannot fit a scaler on an empty matrix".into(),
            ));
        }
        let mins = x.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let maxs = x.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        Ok(MinMaxScaler { mins, maxs })
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// Map onto `[0, 1]`, clamping values outside the fitted range. Constant
    /// columns map to 0.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Dimension(format!(
                "scaler fitted on {} columns, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.mins[j], self.maxs[j]);
            let span = hi - lo;
            col.mapv_inplace(|v| {
                if span > 0.0 {
                    ((v - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            });
        }
        Ok(out)
    }
}

pub fn fit_minmax_scaler(x: ArrayView2<'_, f64>) -> Result<MinMaxScaler> {
    MinMaxScaler::fit(x)
}

pub fn apply_minmax(scaler: &MinMaxScaler, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    scaler.transform(x)
}
