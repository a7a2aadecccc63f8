//! Loading long-format sensor exports (`timestamp, sensor, variable, value`)
//! into an aligned [`Dataset`].
//!
//! Every timestamp must sit on the sampling grid anchored at the earliest
//! timestamp in the file. Missing samples are filled by linear interpolation
//! between the nearest observed neighbours (or held flat at the series ends),
//! but a series missing more than `max_missing_fraction` of the grid is
//! rejected outright.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::series::{Dataset, MeasurementSeries, Variable, DEFAULT_STEP_SECONDS};

pub const MPH_TO_KMH: f64 = 1.609344;
pub const DEFAULT_MAX_MISSING_FRACTION: f64 = 0.05;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub timestamp: String,
    pub sensor_id: String,
    /// Rows without a variable column are read as speeds.
    pub variable: Option<String>,
    pub value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            sensor_id: "sensor_id".into(),
            variable: Some("variable".into()),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub columns: ColumnMap,
    /// Convert speed values from mph to km/h.
    pub mph: bool,
    pub step_seconds: i64,
    pub max_missing_fraction: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            mph: false,
            step_seconds: DEFAULT_STEP_SECONDS,
            max_missing_fraction: DEFAULT_MAX_MISSING_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimestampKind {
    Epoch,
    Calendar,
}

const CALENDAR_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
];

fn parse_calendar(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    CALENDAR_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn parse_epoch(s: &str) -> Option<NaiveDateTime> {
    let secs: i64 = s.parse().ok()?;
    DateTime::from_timestamp(secs, 0).map(|d| d.naive_utc())
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

pub fn read_csv(reader: impl Read, options: &LoadOptions) -> Result<Dataset> {
    if options.step_seconds <= 0 {
        return Err(Error::InvalidDataset("step must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let cols = &options.columns;
    let ts_col = column(&cols.timestamp)?;
    let sensor_col = column(&cols.sensor_id)?;
    let value_col = column(&cols.value)?;
    let var_col = cols
        .variable
        .as_deref()
        .and_then(|v| headers.iter().position(|h| h == v));

    let mut kind: Option<TimestampKind> = None;
    let mut grouped: BTreeMap<(String, Variable), BTreeMap<NaiveDateTime, Option<f64>>> =
        BTreeMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |message: String| Error::Parse { line, message };

        let raw_ts = field(ts_col);
        let kind = *kind.get_or_insert(if parse_epoch(raw_ts).is_some() {
            TimestampKind::Epoch
        } else {
            TimestampKind::Calendar
        });
        let ts = match kind {
            TimestampKind::Epoch => parse_epoch(raw_ts),
            TimestampKind::Calendar => parse_calendar(raw_ts),
        }
        .ok_or_else(|| bad(format!("unparseable timestamp `{raw_ts}`")))?;

        let sensor = field(sensor_col).to_string();
        if sensor.is_empty() {
            return Err(bad("empty sensor id".into()));
        }
        let variable = var_col.map_or(Variable::Speed, |c| Variable::parse(field(c)));

        let raw_value = field(value_col);
        let value = if raw_value.is_empty() {
            None
        } else {
            let v: f64 = raw_value
                .parse()
                .map_err(|_| bad(format!("unparseable value `{raw_value}`")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value `{raw_value}`")));
            }
            Some(if options.mph && variable == Variable::Speed {
                v * MPH_TO_KMH
            } else {
                v
            })
        };

        let slot = grouped.entry((sensor.clone(), variable)).or_default();
        if slot.insert(ts, value).is_some() {
            return Err(Error::GridViolation {
                sensor,
                timestamp: ts.format(TIMESTAMP_FORMAT).to_string(),
            });
        }
    }

    let start = grouped
        .values()
        .filter_map(|m| m.keys().next())
        .min()
        .copied()
        .ok_or_else(|| Error::InvalidDataset("no data rows".into()))?;
    let end = grouped
        .values()
        .filter_map(|m| m.keys().next_back())
        .max()
        .copied()
        .expect("non-empty");
    let step = options.step_seconds;
    let len = ((end - start).num_seconds() / step) as usize + 1;

    let mut series = Vec::with_capacity(grouped.len());
    for ((sensor, variable), samples) in grouped {
        let mut grid: Vec<Option<f64>> = vec![None; len];
        for (ts, value) in samples {
            let offset = (ts - start).num_seconds();
            if offset % step != 0 {
                return Err(Error::GridViolation {
                    sensor,
                    timestamp: ts.format(TIMESTAMP_FORMAT).to_string(),
                });
            }
            grid[(offset / step) as usize] = value;
        }
        let missing = grid.iter().filter(|v| v.is_none()).count();
        let missing_fraction = missing as f64 / len as f64;
        if missing_fraction > options.max_missing_fraction || missing == len {
            return Err(Error::TooSparse {
                sensor,
                missing_fraction,
            });
        }
        let values = fill_gaps(&grid);
        series.push(MeasurementSeries::new(
            sensor, variable, start, step, values,
        )?);
    }
    Dataset::new(series, 0)
}

/// Linear interpolation across interior gaps, nearest value at the ends.
/// At least one entry must be present.
pub fn fill_gaps(grid: &[Option<f64>]) -> Vec<f64> {
    let known: Vec<(usize, f64)> = grid
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let (first_i, first_v) = known[0];
    let (last_i, last_v) = *known.last().unwrap();
    let mut out = vec![0.0; grid.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = if i <= first_i {
            first_v
        } else if i >= last_i {
            last_v
        } else {
            match grid[i] {
                Some(v) => v,
                None => {
                    let right = known.partition_point(|&(k, _)| k < i);
                    let (li, lv) = known[right - 1];
                    let (ri, rv) = known[right];
                    lv + (rv - lv) * (i - li) as f64 / (ri - li) as f64
                }
            }
        };
    }
    out
}

/// Long-format CSV in the default column layout, time-major.
pub fn write_csv(dataset: &Dataset) -> String {
    let mut out = String::from("timestamp,sensor_id,variable,value\n");
    for t in 0..dataset.len() {
        let ts = dataset.timestamp(t).format(TIMESTAMP_FORMAT);
        for s in dataset.series() {
            let _ = writeln!(out, "{ts},{},{},{}", s.sensor_id, s.variable, s.values[t]);
        }
    }
    out
}
