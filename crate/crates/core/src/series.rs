//! Time-series containers on a uniform sampling grid, plus min-max scaling.
//!
//! All algorithms in this crate work on integer sample indices. Timestamps are
//! carried along only so that traces and plots can be labelled.

use std::fmt;
use std::ops::Range;

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

/// Default sampling step: five minutes.
pub const DEFAULT_STEP_SECONDS: i64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Speed,
    Flow,
    Other(String),
}

impl Variable {
    pub fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "speed" => Variable::Speed,
            "flow" => Variable::Flow,
            _ => Variable::Other(s.trim().to_string()),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Speed => f.write_str("speed"),
            Variable::Flow => f.write_str("flow"),
            Variable::Other(label) => f.write_str(label),
        }
    }
}

/// One sensor/variable stream sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub sensor_id: String,
    pub variable: Variable,
    pub start_time: NaiveDateTime,
    pub step_seconds: i64,
    pub values: Vec<f64>,
}

impl MeasurementSeries {
    pub fn new(
        sensor_id: impl Into<String>,
        variable: Variable,
        start_time: NaiveDateTime,
        step_seconds: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let sensor_id = sensor_id.into();
        if step_seconds <= 0 {
            return Err(Error::InvalidDataset(format!(
                "series {sensor_id}: step must be positive"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "series {sensor_id}: non-finite value at sample {pos}"
            )));
        }
        Ok(Self {
            sensor_id,
            variable,
            start_time,
            step_seconds,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, sample: usize) -> NaiveDateTime {
        self.start_time + Duration::seconds(self.step_seconds * sample as i64)
    }

    /// Sensor id for speed series, `sensor:variable` otherwise.
    pub fn label(&self) -> String {
        match self.variable {
            Variable::Speed => self.sensor_id.clone(),
            ref v => format!("{}:{}", self.sensor_id, v),
        }
    }
}

/// `P` aligned series and the index of the one being forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    series: Vec<MeasurementSeries>,
    target_index: usize,
}

impl Dataset {
    pub fn new(series: Vec<MeasurementSeries>, target_index: usize) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::InvalidDataset("dataset needs at least one series".into()))?;
        if target_index >= series.len() {
            return Err(Error::IndexOutOfRange {
                index: target_index,
                len: series.len(),
            });
        }
        for s in &series[1..] {
            if s.start_time != first.start_time
                || s.step_seconds != first.step_seconds
                || s.len() != first.len()
            {
                return Err(Error::InvalidDataset(format!(
                    "series {} is not aligned with series {}",
                    s.label(),
                    first.label()
                )));
            }
        }
        Ok(Self {
            series,
            target_index,
        })
    }

    pub fn series(&self) -> &[MeasurementSeries] {
        &self.series
    }

    pub fn series_count(&self) -> usize {
        self.series.len()
    }

    /// Number of samples per series.
    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target(&self) -> &MeasurementSeries {
        &self.series[self.target_index]
    }

    pub fn values(&self, series: usize) -> &[f64] {
        &self.series[series].values
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.series[0].start_time
    }

    pub fn step_seconds(&self) -> i64 {
        self.series[0].step_seconds
    }

    pub fn timestamp(&self, sample: usize) -> NaiveDateTime {
        self.series[0].timestamp(sample)
    }

    pub fn with_target(mut self, target_index: usize) -> Result<Self> {
        if target_index >= self.series.len() {
            return Err(Error::IndexOutOfRange {
                index: target_index,
                len: self.series.len(),
            });
        }
        self.target_index = target_index;
        Ok(self)
    }

    /// Index of the speed series reported by `sensor_id`, falling back to any
    /// variable of that sensor.
    pub fn find_sensor(&self, sensor_id: &str) -> Option<usize> {
        self.series
            .iter()
            .position(|s| s.sensor_id == sensor_id && s.variable == Variable::Speed)
            .or_else(|| self.series.iter().position(|s| s.sensor_id == sensor_id))
    }

    /// Dataset holding only the target series.
    pub fn target_only(&self) -> Dataset {
        Dataset {
            series: vec![self.target().clone()],
            target_index: 0,
        }
    }

    fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Dataset {
        let series = self
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| MeasurementSeries {
                values: s.values.iter().map(|&v| f(i, v)).collect(),
                ..s.clone()
            })
            .collect();
        Dataset {
            series,
            target_index: self.target_index,
        }
    }

    pub(crate) fn check_window(&self, window: &Range<usize>) -> Result<()> {
        if window.start >= window.end {
            return Err(Error::EmptyWindow {
                start: window.start,
                end: window.end,
            });
        }
        if window.end > self.len() {
            return Err(Error::WindowOutOfRange {
                start: window.start,
                end: window.end,
                len: self.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRange {
    pub min: f64,
    pub max: f64,
}

impl SeriesRange {
    fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-series min-max scaling fitted on a training window.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    ranges: Vec<SeriesRange>,
}

impl Normalizer {
    pub fn fit(dataset: &Dataset, window: Range<usize>) -> Result<Self> {
        dataset.check_window(&window)?;
        let ranges = dataset
            .series()
            .iter()
            .map(|s| {
                let slice = &s.values[window.clone()];
                let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
                let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                SeriesRange { min, max }
            })
            .collect();
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[SeriesRange] {
        &self.ranges
    }

    pub fn range(&self, series: usize) -> Result<SeriesRange> {
        self.ranges
            .get(series)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: series,
                len: self.ranges.len(),
            })
    }

    /// Scales one value. Constant series map to 0; values outside the
    /// fitted range are not clamped.
    pub fn normalize_value(&self, series: usize, value: f64) -> Result<f64> {
        let r = self.range(series)?;
        Ok(scale(r, value))
    }

    pub fn normalize(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.series_count() != self.ranges.len() {
            return Err(Error::SeriesCountMismatch {
                expected: self.ranges.len(),
                actual: dataset.series_count(),
            });
        }
        Ok(dataset.map_values(|i, v| scale(self.ranges[i], v)))
    }

    pub fn denormalize(&self, series: usize, value: f64) -> Result<f64> {
        let r = self.range(series)?;
        Ok(value * r.span() + r.min)
    }
}

fn scale(r: SeriesRange, value: f64) -> f64 {
    let span = r.span();
    if span > 0.0 {
        (value - r.min) / span
    } else {
        0.0
    }
}

pub fn fit_normalizer(dataset: &Dataset, window: Range<usize>) -> Result<Normalizer> {
    Normalizer::fit(dataset, window)
}

pub fn normalize(normalizer: &Normalizer, dataset: &Dataset) -> Result<Dataset> {
    normalizer.normalize(dataset)
}

pub fn denormalize(normalizer: &Normalizer, series: usize, value: f64) -> Result<f64> {
    normalizer.denormalize(series, value)
}
