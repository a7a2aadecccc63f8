//! Recursive multi-step forecasting and rolling re-estimation.
//!
//! A forecast made at origin `at` uses only samples `< at`. Coefficients are
//! fitted on the `training_rows` most recent rows, the target is rolled
//! forward one step at a time feeding each prediction back as a lag, and
//! non-target series are held at their last observed value for lags that
//! fall inside the horizon.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use chrono::NaiveDateTime;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regression::{
    build_block_problem_before, BlockLayout, CoefficientVector, DEFAULT_ORDER,
};
use crate::series::{Dataset, Normalizer};
use crate::solvers::{solve_block_sparse, solve_least_squares, SolverConfig};

pub const DEFAULT_HORIZON: usize = 6;
pub const DEFAULT_TRAINING_ROWS: usize = 108;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Dense least squares on the target's own lags only.
    Ar,
    /// Greedy block-sparse fit over every series.
    BlockSparse,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ar => "ar",
            Method::BlockSparse => "blocksparse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LagOrders {
    Uniform(usize),
    PerSeries(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub horizon_steps: usize,
    pub training_rows: usize,
    pub orders: LagOrders,
    /// Defaults to the largest order.
    pub n_max: Option<usize>,
    pub method: Method,
    /// `None` uses [`SolverConfig::for_blocks`].
    pub solver: Option<SolverConfig>,
    /// Keep the target's own block out of the block-sparse support.
    pub exclude_self: bool,
    pub refit_normalizer_each_window: bool,
    /// Window for the one-off normalizer fit when not refitting; defaults to
    /// the first training window.
    pub normalizer_window: Option<Range<usize>>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            horizon_steps: DEFAULT_HORIZON,
            training_rows: DEFAULT_TRAINING_ROWS,
            orders: LagOrders::Uniform(DEFAULT_ORDER),
            n_max: None,
            method: Method::BlockSparse,
            solver: None,
            exclude_self: false,
            refit_normalizer_each_window: false,
            normalizer_window: None,
        }
    }
}

/// Coefficients fitted at one origin, with the dataset series each block reads.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub coefficients: CoefficientVector,
    /// `block_series[blk]` is the dataset series index of block `blk`.
    pub block_series: Vec<usize>,
}

impl FittedModel {
    pub fn layout(&self) -> &BlockLayout {
        &self.coefficients.layout
    }

    /// Dataset series indices of the active blocks.
    pub fn active_series(&self) -> BTreeSet<usize> {
        self.coefficients
            .active_blocks
            .iter()
            .map(|&blk| self.block_series[blk])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub origin: usize,
    /// Denormalized predictions in km/h, clamped at zero.
    pub predictions: Vec<f64>,
    /// Same predictions before denormalization and clamping.
    pub normalized: Vec<f64>,
    pub model: FittedModel,
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.training_rows == 0 {
            return Err(Error::InvalidConfig(
                "training rows must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Lag layout and the series each block reads.
    pub fn layout_for(&self, dataset: &Dataset) -> Result<(BlockLayout, Vec<usize>)> {
        let p = dataset.series_count();
        let orders = match &self.orders {
            LagOrders::Uniform(n) => vec![*n; p],
            LagOrders::PerSeries(v) if v.len() == p => v.clone(),
            LagOrders::PerSeries(v) => {
                return Err(Error::InvalidOrders(format!(
                    "{} orders given for {p} series",
                    v.len()
                )))
            }
        };
        let (orders, block_series) = match self.method {
            Method::BlockSparse => (orders, (0..p).collect()),
            Method::Ar => {
                let t = dataset.target_index();
                (vec![orders[t]], vec![t])
            }
        };
        let n_max = self
            .n_max
            .unwrap_or_else(|| orders.iter().copied().max().unwrap_or(0));
        Ok((BlockLayout::new(orders, n_max)?, block_series))
    }

    /// Samples needed before a forecast origin.
    pub fn history_needed(&self, dataset: &Dataset) -> Result<usize> {
        let (layout, _) = self.layout_for(dataset)?;
        Ok(layout.n_max() + self.training_rows)
    }
}

/// Fits coefficients on the training window ending just before `at`.
/// `normalized` must already be scaled.
pub fn fit_model(normalized: &Dataset, at: usize, config: &ForecastConfig) -> Result<FittedModel> {
    let (layout, block_series) = config.layout_for(normalized)?;
    let needed = layout.n_max() + config.training_rows;
    if at < needed || at > normalized.len() {
        return Err(Error::InsufficientHistory { at, needed });
    }
    let coefficients = match config.method {
        Method::Ar => {
            let sub = normalized.target_only();
            let mut problem = build_block_problem_before(&sub, &layout, config.training_rows, at)?;
            solve_least_squares(&mut problem)?
        }
        Method::BlockSparse => {
            let mut problem =
                build_block_problem_before(normalized, &layout, config.training_rows, at)?;
            let mut solver = config
                .solver
                .clone()
                .unwrap_or_else(|| SolverConfig::for_blocks(layout.block_count()));
            if config.exclude_self {
                solver.excluded_blocks.insert(normalized.target_index());
            }
            solve_block_sparse(&mut problem, &solver)?
        }
    };
    Ok(FittedModel {
        coefficients,
        block_series,
    })
}

/// Rolls the fitted model forward `horizon` steps from `at`, in normalized
/// units.
pub fn predict_recursive(
    normalized: &Dataset,
    model: &FittedModel,
    at: usize,
    horizon: usize,
) -> Vec<f64> {
    let layout = model.layout();
    let target = normalized.target_index();
    let x = &model.coefficients.x;
    let mut predicted: Vec<f64> = Vec::with_capacity(horizon);

    for step in 0..horizon {
        let t = at + step;
        let mut value = 0.0;
        for (blk, &series) in model.block_series.iter().enumerate() {
            let observed = normalized.values(series);
            let offset = layout.offsets()[blk];
            for c in 0..layout.orders()[blk] {
                let coef = x[offset + c];
                if coef == 0.0 {
                    continue;
                }
                let sample = t - 1 - c;
                let lag_value = if sample < at {
                    observed[sample]
                } else if series == target {
                    predicted[sample - at]
                } else {
                    observed[at - 1]
                };
                value += coef * lag_value;
            }
        }
        predicted.push(value);
    }
    predicted
}

/// Forecast `config.horizon_steps` samples starting at `at`, with the
/// normalizer fitted on the training window that ends at `at`.
pub fn recursive_forecast(
    dataset: &Dataset,
    at: usize,
    config: &ForecastConfig,
) -> Result<ForecastResult> {
    config.validate()?;
    let needed = config.history_needed(dataset)?;
    if at < needed || at > dataset.len() {
        return Err(Error::InsufficientHistory { at, needed });
    }
    let normalizer = Normalizer::fit(dataset, at - needed..at)?;
    recursive_forecast_with(dataset, &normalizer, at, config.horizon_steps, config)
}

/// Like [`recursive_forecast`] but with a caller-supplied normalizer and an
/// explicit horizon.
pub fn recursive_forecast_with(
    dataset: &Dataset,
    normalizer: &Normalizer,
    at: usize,
    horizon: usize,
    config: &ForecastConfig,
) -> Result<ForecastResult> {
    let normalized = normalizer.normalize(dataset)?;
    let model = fit_model(&normalized, at, config)?;
    let normalized_preds = predict_recursive(&normalized, &model, at, horizon);
    let target = dataset.target_index();
    let predictions = normalized_preds
        .iter()
        .map(|&z| normalizer.denormalize(target, z).map(|v| v.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastResult {
        origin: at,
        predictions,
        normalized: normalized_preds,
        model,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub sample: usize,
    pub timestamp: NaiveDateTime,
    pub actual: f64,
    pub predicted: f64,
    pub normalized_actual: f64,
    pub normalized_predicted: f64,
    /// 1-based step within the horizon.
    pub horizon_step: usize,
    /// Labels of the series in the active support.
    pub active: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StrideRecord {
    pub origin: usize,
    pub horizon: usize,
    pub active_series: BTreeSet<usize>,
    pub coefficients: CoefficientVector,
}

#[derive(Debug, Clone)]
pub struct EvaluationTrace {
    pub method: Method,
    pub target_label: String,
    pub points: Vec<TracePoint>,
    pub strides: Vec<StrideRecord>,
}

impl EvaluationTrace {
    pub fn refits(&self) -> usize {
        self.strides.len()
    }

    pub fn actuals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.actual).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.predicted).collect()
    }

    /// Share of strides whose support contains `series`.
    pub fn support_frequency(&self, series: usize) -> f64 {
        if self.strides.is_empty() {
            return 0.0;
        }
        let hits = self
            .strides
            .iter()
            .filter(|s| s.active_series.contains(&series))
            .count();
        hits as f64 / self.strides.len() as f64
    }

    /// `timestamp,actual_kmh,predicted_kmh,horizon_step,active_block_list`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("timestamp,actual_kmh,predicted_kmh,horizon_step,active_block_list\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{}",
                p.timestamp.format("%Y-%m-%d %H:%M:%S"),
                p.actual,
                p.predicted,
                p.horizon_step,
                p.active.join(";")
            );
        }
        out
    }
}

/// Steps through `eval_range` in strides of `horizon_steps`, refitting at
/// each stride on the latest `training_rows` rows of real measurements. The
/// last stride is shortened if the range is not a multiple of the horizon.
pub fn rolling_evaluate(
    dataset: &Dataset,
    eval_range: Range<usize>,
    config: &ForecastConfig,
) -> Result<EvaluationTrace> {
    config.validate()?;
    dataset.check_window(&eval_range)?;
    let needed = config.history_needed(dataset)?;
    if eval_range.start < needed {
        return Err(Error::InsufficientHistory {
            at: eval_range.start,
            needed,
        });
    }

    let fixed = if config.refit_normalizer_each_window {
        None
    } else {
        let window = config
            .normalizer_window
            .clone()
            .unwrap_or(eval_range.start - needed..eval_range.start);
        Some(Normalizer::fit(dataset, window)?)
    };

    let target = dataset.target_index();
    let actual = dataset.values(target);
    let labels: Vec<String> = dataset.series().iter().map(|s| s.label()).collect();
    let mut points = Vec::with_capacity(eval_range.len());
    let mut strides = Vec::new();

    for at in eval_range.clone().step_by(config.horizon_steps) {
        let horizon = config.horizon_steps.min(eval_range.end - at);
        let normalizer = match &fixed {
            Some(n) => n.clone(),
            None => Normalizer::fit(dataset, at - needed..at)?,
        };
        let result = recursive_forecast_with(dataset, &normalizer, at, horizon, config)?;
        let active_series = result.model.active_series();
        let active: Vec<String> = active_series.iter().map(|&s| labels[s].clone()).collect();
        for step in 0..horizon {
            let sample = at + step;
            points.push(TracePoint {
                sample,
                timestamp: dataset.timestamp(sample),
                actual: actual[sample],
                predicted: result.predictions[step],
                normalized_actual: normalizer.normalize_value(target, actual[sample])?,
                normalized_predicted: result.normalized[step],
                horizon_step: step + 1,
                active: active.clone(),
            });
        }
        strides.push(StrideRecord {
            origin: at,
            horizon,
            active_series,
            coefficients: result.model.coefficients,
        });
    }

    Ok(EvaluationTrace {
        method: config.method,
        target_label: labels[target].clone(),
        points,
        strides,
    })
}

/// Evaluates several targets concurrently; each target's strides stay
/// sequential. Results come back in the order of `targets`.
pub fn rolling_evaluate_targets(
    dataset: &Dataset,
    targets: &[usize],
    eval_range: Range<usize>,
    config: &ForecastConfig,
) -> Vec<Result<EvaluationTrace>> {
    targets
        .par_iter()
        .map(|&t| {
            let d = dataset.clone().with_target(t)?;
            rolling_evaluate(&d, eval_range.clone(), config)
        })
        .collect()
}
