//! Short-term link speed forecasting from multi-sensor histories.
//!
//! The target link's speed is modelled as a linear combination of lagged
//! values of every available series (multivariate autoregression). The
//! coefficient vector is recovered block-sparse, so only the few sensors that
//! currently help the forecast carry nonzero weights, and it is re-estimated at
//! every forecast horizon on a sliding training window.

pub mod cli;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod metrics;
pub mod plot;
pub mod regression;
pub mod series;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};
pub use forecast::{
    recursive_forecast, rolling_evaluate, EvaluationTrace, ForecastConfig, ForecastResult,
    LagOrders, Method,
};
pub use metrics::{compute_errors, ErrorReport};
pub use regression::{
    build_block_problem, build_uniform_problem, BlockLayout, CoefficientVector, RegressionProblem,
};
pub use series::{Dataset, MeasurementSeries, Normalizer, Variable};
pub use solvers::{residual_norm, solve_block_sparse, solve_least_squares, SolverConfig};
pub use synthetic::{generate_synthetic, GroundTruth, SeriesSpec, SyntheticSpec};
