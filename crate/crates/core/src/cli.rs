//! `speedcast` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or input
//! error. Every file a command writes lands under `--out`.
//!
//! Settings resolve as flag, then `--config` file (`key=value` lines using
//! the long flag names without dashes), then built-in default.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Duration, NaiveTime};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::Error;
use crate::forecast::{
    fit_model, recursive_forecast_with, rolling_evaluate, EvaluationTrace, ForecastConfig,
    LagOrders, Method, DEFAULT_HORIZON, DEFAULT_TRAINING_ROWS,
};
use crate::ingest::{load_csv, write_csv, ColumnMap, LoadOptions};
use crate::metrics::{compute_errors, csv_table, markdown_table, ErrorReport};
use crate::plot::{line_chart, stem_plot, LineSeries};
use crate::regression::DEFAULT_ORDER;
use crate::series::{Dataset, Normalizer};
use crate::solvers::{coefficient_table, SolverConfig, DEFAULT_RESIDUAL_TOLERANCE};
use crate::synthetic::{generate_synthetic, SyntheticSpec};

const DEFAULT_TRAIN_WINDOW: &str = "05:00-14:00";
const DEFAULT_TEST_WINDOW: &str = "14:00-23:00";

#[derive(Debug, Parser)]
#[command(
    name = "speedcast",
    version,
    about = "Block-sparse spatio-temporal link speed forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rolling evaluation over the test window; writes trace, report and plot.
    Evaluate(EvaluateArgs),
    /// Rolling evaluation of both methods side by side.
    Compare(ModelArgs),
    /// Dump the fitted coefficient vector at one forecast origin.
    Coefficients(PointArgs),
    /// Forecast the horizon following one origin.
    Forecast(PointArgs),
    /// Generate a synthetic dataset from a TOML spec.
    Synthesize(SynthesizeArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sensor id of the link to forecast.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// `key=value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lag order for every series.
    #[arg(long)]
    order: Option<usize>,
    /// `sensor_id=order` lines overriding `--order` per series.
    #[arg(long)]
    orders_file: Option<PathBuf>,
    #[arg(long)]
    k_blocks: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    train_rows: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    train_window: Option<String>,
    #[arg(long)]
    test_window: Option<String>,
    #[arg(long)]
    mph: bool,
    #[arg(long)]
    exclude_self: bool,
    /// Refit the normalizer on every stride's training window.
    #[arg(long)]
    refit_normalizer: bool,
    #[arg(long)]
    no_plot: bool,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    sensor_col: Option<String>,
    #[arg(long)]
    variable_col: Option<String>,
    #[arg(long)]
    value_col: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    method: Option<String>,
    /// Evaluate every speed series as a target, one worker per target.
    #[arg(long)]
    all_targets: bool,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    method: Option<String>,
    /// Forecast origin as HH:MM; defaults to the start of the test window.
    #[arg(long)]
    at: Option<String>,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn input(e: Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericalFailure(_)
            | Error::DimensionMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::SeriesCountMismatch { .. }
            | Error::Io { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Coefficients(args) => cmd_coefficients(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Synthesize(args) => cmd_synthesize(args),
    }
}

struct ConfigFile(HashMap<String, String>);

impl ConfigFile {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = read_text(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::usage(format!("{}:{}: expected key=value", path.display(), i + 1))
                })?;
                map.insert(k.trim().replace('_', "-"), v.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::usage(format!("config `{key}`: invalid value `{raw}`"))),
            None => Ok(default),
        }
    }

    fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.0
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|_| CliError::usage(format!("config `{key}`: invalid value `{raw}`")))
            })
            .transpose()
    }

    fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        if flag {
            return Ok(true);
        }
        self.pick(None, key, false)
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

fn parse_method(raw: &str) -> CliResult<Method> {
    match raw.to_ascii_lowercase().as_str() {
        "ar" => Ok(Method::Ar),
        "blocksparse" | "block-sparse" => Ok(Method::BlockSparse),
        _ => Err(CliError::usage(format!(
            "unknown method `{raw}` (expected ar or blocksparse)"
        ))),
    }
}

/// Minutes since midnight for each end of `HH:MM-HH:MM`; the end may be 24:00.
fn parse_clock_window(raw: &str) -> CliResult<(i64, i64)> {
    let bad = || CliError::usage(format!("invalid window `{raw}` (expected HH:MM-HH:MM)"));
    let (a, b) = raw.split_once('-').ok_or_else(bad)?;
    let minutes = |s: &str| -> Option<i64> {
        let (h, m) = s.trim().split_once(':')?;
        let (h, m): (i64, i64) = (h.parse().ok()?, m.parse().ok()?);
        (h >= 0 && (0..60).contains(&m) && h * 60 + m <= 24 * 60).then_some(h * 60 + m)
    };
    let (start, end) = (minutes(a).ok_or_else(bad)?, minutes(b).ok_or_else(bad)?);
    if start >= end {
        return Err(bad());
    }
    Ok((start, end))
}

/// Sample index of a clock time on the dataset's first day.
fn clock_to_sample(dataset: &Dataset, minutes: i64) -> CliResult<usize> {
    let midnight = dataset.start_time().date().and_time(NaiveTime::MIN);
    let when = midnight + Duration::minutes(minutes);
    let offset = (when - dataset.start_time()).num_seconds();
    let step = dataset.step_seconds();
    if offset < 0 {
        return Err(CliError::usage(format!(
            "{} is before the first sample",
            when.format("%H:%M")
        )));
    }
    let idx = (offset + step - 1) / step;
    if idx as usize > dataset.len() {
        return Err(CliError::usage(format!(
            "{} is past the end of the data",
            when.format("%H:%M")
        )));
    }
    Ok(idx as usize)
}

fn window_range(dataset: &Dataset, raw: &str) -> CliResult<Range<usize>> {
    let (a, b) = parse_clock_window(raw)?;
    let range = clock_to_sample(dataset, a)?..clock_to_sample(dataset, b)?;
    if range.is_empty() {
        return Err(CliError::usage(format!("window `{raw}` holds no samples")));
    }
    Ok(range)
}

/// Everything a modelling command needs, resolved from flags and config.
struct Session {
    dataset: Dataset,
    config: ForecastConfig,
    train: Range<usize>,
    test: Range<usize>,
    no_plot: bool,
    out: PathBuf,
}

impl Session {
    fn open(args: &ModelArgs, method: Option<&str>) -> CliResult<Self> {
        let cfg = ConfigFile::load(args.config.as_deref())?;
        let data: PathBuf = cfg
            .pick_opt(args.data.clone(), "data")?
            .ok_or_else(|| CliError::usage("--data is required"))?;
        let target: String = cfg
            .pick_opt(args.target.clone(), "target")?
            .ok_or_else(|| CliError::usage("--target is required"))?;

        let defaults = ColumnMap::default();
        let options = LoadOptions {
            columns: ColumnMap {
                timestamp: cfg.pick(args.time_col.clone(), "time-col", defaults.timestamp)?,
                sensor_id: cfg.pick(args.sensor_col.clone(), "sensor-col", defaults.sensor_id)?,
                variable: Some(cfg.pick(
                    args.variable_col.clone(),
                    "variable-col",
                    defaults.variable.unwrap_or_default(),
                )?),
                value: cfg.pick(args.value_col.clone(), "value-col", defaults.value)?,
            },
            mph: cfg.flag(args.mph, "mph")?,
            ..LoadOptions::default()
        };
        let dataset = load_csv(&data, &options).map_err(CliError::input)?;
        let target_index = dataset
            .find_sensor(&target)
            .ok_or_else(|| CliError::usage(format!("target sensor not found: {target}")))?;
        let dataset = dataset.with_target(target_index)?;

        let method = match method {
            Some(m) => parse_method(m)?,
            None => parse_method(&cfg.pick(None, "method", "blocksparse".to_string())?)?,
        };
        let order = cfg.pick(args.order, "order", DEFAULT_ORDER)?;
        if order == 0 {
            return Err(CliError::usage("--order must be at least 1"));
        }
        let orders_file: Option<PathBuf> = cfg.pick_opt(args.orders_file.clone(), "orders-file")?;
        let orders = match orders_file {
            Some(path) => LagOrders::PerSeries(read_orders(&path, &dataset, order)?),
            None => LagOrders::Uniform(order),
        };
        let blocks = dataset.series_count();
        let k_blocks = cfg.pick_opt(args.k_blocks, "k-blocks")?;
        let tolerance = cfg.pick(args.tolerance, "tolerance", DEFAULT_RESIDUAL_TOLERANCE)?;
        let mut solver = match k_blocks {
            Some(k) => SolverConfig::new(k),
            None => SolverConfig::for_blocks(blocks),
        };
        solver.residual_tolerance = tolerance;

        let train_raw = cfg.pick(
            args.train_window.clone(),
            "train-window",
            DEFAULT_TRAIN_WINDOW.into(),
        )?;
        let test_raw = cfg.pick(
            args.test_window.clone(),
            "test-window",
            DEFAULT_TEST_WINDOW.into(),
        )?;
        let train = window_range(&dataset, &train_raw)?;
        let test = window_range(&dataset, &test_raw)?;

        let config = ForecastConfig {
            horizon_steps: cfg.pick(args.horizon, "horizon", DEFAULT_HORIZON)?,
            training_rows: cfg.pick(args.train_rows, "train-rows", DEFAULT_TRAINING_ROWS)?,
            orders,
            n_max: None,
            method,
            solver: Some(solver),
            exclude_self: cfg.flag(args.exclude_self, "exclude-self")?,
            refit_normalizer_each_window: cfg.flag(args.refit_normalizer, "refit-normalizer")?,
            normalizer_window: Some(train.clone()),
        };
        config.validate()?;

        Ok(Self {
            dataset,
            config,
            train,
            test,
            no_plot: cfg.flag(args.no_plot, "no-plot")?,
            out: args.out.clone(),
        })
    }

    fn labels(&self) -> Vec<String> {
        self.dataset.series().iter().map(|s| s.label()).collect()
    }

    /// Normalizer used for a forecast at `at`.
    fn normalizer_at(&self, at: usize) -> CliResult<Normalizer> {
        let window = if self.config.refit_normalizer_each_window {
            let needed = self.config.history_needed(&self.dataset)?;
            if at < needed {
                return Err(Error::InsufficientHistory { at, needed }.into());
            }
            at - needed..at
        } else {
            self.train.clone()
        };
        Ok(Normalizer::fit(&self.dataset, window)?)
    }

    fn origin(&self, at: Option<&str>) -> CliResult<usize> {
        match at {
            Some(raw) => {
                let (h, m) = raw
                    .split_once(':')
                    .and_then(|(h, m)| Some((h.parse::<i64>().ok()?, m.parse::<i64>().ok()?)))
                    .ok_or_else(|| CliError::usage(format!("invalid time `{raw}`")))?;
                clock_to_sample(&self.dataset, h * 60 + m)
            }
            None => Ok(self.test.start),
        }
    }
}

fn read_orders(path: &Path, dataset: &Dataset, default: usize) -> CliResult<Vec<usize>> {
    let text = read_text(path)?;
    let mut orders = vec![default; dataset.series_count()];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || {
            CliError::usage(format!(
                "{}:{}: expected sensor_id=order",
                path.display(),
                i + 1
            ))
        };
        let (id, n) = line.split_once(['=', ',']).ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let idx = dataset
            .series()
            .iter()
            .position(|s| s.label() == id.trim())
            .ok_or_else(|| {
                CliError::usage(format!("orders file names unknown series `{}`", id.trim()))
            })?;
        orders[idx] = n;
    }
    Ok(orders)
}

fn time_ticks(dataset: &Dataset, range: &Range<usize>) -> Vec<(usize, String)> {
    let per_hour = (3600 / dataset.step_seconds()).max(1) as usize;
    range
        .clone()
        .enumerate()
        .filter(|&(_, s)| {
            let t = dataset.timestamp(s);
            (t - t.date().and_time(NaiveTime::MIN)).num_seconds()
                % (per_hour as i64 * dataset.step_seconds() * 2)
                == 0
        })
        .map(|(i, s)| (i, dataset.timestamp(s).format("%H:%M").to_string()))
        .collect()
}

fn write_evaluation(
    session: &Session,
    trace: &EvaluationTrace,
    dir: &Path,
) -> CliResult<ErrorReport> {
    create_dir(dir)?;
    write_file(dir, "trace.csv", &trace.to_csv())?;
    let report = compute_errors(&trace.actuals(), &trace.predictions())?;
    let rows = [(trace.method.name().to_string(), report)];
    write_file(dir, "report.md", &markdown_table(&rows))?;
    write_file(dir, "report.csv", &csv_table(&rows))?;

    let mut plot_csv = String::from("timestamp,actual_kmh,predicted_kmh\n");
    for p in &trace.points {
        let _ = writeln!(
            plot_csv,
            "{},{:.6},{:.6}",
            p.timestamp.format("%Y-%m-%d %H:%M:%S"),
            p.actual,
            p.predicted
        );
    }
    write_file(dir, "forecast_plot.csv", &plot_csv)?;

    if !session.no_plot {
        let actual = trace.actuals();
        let predicted = trace.predictions();
        let range = trace.points.first().map_or(0, |p| p.sample)
            ..trace.points.last().map_or(0, |p| p.sample + 1);
        let svg = line_chart(
            &format!("{} - {}", trace.target_label, trace.method.name()),
            "speed [km/h]",
            &[
                LineSeries {
                    name: "actual",
                    color: "black",
                    values: &actual,
                    dashed: false,
                },
                LineSeries {
                    name: "predicted",
                    color: "#d62728",
                    values: &predicted,
                    dashed: true,
                },
            ],
            &time_ticks(&session.dataset, &range),
        );
        write_file(dir, "forecast.svg", &svg)?;
    }
    Ok(report)
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult<()> {
    let session = Session::open(&args.model, args.method.as_deref())?;
    create_dir(&session.out)?;

    if args.all_targets {
        let targets: Vec<usize> = (0..session.dataset.series_count())
            .filter(|&i| session.dataset.series()[i].variable == crate::series::Variable::Speed)
            .collect();
        let labels = session.labels();
        let results: Vec<CliResult<ErrorReport>> = targets
            .par_iter()
            .map(|&t| {
                let dataset = session.dataset.clone().with_target(t)?;
                let trace = rolling_evaluate(&dataset, session.test.clone(), &session.config)?;
                write_evaluation(&session, &trace, &session.out.join(&labels[t]))
            })
            .collect();
        let mut rows = Vec::with_capacity(targets.len());
        for (t, r) in targets.iter().zip(results) {
            rows.push((labels[*t].clone(), r?));
        }
        write_file(&session.out, "report.md", &markdown_table(&rows))?;
        write_file(&session.out, "report.csv", &csv_table(&rows))?;
        print!("{}", markdown_table(&rows));
        return Ok(());
    }

    let trace = rolling_evaluate(&session.dataset, session.test.clone(), &session.config)?;
    let report = write_evaluation(&session, &trace, &session.out)?;
    print!(
        "{}",
        markdown_table(&[(trace.method.name().to_string(), report)])
    );
    Ok(())
}

fn cmd_compare(args: ModelArgs) -> CliResult<()> {
    let session = Session::open(&args, Some("blocksparse"))?;
    create_dir(&session.out)?;
    let mut rows = Vec::new();
    for method in [Method::Ar, Method::BlockSparse] {
        let config = ForecastConfig {
            method,
            ..session.config.clone()
        };
        let trace = rolling_evaluate(&session.dataset, session.test.clone(), &config)?;
        let report = write_evaluation(&session, &trace, &session.out.join(method.name()))?;
        rows.push((method.name().to_string(), report));
    }
    write_file(&session.out, "report.md", &markdown_table(&rows))?;
    write_file(&session.out, "report.csv", &csv_table(&rows))?;
    print!("{}", markdown_table(&rows));
    Ok(())
}

fn cmd_coefficients(args: PointArgs) -> CliResult<()> {
    let session = Session::open(&args.model, args.method.as_deref())?;
    let at = session.origin(args.at.as_deref())?;
    let normalizer = session.normalizer_at(at)?;
    let normalized = normalizer.normalize(&session.dataset)?;
    let model = fit_model(&normalized, at, &session.config)?;

    let labels = session.labels();
    let block_labels: Vec<String> = model
        .block_series
        .iter()
        .map(|&s| labels[s].clone())
        .collect();
    create_dir(&session.out)?;
    let table = coefficient_table(&model.coefficients, &block_labels);
    write_file(&session.out, "coefficients.tsv", &table)?;
    if !session.no_plot {
        let layout = model.layout();
        let svg = stem_plot(
            &format!(
                "coefficients at {}",
                session.dataset.timestamp(at).format("%Y-%m-%d %H:%M")
            ),
            model.coefficients.x.as_slice(),
            &layout.offsets()[..layout.block_count()],
            &block_labels,
        );
        write_file(&session.out, "coefficients.svg", &svg)?;
    }
    let active: Vec<&str> = model
        .coefficients
        .active_blocks
        .iter()
        .map(|&b| block_labels[b].as_str())
        .collect();
    println!("active blocks: {}", active.join(";"));
    Ok(())
}

fn cmd_forecast(args: PointArgs) -> CliResult<()> {
    let session = Session::open(&args.model, args.method.as_deref())?;
    let at = session.origin(args.at.as_deref())?;
    let normalizer = session.normalizer_at(at)?;
    let result = recursive_forecast_with(
        &session.dataset,
        &normalizer,
        at,
        session.config.horizon_steps,
        &session.config,
    )?;
    create_dir(&session.out)?;
    let mut csv = String::from("timestamp,predicted_kmh,horizon_step\n");
    for (h, p) in result.predictions.iter().enumerate() {
        let ts = session.dataset.timestamp(at + h);
        let _ = writeln!(csv, "{},{p:.6},{}", ts.format("%Y-%m-%d %H:%M:%S"), h + 1);
    }
    write_file(&session.out, "forecast.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_synthesize(args: SynthesizeArgs) -> CliResult<()> {
    let spec = SyntheticSpec::from_toml(&read_text(&args.spec)?)?;
    let (dataset, truth) = generate_synthetic(&spec, args.seed)?;
    create_dir(&args.out)?;
    write_file(&args.out, "synthetic.csv", &write_csv(&dataset))?;
    write_file(&args.out, "ground_truth.csv", &truth.to_string())?;
    println!(
        "{} series x {} samples, target {}",
        dataset.series_count(),
        dataset.len(),
        dataset.target().label()
    );
    Ok(())
}
