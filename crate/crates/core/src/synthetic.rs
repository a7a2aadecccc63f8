//! Seeded spatio-temporal test datasets with a known lag structure.
//!
//! A spec lists series of three kinds: smooth `root` processes (a
//! mean-reverting AR(1) around a level), `delayed` copies of another series
//! plus Gaussian noise, and independent `noise` series. Generation is a pure
//! function of `(spec, seed)`; each series draws from its own ChaCha stream.

use std::collections::HashMap;
use std::fmt;

use chrono::NaiveDateTime;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Dataset, MeasurementSeries, Variable, DEFAULT_STEP_SECONDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesSpec {
    Root {
        id: String,
        #[serde(default = "default_mean")]
        mean: f64,
        #[serde(default = "default_std")]
        std: f64,
        /// AR(1) coefficient of the deviation from `mean`.
        #[serde(default = "default_persistence")]
        persistence: f64,
    },
    Delayed {
        id: String,
        source: String,
        delay: usize,
        /// Noise standard deviation as a fraction of the source's.
        #[serde(default)]
        noise: f64,
        #[serde(default = "default_gain")]
        gain: f64,
        #[serde(default)]
        offset: f64,
    },
    Noise {
        id: String,
        #[serde(default = "default_mean")]
        mean: f64,
        #[serde(default = "default_std")]
        std: f64,
    },
}

fn default_mean() -> f64 {
    90.0
}
fn default_std() -> f64 {
    8.0
}
fn default_persistence() -> f64 {
    0.95
}
fn default_gain() -> f64 {
    1.0
}

impl SeriesSpec {
    pub fn id(&self) -> &str {
        match self {
            SeriesSpec::Root { id, .. }
            | SeriesSpec::Delayed { id, .. }
            | SeriesSpec::Noise { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub length: usize,
    #[serde(default = "default_start")]
    pub start: String,
    #[serde(default = "default_step")]
    pub step_seconds: i64,
    /// Id of the series to forecast; defaults to the first.
    #[serde(default)]
    pub target: Option<String>,
    pub series: Vec<SeriesSpec>,
}

fn default_start() -> String {
    "2016-05-10 00:00:00".into()
}
fn default_step() -> i64 {
    DEFAULT_STEP_SECONDS
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// One ground-truth edge: `series` is a delayed copy of `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dependency {
    pub series: usize,
    pub source: usize,
    pub delay: usize,
    pub gain: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<String>,
    pub dependencies: Vec<Dependency>,
}

impl GroundTruth {
    pub fn depends_on(&self, series: usize, source: usize) -> Option<&Dependency> {
        self.dependencies
            .iter()
            .find(|d| d.series == series && d.source == source)
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "series,source,delay_steps,gain,noise_fraction")?;
        for d in &self.dependencies {
            writeln!(
                f,
                "{},{},{},{},{}",
                self.labels[d.series], self.labels[d.source], d.delay, d.gain, d.noise
            )?;
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if spec.length == 0 {
        return Err(Error::InvalidSpec("length must be positive".into()));
    }
    if spec.series.is_empty() {
        return Err(Error::InvalidSpec("no series".into()));
    }
    if spec.step_seconds <= 0 {
        return Err(Error::InvalidSpec("step_seconds must be positive".into()));
    }
    let start = NaiveDateTime::parse_from_str(&spec.start, "%Y-%m-%d %H:%M:%S")
        .map_err(|e| Error::InvalidSpec(format!("start `{}`: {e}", spec.start)))?;

    let mut index = HashMap::new();
    for (i, s) in spec.series.iter().enumerate() {
        if index.insert(s.id().to_string(), i).is_some() {
            return Err(Error::InvalidSpec(format!("duplicate id `{}`", s.id())));
        }
    }
    let labels: Vec<String> = spec.series.iter().map(|s| s.id().to_string()).collect();

    let mut dependencies = Vec::new();
    let mut parent: Vec<Option<usize>> = vec![None; spec.series.len()];
    for (i, s) in spec.series.iter().enumerate() {
        match s {
            SeriesSpec::Delayed {
                source,
                delay,
                noise,
                gain,
                ..
            } => {
                let &src = index
                    .get(source)
                    .ok_or_else(|| Error::InvalidSpec(format!("unknown source `{source}`")))?;
                if !(*noise >= 0.0 && noise.is_finite()) || !gain.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "series `{}`: bad noise/gain",
                        s.id()
                    )));
                }
                parent[i] = Some(src);
                dependencies.push(Dependency {
                    series: i,
                    source: src,
                    delay: *delay,
                    gain: *gain,
                    noise: *noise,
                });
            }
            SeriesSpec::Root {
                std, persistence, ..
            } => {
                if std.is_nan() || *std < 0.0 || persistence.is_nan() || persistence.abs() >= 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "series `{}`: need std >= 0 and |persistence| < 1",
                        s.id()
                    )));
                }
            }
            SeriesSpec::Noise { std, .. } => {
                if std.is_nan() || *std < 0.0 {
                    return Err(Error::InvalidSpec(format!("series `{}`: std < 0", s.id())));
                }
            }
        }
    }

    let order = generation_order(&parent, &labels)?;
    let target_index = match &spec.target {
        Some(t) => *index
            .get(t)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown target `{t}`")))?,
        None => 0,
    };

    // Generate a warm-up prefix long enough for every delay chain, then keep
    // the last `length` samples.
    let pad: usize = dependencies.iter().map(|d| d.delay).sum::<usize>() + 50;
    let total = spec.length + pad;
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); spec.series.len()];
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    for i in order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        raw[i] = match &spec.series[i] {
            SeriesSpec::Root {
                mean,
                std,
                persistence,
                ..
            } => {
                let innovation = std * (1.0 - persistence * persistence).sqrt();
                let mut dev = std * unit.sample(&mut rng);
                (0..total)
                    .map(|t| {
                        if t > 0 {
                            dev = persistence * dev + innovation * unit.sample(&mut rng);
                        }
                        mean + dev
                    })
                    .collect()
            }
            SeriesSpec::Noise { mean, std, .. } => (0..total)
                .map(|_| mean + std * unit.sample(&mut rng))
                .collect(),
            SeriesSpec::Delayed {
                delay,
                noise,
                gain,
                offset,
                ..
            } => {
                let src = &raw[parent[i].expect("delayed has a source")];
                let sigma = noise * std_dev(&src[pad..]);
                (0..total)
                    .map(|t| {
                        let base = src[t.saturating_sub(*delay)];
                        let eps = if sigma > 0.0 {
                            sigma * unit.sample(&mut rng)
                        } else {
                            0.0
                        };
                        gain * base + offset + eps
                    })
                    .collect()
            }
        };
    }

    let series = raw
        .into_iter()
        .zip(&labels)
        .map(|(values, id)| {
            MeasurementSeries::new(
                id.clone(),
                Variable::Speed,
                start,
                spec.step_seconds,
                values[pad..].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset::new(series, target_index)?;
    Ok((
        dataset,
        GroundTruth {
            labels,
            dependencies,
        },
    ))
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Sources before dependants; any cycle is rejected.
fn generation_order(parent: &[Option<usize>], labels: &[String]) -> Result<Vec<usize>> {
    let mut order = Vec::with_capacity(parent.len());
    let mut state = vec![0u8; parent.len()]; // 0 new, 1 visiting, 2 done
    for start in 0..parent.len() {
        let mut chain = Vec::new();
        let mut node = Some(start);
        while let Some(n) = node {
            match state[n] {
                2 => break,
                1 => {
                    return Err(Error::InvalidSpec(format!(
                        "cyclic dependency through `{}`",
                        labels[n]
                    )))
                }
                _ => {
                    state[n] = 1;
                    chain.push(n);
                    node = parent[n];
                }
            }
        }
        for &n in chain.iter().rev() {
            state[n] = 2;
            order.push(n);
        }
    }
    Ok(order)
}
