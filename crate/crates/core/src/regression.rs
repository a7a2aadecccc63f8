//! Stacked multivariate autoregressive systems `b = A x + e`.
//!
//! Row `r` of the system predicts the target at sample `n_max + r` (0-based,
//! counted from the first sample of the window). Block `p` of that row holds
//! series `p` at samples `n_max - 1 + r` down to `n_max - n_p + r`, newest lag
//! first, so column `c` of a block multiplies lag `c + 1`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::Dataset;

/// Default per-series lag order: one hour of 5-minute samples.
pub const DEFAULT_ORDER: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    orders: Vec<usize>,
    n_max: usize,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(orders: Vec<usize>, n_max: usize) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidOrders("no blocks".into()));
        }
        if let Some(i) = orders.iter().position(|&n| n == 0) {
            return Err(Error::InvalidOrders(format!("order of block {i} is zero")));
        }
        let largest = *orders.iter().max().expect("non-empty");
        if n_max < largest {
            return Err(Error::InvalidOrders(format!(
                "n_max {n_max} is below the largest order {largest}"
            )));
        }
        let mut offsets = Vec::with_capacity(orders.len() + 1);
        offsets.push(0);
        for &n in &orders {
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(Self {
            orders,
            n_max,
            offsets,
        })
    }

    /// `n_max` defaults to the largest order.
    pub fn with_orders(orders: Vec<usize>) -> Result<Self> {
        let n_max = orders.iter().copied().max().unwrap_or(0);
        Self::new(orders, n_max)
    }

    pub fn uniform(order: usize, blocks: usize) -> Result<Self> {
        Self::new(vec![order; blocks], order)
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block_count(&self) -> usize {
        self.orders.len()
    }

    pub fn total_cols(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_cols(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// Block index and 1-based lag of a coefficient column.
    pub fn locate(&self, col: usize) -> Option<(usize, usize)> {
        if col >= self.total_cols() {
            return None;
        }
        let block = self.offsets.partition_point(|&o| o <= col) - 1;
        Some((block, col - self.offsets[block] + 1))
    }
}

#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub b: DVector<f64>,
    pub a: DMatrix<f64>,
    pub layout: BlockLayout,
    /// `e = b - A x`, filled in once a coefficient vector has been fitted.
    pub residual: Option<DVector<f64>>,
}

impl RegressionProblem {
    pub fn new(b: DVector<f64>, a: DMatrix<f64>, layout: BlockLayout) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::InsufficientData {
                needed: 1,
                available: 0,
            });
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                actual: a.nrows(),
            });
        }
        if a.ncols() != layout.total_cols() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_cols(),
                actual: a.ncols(),
            });
        }
        Ok(Self {
            b,
            a,
            layout,
            residual: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub x: DVector<f64>,
    pub layout: BlockLayout,
    pub active_blocks: BTreeSet<usize>,
    /// Residual norm after each greedy selection; empty for dense fits.
    pub residual_history: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(layout: BlockLayout) -> Self {
        Self {
            x: DVector::zeros(layout.total_cols()),
            layout,
            active_blocks: BTreeSet::new(),
            residual_history: Vec::new(),
        }
    }

    pub fn block(&self, block: usize) -> &[f64] {
        &self.x.as_slice()[self.layout.block_cols(block)]
    }
}

/// System with every series at lag order `order` (`N = order * P`).
pub fn build_uniform_problem(
    dataset: &Dataset,
    order: usize,
    training_rows: usize,
) -> Result<RegressionProblem> {
    if order == 0 {
        return Err(Error::InvalidOrders("order must be at least 1".into()));
    }
    let layout = BlockLayout::uniform(order, dataset.series_count())?;
    build_block_problem(dataset, &layout, training_rows)
}

/// System with per-series orders, using samples from the start of `dataset`.
pub fn build_block_problem(
    dataset: &Dataset,
    layout: &BlockLayout,
    training_rows: usize,
) -> Result<RegressionProblem> {
    assemble(dataset, layout, training_rows, 0)
}

/// Same system built on the `training_rows + n_max` samples just before `at`,
/// so that the last row predicts sample `at - 1`.
pub fn build_block_problem_before(
    dataset: &Dataset,
    layout: &BlockLayout,
    training_rows: usize,
    at: usize,
) -> Result<RegressionProblem> {
    let needed = layout.n_max() + training_rows;
    if at < needed {
        return Err(Error::InsufficientData {
            needed,
            available: at,
        });
    }
    assemble(dataset, layout, training_rows, at - needed)
}

fn assemble(
    dataset: &Dataset,
    layout: &BlockLayout,
    rows: usize,
    first_sample: usize,
) -> Result<RegressionProblem> {
    if rows == 0 {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    if layout.block_count() != dataset.series_count() {
        return Err(Error::InvalidOrders(format!(
            "{} orders for {} series",
            layout.block_count(),
            dataset.series_count()
        )));
    }
    let n_max = layout.n_max();
    let needed = first_sample + n_max + rows;
    if dataset.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            available: dataset.len(),
        });
    }

    let target = dataset.values(dataset.target_index());
    let base = first_sample + n_max;
    let b = DVector::from_fn(rows, |r, _| target[base + r]);
    let mut a = DMatrix::zeros(rows, layout.total_cols());
    for (p, &order) in layout.orders().iter().enumerate() {
        let values = dataset.values(p);
        let offset = layout.offsets()[p];
        for r in 0..rows {
            for c in 0..order {
                a[(r, offset + c)] = values[base + r - 1 - c];
            }
        }
    }
    RegressionProblem::new(b, a, layout.clone())
}
