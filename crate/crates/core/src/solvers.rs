//! Coefficient estimation: dense minimum-norm least squares and greedy block
//! orthogonal matching pursuit (BOMP) for block-sparse solutions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::regression::{CoefficientVector, RegressionProblem};

const SVD_MAX_ITERATIONS: usize = 50_000;

/// Default residual tolerance, relative to `‖b‖₂`.
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Default block budget: a fifth of the blocks, at least one.
pub fn default_block_budget(blocks: usize) -> usize {
    ((blocks as f64 * 0.2).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Upper bound `K` on the number of selected blocks.
    pub max_active_blocks: usize,
    /// Stop once `‖b - A x‖₂ <= residual_tolerance * ‖b‖₂`.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Blocks that may never be selected.
    pub excluded_blocks: BTreeSet<usize>,
}

impl SolverConfig {
    pub fn new(max_active_blocks: usize) -> Self {
        Self {
            max_active_blocks,
            residual_tolerance: DEFAULT_RESIDUAL_TOLERANCE,
            max_iterations: max_active_blocks,
            excluded_blocks: BTreeSet::new(),
        }
    }

    pub fn for_blocks(blocks: usize) -> Self {
        Self::new(default_block_budget(blocks))
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.residual_tolerance = tolerance;
        self
    }

    pub fn excluding(mut self, block: usize) -> Self {
        self.excluded_blocks.insert(block);
        self
    }

    fn validate(&self, blocks: usize) -> Result<()> {
        if self.max_active_blocks == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.max_active_blocks > blocks {
            return Err(Error::InvalidConfig(format!(
                "K = {} exceeds the block count {blocks}",
                self.max_active_blocks
            )));
        }
        if !(self.residual_tolerance >= 0.0 && self.residual_tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "residual tolerance {} is not a finite non-negative number",
                self.residual_tolerance
            )));
        }
        if let Some(&b) = self.excluded_blocks.iter().find(|&&b| b >= blocks) {
            return Err(Error::InvalidConfig(format!(
                "excluded block {b} does not exist"
            )));
        }
        Ok(())
    }
}

/// Minimum-norm solution of `min ‖b - A x‖₂` via SVD. Singular values below
/// `max(M, N) · ε · σ_max` are treated as zero.
pub fn min_norm_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: b.len(),
        });
    }
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let sigma_max = svd.singular_values.max();
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma_max;
    let x = svd
        .solve(b, cutoff)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "least-squares solution is not finite".into(),
        ));
    }
    Ok(x)
}

/// Dense least-squares fit; every block is marked active.
pub fn solve_least_squares(problem: &mut RegressionProblem) -> Result<CoefficientVector> {
    if problem.cols() == 0 {
        return Err(Error::InvalidOrders("problem has no columns".into()));
    }
    let x = min_norm_least_squares(&problem.a, &problem.b)?;
    let coeffs = CoefficientVector {
        x,
        layout: problem.layout.clone(),
        active_blocks: (0..problem.layout.block_count()).collect(),
        residual_history: Vec::new(),
    };
    residual_norm(problem, &coeffs.x)?;
    Ok(coeffs)
}

/// `‖b - A x‖₂`, also stored as `problem.residual`.
pub fn residual_norm(problem: &mut RegressionProblem, x: &DVector<f64>) -> Result<f64> {
    if x.len() != problem.cols() {
        return Err(Error::DimensionMismatch {
            expected: problem.cols(),
            actual: x.len(),
        });
    }
    let e = &problem.b - &problem.a * x;
    let norm = e.norm();
    problem.residual = Some(e);
    Ok(norm)
}

/// Greedy block-sparse recovery.
///
/// Each iteration picks the unselected block whose columns correlate most with
/// the current residual, then refits by least squares on all selected blocks.
/// Correlation is measured against an orthonormal basis `U` of each block's
/// column span, i.e. the score is `‖Uᵀ r‖₂`; lowest index wins ties. Stops
/// after `K` blocks, `max_iterations` selections, once the relative residual
/// tolerance is met, or when no remaining block correlates with the residual.
pub fn solve_block_sparse(
    problem: &mut RegressionProblem,
    config: &SolverConfig,
) -> Result<CoefficientVector> {
    let layout = problem.layout.clone();
    let blocks = layout.block_count();
    config.validate(blocks)?;

    let bases = block_bases(problem)?;
    let threshold = config.residual_tolerance * problem.b.norm();
    let mut residual = problem.b.clone();
    let mut selected: BTreeSet<usize> = BTreeSet::new();
    let mut coeffs = CoefficientVector::zeros(layout.clone());

    for _ in 0..config.max_iterations {
        if residual.norm() <= threshold || selected.len() >= config.max_active_blocks {
            break;
        }
        let Some(block) = best_block(&bases, &residual, &selected, &config.excluded_blocks) else {
            break;
        };
        selected.insert(block);

        let columns: Vec<usize> = selected
            .iter()
            .flat_map(|&blk| layout.block_cols(blk))
            .collect();
        let sub = problem.a.select_columns(columns.iter());
        let sub_x = min_norm_least_squares(&sub, &problem.b)?;

        coeffs.x.fill(0.0);
        for (&col, &v) in columns.iter().zip(sub_x.iter()) {
            coeffs.x[col] = v;
        }
        residual = &problem.b - &sub * &sub_x;
        coeffs.residual_history.push(residual.norm());
    }

    coeffs.active_blocks = selected
        .into_iter()
        .filter(|&blk| coeffs.block(blk).iter().any(|&v| v != 0.0))
        .collect();
    for blk in 0..blocks {
        if !coeffs.active_blocks.contains(&blk) {
            for col in layout.block_cols(blk) {
                coeffs.x[col] = 0.0;
            }
        }
    }
    problem.residual = Some(residual);
    Ok(coeffs)
}

/// Orthonormal basis of each block's column span (left singular vectors
/// above the rank cutoff). An all-zero block gets an empty basis.
fn block_bases(problem: &RegressionProblem) -> Result<Vec<DMatrix<f64>>> {
    let layout = &problem.layout;
    (0..layout.block_count())
        .map(|blk| {
            let cols = layout.block_cols(blk);
            let block = problem.a.columns(cols.start, cols.len()).into_owned();
            let svd = nalgebra::SVD::try_new(block, true, false, f64::EPSILON, SVD_MAX_ITERATIONS)
                .ok_or_else(|| {
                    Error::NumericalFailure(format!("SVD of block {blk} did not converge"))
                })?;
            let sigma_max = svd.singular_values.max();
            let cutoff = problem.rows().max(cols.len()) as f64 * f64::EPSILON * sigma_max;
            let u = svd.u.expect("left singular vectors requested");
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| sigma_max > 0.0 && svd.singular_values[i] > cutoff)
                .collect();
            Ok(u.select_columns(keep.iter()))
        })
        .collect()
}

fn best_block(
    bases: &[DMatrix<f64>],
    residual: &DVector<f64>,
    selected: &BTreeSet<usize>,
    excluded: &BTreeSet<usize>,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (blk, basis) in bases.iter().enumerate() {
        if selected.contains(&blk) || excluded.contains(&blk) {
            continue;
        }
        let score = basis.tr_mul(residual).norm();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((blk, score));
        }
    }
    best.filter(|&(_, s)| s > 0.0).map(|(blk, _)| blk)
}

/// Plain-text table of `block, sensor, lag, coefficient`, one line per
/// coefficient. `labels[i]` names block `i`.
pub fn coefficient_table(coeffs: &CoefficientVector, labels: &[String]) -> String {
    let mut out = String::from("block\tsensor\tlag\tcoefficient\n");
    for (col, v) in coeffs.x.iter().enumerate() {
        let (blk, lag) = coeffs.layout.locate(col).expect("column within layout");
        let label = labels.get(blk).map(String::as_str).unwrap_or("?");
        let _ = writeln!(out, "{blk}\t{label}\t{lag}\t{v:.9}");
    }
    out
}
