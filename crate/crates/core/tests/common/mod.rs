//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::ops::Range;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use speedcast::{
    generate_synthetic, BlockLayout, Dataset, MeasurementSeries, SeriesSpec, SyntheticSpec,
    Variable,
};

pub fn dataset_from(columns: &[Vec<f64>], target: usize) -> Dataset {
    let start = NaiveDate::from_ymd_opt(2016, 5, 10)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let series = columns
        .iter()
        .enumerate()
        .map(|(i, v)| {
            MeasurementSeries::new(format!("s{i}"), Variable::Speed, start, 300, v.clone()).unwrap()
        })
        .collect();
    Dataset::new(series, target).unwrap()
}

/// Loops the AR double summation directly: row `r` predicts sample
/// `t = n_max + r`, and coefficient `i` of series `p` multiplies `y_p[t - i]`.
pub fn brute_force_block_system(
    columns: &[Vec<f64>],
    target: usize,
    orders: &[usize],
    n_max: usize,
    rows: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let total: usize = orders.iter().sum();
    let mut b = DVector::zeros(rows);
    let mut a = DMatrix::zeros(rows, total);
    for r in 0..rows {
        let t = n_max + r;
        b[r] = columns[target][t];
        let mut col = 0;
        for (p, &order) in orders.iter().enumerate() {
            for i in 1..=order {
                a[(r, col)] = columns[p][t - i];
                col += 1;
            }
        }
    }
    (b, a)
}

/// Solves `AᵀA x = Aᵀb` by Gaussian elimination with partial pivoting.
pub fn normal_equations(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut m = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (0..a.nrows()).map(|k| a[(k, i)] * a[(k, j)]).sum();
        }
        m[i][n] = (0..a.nrows()).map(|k| a[(k, i)] * b[k]).sum();
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col].clone();
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    DVector::from_vec(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Least-squares fit on every support of exactly `k` blocks; returns the
/// support with the smallest residual and its full-length coefficients.
pub fn exhaustive_best_support(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    layout: &BlockLayout,
    k: usize,
) -> (BTreeSet<usize>, DVector<f64>) {
    let mut best: Option<(f64, BTreeSet<usize>, DVector<f64>)> = None;
    for support in combinations(layout.block_count(), k) {
        let cols: Vec<usize> = support.iter().flat_map(|&s| layout.block_cols(s)).collect();
        let sub = a.select_columns(cols.iter());
        let xs = normal_equations(&sub, b);
        let res = (b - &sub * &xs).norm();
        if best.as_ref().is_none_or(|(r, _, _)| res < *r) {
            let mut x = DVector::zeros(layout.total_cols());
            for (&c, &v) in cols.iter().zip(xs.iter()) {
                x[c] = v;
            }
            best = Some((res, support.into_iter().collect(), x));
        }
    }
    let (_, s, x) = best.unwrap();
    (s, x)
}

pub fn lag_coupled_spec() -> SyntheticSpec {
    let root = |id: &str, mean: f64| SeriesSpec::Root {
        id: id.into(),
        mean,
        std: 12.0,
        persistence: 0.95,
    };
    SyntheticSpec {
        length: 288,
        start: "2016-05-10 00:00:00".into(),
        step_seconds: 300,
        target: Some("target".into()),
        series: vec![
            root("upstream", 95.0),
            SeriesSpec::Delayed {
                id: "target".into(),
                source: "upstream".into(),
                delay: 2,
                noise: 0.05,
                gain: 1.0,
                offset: 0.0,
            },
            SeriesSpec::Noise {
                id: "noise".into(),
                mean: 85.0,
                std: 10.0,
            },
            root("side_a", 88.0),
            root("side_b", 100.0),
        ],
    }
}

/// One day on a 5-minute grid where `target` is `upstream` two steps later
/// plus 5% noise, alongside a pure-noise sensor and two unrelated links.
/// Returns the dataset and the 14:00-23:00 test range.
pub fn lag_coupled_dataset() -> (Dataset, Range<usize>) {
    let (dataset, _) = generate_synthetic(&lag_coupled_spec(), 2016).unwrap();
    (dataset, 168..276)
}
