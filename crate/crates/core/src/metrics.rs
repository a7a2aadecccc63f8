//! Point-forecast error measures.
//!
//! NRMSE is RMSE divided by the observed range `max(a) - min(a)` of the
//! actuals, in percent. It is undefined (reported as `None`) when every actual
//! is identical.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Same unit as the inputs (km/h for speeds).
    pub mae: f64,
    pub rmse: f64,
    /// Percent of the actuals' range.
    pub nrmse: Option<f64>,
    pub n_points: usize,
}

pub fn compute_errors(actuals: &[f64], predictions: &[f64]) -> Result<ErrorReport> {
    if actuals.len() != predictions.len() || actuals.is_empty() {
        return Err(Error::LengthMismatch {
            actuals: actuals.len(),
            predictions: predictions.len(),
        });
    }
    let n = actuals.len() as f64;
    let (abs_sum, sq_sum) =
        actuals
            .iter()
            .zip(predictions)
            .fold((0.0, 0.0), |(abs, sq), (a, p)| {
                let d = a - p;
                (abs + d.abs(), sq + d * d)
            });
    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();

    let lo = actuals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = actuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nrmse = (hi > lo).then(|| 100.0 * rmse / (hi - lo));

    Ok(ErrorReport {
        mae,
        rmse,
        nrmse,
        n_points: actuals.len(),
    })
}

fn fmt_nrmse(nrmse: Option<f64>) -> String {
    nrmse.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Markdown table, one row per method, columns MAE, RMSE, NRMSE.
pub fn markdown_table(rows: &[(String, ErrorReport)]) -> String {
    let mut out = String::from("| Method | MAE [km/h] | RMSE [km/h] | NRMSE [%] | Points |\n");
    out.push_str("|---|---:|---:|---:|---:|\n");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "| {name} | {:.2} | {:.2} | {} | {} |",
            r.mae,
            r.rmse,
            fmt_nrmse(r.nrmse),
            r.n_points
        );
    }
    out
}

pub fn csv_table(rows: &[(String, ErrorReport)]) -> String {
    let mut out = String::from("method,mae_kmh,rmse_kmh,nrmse_percent,n_points\n");
    for (name, r) in rows {
        let nrmse = r.nrmse.map_or_else(String::new, |v| format!("{v:.6}"));
        let _ = writeln!(
            out,
            "{name},{:.6},{:.6},{nrmse},{}",
            r.mae, r.rmse, r.n_points
        );
    }
    out
}
