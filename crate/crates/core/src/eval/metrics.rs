//! Root mean squared logarithmic error and its per-series breakdown.

use crate::error::{Error, Result};

fn check_matrices(actual: &[Vec<f64>], predicted: &[Vec<f64>]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} actual rows vs {} predicted rows",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Shape("empty matrices".into()));
    }
    for (i, (a, p)) in actual.iter().zip(predicted).enumerate() {
        if a.len() != p.len() || a.is_empty() {
            return Err(Error::Shape(format!(
                "row {i}: {} actual vs {} predicted values",
                a.len(),
                p.len()
            )));
        }
        if let Some(v) = a.iter().chain(p).find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "rmsle input",
                format!("row {i} holds {v}; entries must be finite and >= 0"),
            ));
        }
    }
    Ok(())
}

fn squared_log_error(a: f64, p: f64) -> f64 {
    let d = p.ln_1p() - a.ln_1p();
    d * d
}

/// RMSLE over every cell of the two matrices jointly.
pub fn rmsle_pooled(actual: &[Vec<f64>], predicted: &[Vec<f64>]) -> Result<f64> {
    check_matrices(actual, predicted)?;
    let mut sum = 0.0;
    let mut cells = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        sum += a
            .iter()
            .zip(p)
            .map(|(a, p)| squared_log_error(*a, *p))
            .sum::<f64>();
        cells += a.len();
    }
    Ok((sum / cells as f64).sqrt())
}

/// RMSLE of each row.
pub fn rmsle_per_series(actual: &[Vec<f64>], predicted: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_matrices(actual, predicted)?;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| {
            let sum: f64 = a
                .iter()
                .zip(p)
                .map(|(a, p)| squared_log_error(*a, *p))
                .sum();
            (sum / a.len() as f64).sqrt()
        })
        .collect())
}

/// Population standard deviation of per-series RMSLE values.
pub fn stability_std(per_series: &[f64]) -> Result<f64> {
    if per_series.is_empty() {
        return Err(Error::invalid("stability std", "no values"));
    }
    let n = per_series.len() as f64;
    let mean = per_series.iter().sum::<f64>() / n;
    Ok((per_series
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n)
        .sqrt())
}

/// Fraction of actual values inside `[lower, upper]`, all matrices aligned.
pub fn interval_coverage(
    actual: &[Vec<f64>],
    lower: &[Vec<f64>],
    upper: &[Vec<f64>],
) -> Result<f64> {
    check_matrices(actual, lower)?;
    check_matrices(actual, upper)?;
    let mut hits = 0usize;
    let mut cells = 0usize;
    for ((a, lo), hi) in actual.iter().zip(lower).zip(upper) {
        for ((a, lo), hi) in a.iter().zip(lo).zip(hi) {
            cells += 1;
            if lo <= a && a <= hi {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / cells as f64)
}
