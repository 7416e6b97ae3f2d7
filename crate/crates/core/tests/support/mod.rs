//! Independent re-derivations used as test oracles, plus small fixtures.

#![allow(dead_code)]

use cellcast_core::deepar::{forward_window, NetworkParams, WindowInput};
use cellcast_core::SeriesPanel;
use chrono::NaiveDate;

/// Window of output index `i` (1-based), listing the 1-based positions it
/// reads. Written branch by branch without sharing code with the library.
pub fn lma_window_positions(i: usize, n: usize, cl: usize, pl: usize) -> Vec<usize> {
    let mut positions = Vec::new();
    if i < pl {
        for j in 1..=cl {
            positions.push(j);
        }
    } else if i < n && (n as i64 - i as i64 - 1) < pl as i64 {
        for j in (n - cl + 1)..=n {
            positions.push(j);
        }
    } else if i < n {
        let mut start = i as i64 - pl as i64 + 1;
        if start < 1 {
            start = 1;
        }
        if start > (n - cl + 1) as i64 {
            start = (n - cl + 1) as i64;
        }
        for j in 0..cl {
            positions.push(start as usize + j);
        }
    } else {
        for j in (n - pl + 1)..=n {
            positions.push(j);
        }
    }
    positions
}

/// Mean channel and population std channel by enumeration.
pub fn lma_oracle(z: &[f64], cl: usize, pl: usize) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for i in 1..=n + pl {
        let mut window = Vec::new();
        for p in lma_window_positions(i, n, cl, pl) {
            assert!((1..=n).contains(&p), "oracle read outside the series");
            window.push(z[p - 1]);
        }
        let mut total = 0.0;
        for v in &window {
            total += v;
        }
        let mean = total / window.len() as f64;
        let mut sq = 0.0;
        for v in &window {
            sq += (v - mean) * (v - mean);
        }
        means.push(mean);
        stds.push((sq / window.len() as f64).sqrt());
    }
    (means, stds)
}

/// sqrt of the mean of (ln(p + 1) - ln(a + 1))^2 over all cells.
pub fn rmsle_oracle(actual: &[Vec<f64>], predicted: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..actual.len() {
        for t in 0..actual[i].len() {
            let diff = (predicted[i][t] + 1.0).ln() - (actual[i][t] + 1.0).ln();
            total += diff * diff;
            count += 1.0;
        }
    }
    (total / count).sqrt()
}

/// Mean Gaussian NLL of the window, from the forward pass alone.
pub fn window_nll(window: &WindowInput<'_>, targets: &[f64], params: &NetworkParams) -> f64 {
    let (thetas, _) = forward_window(window, params).unwrap();
    let mut total = 0.0;
    for (theta, z) in thetas.iter().zip(targets) {
        let y = z / window.scale;
        total += 0.5 * (2.0 * std::f64::consts::PI).ln()
            + theta.sigma.ln()
            + (y - theta.mu).powi(2) / (2.0 * theta.sigma * theta.sigma);
    }
    total / targets.len() as f64
}

/// Central finite-difference gradient of [`window_nll`].
pub fn numeric_gradient(
    window: &WindowInput<'_>,
    targets: &[f64],
    params: &NetworkParams,
    eps: f64,
) -> Vec<f64> {
    let mut probe = params.clone();
    (0..params.values().len())
        .map(|k| {
            let orig = probe.values()[k];
            probe.values_mut()[k] = orig + eps;
            let up = window_nll(window, targets, &probe);
            probe.values_mut()[k] = orig - eps;
            let down = window_nll(window, targets, &probe);
            probe.values_mut()[k] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn panel_from_rows(rows: Vec<Vec<f64>>) -> SeriesPanel {
    let ids = (0..rows.len()).map(|i| format!("s{i:03}")).collect();
    SeriesPanel::new(ids, date(2021, 3, 1), rows).unwrap()
}
