//! Reference forecasters: seasonal naive, additive Holt-Winters and the
//! training-range mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Repeats the final season of `train`.
pub fn seasonal_naive(train: &[f64], season: usize, horizon: usize) -> Result<Vec<f64>> {
    if season < 1 || train.len() < season {
        return Err(Error::invalid(
            "seasonal naive",
            format!("need 1 <= season <= {} , got {season}", train.len()),
        ));
    }
    let last = &train[train.len() - season..];
    Ok((0..horizon).map(|h| last[h % season]).collect())
}

/// Flat forecast at the mean of `train`.
pub fn mean_forecast(train: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::invalid("mean forecast", "empty training range"));
    }
    let mean = train.iter().sum::<f64>() / train.len() as f64;
    Ok(vec![mean; horizon])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoltWintersConfig {
    pub season: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for HoltWintersConfig {
    fn default() -> Self {
        Self {
            season: 7,
            alpha: 0.3,
            beta: 0.05,
            gamma: 0.1,
        }
    }
}

impl HoltWintersConfig {
    pub fn validate(&self) -> Result<()> {
        if self.season < 1 {
            return Err(Error::invalid("holt-winters config", "season must be >= 1"));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    "holt-winters config",
                    format!("{name} = {v} outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }
}

/// Smoothed state after a pass over the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct HoltWintersFit {
    pub level: f64,
    pub trend: f64,
    /// Seasonal terms indexed by `t mod season` (0-based time).
    pub seasonals: Vec<f64>,
    /// One-step-ahead errors for `t = season..n`.
    pub one_step_errors: Vec<f64>,
    n: usize,
}

impl HoltWintersFit {
    /// `level + h·trend + seasonal[(n + h − 1) mod season]` for `h = 1..=horizon`.
    pub fn forecast(&self, horizon: usize) -> Vec<f64> {
        let m = self.seasonals.len();
        (1..=horizon)
            .map(|h| self.level + h as f64 * self.trend + self.seasonals[(self.n + h - 1) % m])
            .collect()
    }
}

/// Additive Holt-Winters smoothing.
///
/// The state is initialised from the first two seasons (level = mean of the
/// first season, trend = difference of the two season means divided by the
/// season length, seasonals = first-season deviations) and the recursions run
/// from `t = season`:
///
/// ```text
/// ℓ_t = α (y_t − s_{t−m}) + (1 − α)(ℓ_{t−1} + b_{t−1})
/// b_t = β (ℓ_t − ℓ_{t−1}) + (1 − β) b_{t−1}
/// s_t = γ (y_t − ℓ_t) + (1 − γ) s_{t−m}
/// ```
pub fn holt_winters_fit(train: &[f64], cfg: &HoltWintersConfig) -> Result<HoltWintersFit> {
    cfg.validate()?;
    let m = cfg.season;
    let n = train.len();
    if n < 2 * m {
        return Err(Error::invalid(
            "holt-winters",
            format!("need at least {} observations, got {n}", 2 * m),
        ));
    }
    let first = train[..m].iter().sum::<f64>() / m as f64;
    let second = train[m..2 * m].iter().sum::<f64>() / m as f64;
    let mut level = first;
    let mut trend = (second - first) / m as f64;
    let mut seasonals: Vec<f64> = train[..m].iter().map(|y| y - first).collect();
    let mut errors = Vec::with_capacity(n - m);
    for (t, &y) in train.iter().enumerate().skip(m) {
        let s_old = seasonals[t % m];
        errors.push(y - (level + trend + s_old));
        let prev_level = level;
        level = cfg.alpha * (y - s_old) + (1.0 - cfg.alpha) * (level + trend);
        trend = cfg.beta * (level - prev_level) + (1.0 - cfg.beta) * trend;
        seasonals[t % m] = cfg.gamma * (y - level) + (1.0 - cfg.gamma) * s_old;
    }
    Ok(HoltWintersFit {
        level,
        trend,
        seasonals,
        one_step_errors: errors,
        n,
    })
}

pub fn holt_winters(train: &[f64], cfg: &HoltWintersConfig, horizon: usize) -> Result<Vec<f64>> {
    Ok(holt_winters_fit(train, cfg)?.forecast(horizon))
}
