//! Synthetic base-station traffic.
//!
//! Each series is the sum of a deterministic part (level, linear trend,
//! weekly-style sinusoid, Poisson-arriving exponential bursts) and Gaussian
//! noise, clamped at zero:
//!
//! ```text
//! X_i(t) = max(0, base + a_i t + A_i sin(2π t / period + φ_i) + burst_i(t) + e_i(t)),  t = 1..n_total
//! ```
//!
//! `a_i`, `A_i` and `φ_i` are drawn once per series. Series `i` only ever
//! touches streams derived from `(seed, i)`, so its values do not depend on how
//! many other series are generated or in which order.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::rng::{derive_seed, stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_series: usize,
    pub n_total: usize,
    pub start_date: NaiveDate,
    /// Mean traffic level, KB/day.
    pub base_level: f64,
    /// Per-series linear trend slope interval, KB/day per day.
    pub trend_slope_range: [f64; 2],
    pub period: usize,
    pub amplitude_range: [f64; 2],
    /// Expected bursts per day.
    pub burst_rate: f64,
    /// Mean burst magnitude.
    pub burst_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_series: 50,
            n_total: 212,
            start_date: NaiveDate::from_ymd_opt(2017, 9, 1).expect("valid date"),
            base_level: 1000.0,
            trend_slope_range: [-1.5, 3.0],
            period: 7,
            amplitude_range: [100.0, 300.0],
            burst_rate: 0.05,
            burst_scale: 1500.0,
            noise_sigma: 60.0,
            seed: 20_170_901,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid("synth config", m));
        if self.num_series < 1 {
            return bad("num_series must be >= 1".into());
        }
        if self.n_total < 2 {
            return bad("n_total must be >= 2".into());
        }
        if self.period < 1 {
            return bad("period must be >= 1".into());
        }
        for (name, v) in [
            ("base_level", self.base_level),
            ("burst_rate", self.burst_rate),
            ("burst_scale", self.burst_scale),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, [lo, hi]) in [
            ("trend_slope_range", self.trend_slope_range),
            ("amplitude_range", self.amplitude_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} must be a finite [lo, hi] with lo <= hi"));
            }
        }
        Ok(())
    }
}

/// Per-series draws of the deterministic shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesShape {
    pub slope: f64,
    pub amplitude: f64,
    pub phase: f64,
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

pub fn series_id(index: usize) -> String {
    format!("cell_{index:04}")
}

pub fn series_shape(cfg: &SynthConfig, index: usize) -> SeriesShape {
    let sub = derive_seed(cfg.seed, stream::SERIES, index as u64);
    let mut rng = stream_rng(sub, stream::SHAPE, 0);
    let slope = uniform(&mut rng, cfg.trend_slope_range);
    let amplitude = uniform(&mut rng, cfg.amplitude_range);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    SeriesShape {
        slope,
        amplitude,
        phase,
    }
}

/// Values of series `index`; independent of every other series.
pub fn generate_series(cfg: &SynthConfig, index: usize) -> Vec<f64> {
    let sub = derive_seed(cfg.seed, stream::SERIES, index as u64);
    let shape = series_shape(cfg, index);
    let mut burst_rng = stream_rng(sub, stream::BURST, 0);
    let mut noise_rng = stream_rng(sub, stream::NOISE, 0);
    let arrivals =
        (cfg.burst_rate > 0.0).then(|| Poisson::new(cfg.burst_rate).expect("validated rate"));
    let magnitude =
        (cfg.burst_scale > 0.0).then(|| Exp::new(1.0 / cfg.burst_scale).expect("validated scale"));
    let noise = (cfg.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.noise_sigma).expect("validated sigma"));

    (1..=cfg.n_total)
        .map(|t| {
            let tf = t as f64;
            let angle = std::f64::consts::TAU * tf / cfg.period as f64 + shape.phase;
            let mut x = cfg.base_level + shape.slope * tf + shape.amplitude * angle.sin();
            if let Some(arrivals) = &arrivals {
                let count = arrivals.sample(&mut burst_rng) as u64;
                for _ in 0..count {
                    x += magnitude.as_ref().map_or(0.0, |m| m.sample(&mut burst_rng));
                }
            }
            if let Some(noise) = &noise {
                x += noise.sample(&mut noise_rng);
            }
            x.max(0.0)
        })
        .collect()
}

pub fn generate_panel(cfg: &SynthConfig) -> Result<SeriesPanel> {
    cfg.validate()?;
    let values: Vec<Vec<f64>> = (0..cfg.num_series)
        .into_par_iter()
        .map(|i| generate_series(cfg, i))
        .collect();
    let ids = (0..cfg.num_series).map(series_id).collect();
    SeriesPanel::new(ids, cfg.start_date, values)
}
