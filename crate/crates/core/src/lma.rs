//! Local moving average (LMA) covariates.
//!
//! For a training series `z[1..=n]`, every output index `i` in `1..=n+pl` is
//! assigned a window of training data and emits that window's mean or
//! standard deviation. Window rules (1-based, inclusive start):
//!
//! | branch | condition                              | window                               |
//! |--------|----------------------------------------|--------------------------------------|
//! | head   | `i < pl`                               | `(1, cl)`                            |
//! | tail   | `pl <= i < n` and `n - i - 1 < pl`     | `(n - cl + 1, cl)`                   |
//! | main   | `pl <= i < n` otherwise                | `(clamp(i - pl + 1, 1, n - cl + 1), cl)` |
//! | future | `i >= n`                               | `(n - pl + 1, pl)`                   |
//!
//! Every window lies inside `[1, n]`, so the horizon covariates only ever see
//! observed data.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SeriesPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Mean,
    Std,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Mean => "mean",
            FeatureKind::Std => "std",
        })
    }
}

/// A covariate channel: an LMA feature or the optional calendar channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Lma(FeatureKind),
    DayOfWeek,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Lma(k) => write!(f, "lma_{k}"),
            ChannelKind::DayOfWeek => f.write_str("day_of_week"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmaConfig {
    /// Training input length.
    pub cl: usize,
    /// Prediction length.
    pub pl: usize,
    pub features: Vec<FeatureKind>,
    pub standardize: bool,
    /// Append a day-of-week channel after the LMA channels.
    pub day_of_week: bool,
}

impl Default for LmaConfig {
    fn default() -> Self {
        Self {
            cl: 62,
            pl: 31,
            features: vec![FeatureKind::Mean, FeatureKind::Std],
            standardize: true,
            day_of_week: false,
        }
    }
}

impl LmaConfig {
    pub fn validate(&self) -> Result<()> {
        check_lengths(self.cl, self.pl)?;
        if self.features.is_empty() {
            return Err(Error::invalid("lma config", "features must be nonempty"));
        }
        Ok(())
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.cl > n {
            return Err(Error::invalid(
                "lma config",
                format!("cl = {} exceeds series length {n}", self.cl),
            ));
        }
        Ok(())
    }

    pub fn channel_kinds(&self) -> Vec<ChannelKind> {
        let mut kinds: Vec<ChannelKind> =
            self.features.iter().map(|&k| ChannelKind::Lma(k)).collect();
        if self.day_of_week {
            kinds.push(ChannelKind::DayOfWeek);
        }
        kinds
    }
}

fn check_lengths(cl: usize, pl: usize) -> Result<()> {
    if pl < 1 || cl < pl {
        return Err(Error::invalid(
            "lma config",
            format!("need cl >= pl >= 1, got cl = {cl}, pl = {pl}"),
        ));
    }
    Ok(())
}

/// Arithmetic mean or population standard deviation of `window`.
pub fn feature_value(window: &[f64], kind: FeatureKind) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::invalid("window", "empty window"));
    }
    let len = window.len() as f64;
    let mean = window.iter().sum::<f64>() / len;
    Ok(match kind {
        FeatureKind::Mean => mean,
        FeatureKind::Std => {
            let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
            var.sqrt()
        }
    })
}

/// 1-based `(start, len)` of the training window feeding output index `i`.
pub fn lma_window(i: usize, n: usize, cl: usize, pl: usize) -> Result<(usize, usize)> {
    check_lengths(cl, pl)?;
    if cl > n {
        return Err(Error::invalid(
            "lma config",
            format!("cl = {cl} exceeds series length {n}"),
        ));
    }
    if i < 1 || i > n + pl {
        return Err(Error::invalid(
            "lma index",
            format!("i = {i} outside 1..={}", n + pl),
        ));
    }
    let last_start = n - cl + 1;
    Ok(if i < pl {
        (1, cl)
    } else if i < n {
        if n - i - 1 < pl {
            (last_start, cl)
        } else {
            ((i + 1 - pl).clamp(1, last_start), cl)
        }
    } else {
        (n - pl + 1, pl)
    })
}

/// One sequence of length `n + pl` per requested feature.
pub fn lma_features(z: &[f64], cfg: &LmaConfig) -> Result<Vec<Vec<f64>>> {
    if z.is_empty() {
        return Err(Error::invalid("series", "empty series"));
    }
    let n = z.len();
    cfg.validate_for(n)?;
    let windows = (1..=n + cfg.pl)
        .map(|i| lma_window(i, n, cfg.cl, cfg.pl))
        .collect::<Result<Vec<_>>>()?;
    cfg.features
        .iter()
        .map(|&kind| {
            windows
                .iter()
                .map(|&(start, len)| feature_value(&z[start - 1..start - 1 + len], kind))
                .collect()
        })
        .collect()
}

/// Standardization applied to one channel of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    /// Zero marks a constant channel, which is only shifted.
    pub std: f64,
}

impl Standardization {
    fn fit(train_range: &[f64]) -> Self {
        let mean = feature_value(train_range, FeatureKind::Mean).expect("nonempty");
        let std = feature_value(train_range, FeatureKind::Std).expect("nonempty");
        Self { mean, std }
    }

    fn apply(&self, v: f64) -> f64 {
        if self.std > 0.0 {
            (v - self.mean) / self.std
        } else {
            v - self.mean
        }
    }
}

/// Covariate channels for every series of a panel, each of length `n + pl`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariatePanel {
    config: Option<LmaConfig>,
    series_ids: Vec<String>,
    kinds: Vec<ChannelKind>,
    n: usize,
    pl: usize,
    channels: Vec<Vec<Vec<f64>>>,
    standardization: Vec<Vec<Option<Standardization>>>,
}

impl CovariatePanel {
    /// A panel without channels (K = 0), used for plain recurrent training.
    pub fn empty(panel: &SeriesPanel, pl: usize) -> Self {
        Self {
            config: None,
            series_ids: panel.series_ids().to_vec(),
            kinds: Vec::new(),
            n: panel.len(),
            pl,
            channels: vec![Vec::new(); panel.num_series()],
            standardization: vec![Vec::new(); panel.num_series()],
        }
    }

    /// Configuration the channels were built with; `None` when K = 0.
    pub fn config(&self) -> Option<&LmaConfig> {
        self.config.as_ref()
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn kinds(&self) -> &[ChannelKind] {
        &self.kinds
    }

    /// K.
    pub fn num_channels(&self) -> usize {
        self.kinds.len()
    }

    /// Training length n the channels were built from.
    pub fn train_len(&self) -> usize {
        self.n
    }

    pub fn pl(&self) -> usize {
        self.pl
    }

    pub fn num_series(&self) -> usize {
        self.series_ids.len()
    }

    /// Channels of series `i`, each of length `n + pl`.
    pub fn series(&self, i: usize) -> &[Vec<f64>] {
        &self.channels[i]
    }

    pub fn standardization(&self, i: usize) -> &[Option<Standardization>] {
        &self.standardization[i]
    }

    /// Writes `series_id,channel,t,value` rows with 1-based `t`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let err = |e| crate::panel::csv_error(path, e);
        w.write_record(["series_id", "channel", "t", "value"])
            .map_err(err)?;
        for (id, channels) in self.series_ids.iter().zip(&self.channels) {
            for (kind, values) in self.kinds.iter().zip(channels) {
                let label = kind.to_string();
                for (t, v) in values.iter().enumerate() {
                    w.write_record([
                        id.as_str(),
                        label.as_str(),
                        (t + 1).to_string().as_str(),
                        v.to_string().as_str(),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Day-of-week encoded in [-0.5, 0.5], Monday = -0.5.
fn day_of_week_channel(panel: &SeriesPanel, len: usize) -> Vec<f64> {
    use chrono::Datelike;
    (1..=len)
        .map(|t| panel.date_of(t).weekday().num_days_from_monday() as f64 / 6.0 - 0.5)
        .collect()
}

pub fn build_covariates(panel: &SeriesPanel, cfg: &LmaConfig) -> Result<CovariatePanel> {
    cfg.validate_for(panel.len())?;
    let n = panel.len();
    let calendar = cfg
        .day_of_week
        .then(|| day_of_week_channel(panel, n + cfg.pl));
    let mut channels = Vec::with_capacity(panel.num_series());
    let mut standardization = Vec::with_capacity(panel.num_series());
    for (id, z) in panel.iter() {
        let mut lma = lma_features(z, cfg).map_err(|e| Error::Series {
            series_id: id.to_string(),
            message: e.to_string(),
        })?;
        let mut params = vec![None; lma.len()];
        if cfg.standardize {
            for (channel, slot) in lma.iter_mut().zip(params.iter_mut()) {
                let s = Standardization::fit(&channel[..n]);
                channel.iter_mut().for_each(|v| *v = s.apply(*v));
                *slot = Some(s);
            }
        }
        if let Some(cal) = &calendar {
            lma.push(cal.clone());
            params.push(None);
        }
        channels.push(lma);
        standardization.push(params);
    }
    Ok(CovariatePanel {
        config: Some(cfg.clone()),
        series_ids: panel.series_ids().to_vec(),
        kinds: cfg.channel_kinds(),
        n,
        pl: cfg.pl,
        channels,
        standardization,
    })
}
