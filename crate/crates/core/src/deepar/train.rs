use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{window_loss_and_grad, WindowInput};
use super::params::{Architecture, NetworkParams};
use super::series_scale;
use crate::error::{Error, Result};
use crate::lma::{CovariatePanel, LmaConfig};
use crate::panel::SeriesPanel;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Conditioning steps per training window.
    pub context_length: usize,
    /// Prediction length; each training window spans `context_length + horizon`.
    pub horizon: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub sigma_floor: f64,
    /// Element-wise gradient clip; 0 disables clipping.
    pub clip_gradient: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            context_length: 62,
            horizon: 31,
            epochs: 15,
            learning_rate: 1e-3,
            batch_size: 32,
            hidden_size: 40,
            num_layers: 2,
            sigma_floor: 1e-6,
            clip_gradient: 10.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid("train config", m.to_string()));
        if self.horizon < 1 || self.context_length < self.horizon {
            return bad("need context_length >= horizon >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if self.hidden_size < 1 || self.num_layers < 1 {
            return bad("hidden_size and num_layers must be >= 1");
        }
        if !(self.sigma_floor.is_finite() && self.sigma_floor > 0.0) {
            return bad("sigma_floor must be > 0");
        }
        if !(self.clip_gradient.is_finite() && self.clip_gradient >= 0.0) {
            return bad("clip_gradient must be >= 0");
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.context_length + self.horizon
    }

    pub fn architecture(&self, num_channels: usize) -> Architecture {
        Architecture {
            input_size: 1 + num_channels,
            hidden_size: self.hidden_size,
            num_layers: self.num_layers,
            sigma_floor: self.sigma_floor,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// A fitted network with everything needed to rebuild its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub train_config: TrainConfig,
    /// `None` for the plain model without covariates.
    pub lma_config: Option<LmaConfig>,
    /// Mean window NLL of each epoch.
    pub training_log: Vec<f64>,
    pub format_version: u32,
}

/// Lagged inputs, targets, channel slices and scale of the training window
/// starting at 0-based `start`.
pub(crate) struct TrainingWindow<'a> {
    pub lags: Vec<f64>,
    pub targets: &'a [f64],
    pub covariates: Vec<&'a [f64]>,
    pub scale: f64,
}

pub(crate) fn training_window<'a>(
    z: &'a [f64],
    channels: &'a [Vec<f64>],
    start: usize,
    cfg: &TrainConfig,
) -> Result<TrainingWindow<'a>> {
    let len = cfg.window_len();
    let end = start + len;
    let lags = (start..end)
        .map(|t| if t == 0 { 0.0 } else { z[t - 1] })
        .collect();
    Ok(TrainingWindow {
        lags,
        targets: &z[start..end],
        covariates: channels.iter().map(|ch| &ch[start..end]).collect(),
        scale: series_scale(&z[start..start + cfg.context_length])?,
    })
}

fn check_inputs(panel: &SeriesPanel, cov: &CovariatePanel, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if cov.series_ids() != panel.series_ids() || cov.train_len() != panel.len() {
        return Err(Error::Shape(
            "covariates were not built from this panel".into(),
        ));
    }
    if cov.pl() != cfg.horizon {
        return Err(Error::invalid(
            "covariates",
            format!("built with pl = {} but horizon = {}", cov.pl(), cfg.horizon),
        ));
    }
    if panel.len() < cfg.window_len() {
        return Err(Error::invalid(
            "panel",
            format!(
                "series of {} days are shorter than a training window of {}",
                panel.len(),
                cfg.window_len()
            ),
        ));
    }
    Ok(())
}

/// Fits the network by Adam. Each epoch visits every training window once in
/// a seeded shuffled order.
pub fn train(
    panel: &SeriesPanel,
    covariates: &CovariatePanel,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    check_inputs(panel, covariates, cfg)?;
    let arch = cfg.architecture(covariates.num_channels());
    let mut params = NetworkParams::init(arch, cfg.seed)?;
    let mut adam = Adam::new(arch.param_count(), cfg.learning_rate);
    let max_start = panel.len() - cfg.window_len();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = stream_rng(cfg.seed, stream::EPOCH, epoch as u64);
        // One pass visits every window start of every series once.
        let mut windows: Vec<(usize, usize)> = (0..panel.num_series())
            .flat_map(|i| (0..=max_start).map(move |start| (i, start)))
            .collect();
        windows.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in windows.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&(i, start)| {
                    let w = training_window(panel.series(i), covariates.series(i), start, cfg)?;
                    let input = WindowInput {
                        lags: &w.lags,
                        covariates: &w.covariates,
                        scale: w.scale,
                    };
                    window_loss_and_grad(&input, w.targets, &params)
                })
                .collect::<Result<Vec<_>>>()?;

            let mut grad = vec![0.0; arch.param_count()];
            for (loss, g) in &results {
                epoch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g.values()) {
                    *acc += v;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grad.iter_mut() {
                *g *= inv;
                if cfg.clip_gradient > 0.0 {
                    *g = g.clamp(-cfg.clip_gradient, cfg.clip_gradient);
                }
            }
            adam.step(params.values_mut(), &grad);
        }
        let mean = epoch_loss / windows.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::invalid(
                "training",
                format!("diverged in epoch {} (mean NLL {mean})", epoch + 1),
            ));
        }
        log.push(mean);
    }

    Ok(TrainedModel {
        params,
        train_config: cfg.clone(),
        lma_config: covariates.config().cloned(),
        training_log: log,
        format_version: super::persist::FORMAT_VERSION,
    })
}
