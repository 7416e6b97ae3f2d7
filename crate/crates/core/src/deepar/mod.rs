//! Autoregressive recurrent likelihood model.
//!
//! A stacked LSTM reads `[z_{t-1} / ν, x_t]` at every step and emits the
//! parameters of a Gaussian over `z_t / ν`. Training maximises the likelihood
//! of observed windows under teacher forcing; prediction encodes the
//! conditioning range with the same weights and then samples trajectories
//! ancestrally, feeding each draw back as the next input.

mod network;
mod params;
mod persist;
mod sample;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use network::{
    forward_window, lstm_cell, window_loss_and_grad, HiddenState, Stepper, WindowInput,
};
pub use params::{Architecture, HeadParams, LayerParams, LayerParamsMut, NetworkParams};
pub use persist::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use sample::{
    encode_context, forecast_panel, model_covariates, point_forecast, sample_forecast,
    EncodedContext, Forecast, PointStatistic,
};
pub use train::{train, Adam, TrainConfig, TrainedModel};

/// Gaussian parameters on the scaled target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams {
    pub mu: f64,
    pub sigma: f64,
}

/// `ln(1 + e^x)`, stable for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Negative log-density of `z / scale` under `N(mu, sigma^2)`.
pub fn gaussian_nll(z: f64, theta: LikelihoodParams, scale: f64) -> Result<f64> {
    if !theta.sigma.is_finite() || theta.sigma <= 0.0 {
        return Err(Error::invalid(
            "sigma",
            format!("{} must be > 0", theta.sigma),
        ));
    }
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::invalid("scale", format!("{scale} must be > 0")));
    }
    if !z.is_finite() || !theta.mu.is_finite() {
        return Err(Error::invalid("likelihood", "non-finite operand"));
    }
    let y = z / scale;
    let r = y - theta.mu;
    let var = theta.sigma * theta.sigma;
    Ok(0.5 * (std::f64::consts::TAU * var).ln() + r * r / (2.0 * var))
}

/// ν = 1 + mean of the conditioning values.
pub fn series_scale(conditioning: &[f64]) -> Result<f64> {
    if conditioning.is_empty() {
        return Err(Error::invalid("conditioning", "empty range"));
    }
    Ok(1.0 + conditioning.iter().sum::<f64>() / conditioning.len() as f64)
}
