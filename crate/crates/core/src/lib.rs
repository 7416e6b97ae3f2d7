//! Forecasting engine for daily base-station cell traffic.
//!
//! The pipeline: load or synthesise a [`SeriesPanel`], derive local moving
//! average covariates with [`build_covariates`], fit the recurrent likelihood
//! model with [`train`], draw trajectories with [`sample_forecast`], and score
//! models over a range of horizons with [`sweep`].

pub mod baselines;
pub mod deepar;
pub mod error;
pub mod eval;
pub mod lma;
pub mod panel;
pub mod rng;
pub mod synthgen;

pub use baselines::{holt_winters, seasonal_naive, HoltWintersConfig};
pub use deepar::{
    forecast_panel, load_model, point_forecast, sample_forecast, save_model, train, Forecast,
    NetworkParams, PointStatistic, TrainConfig, TrainedModel,
};
pub use error::{Error, Result};
pub use eval::{rmsle_per_series, rmsle_pooled, stability_std, sweep, EvalReport, Forecaster};
pub use lma::{build_covariates, lma_features, CovariatePanel, FeatureKind, LmaConfig};
pub use panel::{load_panel, split_panel, write_panel, SeriesPanel, SplitSpec};
pub use synthgen::{generate_panel, SynthConfig};
