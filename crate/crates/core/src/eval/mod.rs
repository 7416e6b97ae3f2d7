//! Evaluation: RMSLE metrics, the horizon sweep and report files.

pub mod metrics;
pub mod report;
pub mod sweep;

pub use metrics::{interval_coverage, rmsle_per_series, rmsle_pooled, stability_std};
pub use report::{write_report, Table};
pub use sweep::{
    score, sweep, ConstantMean, DeepAr, EvalReport, Forecaster, HoltWinters, ModelFailure,
    ModelReport, SeasonalNaive,
};
