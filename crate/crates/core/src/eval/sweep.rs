//! Forecast-horizon sweep: pooled RMSLE and per-series dispersion for every
//! model at every evaluated step.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::metrics::{rmsle_per_series, rmsle_pooled, stability_std};
use crate::baselines::{holt_winters, mean_forecast, seasonal_naive, HoltWintersConfig};
use crate::deepar::{forecast_panel, point_forecast, PointStatistic, TrainedModel};
use crate::error::{Error, Result};
use crate::panel::{split_panel, SeriesPanel, SplitSpec};
use crate::rng::GENERATOR_DESCRIPTION;

/// Anything that produces an `N × horizon` point forecast from a training panel.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;

    /// Point forecasts, one row per series of `train`, in panel order.
    fn forecast(&self, train: &SeriesPanel, horizon: usize, seed: u64) -> Result<Vec<Vec<f64>>>;

    /// Settings recorded in the report's provenance block.
    fn describe(&self) -> Value {
        Value::Null
    }
}

fn per_series<F>(train: &SeriesPanel, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    (0..train.num_series())
        .into_par_iter()
        .map(|i| f(train.series(i)))
        .collect()
}

pub struct SeasonalNaive {
    pub season: usize,
}

impl Forecaster for SeasonalNaive {
    fn name(&self) -> &str {
        "seasonal_naive"
    }

    fn forecast(&self, train: &SeriesPanel, horizon: usize, _seed: u64) -> Result<Vec<Vec<f64>>> {
        per_series(train, |z| seasonal_naive(z, self.season, horizon))
    }

    fn describe(&self) -> Value {
        json!({ "season": self.season })
    }
}

pub struct HoltWinters {
    pub config: HoltWintersConfig,
}

impl Forecaster for HoltWinters {
    fn name(&self) -> &str {
        "holt_winters"
    }

    fn forecast(&self, train: &SeriesPanel, horizon: usize, _seed: u64) -> Result<Vec<Vec<f64>>> {
        per_series(train, |z| holt_winters(z, &self.config, horizon))
    }

    fn describe(&self) -> Value {
        serde_json::to_value(&self.config).unwrap_or(Value::Null)
    }
}

/// Flat forecast at each series' training mean.
pub struct ConstantMean;

impl Forecaster for ConstantMean {
    fn name(&self) -> &str {
        "mean"
    }

    fn forecast(&self, train: &SeriesPanel, horizon: usize, _seed: u64) -> Result<Vec<Vec<f64>>> {
        per_series(train, |z| mean_forecast(z, horizon))
    }
}

/// A trained recurrent model reduced to point forecasts.
pub struct DeepAr {
    pub name: String,
    pub model: TrainedModel,
    pub num_samples: usize,
    pub statistic: PointStatistic,
}

impl Forecaster for DeepAr {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, train: &SeriesPanel, horizon: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if horizon > self.model.train_config.horizon {
            return Err(Error::invalid(
                "horizon",
                format!(
                    "model `{}` was trained for {} steps, {horizon} requested",
                    self.name, self.model.train_config.horizon
                ),
            ));
        }
        forecast_panel(&self.model, train, self.num_samples, seed)?
            .iter()
            .map(|f| {
                let mut p = point_forecast(f, self.statistic)?;
                p.truncate(horizon);
                Ok(p)
            })
            .collect()
    }

    fn describe(&self) -> Value {
        json!({
            "num_samples": self.num_samples,
            "point_statistic": self.statistic.to_string(),
            "train_config": self.model.train_config,
            "lma_config": self.model.lma_config,
            "training_log": self.model.training_log,
        })
    }
}

/// Results of one model across all evaluated steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub name: String,
    /// Pooled RMSLE per step.
    pub pooled: Vec<f64>,
    pub pooled_mean: f64,
    /// Population std of per-series RMSLE per step.
    pub stability: Vec<f64>,
    pub stability_mean: f64,
    /// `series × step` RMSLE.
    pub per_series: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFailure {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub steps: Vec<usize>,
    pub series_ids: Vec<String>,
    pub models: Vec<ModelReport>,
    pub failures: Vec<ModelFailure>,
    pub provenance: BTreeMap<String, Value>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Scores an `N × max(steps)` point forecast against the test range.
pub fn score(
    name: &str,
    actual: &[Vec<f64>],
    predicted: &[Vec<f64>],
    steps: &[usize],
) -> Result<ModelReport> {
    let clamped: Vec<Vec<f64>> = predicted
        .iter()
        .map(|row| row.iter().map(|v| v.max(0.0)).collect())
        .collect();
    let mut pooled = Vec::with_capacity(steps.len());
    let mut stability = Vec::with_capacity(steps.len());
    let mut per_series = vec![Vec::with_capacity(steps.len()); actual.len()];
    for &s in steps {
        let a: Vec<Vec<f64>> = actual.iter().map(|r| r[..s].to_vec()).collect();
        let p: Vec<Vec<f64>> = clamped.iter().map(|r| r[..s].to_vec()).collect();
        pooled.push(rmsle_pooled(&a, &p)?);
        let rows = rmsle_per_series(&a, &p)?;
        stability.push(stability_std(&rows)?);
        for (acc, v) in per_series.iter_mut().zip(rows) {
            acc.push(v);
        }
    }
    Ok(ModelReport {
        name: name.to_string(),
        pooled_mean: mean(&pooled),
        stability_mean: mean(&stability),
        pooled,
        stability,
        per_series,
    })
}

/// Runs every model once at the largest step and scores each step on the
/// prefix of that forecast. A failing model is recorded in `failures` and the
/// remaining models still run.
pub fn sweep(
    models: &[Box<dyn Forecaster>],
    panel: &SeriesPanel,
    split: SplitSpec,
    steps: &[usize],
    seed: u64,
) -> Result<EvalReport> {
    let max_step = *steps
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("steps", "no steps to evaluate"))?;
    if steps.contains(&0) {
        return Err(Error::invalid("steps", "steps must be >= 1"));
    }
    if max_step > split.horizon() {
        return Err(Error::invalid(
            "steps",
            format!(
                "step {max_step} exceeds the test range of {} days",
                split.horizon()
            ),
        ));
    }
    let (train, test) = split_panel(panel, split)?;
    let mut report = EvalReport {
        steps: steps.to_vec(),
        series_ids: panel.series_ids().to_vec(),
        models: Vec::new(),
        failures: Vec::new(),
        provenance: BTreeMap::new(),
    };

    let mut described = serde_json::Map::new();
    for model in models {
        described.insert(model.name().to_string(), model.describe());
        let outcome = model
            .forecast(&train, max_step, seed)
            .and_then(|pred| {
                if pred.len() != test.num_series() || pred.iter().any(|r| r.len() < max_step) {
                    return Err(Error::Shape(format!(
                        "expected {} × {max_step} forecasts",
                        test.num_series()
                    )));
                }
                if pred.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("forecast", "non-finite prediction"));
                }
                Ok(pred)
            })
            .and_then(|pred| score(model.name(), test.rows(), &pred, steps));
        match outcome {
            Ok(r) => report.models.push(r),
            Err(e) => report.failures.push(ModelFailure {
                name: model.name().to_string(),
                message: e.to_string(),
            }),
        }
    }

    let p = &mut report.provenance;
    p.insert("seed".into(), json!(seed));
    p.insert("steps".into(), json!(steps));
    p.insert(
        "split".into(),
        json!({ "t0": split.t0(), "T": split.last() }),
    );
    p.insert(
        "panel".into(),
        json!({
            "num_series": panel.num_series(),
            "length": panel.len(),
            "start_date": panel.start_date().to_string(),
        }),
    );
    p.insert("models".into(), Value::Object(described));
    p.insert("rng".into(), json!(GENERATOR_DESCRIPTION));
    p.insert("log_base".into(), json!("natural"));
    p.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    /// Returns the held-out values it was given.
    struct Oracle(SeriesPanel);

    impl Forecaster for Oracle {
        fn name(&self) -> &str {
            "oracle"
        }
        fn forecast(&self, _: &SeriesPanel, horizon: usize, _: u64) -> Result<Vec<Vec<f64>>> {
            Ok(self
                .0
                .rows()
                .iter()
                .map(|r| r[..horizon].to_vec())
                .collect())
        }
    }

    struct Broken;

    impl Forecaster for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn forecast(&self, _: &SeriesPanel, _: usize, _: u64) -> Result<Vec<Vec<f64>>> {
            Err(Error::invalid("model", "always fails"))
        }
    }

    fn panel() -> SeriesPanel {
        let values = (0..4)
            .map(|i| {
                (0..60)
                    .map(|t| 10.0 + ((t * (i + 1)) % 7) as f64 * 3.0)
                    .collect()
            })
            .collect();
        let ids = (0..4).map(|i| format!("s{i}")).collect();
        SeriesPanel::new(ids, NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn oracle_scores_zero_and_failures_are_isolated() {
        let p = panel();
        let split = SplitSpec::holdout(p.len(), 20).unwrap();
        let (_, test) = split_panel(&p, split).unwrap();
        let models: Vec<Box<dyn Forecaster>> = vec![
            Box::new(Broken),
            Box::new(Oracle(test)),
            Box::new(ConstantMean),
        ];
        let steps: Vec<usize> = (5..=20).collect();
        let r = sweep(&models, &p, split, &steps, 1).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].name, "broken");
        let o = r.model("oracle").unwrap();
        assert!(o.pooled.iter().chain(&o.stability).all(|v| *v == 0.0));
        assert_eq!(o.pooled_mean, 0.0);
        assert_eq!(r.model("mean").unwrap().pooled.len(), 16);
    }

    #[test]
    fn single_step_entry_matches_direct_rmsle() {
        let p = panel();
        let split = SplitSpec::holdout(p.len(), 10).unwrap();
        let (train, test) = split_panel(&p, split).unwrap();
        let models: Vec<Box<dyn Forecaster>> = vec![Box::new(ConstantMean)];
        let r = sweep(&models, &p, split, &[7], 0).unwrap();
        let pred = ConstantMean.forecast(&train, 7, 0).unwrap();
        let actual: Vec<Vec<f64>> = test.rows().iter().map(|r| r[..7].to_vec()).collect();
        assert_eq!(r.models[0].pooled[0], rmsle_pooled(&actual, &pred).unwrap());
    }

    #[test]
    fn periodic_panel_gives_seasonal_naive_zero() {
        let p = panel();
        let split = SplitSpec::holdout(p.len(), 14).unwrap();
        let models: Vec<Box<dyn Forecaster>> = vec![Box::new(SeasonalNaive { season: 7 })];
        let r = sweep(&models, &p, split, &[1, 7, 14], 0).unwrap();
        assert!(r.models[0].pooled.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn prefix_property_and_mean_rows() {
        let p = panel();
        let split = SplitSpec::holdout(p.len(), 12).unwrap();
        let (train, test) = split_panel(&p, split).unwrap();
        let pred = HoltWinters {
            config: HoltWintersConfig::default(),
        }
        .forecast(&train, 12, 0)
        .unwrap();
        let steps: Vec<usize> = (1..=12).collect();
        let full = score("hw", test.rows(), &pred, &steps).unwrap();
        for &s in &steps {
            let a: Vec<Vec<f64>> = test.rows().iter().map(|r| r[..s].to_vec()).collect();
            let pr: Vec<Vec<f64>> = pred
                .iter()
                .map(|r| r[..s].iter().map(|v| v.max(0.0)).collect())
                .collect();
            assert_eq!(full.pooled[s - 1], rmsle_pooled(&a, &pr).unwrap());
        }
        assert_eq!(full.pooled_mean, full.pooled.iter().sum::<f64>() / 12.0);
        assert_eq!(
            full.stability_mean,
            full.stability.iter().sum::<f64>() / 12.0
        );
    }

    #[test]
    fn rejects_steps_beyond_test_range() {
        let p = panel();
        let split = SplitSpec::holdout(p.len(), 10).unwrap();
        let models: Vec<Box<dyn Forecaster>> = vec![Box::new(ConstantMean)];
        assert!(sweep(&models, &p, split, &[11], 0).is_err());
        assert!(sweep(&models, &p, split, &[], 0).is_err());
        assert!(sweep(&models, &p, split, &[0, 3], 0).is_err());
    }
}
