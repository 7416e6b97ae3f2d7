use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{HiddenState, Stepper};
use super::params::NetworkParams;
use super::series_scale;
use super::train::TrainedModel;
use crate::error::{Error, Result};
use crate::lma::{build_covariates, CovariatePanel};
use crate::panel::SeriesPanel;
use crate::rng::{derive_seed, stream, stream_rng};

/// Sampled trajectories for one series, in data units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    /// `S × horizon`, every value finite and `>= 0`.
    pub samples: Vec<Vec<f64>>,
    /// ν used to map the network's scaled outputs back to data units.
    pub scale: f64,
    pub seed: u64,
}

impl Forecast {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn horizon(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Per-step empirical quantile (`q` in [0, 1], linear interpolation).
    pub fn quantile(&self, q: f64) -> Vec<f64> {
        (0..self.horizon())
            .map(|h| {
                let mut col: Vec<f64> = self.samples.iter().map(|s| s[h]).collect();
                col.sort_by(f64::total_cmp);
                let pos = q.clamp(0.0, 1.0) * (col.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                col[lo] + (col[hi] - col[lo]) * (pos - lo as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PointStatistic {
    #[default]
    Median,
    Mean,
}

impl std::fmt::Display for PointStatistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointStatistic::Median => "median",
            PointStatistic::Mean => "mean",
        })
    }
}

/// Per-step median or mean across trajectories.
pub fn point_forecast(f: &Forecast, statistic: PointStatistic) -> Result<Vec<f64>> {
    if f.samples.is_empty() || f.horizon() == 0 {
        return Err(Error::invalid("forecast", "no samples"));
    }
    let s = f.samples.len();
    Ok((0..f.horizon())
        .map(|h| {
            let mut col: Vec<f64> = f.samples.iter().map(|row| row[h]).collect();
            match statistic {
                PointStatistic::Mean => col.iter().sum::<f64>() / s as f64,
                PointStatistic::Median => {
                    col.sort_by(f64::total_cmp);
                    if s % 2 == 1 {
                        col[s / 2]
                    } else {
                        0.5 * (col[s / 2 - 1] + col[s / 2])
                    }
                }
            }
        })
        .collect())
}

/// Decoder start state produced by running the network over the last
/// `context_length` conditioning steps.
#[derive(Debug, Clone)]
pub struct EncodedContext<'p> {
    params: &'p NetworkParams,
    pub state: HiddenState,
    /// Last observed value divided by `scale`; the first decoder input.
    pub last_scaled: f64,
    pub scale: f64,
}

impl<'p> EncodedContext<'p> {
    /// Parameters used for encoding; decoding must use the same set.
    pub fn params(&self) -> &'p NetworkParams {
        self.params
    }
}

/// Encodes the final `context_length` values of `conditioning`. `channels`
/// must be aligned with `conditioning` (index 0 = first conditioning day).
pub fn encode_context<'p>(
    params: &'p NetworkParams,
    conditioning: &[f64],
    channels: &[Vec<f64>],
    context_length: usize,
) -> Result<EncodedContext<'p>> {
    let n = conditioning.len();
    if context_length == 0 || n < context_length {
        return Err(Error::invalid(
            "conditioning",
            format!("{n} values for a context of {context_length}"),
        ));
    }
    if params.arch().input_size != 1 + channels.len() {
        return Err(Error::Shape(format!(
            "model takes {} covariate channels, got {}",
            params.arch().input_size - 1,
            channels.len()
        )));
    }
    if let Some(ch) = channels.iter().find(|ch| ch.len() < n) {
        return Err(Error::Shape(format!(
            "covariate channel of length {} shorter than conditioning {n}",
            ch.len()
        )));
    }
    if conditioning.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(
            "conditioning",
            "values must be finite and >= 0",
        ));
    }
    let start = n - context_length;
    let scale = series_scale(&conditioning[start..])?;
    let mut state = HiddenState::zeros(params.arch());
    let mut stepper = Stepper::new(params);
    let mut input = Vec::with_capacity(1 + channels.len());
    for t in start..n {
        input.clear();
        input.push(if t == 0 {
            0.0
        } else {
            conditioning[t - 1] / scale
        });
        input.extend(channels.iter().map(|ch| ch[t]));
        stepper.step(&mut state, &input);
    }
    Ok(EncodedContext {
        params,
        state,
        last_scaled: conditioning[n - 1] / scale,
        scale,
    })
}

fn sample_trajectory(
    enc: &EncodedContext<'_>,
    channels: &[Vec<f64>],
    offset: usize,
    horizon: usize,
    seed: u64,
    index: u64,
) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream::TRAJECTORY, index);
    let mut state = enc.state.clone();
    let mut stepper = Stepper::new(enc.params());
    let mut input = Vec::with_capacity(1 + channels.len());
    let mut prev = enc.last_scaled;
    (0..horizon)
        .map(|h| {
            input.clear();
            input.push(prev);
            input.extend(channels.iter().map(|ch| ch[offset + h]));
            let theta = stepper.step(&mut state, &input);
            let eps: f64 = StandardNormal.sample(&mut rng);
            let draw = theta.mu + theta.sigma * eps;
            prev = draw;
            (draw * enc.scale).max(0.0)
        })
        .collect()
}

/// Draws `num_samples` ancestral trajectories over the model's horizon.
///
/// `channels` cover the conditioning range followed by at least `horizon`
/// future steps. Trajectory `k` uses its own stream derived from
/// `(seed, k)`, so the result does not depend on evaluation order.
pub fn sample_forecast(
    model: &TrainedModel,
    conditioning: &[f64],
    channels: &[Vec<f64>],
    num_samples: usize,
    seed: u64,
) -> Result<Forecast> {
    if num_samples == 0 {
        return Err(Error::invalid("sample count", "S must be >= 1"));
    }
    let horizon = model.train_config.horizon;
    let n = conditioning.len();
    if let Some(ch) = channels.iter().find(|ch| ch.len() < n + horizon) {
        return Err(Error::Shape(format!(
            "covariate channel of length {} cannot cover {n} + {horizon} steps",
            ch.len()
        )));
    }
    let enc = encode_context(
        &model.params,
        conditioning,
        channels,
        model.train_config.context_length,
    )?;
    let samples = (0..num_samples as u64)
        .into_par_iter()
        .map(|k| sample_trajectory(&enc, channels, n, horizon, seed, k))
        .collect();
    Ok(Forecast {
        samples,
        scale: enc.scale,
        seed,
    })
}

/// Covariates the model expects for a conditioning panel.
pub fn model_covariates(model: &TrainedModel, panel: &SeriesPanel) -> Result<CovariatePanel> {
    match &model.lma_config {
        Some(cfg) => build_covariates(panel, cfg),
        None => Ok(CovariatePanel::empty(panel, model.train_config.horizon)),
    }
}

/// One forecast per series of `panel`, conditioning on its full length.
/// Series `i` samples with seed `derive_seed(seed, FORECAST, i)`.
pub fn forecast_panel(
    model: &TrainedModel,
    panel: &SeriesPanel,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<Forecast>> {
    let cov = model_covariates(model, panel)?;
    (0..panel.num_series())
        .into_par_iter()
        .map(|i| {
            let series_seed = derive_seed(seed, stream::FORECAST, i as u64);
            sample_forecast(
                model,
                panel.series(i),
                cov.series(i),
                num_samples,
                series_seed,
            )
            .map_err(|e| Error::Series {
                series_id: panel.series_ids()[i].clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deepar::{train, TrainConfig};
    use crate::lma::LmaConfig;
    use chrono::NaiveDate;

    fn forecast(samples: Vec<Vec<f64>>) -> Forecast {
        Forecast {
            samples,
            scale: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn point_statistics() {
        let f = forecast(vec![vec![1.0], vec![9.0], vec![2.0]]);
        assert_eq!(
            point_forecast(&f, PointStatistic::Median).unwrap(),
            vec![2.0]
        );
        assert_eq!(point_forecast(&f, PointStatistic::Mean).unwrap(), vec![4.0]);
        let even = forecast(vec![vec![1.0], vec![9.0], vec![2.0], vec![4.0]]);
        assert_eq!(
            point_forecast(&even, PointStatistic::Median).unwrap(),
            vec![3.0]
        );
        let one = forecast(vec![vec![3.0, 1.0, 4.0]]);
        assert_eq!(
            point_forecast(&one, PointStatistic::Median).unwrap(),
            vec![3.0, 1.0, 4.0]
        );
        assert!(point_forecast(&forecast(vec![]), PointStatistic::Mean).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let f = forecast((0..=10).map(|v| vec![v as f64]).collect());
        assert_eq!(f.quantile(0.1), vec![1.0]);
        assert_eq!(f.quantile(0.95), vec![9.5]);
    }

    fn model(horizon: usize) -> (TrainedModel, SeriesPanel) {
        let values = (0..2)
            .map(|i| (0..24).map(|t| 20.0 + ((t * (i + 2)) % 5) as f64).collect())
            .collect();
        let panel = SeriesPanel::new(
            vec!["a".into(), "b".into()],
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            values,
        )
        .unwrap();
        let lma = LmaConfig {
            cl: 6,
            pl: horizon,
            ..LmaConfig::default()
        };
        let cov = build_covariates(&panel, &lma).unwrap();
        let cfg = TrainConfig {
            context_length: 6,
            horizon,
            epochs: 1,
            hidden_size: 4,
            ..TrainConfig::default()
        };
        (train(&panel, &cov, &cfg).unwrap(), panel)
    }

    #[test]
    fn sample_shape_and_determinism() {
        let (m, panel) = model(5);
        let cov = model_covariates(&m, &panel).unwrap();
        let f = sample_forecast(&m, panel.series(0), cov.series(0), 3, 11).unwrap();
        assert_eq!(f.num_samples(), 3);
        assert_eq!(f.horizon(), 5);
        assert!(f
            .samples
            .iter()
            .flatten()
            .all(|v| v.is_finite() && *v >= 0.0));
        let g = sample_forecast(&m, panel.series(0), cov.series(0), 3, 11).unwrap();
        assert_eq!(f, g);
        let h = sample_forecast(&m, panel.series(0), cov.series(0), 3, 12).unwrap();
        assert_ne!(f, h);
    }

    #[test]
    fn trajectories_are_order_independent() {
        let (m, panel) = model(4);
        let cov = model_covariates(&m, &panel).unwrap();
        let f = sample_forecast(&m, panel.series(1), cov.series(1), 6, 3).unwrap();
        let enc = encode_context(&m.params, panel.series(1), cov.series(1), 6).unwrap();
        let n = panel.len();
        for k in (0..6).rev() {
            let t = sample_trajectory(&enc, cov.series(1), n, 4, 3, k);
            assert_eq!(t, f.samples[k as usize]);
        }
        // A prefix of the sample set is the smaller sample set.
        let small = sample_forecast(&m, panel.series(1), cov.series(1), 2, 3).unwrap();
        assert_eq!(small.samples[..], f.samples[..2]);
    }

    #[test]
    fn encoder_and_decoder_share_parameters() {
        let (m, panel) = model(4);
        let cov = model_covariates(&m, &panel).unwrap();
        let enc = encode_context(&m.params, panel.series(0), cov.series(0), 6).unwrap();
        assert!(std::ptr::eq(enc.params(), &m.params));
        let stepper = Stepper::new(enc.params());
        assert!(std::ptr::eq(stepper.params(), &m.params));
    }

    #[test]
    fn rejects_bad_requests() {
        let (m, panel) = model(4);
        let cov = model_covariates(&m, &panel).unwrap();
        assert!(sample_forecast(&m, panel.series(0), cov.series(0), 0, 1).is_err());
        assert!(sample_forecast(&m, &panel.series(0)[..5], cov.series(0), 1, 1).is_err());
        let short: Vec<Vec<f64>> = cov.series(0).iter().map(|c| c[..25].to_vec()).collect();
        assert!(sample_forecast(&m, panel.series(0), &short, 1, 1).is_err());
        assert!(sample_forecast(&m, panel.series(0), &[], 1, 1).is_err());
    }

    #[test]
    fn forecast_panel_seeds_per_series() {
        let (m, panel) = model(4);
        let all = forecast_panel(&m, &panel, 4, 99).unwrap();
        assert_eq!(all.len(), 2);
        let cov = model_covariates(&m, &panel).unwrap();
        let direct = sample_forecast(
            &m,
            panel.series(1),
            cov.series(1),
            4,
            derive_seed(99, stream::FORECAST, 1),
        )
        .unwrap();
        assert_eq!(all[1], direct);
    }
}
