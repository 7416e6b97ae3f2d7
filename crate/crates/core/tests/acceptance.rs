//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Seeds are fixed below and were chosen before any run.

mod support;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cellcast_core::deepar::{
    sample_forecast, window_loss_and_grad, Architecture, NetworkParams, TrainedModel, WindowInput,
    FORMAT_VERSION,
};
use cellcast_core::eval::{
    interval_coverage, report, rmsle_per_series, ConstantMean, DeepAr, Forecaster, HoltWinters,
    SeasonalNaive,
};
use cellcast_core::lma::CovariatePanel;
use cellcast_core::{
    build_covariates, forecast_panel, generate_panel, lma_features, load_model, rmsle_pooled,
    save_model, split_panel, sweep, train, EvalReport, FeatureKind, HoltWintersConfig, LmaConfig,
    PointStatistic, SeriesPanel, SplitSpec, SynthConfig, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

const GRADIENT_SEED: u64 = 101;
const LMA_SEED: u64 = 202;
const RMSLE_SEED: u64 = 303;
const SINUSOID_SEED: u64 = 404;
const FORECAST_SEED: u64 = 505;
const SWEEP_SEED: u64 = 606;
const PERSIST_SEED: u64 = 707;
const ANCHOR_SEED: u64 = 808;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        passed,
        detail,
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(GRADIENT_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let arch = Architecture {
            input_size: 3,
            hidden_size: rng.random_range(1..=8),
            num_layers: rng.random_range(1..=2),
            sigma_floor: 1e-6,
        };
        let len = rng.random_range(1..=12);
        let mut params = NetworkParams::init(arch, rng.random()).unwrap();
        for v in params.values_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        let series: Vec<f64> = (0..=len).map(|_| rng.random_range(0.0..200.0)).collect();
        let cov: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..len).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let cov_refs: Vec<&[f64]> = cov.iter().map(Vec::as_slice).collect();
        let window = WindowInput {
            lags: &series[..len],
            covariates: &cov_refs,
            scale: 1.0 + series[..len].iter().sum::<f64>() / len as f64,
        };
        let targets = &series[1..];
        let (_, grad) = window_loss_and_grad(&window, targets, &params).unwrap();
        let numeric = numeric_gradient(&window, targets, &params, 1e-5);
        worst = worst.max(max_relative_error(grad.values(), &numeric, 1e-6));
    }
    outcome(
        1,
        "gradient correctness",
        worst < 1e-4,
        format!("max relative error {worst:.3e} over 20 configurations"),
    )
}

fn lma_equivalence() -> Outcome {
    let cfg = |cl, pl| LmaConfig {
        cl,
        pl,
        features: vec![FeatureKind::Mean, FeatureKind::Std],
        standardize: false,
        day_of_week: false,
    };
    let worked = lma_features(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0], &cfg(3, 2)).unwrap();
    let mut passed = worked[0] == [20.0, 20.0, 30.0, 50.0, 50.0, 55.0, 55.0, 55.0];
    let mut rng = ChaCha8Rng::seed_from_u64(LMA_SEED);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=200);
        let cl = rng.random_range(1..=n);
        let pl = rng.random_range(1..=cl);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5000.0)).collect();
        let got = lma_features(&z, &cfg(cl, pl)).unwrap();
        let (mean, std) = lma_oracle(&z, cl, pl);
        let same = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        };
        if !(same(&got[0], &mean) && same(&got[1], &std)) {
            mismatches += 1;
        }
    }
    passed &= mismatches == 0;
    outcome(
        2,
        "LMA oracle equivalence",
        passed,
        format!(
            "worked example {:?}, {mismatches}/200 mismatches",
            worked[0]
        ),
    )
}

fn rmsle_oracle_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(RMSLE_SEED);
    let (mut worst, mut symmetric, mut pooling): (f64, bool, f64) = (0.0, true, 0.0);
    for _ in 0..1000 {
        let rows = rng.random_range(1..=12);
        let cols = rng.random_range(1..=31);
        let mut matrix = || -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| {
                            if rng.random_bool(0.1) {
                                0.0
                            } else {
                                rng.random_range(0.0..1e5)
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let (a, p) = (matrix(), matrix());
        let pooled = rmsle_pooled(&a, &p).unwrap();
        worst = worst.max((pooled - rmsle_oracle(&a, &p)).abs());
        symmetric &= pooled == rmsle_pooled(&p, &a).unwrap();
        let per = rmsle_per_series(&a, &p).unwrap();
        let mean_sq = per.iter().map(|r| r * r).sum::<f64>() / per.len() as f64;
        pooling = pooling.max((pooled * pooled - mean_sq).abs() / mean_sq.max(1e-300));
    }
    outcome(
        3,
        "RMSLE oracle",
        worst <= 1e-12 && symmetric && pooling <= 1e-12,
        format!(
            "max |diff| {worst:.2e}, symmetric {symmetric}, pooling identity rel err {pooling:.2e}"
        ),
    )
}

fn sinusoid_panel() -> SeriesPanel {
    let amplitude = 200.0;
    generate_panel(&SynthConfig {
        num_series: 20,
        trend_slope_range: [0.0, 0.0],
        amplitude_range: [amplitude, amplitude],
        burst_rate: 0.0,
        noise_sigma: 0.02 * amplitude,
        seed: SINUSOID_SEED,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn learning_and_coverage() -> Vec<Outcome> {
    let panel = sinusoid_panel();
    let split = SplitSpec::holdout(panel.len(), 31).unwrap();
    let (train_panel, test_panel) = split_panel(&panel, split).unwrap();
    let lma = LmaConfig::default();
    let cfg = TrainConfig::default();
    let cov = build_covariates(&train_panel, &lma).unwrap();
    let model = train(&train_panel, &cov, &cfg).unwrap();

    let log = &model.training_log;
    let (first, last) = (log[0], log[log.len() - 1]);
    let models: Vec<Box<dyn Forecaster>> = vec![
        Box::new(DeepAr {
            name: "lma_deepar".into(),
            model: model.clone(),
            num_samples: 100,
            statistic: PointStatistic::Median,
        }),
        Box::new(ConstantMean),
    ];
    let report = sweep(&models, &panel, split, &[15], FORECAST_SEED).unwrap();
    let deepar = report.model("lma_deepar").map(|m| m.pooled[0]);
    let mean = report.model("mean").map(|m| m.pooled[0]);
    let learned = last < first && matches!((deepar, mean), (Some(d), Some(m)) if d < m);

    let forecasts = forecast_panel(&model, &train_panel, 100, FORECAST_SEED).unwrap();
    let actual: Vec<Vec<f64>> = test_panel.rows().iter().map(|r| r[..15].to_vec()).collect();
    let band = |q: f64| -> Vec<Vec<f64>> {
        forecasts
            .iter()
            .map(|f| f.quantile(q)[..15].to_vec())
            .collect()
    };
    let coverage = interval_coverage(&actual, &band(0.1), &band(0.9)).unwrap();

    vec![
        outcome(
            4,
            "learning sanity",
            learned,
            format!(
                "NLL epoch 1 {first:.4} -> epoch {} {last:.4}; RMSLE@15 model {:.4} vs mean {:.4}",
                log.len(),
                deepar.unwrap_or(f64::NAN),
                mean.unwrap_or(f64::NAN)
            ),
        ),
        outcome(
            5,
            "coverage sanity",
            (0.60..=0.95).contains(&coverage),
            format!("80% interval coverage {coverage:.4}"),
        ),
    ]
}

/// Trains both recurrent variants on the default bursty panel, sweeps steps
/// 15..=31 and writes the report files into `dir`.
fn directional_sweep(dir: &Path) -> EvalReport {
    let panel = generate_panel(&SynthConfig::default()).unwrap();
    let split = SplitSpec::holdout(panel.len(), 31).unwrap();
    let (train_panel, _) = split_panel(&panel, split).unwrap();
    let cfg = TrainConfig::default();
    let with_lma = build_covariates(&train_panel, &LmaConfig::default()).unwrap();
    let without = CovariatePanel::empty(&train_panel, cfg.horizon);
    let deepar = |name: &str, model: TrainedModel| -> Box<dyn Forecaster> {
        Box::new(DeepAr {
            name: name.into(),
            model,
            num_samples: 100,
            statistic: PointStatistic::Median,
        })
    };
    let models = vec![
        deepar("lma_deepar", train(&train_panel, &with_lma, &cfg).unwrap()),
        deepar("deepar", train(&train_panel, &without, &cfg).unwrap()),
        Box::new(SeasonalNaive { season: 7 }),
        Box::new(HoltWinters {
            config: HoltWintersConfig::default(),
        }),
        Box::new(ConstantMean),
    ];
    let steps: Vec<usize> = (15..=31).collect();
    let report = sweep(&models, &panel, split, &steps, SWEEP_SEED).unwrap();
    report::write_report(&report, dir, true).unwrap();
    report
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read(&path).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn directional_and_determinism() -> Vec<Outcome> {
    let first_dir = tempfile::tempdir().unwrap();
    let second_dir = tempfile::tempdir().unwrap();
    let report = directional_sweep(first_dir.path());

    let mean_of = |name: &str| report.model(name).map(|m| m.pooled_mean);
    let (lma, plain) = (mean_of("lma_deepar"), mean_of("deepar"));
    let directional = matches!((lma, plain), (Some(l), Some(p)) if l <= p);
    let mut summary: Vec<String> = report
        .models
        .iter()
        .map(|m| format!("{} {:.4}", m.name, m.pooled_mean))
        .collect();
    summary.extend(
        report
            .failures
            .iter()
            .map(|f| format!("{} failed: {}", f.name, f.message)),
    );

    let mut degradation = Vec::new();
    let mut degrades = true;
    for name in ["lma_deepar", "deepar"] {
        match report.model(name) {
            Some(m) => {
                let (s15, s31) = (m.pooled[0], m.pooled[m.pooled.len() - 1]);
                degrades &= s31 >= s15;
                degradation.push(format!("{name} {s15:.4} -> {s31:.4}"));
            }
            None => degrades = false,
        }
    }

    directional_sweep(second_dir.path());
    let (a, b) = (
        read_dir_sorted(first_dir.path()),
        read_dir_sorted(second_dir.path()),
    );
    let identical = a == b;

    vec![
        outcome(
            6,
            "directional accuracy, LMA covariates vs none",
            directional,
            format!("mean pooled RMSLE steps 15-31: {}", summary.join(", ")),
        ),
        outcome(
            7,
            "horizon degradation",
            degrades,
            format!("step 15 -> 31: {}", degradation.join(", ")),
        ),
        outcome(
            8,
            "end-to-end determinism",
            identical,
            format!("{} report files compared byte for byte", a.len()),
        ),
    ]
}

fn persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(PERSIST_SEED);
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    for k in 0..10 {
        let with_lma = rng.random_bool(0.5);
        let horizon = rng.random_range(1..=10);
        let context_length = rng.random_range(horizon..=20);
        let lma_config = with_lma.then(|| LmaConfig {
            cl: context_length,
            pl: horizon,
            ..LmaConfig::default()
        });
        let channels = if with_lma { 2 } else { 0 };
        let cfg = TrainConfig {
            context_length,
            horizon,
            hidden_size: rng.random_range(1..=12),
            num_layers: rng.random_range(1..=3),
            seed: rng.random(),
            ..TrainConfig::default()
        };
        let mut params = NetworkParams::init(cfg.architecture(channels), cfg.seed).unwrap();
        for v in params.values_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let model = TrainedModel {
            params,
            train_config: cfg,
            lma_config,
            training_log: vec![rng.random(), rng.random()],
            format_version: FORMAT_VERSION,
        };
        let n = context_length + rng.random_range(0..10);
        let conditioning: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3000.0)).collect();
        let cov: Vec<Vec<f64>> = (0..channels)
            .map(|_| {
                (0..n + horizon)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect()
            })
            .collect();
        let seed = rng.random();
        let before = sample_forecast(&model, &conditioning, &cov, 20, seed).unwrap();
        let path = dir.path().join(format!("model{k}.bin"));
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let after = sample_forecast(&loaded, &conditioning, &cov, 20, seed).unwrap();
        let bits = |f: &cellcast_core::Forecast| -> Vec<u64> {
            f.samples.iter().flatten().map(|v| v.to_bits()).collect()
        };
        if loaded == model && bits(&before) == bits(&after) {
            identical += 1;
        }
    }
    outcome(
        9,
        "persistence round trip",
        identical == 10,
        format!("{identical}/10 models reproduce forecasts bit for bit"),
    )
}

fn baseline_anchor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(ANCHOR_SEED);
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|_| {
            let pattern: Vec<f64> = (0..7).map(|_| rng.random_range(100.0..2000.0)).collect();
            (0..120).map(|t| pattern[t % 7]).collect()
        })
        .collect();
    let panel = panel_from_rows(rows);
    let split = SplitSpec::holdout(panel.len(), 31).unwrap();
    let models: Vec<Box<dyn Forecaster>> = vec![Box::new(SeasonalNaive { season: 7 })];
    let steps: Vec<usize> = (15..=31).collect();
    let report = sweep(&models, &panel, split, &steps, 0).unwrap();
    let pooled = report
        .model("seasonal_naive")
        .map(|m| m.pooled.clone())
        .unwrap_or_default();
    outcome(
        10,
        "seasonal naive anchor",
        pooled.len() == steps.len() && pooled.iter().all(|v| *v == 0.0),
        format!("pooled RMSLE per step {pooled:?}"),
    )
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut timed = |run: &dyn Fn() -> Vec<Outcome>| {
        let start = Instant::now();
        let results = run();
        let secs = start.elapsed().as_secs_f64();
        for o in results {
            println!(
                "criterion {:>2} {}: {} ({}) [{secs:.1}s]",
                o.id,
                o.name,
                if o.passed { "PASS" } else { "FAIL" },
                o.detail
            );
            outcomes.push(o.passed);
        }
    };
    timed(&|| vec![gradient_check()]);
    timed(&|| vec![lma_equivalence()]);
    timed(&|| vec![rmsle_oracle_check()]);
    timed(&learning_and_coverage);
    timed(&directional_and_determinism);
    timed(&|| vec![persistence()]);
    timed(&|| vec![baseline_anchor()]);

    let failed = outcomes.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
