//! One function per subcommand. Each writes its outputs plus a provenance
//! sidecar recording the config hash, seeds and input digests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cellcast_core::deepar::{forecast_panel, point_forecast, TrainedModel};
use cellcast_core::eval::{
    report, score, ConstantMean, DeepAr, EvalReport, Forecaster, HoltWinters, SeasonalNaive,
};
use cellcast_core::lma::CovariatePanel;
use cellcast_core::rng::GENERATOR_DESCRIPTION;
use cellcast_core::{
    build_covariates, generate_panel, load_model, load_panel, save_model, split_panel, sweep,
    train, write_panel, SeriesPanel, SplitSpec,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
        }
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `<file>.provenance.json` next to `output`.
fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    output.with_file_name(name)
}

fn provenance(
    cfg: &RunConfig,
    command: &str,
    inputs: &[&Path],
    extra: Value,
) -> Result<Value, CliError> {
    let mut digests = BTreeMap::new();
    for p in inputs {
        digests.insert(p.display().to_string(), file_sha256(p)?);
    }
    Ok(json!({
        "command": command,
        "config_sha256": cfg.sha256(),
        "config": cfg.to_json(),
        "inputs_sha256": digests,
        "rng": GENERATOR_DESCRIPTION,
        "version": env!("CARGO_PKG_VERSION"),
        "details": extra,
    }))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn split_of(cfg: &RunConfig, panel: &SeriesPanel) -> Result<SplitSpec, CliError> {
    SplitSpec::holdout(panel.len(), cfg.split.test_days)
        .map_err(|e| CliError::Validation(format!("split.test_days: {e}")))
}

fn training_range(cfg: &RunConfig, panel: &SeriesPanel) -> Result<SeriesPanel, CliError> {
    Ok(split_panel(panel, split_of(cfg, panel)?)?.0)
}

pub fn generate(cfg: &RunConfig) -> Result<String, CliError> {
    let panel = generate_panel(&cfg.synth)?;
    let out = &cfg.io.panel;
    ensure_parent(out)?;
    write_panel(&panel, out)?;
    let extra = json!({ "seed": cfg.synth.seed, "output_sha256": file_sha256(out)? });
    write_json(
        &sidecar_path(out),
        &provenance(cfg, "generate", &[], extra)?,
    )?;
    Ok(format!(
        "wrote {} series x {} days to {}",
        panel.num_series(),
        panel.len(),
        out.display()
    ))
}

pub fn covariates(cfg: &RunConfig) -> Result<String, CliError> {
    let panel = load_panel(&cfg.io.panel)?;
    let train_panel = training_range(cfg, &panel)?;
    let cov = build_covariates(&train_panel, &cfg.lma)?;
    let out = &cfg.io.covariates;
    ensure_parent(out)?;
    cov.write_csv(out)?;
    let extra = json!({ "train_days": train_panel.len(), "output_sha256": file_sha256(out)? });
    write_json(
        &sidecar_path(out),
        &provenance(cfg, "covariates", &[&cfg.io.panel], extra)?,
    )?;
    Ok(format!(
        "wrote {} channels for {} series to {}",
        cov.num_channels(),
        cov.num_series(),
        out.display()
    ))
}

fn fit(cfg: &RunConfig, train_panel: &SeriesPanel, lma: bool) -> Result<TrainedModel, CliError> {
    let cov = if lma {
        build_covariates(train_panel, &cfg.lma)?
    } else {
        CovariatePanel::empty(train_panel, cfg.train.horizon)
    };
    Ok(train(train_panel, &cov, &cfg.train)?)
}

pub fn train_model(cfg: &RunConfig, lma: bool) -> Result<String, CliError> {
    let panel = load_panel(&cfg.io.panel)?;
    let train_panel = training_range(cfg, &panel)?;
    let model = fit(cfg, &train_panel, lma)?;
    let out = &cfg.io.model;
    ensure_parent(out)?;
    save_model(&model, out)?;
    let extra = json!({
        "lma": lma,
        "train_seed": cfg.train.seed,
        "train_days": train_panel.len(),
        "training_log": model.training_log,
        "output_sha256": file_sha256(out)?,
    });
    write_json(
        &sidecar_path(out),
        &provenance(cfg, "train", &[&cfg.io.panel], extra)?,
    )?;
    let last = model
        .training_log
        .last()
        .map_or("n/a".into(), |v| format!("{v:.6}"));
    Ok(format!(
        "trained {} for {} epochs (final mean NLL {last}), saved {}",
        if lma { "LMA-DeepAR" } else { "DeepAR" },
        model.training_log.len(),
        out.display()
    ))
}

pub const SAMPLES_CSV: &str = "samples.csv";
pub const POINTS_CSV: &str = "points.csv";

pub fn forecast(cfg: &RunConfig) -> Result<String, CliError> {
    let panel = load_panel(&cfg.io.panel)?;
    let train_panel = training_range(cfg, &panel)?;
    let model = load_model(&cfg.io.model)?;
    let s = &cfg.sweep;
    let forecasts = forecast_panel(&model, &train_panel, s.num_samples, s.seed)?;

    let mut samples = String::from("series_id,step,sample_id,value\n");
    let mut points = String::from("series_id,step,value\n");
    for (id, f) in train_panel.series_ids().iter().zip(&forecasts) {
        for (k, path) in f.samples.iter().enumerate() {
            for (h, v) in path.iter().enumerate() {
                writeln!(samples, "{id},{},{k},{v}", h + 1).unwrap();
            }
        }
        for (h, v) in point_forecast(f, s.point_statistic)?.iter().enumerate() {
            writeln!(points, "{id},{},{v}", h + 1).unwrap();
        }
    }
    let dir = &cfg.io.forecast_dir;
    let (samples_path, points_path) = (dir.join(SAMPLES_CSV), dir.join(POINTS_CSV));
    write_text(&samples_path, &samples)?;
    write_text(&points_path, &points)?;
    let extra = json!({
        "seed": s.seed,
        "num_samples": s.num_samples,
        "point_statistic": s.point_statistic,
        "horizon": model.train_config.horizon,
        "scales": forecasts.iter().map(|f| f.scale).collect::<Vec<_>>(),
        "outputs_sha256": {
            SAMPLES_CSV: file_sha256(&samples_path)?,
            POINTS_CSV: file_sha256(&points_path)?,
        },
    });
    write_json(
        &dir.join("provenance.json"),
        &provenance(cfg, "forecast", &[&cfg.io.panel, &cfg.io.model], extra)?,
    )?;
    Ok(format!(
        "wrote {} x {} samples for {} series to {}",
        s.num_samples,
        model.train_config.horizon,
        forecasts.len(),
        dir.display()
    ))
}

/// Reads `series_id,step,value` rows into one row per panel series.
fn read_points(path: &Path, panel: &SeriesPanel) -> Result<Vec<Vec<f64>>, CliError> {
    let bad =
        |line: u64, m: String| CliError::Validation(format!("{}:{line}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["series_id", "step", "value"] {
        return Err(bad(1, "header must be `series_id,step,value`".into()));
    }
    let mut rows: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let step: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("bad step `{}`", &record[1])))?;
        let value: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("bad value `{}`", &record[2])))?;
        rows.entry(record[0].trim().to_string())
            .or_default()
            .push((step, value));
    }
    panel
        .series_ids()
        .iter()
        .map(|id| {
            let mut entries = rows
                .remove(id)
                .ok_or_else(|| bad(0, format!("no forecast for series `{id}`")))?;
            entries.sort_by_key(|e| e.0);
            for (k, (step, _)) in entries.iter().enumerate() {
                if *step != k + 1 {
                    return Err(bad(
                        0,
                        format!("series `{id}`: steps must run 1, 2, ... without gaps"),
                    ));
                }
            }
            Ok(entries.into_iter().map(|e| e.1).collect())
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|r| match rows.keys().next() {
            Some(extra) => Err(bad(0, format!("series `{extra}` is not in the panel"))),
            None => Ok(r),
        })
}

pub fn evaluate(cfg: &RunConfig, forecast_path: Option<PathBuf>) -> Result<String, CliError> {
    let panel = load_panel(&cfg.io.panel)?;
    let split = split_of(cfg, &panel)?;
    let (_, test) = split_panel(&panel, split)?;
    let path = forecast_path.unwrap_or_else(|| cfg.io.forecast_dir.join(POINTS_CSV));
    let predicted = read_points(&path, &panel)?;
    let available = predicted.iter().map(Vec::len).min().unwrap_or(0);
    let steps: Vec<usize> = cfg
        .sweep
        .steps
        .iter()
        .copied()
        .filter(|s| *s <= available)
        .collect();
    if steps.is_empty() {
        return Err(CliError::Validation(format!(
            "sweep.steps: forecasts cover {available} steps, fewer than every configured step"
        )));
    }
    let model = score("forecast", test.rows(), &predicted, &steps)?;
    let mut result = EvalReport {
        steps,
        series_ids: panel.series_ids().to_vec(),
        models: vec![model],
        failures: Vec::new(),
        provenance: BTreeMap::new(),
    };
    let prov = provenance(cfg, "evaluate", &[&cfg.io.panel, &path], json!({}))?;
    result.provenance = serde_json::from_value(prov).expect("object");
    report::write_report(&result, &cfg.io.evaluation_dir, false)?;
    let m = &result.models[0];
    Ok(format!(
        "mean pooled RMSLE {:.6}, mean stability std {:.6}; tables in {}",
        m.pooled_mean,
        m.stability_mean,
        cfg.io.evaluation_dir.display()
    ))
}

pub fn run_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let panel = load_panel(&cfg.io.panel)?;
    let split = split_of(cfg, &panel)?;
    let train_panel = split_panel(&panel, split)?.0;
    let s = &cfg.sweep;
    let mut models: Vec<Box<dyn Forecaster>> = Vec::new();
    for name in &s.models {
        let model: Box<dyn Forecaster> = match name.as_str() {
            "lma_deepar" | "deepar" => Box::new(DeepAr {
                name: name.clone(),
                model: fit(cfg, &train_panel, name == "lma_deepar")?,
                num_samples: s.num_samples,
                statistic: s.point_statistic,
            }),
            "seasonal_naive" => Box::new(SeasonalNaive { season: s.season }),
            "holt_winters" => Box::new(HoltWinters {
                config: cfg.holt_winters.clone(),
            }),
            "mean" => Box::new(ConstantMean),
            other => {
                return Err(CliError::Validation(format!(
                    "sweep.models: unknown model `{other}`"
                )))
            }
        };
        models.push(model);
    }
    let mut result = sweep(&models, &panel, split, &s.steps, s.seed)?;
    let run = provenance(cfg, "sweep", &[&cfg.io.panel], json!({}))?;
    result.provenance.insert("run".into(), run);
    report::write_report(&result, &cfg.io.report_dir, s.plots)?;

    let mut summary = String::new();
    for m in &result.models {
        writeln!(
            summary,
            "{:<16} mean pooled RMSLE {:.6}  mean stability std {:.6}",
            m.name, m.pooled_mean, m.stability_mean
        )
        .unwrap();
    }
    for f in &result.failures {
        writeln!(summary, "{:<16} FAILED: {}", f.name, f.message).unwrap();
    }
    write!(summary, "report written to {}", cfg.io.report_dir.display()).unwrap();
    Ok(summary)
}
