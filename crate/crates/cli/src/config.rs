//! The run configuration: one TOML file, every section optional, unknown keys
//! rejected, plus `--set section.key=value` overrides.

use std::path::{Path, PathBuf};

use cellcast_core::{HoltWintersConfig, LmaConfig, PointStatistic, SynthConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MODEL_NAMES: [&str; 5] = [
    "lma_deepar",
    "deepar",
    "seasonal_naive",
    "holt_winters",
    "mean",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Trailing days held out of every series for testing.
    pub test_days: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_days: 31 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub steps: Vec<usize>,
    pub point_statistic: PointStatistic,
    /// Sample paths per series.
    pub num_samples: usize,
    /// Seed for forecast sampling.
    pub seed: u64,
    pub models: Vec<String>,
    /// Season of the seasonal naive baseline.
    pub season: usize,
    /// Also write SVG plots of both tables.
    pub plots: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            steps: (15..=31).collect(),
            point_statistic: PointStatistic::Median,
            num_samples: 100,
            seed: 7,
            models: MODEL_NAMES.iter().map(|s| s.to_string()).collect(),
            season: 7,
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub panel: PathBuf,
    pub covariates: PathBuf,
    pub model: PathBuf,
    pub forecast_dir: PathBuf,
    pub evaluation_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            panel: "panel.csv".into(),
            covariates: "covariates.csv".into(),
            model: "model.bin".into(),
            forecast_dir: "forecast".into(),
            evaluation_dir: "evaluation".into(),
            report_dir: "report".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub lma: LmaConfig,
    pub train: TrainConfig,
    pub holt_winters: HoltWintersConfig,
    pub sweep: SweepConfig,
    pub split: SplitConfig,
    pub io: IoConfig,
}

fn invalid(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{key}: {message}"))
}

impl RunConfig {
    /// Reads `path` (defaults when `None`), applies overrides, validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: RunConfig =
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    let origin = path.map_or("config".to_string(), |p| p.display().to_string());
                    CliError::Validation(format!("{origin}: {}", e.message().trim()))
                })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let wrap = |key: &str, r: cellcast_core::Result<()>| r.map_err(|e| invalid(key, e));
        wrap("synth", self.synth.validate())?;
        wrap("lma", self.lma.validate())?;
        wrap("train", self.train.validate())?;
        wrap("holt_winters", self.holt_winters.validate())?;
        if self.lma.pl != self.train.horizon {
            return Err(invalid(
                "lma.pl",
                format!(
                    "must equal train.horizon ({} vs {})",
                    self.lma.pl, self.train.horizon
                ),
            ));
        }
        if self.split.test_days < 1 {
            return Err(invalid("split.test_days", "must be >= 1"));
        }
        let s = &self.sweep;
        if s.steps.is_empty() || s.steps.contains(&0) {
            return Err(invalid("sweep.steps", "need at least one step, all >= 1"));
        }
        if let Some(max) = s.steps.iter().max().filter(|m| **m > self.split.test_days) {
            return Err(invalid(
                "sweep.steps",
                format!(
                    "step {max} exceeds split.test_days = {}",
                    self.split.test_days
                ),
            ));
        }
        if s.num_samples < 1 {
            return Err(invalid("sweep.num_samples", "must be >= 1"));
        }
        if s.season < 1 {
            return Err(invalid("sweep.season", "must be >= 1"));
        }
        if s.models.is_empty() {
            return Err(invalid("sweep.models", "no models listed"));
        }
        for (k, name) in s.models.iter().enumerate() {
            if !MODEL_NAMES.contains(&name.as_str()) {
                return Err(invalid(
                    "sweep.models",
                    format!(
                        "unknown model `{name}`; expected one of {}",
                        MODEL_NAMES.join(", ")
                    ),
                ));
            }
            if s.models[..k].contains(name) {
                return Err(invalid("sweep.models", format!("`{name}` listed twice")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration in canonical JSON form.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(&self.to_json()).expect("serializable");
        hex(&Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sets `section.key` in `table`. The value is read as a TOML value, falling
/// back to a plain string so paths need no quoting.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| invalid(item, "override must look like section.key=value"))?;
    let key = key.trim();
    let (section, field) = key
        .split_once('.')
        .filter(|(s, f)| !s.is_empty() && !f.is_empty() && !f.contains('.'))
        .ok_or_else(|| invalid(key, "override key must look like section.key"))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(invalid(section, "is not a section")),
    }
}
