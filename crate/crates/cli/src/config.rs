//! Run configuration shared by the subcommands.
//!
//! A JSON file supplies defaults; command-line flags override single fields.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mssm_core::aggregation::FloorPolicy;
use mssm_core::inference::{MapConfig, PriorSet, ViConfig, DEFAULT_FORECAST_SAMPLES};
use mssm_core::ingest::{CsvOptions, Direction, DEFAULT_HOLDOUT_STEPS};
use mssm_core::{AggregationMode, StructuralSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `.log` files are MRTG, everything else CSV.
    #[default]
    Auto,
    Csv,
    Mrtg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: InputFormat,
    /// MRTG only.
    #[serde(default)]
    pub direction: Direction,
    /// CSV only.
    #[serde(default)]
    pub csv: CsvOptions,
}

impl InputSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), format: InputFormat::Auto, direction: Direction::In, csv: CsvOptions::default() }
    }

    pub fn is_mrtg(&self) -> bool {
        match self.format {
            InputFormat::Mrtg => true,
            InputFormat::Csv => false,
            InputFormat::Auto => self.path.extension().is_some_and(|e| e == "log"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub inputs: Vec<InputSpec>,
    pub holdout_steps: usize,
    /// Fit on logs of the traffic.
    pub log_domain: bool,
    /// Mode assigned to coarse inputs that do not record one (CSV).
    pub coarse_mode: AggregationMode,
    pub floor: FloorPolicy,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            inputs: vec![],
            holdout_steps: DEFAULT_HOLDOUT_STEPS,
            log_domain: false,
            coarse_mode: AggregationMode::Arithmetic,
            floor: FloorPolicy::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Map,
    /// MAP followed by a variational refinement started at the MAP point.
    #[default]
    Vi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FitSettings {
    pub method: FitMethod,
    pub map: MapConfig,
    /// `seed` is taken from the run seed.
    pub vi: ViConfig,
    /// Also fit the finest segment alone.
    pub ablate_coarse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastSettings {
    pub horizon: usize,
    pub num_samples: usize,
    pub mc_samples: usize,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HOLDOUT_STEPS,
            num_samples: DEFAULT_FORECAST_SAMPLES,
            mc_samples: mssm_core::eval::DEFAULT_MC_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: usize,
    pub spec: Option<StructuralSpec>,
    pub priors: PriorSet,
    pub data: DataConfig,
    pub fit: FitSettings,
    pub forecast: ForecastSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            threads: 1,
            spec: None,
            priors: PriorSet::default(),
            data: DataConfig::default(),
            fit: FitSettings::default(),
            forecast: ForecastSettings::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative input paths in it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(dir) = path.parent() {
            for input in &mut cfg.data.inputs {
                input.path = resolve(dir, &input.path);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn require_seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!("a seed is required: pass --seed or set \"seed\" in the config"),
        }
    }

    pub fn require_spec(&self) -> Result<&StructuralSpec> {
        self.spec.as_ref().context("the config has no \"spec\" section")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// `path` relative to `dir` unless it is absolute.
pub fn resolve(dir: &Path, path: &Path) -> PathBuf {
    if path.is_relative() {
        dir.join(path)
    } else {
        path.to_path_buf()
    }
}
