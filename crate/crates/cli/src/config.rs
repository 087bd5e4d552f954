//! Run configurations: a TOML file, then `--set key=value` overrides, then
//! the dedicated flags.

use std::path::{Path, PathBuf};

use regnoise::averaging::SpectralDrift;
use regnoise::gaussmodels::{GaussianModel, LndSettings};
use regnoise::occupation::{Quadrature, WindowSettings};
use regnoise::sewing::StochasticSettings;
use regnoise::yode::SolveConfig;
use regnoise::FrequencyGrid;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

fn default_output() -> PathBuf {
    PathBuf::from("regnoise-out")
}

fn default_steps() -> usize {
    1024
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: GaussianModel,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: PathFormat,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

/// Deterministic path `w_r = a + b r` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearPath {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default = "unit")]
    pub horizon: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocaltimeConfig {
    pub model: Option<GaussianModel>,
    pub linear: Option<LinearPath>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the whole horizon.
    pub window: Option<(f64, f64)>,
    pub grid: Option<FrequencyGrid>,
    #[serde(default)]
    pub quadrature: Quadrature,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    pub model: GaussianModel,
    #[serde(default = "regularity_steps")]
    pub steps: usize,
    #[serde(default = "regularity_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "zero_lambda")]
    pub lambdas: Vec<f64>,
    pub grid: Option<FrequencyGrid>,
    #[serde(default)]
    pub windows: WindowSettings,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

fn regularity_steps() -> usize {
    4096
}

fn regularity_paths() -> usize {
    200
}

fn zero_lambda() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageConfig {
    /// Without a model the path is identically zero on `[0, 1]`.
    pub model: Option<GaussianModel>,
    pub drift: SpectralDrift,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the whole horizon.
    #[serde(default)]
    pub windows: Vec<(f64, f64)>,
    #[serde(default = "one")]
    pub order: usize,
    pub grid: Option<FrequencyGrid>,
    #[serde(default)]
    pub quadrature: Quadrature,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRunConfig {
    /// Without a model the path is identically zero on `[0, 1]`.
    pub model: Option<GaussianModel>,
    pub drift: SpectralDrift,
    #[serde(default = "solve_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    pub x: Vec<f64>,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Used for band-limited drift terms; defaults to the standard grid.
    pub grid: Option<FrequencyGrid>,
    #[serde(default)]
    pub solver: SolveConfig,
    pub oracle: Option<Oracle>,
    #[serde(default = "oracle_tol")]
    pub oracle_tol: f64,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

fn solve_steps() -> usize {
    4096
}

fn default_gamma() -> f64 {
    0.75
}

fn default_delta() -> f64 {
    2.0
}

fn oracle_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LndConfig {
    pub model: GaussianModel,
    #[serde(default = "lnd_steps")]
    pub steps: usize,
    pub zetas: Vec<f64>,
    #[serde(default)]
    pub settings: LndSettings,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

fn lnd_steps() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SewcheckConfig {
    pub model: GaussianModel,
    pub z: Vec<Vec<f64>>,
    #[serde(default)]
    pub settings: StochasticSettings,
    /// Overrides `settings.base_seed` when present.
    pub seed: Option<u64>,
    /// Not part of the persisted configuration or its hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

pub fn load_table(path: Option<&Path>) -> Result<Table, CliError> {
    match path {
        None => Ok(Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))
        }
    }
}

/// Applies `a.b.c=value`; the value is parsed as a TOML value and falls back
/// to a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not of the form key=value")))?;
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key `{key}` has an empty segment")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn parse<T: DeserializeOwned>(table: Table) -> Result<T, CliError> {
    Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))
}
