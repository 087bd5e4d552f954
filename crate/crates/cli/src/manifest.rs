use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SEED_SCHEME: &str = "path i of a batch uses seed base_seed + i; each seed drives its own ChaCha8 stream";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed_scheme: String,
    pub wall_time_seconds: f64,
    pub stages: Vec<Stage>,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    pub result: serde_json::Value,
}

/// Collects output files, timings and warnings of one run.
pub struct Run {
    command: String,
    dir: PathBuf,
    config_sha256: String,
    started: Instant,
    stage_start: Instant,
    stages: Vec<Stage>,
    pub warnings: Vec<String>,
    outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Run {
    /// Creates the output directory and persists the resolved configuration.
    pub fn start<C: Serialize>(command: &str, dir: &Path, config: &C) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let canonical = serde_json::to_vec(config).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut run = Self {
            command: command.to_string(),
            dir: dir.to_path_buf(),
            config_sha256: sha256_hex(&canonical),
            started: Instant::now(),
            stage_start: Instant::now(),
            stages: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        };
        let text = toml::to_string(config).map_err(|e| CliError::Usage(format!("cannot persist config: {e}")))?;
        run.write("config.toml", text.into_bytes())?;
        Ok(run)
    }

    /// Closes the current stage.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: (now - self.stage_start).as_secs_f64(),
        });
        self.stage_start = now;
    }

    pub fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), &bytes)?;
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> regnoise::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, bytes)
    }

    pub fn warn(&mut self, warnings: impl IntoIterator<Item = String>) {
        for w in warnings {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self, result: serde_json::Value) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: self.config_sha256,
            seed_scheme: SEED_SCHEME.to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            stages: self.stages,
            warnings: self.warnings,
            outputs: self.outputs,
            result,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Usage(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(self.dir.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}
