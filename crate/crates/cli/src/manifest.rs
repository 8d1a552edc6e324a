//! Per-run manifest. The only artifact that carries wall-clock time.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    pub dsnet_version: String,
    pub seed: u64,
    /// Seeds derived from the master seed, by purpose.
    pub derived_seeds: serde_json::Map<String, serde_json::Value>,
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub artifacts: Vec<FileEntry>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn file_entry(path: &Path, display: String) -> Result<FileEntry> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileEntry {
        path: display,
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Tracks what a command read and wrote.
#[derive(Debug)]
pub struct RunRecord {
    pub out_dir: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<String>,
    pub derived_seeds: serde_json::Map<String, serde_json::Value>,
    pub started: f64,
}

impl RunRecord {
    pub fn new(out_dir: PathBuf) -> Self {
        Self {
            out_dir,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            derived_seeds: serde_json::Map::new(),
            started: now_unix(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Write `bytes` to `name` in the output directory and record it.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Record a file written by library code.
    pub fn written(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn seed(&mut self, purpose: &str, seed: u64) {
        self.derived_seeds.insert(purpose.to_string(), seed.into());
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| file_entry(p, p.display().to_string()))
            .collect::<Result<_>>()?;
        let artifacts = self
            .artifacts
            .iter()
            .map(|a| file_entry(&self.out_dir.join(a), a.clone()))
            .collect::<Result<_>>()?;
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            dsnet_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            derived_seeds: self.derived_seeds,
            config: config.clone(),
            inputs,
            artifacts,
            started_unix: self.started,
            finished_unix: now_unix(),
        };
        let path = self.out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
