use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub data: u64,
    pub abc: u64,
}

/// Written last, once every artifact it lists is in place.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: Option<String>,
    pub seeds: Option<Seeds>,
    pub artifacts: Vec<PathBuf>,
    pub elapsed_seconds: f64,
    pub simulator_calls: u64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: None,
            seeds: None,
            artifacts: Vec::new(),
            elapsed_seconds: 0.0,
            simulator_calls: 0,
        }
    }

    pub fn finish(mut self, started: Instant, path: &Path) -> Result<(), CliError> {
        self.elapsed_seconds = started.elapsed().as_secs_f64();
        for a in &self.artifacts {
            if !a.exists() {
                return Err(CliError::Input(format!("artifact {} missing at end of run", a.display())));
            }
        }
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// `model.json` -> `model.manifest.json`
pub fn manifest_beside(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}
