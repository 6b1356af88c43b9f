//! Run manifests written beside every output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("impulse ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_snapshot: serde_json::Value,
    /// Input path to lowercase hex SHA-256 of its bytes.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    /// Command-specific results such as the realised SNR of a mixture.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config_snapshot: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_snapshot,
            input_hashes: BTreeMap::new(),
            seed,
            tool_version: TOOL_VERSION.to_string(),
            results: serde_json::Value::Null,
        }
    }

    pub fn hash_input(&mut self, path: &Path) -> Result<String> {
        let digest = sha256_file(path)?;
        self.input_hashes.insert(path.display().to_string(), digest.clone());
        Ok(digest)
    }

    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let path = manifest_path(output);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// `out.wav` -> `out.wav.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
