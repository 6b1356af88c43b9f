//! Optional TOML settings file. Flags override it; it overrides defaults.

use std::path::Path;

use anyhow::{Context, Result};
use impulse_core::classify::{DEFAULT_SVM_C, DEFAULT_SVM_EPOCHS};
use impulse_core::{Algorithm, DetectorConfig, MfccConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub svm_c: f64,
    pub svm_epochs: usize,
    pub knn_k: usize,
    pub detector: DetectorConfig,
    pub mfcc: MfccConfig,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            seed: None,
            folds: None,
            svm_c: DEFAULT_SVM_C,
            svm_epochs: DEFAULT_SVM_EPOCHS,
            knn_k: 3,
            detector: DetectorConfig::default(),
            mfcc: MfccConfig::default(),
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn algorithm(&self, name: &str) -> Result<Algorithm> {
        let base: Algorithm = name.parse()?;
        Ok(match base {
            Algorithm::LinearSvm { .. } => Algorithm::LinearSvm {
                c: self.svm_c,
                epochs: self.svm_epochs,
            },
            Algorithm::Knn { .. } => Algorithm::Knn { k: self.knn_k },
        })
    }
}
