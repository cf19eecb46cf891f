use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full command line.
    pub args: Vec<String>,
    pub code_version: String,
    pub config_hash: String,
    /// Resolved configuration, including domain parameters.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<String>,
    pub results: serde_json::Value,
}

pub(crate) fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str, args: Vec<String>, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        let text = serde_json::to_string(&config).unwrap_or_default();
        Self {
            command: command.into(),
            args,
            code_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: format!("{:016x}", crate::demogen::config_hash(&text)),
            config,
            seeds,
            started_unix: now(),
            finished_unix: 0.0,
            artifacts: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    pub fn finish(&mut self, results: serde_json::Value) {
        self.results = results;
        self.finished_unix = now();
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("manifest serializes"))
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
