//! Run manifests: every subcommand writes a JSON manifest beside its primary
//! output recording the resolved configuration, seed, input hashes and output
//! list, so any run can be reproduced from the manifest alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::fnv1a64;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub fnv1a64: String,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            tool: "puncase".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).with_context(|| format!("cannot hash input {}", path.display()))?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        });
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes `<primary output>.manifest.json`.
    pub fn write_beside(&self, primary_output: &Path) -> Result<PathBuf> {
        let mut name = primary_output
            .file_name()
            .unwrap_or_default()
            .to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json)
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(path)
    }
}

/// Deletes declared outputs when a command fails partway, so failed runs
/// never leave half-written files behind.
pub struct OutputGuard {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        OutputGuard {
            paths: Vec::new(),
            committed: false,
        }
    }

    pub fn declare(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Default for OutputGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.paths {
            let _ = fs::remove_file(path);
        }
    }
}
