//! Run manifests: configuration snapshot, seeds, timings and output digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cri_core::geometry::Antenna;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputDigest {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub derived_seeds: BTreeMap<String, u64>,
    pub config: ExperimentConfig,
    /// Resolved antenna positions, so CSV-based layouts need no external file.
    pub antennas: Vec<Antenna>,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputDigest>,
    /// Command-specific results.
    pub summary: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Collects timings and output files while a command runs.
pub struct Recorder {
    dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Recorder {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Recorder {
            dir: config.output.dir.clone(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                master_seed: config.seed,
                derived_seeds: BTreeMap::new(),
                config: config.clone(),
                antennas: config.antennas().unwrap_or_default(),
                stages: Vec::new(),
                outputs: Vec::new(),
                summary: serde_json::Value::Null,
            },
            clock: Instant::now(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn seed(&mut self, name: &str, value: u64) -> u64 {
        self.manifest.derived_seeds.insert(name.to_string(), value);
        value
    }

    /// Ends the current stage.
    pub fn stage(&mut self, name: &str) {
        let seconds = self.clock.elapsed().as_secs_f64();
        log::info!("{name}: {seconds:.2}s");
        self.manifest.stages.push(StageTiming {
            stage: name.to_string(),
            seconds,
        });
        self.clock = Instant::now();
    }

    pub fn output(&mut self, name: &str) {
        self.manifest.outputs.push(OutputDigest {
            path: name.to_string(),
            bytes: 0,
            sha256: String::new(),
        });
    }

    pub fn summary(&mut self, value: serde_json::Value) {
        self.manifest.summary = value;
    }

    /// Hashes every registered output and writes `manifest.json` atomically.
    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        for out in &mut self.manifest.outputs {
            let p = self.dir.join(&out.path);
            out.sha256 = sha256_file(&p)?;
            out.bytes = std::fs::metadata(&p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
                .len();
        }
        cri_core::io::write_json(&self.dir.join("manifest.json"), &self.manifest)?;
        Ok(self.manifest)
    }
}
