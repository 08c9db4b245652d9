use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fdm_reservoir::scan::ScanSpec;
use fdm_reservoir::tasks::TaskKind;
use fdm_reservoir::ReservoirConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Where `simulate` takes its input sequence from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSource {
    File { path: PathBuf },
    Task { task: TaskKind, length: usize, seed: u64, snr_db: f64 },
}

/// Fully resolved description of a run; enough to repeat it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Job {
    Simulate {
        reservoir: ReservoirConfig,
        source: InputSource,
        noise_seed: u64,
    },
    Scan {
        spec: ScanSpec,
    },
    Bench {
        spec: ScanSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl OutputFile {
    pub fn hash(dir: &Path, name: &str) -> Result<Self, CliError> {
        let data = fs::read(dir.join(name)).map_err(|e| CliError::io(dir.join(name), e))?;
        Ok(Self {
            name: name.to_string(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub base_seed: u64,
    pub dataset_seeds: Vec<u64>,
    pub noise_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub job: Job,
    pub seeds: SeedInfo,
    pub threads: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
    /// Per grid point, for sweeps. Kept here because result files must be
    /// reproducible byte for byte.
    #[serde(default)]
    pub point_wall_time_s: Vec<f64>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Usage(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}
