use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::{CliError, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub package: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub p2p_enabled: bool,
    /// SHA-256 of the canonical config text, also saved as `config.toml`.
    pub config_hash: String,
    pub outputs: Vec<OutputFile>,
}

/// Saves the effective config and a manifest hashing every listed output.
pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, outputs: &[String]) -> Result<(), CliError> {
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let mut files = Vec::with_capacity(outputs.len());
    for rel in outputs {
        let data = fs::read(dir.join(rel))?;
        files.push(OutputFile { path: rel.clone(), bytes: data.len() as u64, sha256: hex(&Sha256::digest(&data)) });
    }
    let manifest = Manifest {
        command: command.into(),
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario.clone(),
        seed: cfg.seed,
        p2p_enabled: cfg.p2p_enabled,
        config_hash: cfg.hash(),
        outputs: files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}
