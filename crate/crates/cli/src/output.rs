use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MCDSIM_OUT_DIR";

pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Creates `dir` and refuses to overwrite any of `files` unless `force`.
pub fn prepare_out_dir(dir: &Path, files: &[&str], force: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::run(format!("cannot create {}: {e}", dir.display())))?;
    if !force {
        if let Some(existing) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(CliError::run(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    Ok(())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| CliError::run(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the config text followed by the decimal master seed.
    pub config_hash: String,
    pub master_seed: u64,
    pub tool_version: String,
    /// Unix time, seconds.
    pub created: u64,
    pub subcommand: String,
    pub outputs: Vec<String>,
    pub error_bars: String,
    /// The full config text, so the run can be repeated from this file.
    pub config: String,
}

pub fn config_hash(config_text: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    h.update(b"\nseed=");
    h.update(seed.to_string().as_bytes());
    hex::encode(h.finalize())
}

impl RunManifest {
    pub fn new(subcommand: &str, config_text: &str, seed: u64, outputs: &[&str]) -> Self {
        Self {
            config_hash: config_hash(config_text, seed),
            master_seed: seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            subcommand: subcommand.to_string(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            error_bars: mcd_core::SweepResult::ERROR_BAR.to_string(),
            config: config_text.to_string(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&dir.join("manifest.json"), format!("{json}\n").as_bytes())
    }
}

/// Config text and seed from either a config file or a previous run's
/// manifest (`*.json`).
pub fn load_config_source(path: &Path) -> Result<(String, Option<u64>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::run(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::run(format!("{}: not a run manifest: {e}", path.display())))?;
        Ok((manifest.config, Some(manifest.master_seed)))
    } else {
        Ok((text, None))
    }
}
