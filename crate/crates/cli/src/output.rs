use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Record of one invocation, written next to its outputs. The config
/// snapshot carries the effective seed, so feeding the manifest back in as
/// `--config` reproduces the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_snapshot: Value,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        seed: u64,
        config_snapshot: Value,
        outputs: Vec<PathBuf>,
        elapsed: Duration,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_snapshot,
            outputs,
            wall_clock_s: elapsed.as_secs_f64(),
        }
    }
}

/// Reads a config file, unwrapping the snapshot if it is a manifest.
pub fn read_config_text(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    if let Ok(Value::Object(mut obj)) = serde_json::from_str::<Value>(&text) {
        if let Some(snapshot) = obj.remove("config_snapshot") {
            return Ok(snapshot.to_string());
        }
    }
    Ok(text)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Invalid(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let fail =
        |e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    fs::write(&tmp, bytes).map_err(fail)?;
    fs::rename(&tmp, &path).map_err(fail)?;
    Ok(path)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let mut json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    json.push(b'\n');
    write_atomic(dir, "manifest.json", &json)
}
