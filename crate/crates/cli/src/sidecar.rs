//! Run-metadata sidecars, written next to each command's primary output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::sha256_hex;
use crate::CliError;

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    seeds: &'a BTreeMap<String, u64>,
    inputs: &'a BTreeMap<String, InputRecord>,
    outputs: Vec<String>,
    results: &'a BTreeMap<String, serde_json::Value>,
    config: &'a str,
    started_unix: u64,
    elapsed_seconds: f64,
}

/// Collects what one command did; `finish` writes it.
pub struct RunRecord {
    command: &'static str,
    /// Effective parameters as TOML; hashed.
    config: String,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, InputRecord>,
    outputs: Vec<PathBuf>,
    results: BTreeMap<String, serde_json::Value>,
    started: SystemTime,
    clock: Instant,
}

impl RunRecord {
    pub fn new(command: &'static str, config: String) -> Self {
        Self {
            command,
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            results: BTreeMap::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| mcstain::Error::io(path, e))?;
        self.inputs.insert(name.into(), InputRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn result(&mut self, name: &str, value: impl Serialize) {
        self.results.insert(name.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    /// Hash of the command name and its effective parameters.
    pub fn config_hash(&self) -> String {
        sha256_hex(format!("{}\n{}", self.command, self.config).as_bytes())
    }

    /// Write `<primary>.run.json`.
    pub fn finish(self, primary: &Path) -> Result<PathBuf, CliError> {
        let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".run.json");
        let path = primary.with_file_name(name);
        let sidecar = Sidecar {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: self.config_hash(),
            seeds: &self.seeds,
            inputs: &self.inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            results: &self.results,
            config: &self.config,
            started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_seconds: self.clock.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Usage(e.to_string()))?;
        std::fs::write(&path, json + "\n").map_err(|e| mcstain::Error::io(&path, e))?;
        log::info!("{} finished in {:.2}s, metadata in {}", self.command, sidecar.elapsed_seconds, path.display());
        Ok(path)
    }
}
