//! JSON run-metadata sidecar.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::Config;

#[derive(Debug, Serialize)]
struct Host {
    os: &'static str,
    arch: &'static str,
    available_threads: usize,
    hostname: Option<String>,
}

impl Host {
    fn current() -> Self {
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            available_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            hostname: std::fs::read_to_string("/etc/hostname")
                .ok()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    command: String,
    version: &'static str,
    config: Config,
    seeds: Vec<u64>,
    threads: usize,
    host: Host,
    timings_ms: BTreeMap<String, f64>,
    outputs: Vec<String>,
    details: Value,
}

impl Metadata {
    pub fn new(command: &str, config: &Config, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            seeds,
            threads: config.output.threads,
            host: Host::current(),
            timings_ms: BTreeMap::new(),
            outputs: Vec::new(),
            details: Value::Null,
        }
    }

    pub fn timing(&mut self, phase: &str, ms: f64) {
        self.timings_ms.insert(phase.to_string(), ms);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn details(&mut self, value: impl Serialize) -> Result<()> {
        self.details = serde_json::to_value(value).context("serializing run details")?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).context("serializing metadata")?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
