use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use canopy_core::config::Config;

/// Record of one artifact-producing run. Everything except `started_at` and
/// `timings_ms` is a function of the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config: Config,
    pub inputs: BTreeMap<&'static str, PathBuf>,
    pub outputs: BTreeMap<&'static str, PathBuf>,
    pub summary: BTreeMap<&'static str, serde_json::Value>,
    pub started_at: u64,
    pub timings_ms: BTreeMap<&'static str, u128>,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    clock: Instant,
    phase: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, config: &Config) -> Self {
        let started_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ManifestBuilder {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command,
                seed: config.seed,
                threads: rayon::current_num_threads(),
                config: config.clone(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                summary: BTreeMap::new(),
                started_at,
                timings_ms: BTreeMap::new(),
            },
            clock: Instant::now(),
            phase: Instant::now(),
        }
    }

    pub fn input(&mut self, name: &'static str, path: &Path) {
        self.manifest.inputs.insert(name, path.to_path_buf());
    }

    pub fn output(&mut self, name: &'static str, path: &Path) {
        self.manifest.outputs.insert(name, path.to_path_buf());
    }

    pub fn summary(&mut self, name: &'static str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.manifest.summary.insert(name, value);
    }

    /// Records the time since the previous phase ended.
    pub fn phase(&mut self, name: &'static str) {
        self.manifest
            .timings_ms
            .insert(name, self.phase.elapsed().as_millis());
        self.phase = Instant::now();
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        self.manifest
            .timings_ms
            .insert("total", self.clock.elapsed().as_millis());
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `out.csv` -> `out.csv.manifest.json`.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
