//! Run manifests: one JSON record per command invocation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::failure::CliResult;
use crate::files::{sha256_file, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs. Wall-clock
/// timings are recorded only on request so that manifests stay
/// byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, FileRecord>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: BTreeMap<String, FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

pub struct Recorder {
    manifest: RunManifest,
    started: Instant,
    timed: bool,
}

fn record(path: &Path) -> CliResult<FileRecord> {
    Ok(FileRecord { path: path.display().to_string(), sha256: sha256_file(path)? })
}

impl Recorder {
    pub fn new(command: &str, timed: bool) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config: serde_json::Value::Null,
                inputs: BTreeMap::new(),
                seeds: BTreeMap::new(),
                outputs: BTreeMap::new(),
                timings_ms: timed.then(BTreeMap::new),
            },
            started: Instant::now(),
            timed,
        }
    }

    pub fn config(&mut self, config: &impl Serialize) {
        self.manifest.config = serde_json::to_value(config).expect("configs serialize");
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.manifest.inputs.insert(role.to_string(), record(path)?);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.to_string(), seed);
    }

    pub fn output(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.manifest.outputs.insert(role.to_string(), record(path)?);
        Ok(())
    }

    pub fn timing(&mut self, stage: &str, ms: f64) {
        if let Some(t) = self.manifest.timings_ms.as_mut() {
            t.insert(stage.to_string(), ms);
        }
    }

    /// Writes the manifest and, with timings on, reports the total on stderr.
    pub fn finish(mut self, path: &Path) -> CliResult<PathBuf> {
        if self.timed {
            let total = self.started.elapsed().as_secs_f64() * 1e3;
            self.timing("total", total);
            eprintln!("{}: {total:.1} ms", self.manifest.command);
        }
        write_json(path, &self.manifest)?;
        Ok(path.to_path_buf())
    }
}

/// `out.ext` → `out.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
