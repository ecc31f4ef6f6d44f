//! Reproduction manifests written next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use vf_core::seed::content_digest;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub config_digest: String,
    /// Content digests of the input files, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub written_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl Manifest {
    pub fn new(command: &'static str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Manifest {
            tool: "vf",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            config_digest: content_digest(serde_json::to_string(&config)?.as_bytes()),
            config,
            inputs: BTreeMap::new(),
            seed,
            outputs: Vec::new(),
            started_unix_ms: now_ms(),
            written_unix_ms: 0,
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs
            .insert(path.display().to_string(), content_digest(&bytes));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// `<file>.manifest.json` for a file output, `<dir>/manifest.json` for a
    /// directory.
    pub fn path_for(out: &Path, is_dir: bool) -> PathBuf {
        if is_dir {
            out.join("manifest.json")
        } else {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        }
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.written_unix_ms = now_ms();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
    }
}
