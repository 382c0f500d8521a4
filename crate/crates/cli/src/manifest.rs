use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Reproducibility record written next to a command's artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub started: DateTime<Utc>,
    pub argv: Vec<String>,
    pub config: Config,
    pub seed: Option<u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, u128>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started: Utc::now(),
            argv: std::env::args().collect(),
            config: config.clone(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
            clock: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let sha256 = file_sha256(path)?;
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Starts timing `step`, closing whichever step was open.
    pub fn step(&mut self, step: &str) {
        self.stop();
        self.clock = Some((step.to_string(), Instant::now()));
    }

    fn stop(&mut self) {
        if let Some((name, t)) = self.clock.take() {
            *self.timings_ms.entry(name).or_default() += t.elapsed().as_millis();
        }
    }

    /// Writes `{out}/manifests/{command}[-{label}].json`.
    pub fn finish(mut self, label: Option<&str>) -> anyhow::Result<PathBuf> {
        self.stop();
        let dir = self.config.paths.out.join("manifests");
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let name = match label {
            Some(l) => format!("{}-{l}.json", self.command),
            None => format!("{}.json", self.command),
        };
        let path = dir.join(name);
        let json = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
