//! Run manifests: config echo, input hash, stage timings and the file
//! inventory of an output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    /// SHA-256 over the canonical config JSON (output root excluded) and
    /// every input file.
    pub content_hash: String,
    pub stages: Vec<StageTime>,
    pub files: Vec<FileEntry>,
    pub generator: String,
    pub version: String,
    pub warnings: Vec<String>,
}

/// Collects stage timings and output files while a command runs.
pub struct Recorder {
    out: PathBuf,
    stages: Vec<StageTime>,
    files: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Recorder {
    pub fn new(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            stages: Vec::new(),
            files: Vec::new(),
            inputs: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Runs one stage, labelling its errors and recording its wall time.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let value = f(self).with_context(|| format!("stage `{name}` failed"))?;
        self.stages.push(StageTime { stage: name.into(), seconds: start.elapsed().as_secs_f64() });
        log::info!("stage {name} done in {:.3} s", start.elapsed().as_secs_f64());
        Ok(value)
    }

    /// Registers a file written into the output directory.
    pub fn wrote(&mut self, path: PathBuf) {
        if !self.files.contains(&path) {
            self.files.push(path);
        }
    }

    pub fn read_input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(mut self, command: &str, config: &ExperimentConfig) -> Result<RunManifest> {
        let mut hasher = Sha256::new();
        let hashed = ExperimentConfig { output: None, ..config.clone() };
        hasher.update(serde_json::to_vec(&hashed)?);
        for input in &self.inputs {
            let bytes = std::fs::read(input).with_context(|| format!("hashing input {}", input.display()))?;
            hasher.update(&bytes);
        }
        let mut files = Vec::with_capacity(self.files.len());
        for path in &self.files {
            let meta = std::fs::metadata(path).with_context(|| format!("listing output {}", path.display()))?;
            let rel = path.strip_prefix(&self.out).unwrap_or(path);
            files.push(FileEntry { path: rel.display().to_string(), bytes: meta.len() });
        }
        let manifest = RunManifest {
            command: command.into(),
            config: config.clone(),
            content_hash: hex::encode(hasher.finalize()),
            stages: std::mem::take(&mut self.stages),
            files,
            generator: schrodinger_ula::sampler::GENERATOR.into(),
            version: format!("schro-ula {} / schrodinger-ula {}", env!("CARGO_PKG_VERSION"), schrodinger_ula::VERSION),
            warnings: std::mem::take(&mut self.warnings),
        };
        let path = self.out.join("manifest.json");
        schrodinger_ula::io::write_json(&path, &manifest)?;
        Ok(manifest)
    }
}
