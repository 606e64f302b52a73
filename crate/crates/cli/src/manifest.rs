//! `manifest.json`: what was run, how long each stage took, and checksums of
//! every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
    pub stages: Vec<(String, f64)>,
    pub files: BTreeMap<String, FileEntry>,
    #[serde(skip)]
    started: Option<Instant>,
    #[serde(skip)]
    stage_start: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str, config: &ExperimentConfig, threads: usize) -> Self {
        let now = Instant::now();
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            threads,
            config: config.clone(),
            wall_clock_seconds: 0.0,
            stages: Vec::new(),
            files: BTreeMap::new(),
            started: Some(now),
            stage_start: Some(now),
        }
    }

    /// Close the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        if let Some(s) = self.stage_start {
            self.stages.push((name.into(), (now - s).as_secs_f64()));
        }
        self.stage_start = Some(now);
    }

    pub fn record(&mut self, dir: &Path, file: &str) -> Result<()> {
        let path = dir.join(file);
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.files.insert(file.into(), FileEntry { sha256, bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        if let Some(s) = self.started {
            self.wall_clock_seconds = s.elapsed().as_secs_f64();
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_of_known_bytes() {
        let dir = std::env::temp_dir().join(format!("frachardy-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.txt"), b"abc").unwrap();
        let mut m = RunManifest::start("test", &ExperimentConfig::default(), 1);
        m.record(&dir, "a.txt").unwrap();
        assert_eq!(
            m.files["a.txt"].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        m.stage("one");
        let path = m.finish(&dir).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
        assert_eq!(v["files"]["a.txt"]["bytes"], 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
