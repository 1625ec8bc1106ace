//! The run manifest: a JSON record of everything needed to reproduce and
//! audit a run — the resolved config, the seed, tool version, wall-clock
//! duration, and a SHA-256 for every artifact the run emitted.

use crate::checkpoint::sha256_hex;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the run directory, with `/` separators.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_unix: u64,
    pub seed: u64,
    pub duration_secs: f64,
    /// The fully resolved configuration the run actually used.
    pub config: ExperimentConfig,
    /// Every file the run wrote, sorted by path.
    pub artifacts: Vec<ArtifactEntry>,
    /// Grid cells that failed (divergence or degenerate evaluation), as
    /// human-readable one-liners. Empty on a fully successful run.
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn new(seed: u64, config: ExperimentConfig) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            seed,
            duration_secs: 0.0,
            config,
            artifacts: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Records (or refreshes) the hash of `relative` under `dir`.
    pub fn record_artifact(&mut self, dir: &Path, relative: &str) -> Result<()> {
        let full = dir.join(relative);
        let bytes = std::fs::read(&full).map_err(|e| CliError::io(&full, e))?;
        let entry = ArtifactEntry {
            path: relative.to_string(),
            sha256: sha256_hex(&bytes),
        };
        match self.artifacts.iter_mut().find(|a| a.path == relative) {
            Some(existing) => *existing = entry,
            None => self.artifacts.push(entry),
        }
        Ok(())
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let path = dir.join(MANIFEST_NAME);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Io(format!("{}: invalid manifest: {e}", path.display())))
    }

    /// Checks that every recorded artifact exists and hashes to its recorded
    /// value. Returns the paths that fail.
    pub fn verify(&self, dir: &Path) -> Vec<PathBuf> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            let full = dir.join(&a.path);
            match std::fs::read(&full) {
                Ok(bytes) if sha256_hex(&bytes) == a.sha256 => {}
                _ => bad.push(full),
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn manifest_round_trips_and_verifies_artifacts() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        std::fs::create_dir(dir.path().join("figs")).unwrap();
        std::fs::write(dir.path().join("figs/b.svg"), "<svg/>").unwrap();

        let mut m = RunManifest::new(7, ExperimentConfig::default());
        m.record_artifact(dir.path(), "figs/b.svg").unwrap();
        m.record_artifact(dir.path(), "a.csv").unwrap();
        m.duration_secs = 1.25;
        m.save(dir.path()).unwrap();

        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.duration_secs, 1.25);
        assert_eq!(back.artifacts.len(), 2);
        // Sorted by path on save.
        assert_eq!(back.artifacts[0].path, "a.csv");
        assert_eq!(back.artifacts[1].path, "figs/b.svg");
        assert!(back.verify(dir.path()).is_empty());
    }

    #[test]
    fn verify_reports_tampered_and_missing_artifacts() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        std::fs::write(dir.path().join("b.csv"), "y\n2\n").unwrap();
        let mut m = RunManifest::new(0, ExperimentConfig::default());
        m.record_artifact(dir.path(), "a.csv").unwrap();
        m.record_artifact(dir.path(), "b.csv").unwrap();
        m.save(dir.path()).unwrap();

        std::fs::write(dir.path().join("a.csv"), "x\n999\n").unwrap();
        std::fs::remove_file(dir.path().join("b.csv")).unwrap();
        let bad = m.verify(dir.path());
        assert_eq!(bad.len(), 2);
    }

    #[test]
    fn recording_the_same_path_twice_updates_in_place() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "v1").unwrap();
        let mut m = RunManifest::new(0, ExperimentConfig::default());
        m.record_artifact(dir.path(), "a.csv").unwrap();
        let first = m.artifacts[0].sha256.clone();
        std::fs::write(dir.path().join("a.csv"), "v2").unwrap();
        m.record_artifact(dir.path(), "a.csv").unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_ne!(m.artifacts[0].sha256, first);
        assert!(m.verify(dir.path()).is_empty());
    }

    #[test]
    fn missing_artifact_at_record_time_is_an_io_error() {
        let dir = tempdir().unwrap();
        let mut m = RunManifest::new(0, ExperimentConfig::default());
        let err = m.record_artifact(dir.path(), "nope.csv").unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
