//! Run manifests, file digests and the run-directory lock.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Resolved;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the run directory, or as given for inputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub run_id: String,
    pub master_seed: u64,
    /// Every config key, defaults included.
    pub config: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub files: Vec<FileDigest>,
    pub inputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn resolved(&self) -> Result<Resolved> {
        Resolved::new(self.config.clone())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// True when every listed file exists with the recorded digest.
    pub fn outputs_intact(&self, dir: &Path) -> bool {
        self.files.iter().all(|f| {
            digest_file(&dir.join(&f.path))
                .map(|d| d.sha256 == f.sha256)
                .unwrap_or(false)
        })
    }
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let data = fs::read(path)?;
    Ok(FileDigest {
        path: path.to_string_lossy().into_owned(),
        sha256: sha256_hex(&data),
        bytes: data.len() as u64,
    })
}

/// `<subcommand>-<12 hex digits of the config digest>`.
pub fn run_id(subcommand: &str, config: &Resolved) -> String {
    let mut h = Sha256::new();
    h.update(subcommand.as_bytes());
    h.update([0u8]);
    h.update(config.to_text().as_bytes());
    format!("{subcommand}-{}", &hex(&h.finalize())[..12])
}

/// Exclusive lock on a run directory; removed on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        let mut f = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => Error::Io(std::io::Error::new(
                    e.kind(),
                    format!(
                        "run directory {} is locked by another invocation (remove {} if stale)",
                        dir.display(),
                        path.display()
                    ),
                )),
                _ => Error::Io(e),
            })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
