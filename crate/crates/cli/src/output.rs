//! Output directory handling: the run lock, artifact files and the manifest.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const LOCK_NAME: &str = ".lock";
pub const MANIFEST_NAME: &str = "manifest.json";

/// Exclusive hold on an output directory; the lock file is removed on drop.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    version: &'static str,
    parallel: bool,
    artifacts: &'a [ArtifactEntry],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl OutputDir {
    pub fn lock(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        match OpenOptions::new().write(true).create_new(true).open(root.join(LOCK_NAME)) {
            Ok(_) => Ok(OutputDir {
                root: root.to_path_buf(),
                artifacts: Vec::new(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Config(format!(
                "{} is locked by another run (remove {} if that run died)",
                root.display(),
                LOCK_NAME
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Writes `manifest.json`, listing every artifact in write order.
    pub fn finish(&mut self, command: &str, seed: u64, config_text: &str) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command,
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
            version: env!("CARGO_PKG_VERSION"),
            parallel: masym::par::is_parallel(),
            artifacts: &self.artifacts,
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        let path = self.root.join(MANIFEST_NAME);
        fs::write(&path, s)?;
        Ok(path)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
    }
}

/// Inserts a provenance comment right after the opening `<svg>` tag.
pub fn with_provenance(svg: String, comment: &str) -> String {
    let safe = comment.replace("--", "- -");
    match svg.find('\n') {
        Some(p) => format!("{}\n<!-- {safe} -->{}", &svg[..p], &svg[p..]),
        None => svg,
    }
}
