//! Run manifests: every command records what it read, what it wrote, and
//! the parameters it ran with, so an output directory is self-describing.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// SHA-256 fingerprint of one file, streamed so large inputs are cheap.
#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> io::Result<FileDigest> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let bytes = io::copy(&mut file, &mut hasher)?;
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes,
        sha256: format!("{:x}", hasher.finalize()),
    })
}

/// Written as `manifest.json` next to a command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub created_unix_s: u64,
    pub argv: Vec<String>,
    pub params: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub diagnostics: Value,
}

impl RunManifest {
    pub fn new(command: &'static str, params: Value) -> RunManifest {
        let created_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool: "sightline",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_unix_s,
            argv: std::env::args().skip(1).collect(),
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            diagnostics: Value::Null,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> io::Result<()> {
        self.outputs.push(digest_file(path)?);
        Ok(())
    }

    /// Writes `manifest.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest is serializable");
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
