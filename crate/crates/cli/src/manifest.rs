//! Run manifests: enough to replay a run and check its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> std::io::Result<FileDigest> {
    Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&std::fs::read(path)?) })
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self { command, config, seed, tool_version: env!("CARGO_PKG_VERSION").into(), inputs: vec![], outputs: vec![] }
    }

    pub fn record_inputs(&mut self, paths: &[PathBuf]) -> std::io::Result<()> {
        for p in paths {
            self.inputs.push(digest_file(p)?);
        }
        Ok(())
    }
}
