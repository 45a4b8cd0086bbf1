//! Run manifests: every CLI run that writes outputs also writes a manifest
//! recording the command, a hash of its effective configuration, the root
//! seed and the crate version. Reruns with an identical manifest must
//! produce byte-identical outputs, so nothing time- or host-dependent goes
//! in here.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_json: &str, seed: u64, outputs: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: hash_hex(config_json),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text)
    }
}

pub fn hash_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
