use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    /// Only with `--record-timing`, so that repeated runs stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Manifest {
            tool: "cnc",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_time_s: None,
        }
    }

    /// Hashes an input file; `label` is the path as written in the config or on the command line.
    pub fn add_input(&mut self, label: &Path, path: &Path) -> Result<(), CliError> {
        let entry = hash_file(path, label.to_string_lossy().replace('\\', "/"))?;
        if !self.inputs.contains(&entry) {
            self.inputs.push(entry);
        }
        Ok(())
    }

    pub fn add_outputs(&mut self, root: &Path, names: &[String]) -> Result<(), CliError> {
        let mut names = names.to_vec();
        names.sort();
        for n in names {
            self.outputs.push(hash_file(&root.join(&n), n)?);
        }
        Ok(())
    }

    pub fn write(&self, root: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        let path = root.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
    }
}

fn hash_file(path: &Path, label: String) -> Result<FileEntry, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(FileEntry { path: label, sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}
