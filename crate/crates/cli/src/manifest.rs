use std::path::Path;

use regid::io::{write_file, FileRecord};
use serde::Serialize;

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Provenance record written next to every set of outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Effective configuration after merging flags, file, and defaults.
    pub config: toml::Table,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: toml::Table) -> Self {
        Manifest {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, records: impl IntoIterator<Item = FileRecord>) {
        self.files.extend(records.into_iter().map(|r| ManifestFile {
            name: r.name,
            sha256: r.sha256,
            bytes: r.bytes,
        }));
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::Data(format!("manifest: {e}")))?;
        write_file(dir, MANIFEST_NAME, &text)?;
        Ok(())
    }
}

/// `key = value` lines for a config table, one per entry.
pub fn render_config(config: &toml::Table) -> String {
    let mut out = String::new();
    for (k, v) in config {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
