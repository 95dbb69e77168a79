//! Optional TOML configuration. Every key mirrors a command-line flag; flags
//! win over file values, file values win over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub bench: BenchFile,
    #[serde(default)]
    pub fit: FitFile,
    #[serde(default, rename = "sample-prior", alias = "sample_prior")]
    pub sample_prior: SamplePriorFile,
    #[serde(default)]
    pub kernel: KernelFile,
    #[serde(default)]
    pub atoms: AtomsFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub runs: Option<usize>,
    pub n: Option<usize>,
    pub n_free: Option<bool>,
    pub seed: Option<u64>,
    pub estimators: Option<Vec<String>>,
    pub order: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub timings: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub method: Option<String>,
    pub order: Option<usize>,
    pub sigma2: Option<String>,
    pub gamma: Option<String>,
    pub folds: Option<usize>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub stem: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePriorFile {
    pub prior: Option<String>,
    pub length: Option<usize>,
    pub seed: Option<u64>,
    pub m: Option<usize>,
    pub two_lambda: Option<f64>,
    pub row: Option<usize>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub dump: Option<bool>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub kind: Option<String>,
    pub m: Option<usize>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsFile {
    pub m: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}
