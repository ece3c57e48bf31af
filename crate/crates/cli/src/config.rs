//! Configuration file handling and run-directory manifests.
//!
//! A config file is a JSON mirror of [`CliConfig`]; command-line flags
//! override file values, and the effective merged configuration is what
//! ends up in the manifest next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use eprb_core::harness::sha256_hex;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * std::f64::consts::PI / 180.0
}

/// All tunables of the tool, with the defaults used when neither a config
/// file nor a flag provides a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Points of the phi grid spanning [0, pi] inclusive.
    pub phi_steps: usize,
    /// Single evaluation angle in degrees; overrides the grid when set.
    pub phi_deg: Option<f64>,
    /// Engines for `sweep` runs.
    pub engines: Vec<String>,
    /// Interpretation modes for model engines.
    pub modes: Vec<String>,
    /// Engine for `model` runs (quad or mc).
    pub engine: String,
    /// Interpretation mode for `model` runs.
    pub mode: String,
    pub quad_order: usize,
    /// gauss_legendre or trapezoid.
    pub quad_rule: String,
    pub samples: u64,
    pub seed: u64,
    pub grid_step_deg: f64,
    pub lambda_samples: u64,
    pub strategy: String,
    /// csv or json.
    pub format: String,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            phi_steps: 181,
            phi_deg: None,
            engines: vec!["qm".into(), "quad".into(), "mc".into()],
            modes: vec!["literal".into(), "square-first".into(), "pair-norm".into()],
            engine: "quad".into(),
            mode: "literal".into(),
            quad_order: 64,
            quad_rule: "gauss_legendre".into(),
            samples: 100_000,
            seed: 0,
            grid_step_deg: 1.0,
            lambda_samples: 100_000,
            strategy: "sign-cos".into(),
            format: "csv".into(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)
            .with_context(|| format!("writing config {}", path.display()))?;
        Ok(())
    }
}

/// Manifest written next to every output file: enough to reproduce the
/// run, plus SHA-256 digests of everything written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileManifest {
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub created_at: String,
    pub digests: BTreeMap<String, String>,
}

impl FileManifest {
    pub fn new(config: serde_json::Value, seed: u64, created_at: String) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            created_at,
            digests: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.digests.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }

    /// Compare the stored digest of `name` against the bytes on disk.
    pub fn verify(&self, dir: &Path, name: &str) -> std::result::Result<(), String> {
        let Some(expected) = self.digests.get(name) else {
            return Err(format!("manifest has no digest for {name}"));
        };
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        let got = sha256_hex(&bytes);
        if &got != expected {
            return Err(format!(
                "digest mismatch for {name}: manifest {expected}, file {got}"
            ));
        }
        Ok(())
    }
}

/// Sidecar manifest path for a single output file.
pub fn sidecar_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
