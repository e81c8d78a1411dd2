//! The run report and its provenance.
//!
//! `report.json` holds only quantities that are fixed by the configuration and
//! seed, so identical runs write identical bytes. Wall-clock data goes to
//! `report.meta.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::LabError;
use crate::pipelines::{
    CoveringSection, ImprovedSection, LyapunovSection, NonlocalSection, OffdiagSection, PoincareSection,
    QuadraticSection,
};

pub const REPORT_FILE: &str = "report.json";
pub const META_FILE: &str = "report.meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub shape: Vec<usize>,
    pub nodes: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Relative weight mass outside the box; `null` when the weight does not decay.
    pub tail_estimate: Option<f64>,
    pub volume_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub pipeline: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub grid: GridInfo,
    pub lyapunov: Option<LyapunovSection>,
    pub poincare_gap: Option<PoincareSection>,
    pub improved_gap: Option<ImprovedSection>,
    pub offdiag: Option<OffdiagSection>,
    pub quadratic_id: Option<QuadraticSection>,
    pub nonlocal: Option<NonlocalSection>,
    pub covering: Option<CoveringSection>,
    pub assertions: Vec<Assertion>,
    pub all_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub pipeline: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: ToolInfo,
    pub config_hash: String,
    pub started_unix_seconds: u64,
    pub threads: usize,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
}

/// Git-style content hash: SHA-256 of `"blob <len>\0" ++ content`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the effective configuration in canonical form.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    content_hash(cfg.to_toml().as_bytes())
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, self.to_json()).map_err(|e| LabError::io(&path, e))
    }
}

impl RunMeta {
    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        let path = dir.join(META_FILE);
        let s = serde_json::to_string_pretty(self).expect("meta serializes");
        std::fs::write(&path, s + "\n").map_err(|e| LabError::io(&path, e))
    }
}

/// Loads a report as untyped JSON and checks its schema version.
pub fn load_report_value(path: &Path) -> Result<serde_json::Value, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| LabError::Report(format!("{}: {e}", path.display())))?;
    match v.get("schema_version").and_then(|s| s.as_u64()) {
        Some(s) if s == SCHEMA_VERSION as u64 => Ok(v),
        Some(s) => Err(LabError::Report(format!(
            "{}: schema version {s} differs from {SCHEMA_VERSION}",
            path.display()
        ))),
        None => Err(LabError::Report(format!("{}: no schema_version field", path.display()))),
    }
}
