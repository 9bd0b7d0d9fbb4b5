//! Run manifests: the resolved configuration plus per-command results.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PipelineConfig;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: PipelineConfig,
    #[serde(default)]
    pub results: Value,
}

impl Manifest {
    pub fn new(command: &str, config: PipelineConfig, results: Value) -> Self {
        Self {
            command: command.into(),
            config,
            results,
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    }
}

/// Per-fact record of an explain run. Wall times live here (not in the
/// explanation files), so downstream artifacts stay byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainFactEntry {
    pub index: usize,
    /// Line number in the test file.
    pub line: usize,
    pub head: String,
    pub relation: String,
    pub tail: String,
    /// "ok" or the failure text.
    pub status: String,
    pub evaluations: usize,
    pub hops: usize,
    /// Edge count of the explanation subgraph.
    pub edges: usize,
    pub reached_tail: bool,
    pub fallback: bool,
    /// Maximum degree within the enclosing subgraph.
    pub max_degree: usize,
    pub enclosing_edges: usize,
    pub time_s: f64,
    pub json_file: Option<String>,
    pub dot_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainResults {
    pub facts: Vec<ExplainFactEntry>,
    pub succeeded: usize,
    pub failed: usize,
    pub mean_time_s: f64,
    pub mean_evaluations: f64,
    pub mean_edges: f64,
}
