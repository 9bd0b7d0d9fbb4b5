//! Command-line arguments, the resolved pipeline configuration, and
//! manifest-based replay.
//!
//! Every run writes a manifest holding the fully resolved configuration and
//! seeds; `--from-manifest` re-runs a command from that record, reproducing
//! its artifacts bit for bit.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::common::{resolve_seed, usage, CliError};
use crate::manifest::Manifest;

/// Fully resolved configuration; the union of all stage settings. Written
/// into every manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub evaluator_file: Option<PathBuf>,
    pub explanations: Option<PathBuf>,
    pub out: PathBuf,
    /// Score-function kind for pre-training.
    pub kind: String,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Margin γ of the ranking loss.
    pub gamma: f64,
    pub batch_size: usize,
    /// Negatives per positive.
    pub negatives: usize,
    /// Entities retained per search hop (n).
    pub per_hop: usize,
    /// Enclosing-subgraph radius (k).
    pub hops: usize,
    /// Pairwise-loss weight λ for distillation.
    pub lambda: f64,
    /// Message-passing layers; `None` resolves by graph size at run time.
    pub layers: Option<usize>,
    pub retrain_epochs: usize,
    pub retrain_lr: f64,
    /// Sampled candidates per ranking (M).
    pub candidates: usize,
    pub full_candidates: bool,
    /// "greedy" or "random".
    pub baseline: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            model_file: None,
            evaluator_file: None,
            explanations: None,
            out: PathBuf::new(),
            kind: "rotate".into(),
            dim: 64,
            epochs: 200,
            learning_rate: 0.001,
            gamma: 6.0,
            batch_size: 1024,
            negatives: 2,
            per_hop: 2,
            hops: 2,
            lambda: 0.5,
            layers: None,
            retrain_epochs: 20,
            retrain_lr: 0.001,
            candidates: 100,
            full_candidates: false,
            baseline: "greedy".into(),
            seed: 42,
            jobs: None,
            cache_dir: None,
        }
    }
}

fn from_manifest(path: &PathBuf, command: &str) -> Result<PipelineConfig, CliError> {
    let manifest = Manifest::read(path)
        .map_err(|e| usage(format!("cannot read manifest {}: {e}", path.display())))?;
    if manifest.command != command {
        return Err(usage(format!(
            "manifest {} records a `{}` run, not `{command}`",
            path.display(),
            manifest.command
        )));
    }
    Ok(manifest.config)
}

#[derive(Args)]
pub struct PretrainArgs {
    /// Re-run with the configuration recorded in a manifest; other flags are ignored.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    /// Training triple file (TSV: head, relation, tail).
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub train: Option<PathBuf>,
    /// Output model file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub out: Option<PathBuf>,
    /// Score function: transe, distmult, or rotate.
    #[arg(long, default_value = "rotate")]
    pub kind: String,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Ranking-loss margin γ.
    #[arg(long, default_value_t = 6.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    /// Negatives per positive.
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    /// RNG seed (default 42; the KGX_SEED environment variable overrides it).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl PretrainArgs {
    pub fn resolve(self) -> Result<PipelineConfig, CliError> {
        if let Some(path) = &self.from_manifest {
            return from_manifest(path, "pretrain");
        }
        Ok(PipelineConfig {
            train: self.train,
            out: self.out.expect("clap enforces --out"),
            kind: self.kind,
            dim: self.dim,
            epochs: self.epochs,
            learning_rate: self.lr,
            gamma: self.gamma,
            batch_size: self.batch_size,
            negatives: self.negatives,
            seed: resolve_seed(self.seed),
            jobs: self.jobs,
            ..PipelineConfig::default()
        })
    }
}

#[derive(Args)]
pub struct ExplainArgs {
    /// Re-run with the configuration recorded in a manifest; other flags are ignored.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    /// Trained model file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub model: Option<PathBuf>,
    /// Training triple file the model was built from.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub train: Option<PathBuf>,
    /// Test facts to explain.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub test: Option<PathBuf>,
    /// Output directory for per-fact explanation files and the manifest.
    #[arg(long, value_name = "DIR", required_unless_present = "from_manifest")]
    pub out: Option<PathBuf>,
    /// Entities retained per hop (n).
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Enclosing-subgraph radius (k).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub retrain_epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub retrain_lr: f64,
    /// Negatives per positive during fine-tuning.
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    /// Use the random-path baseline instead of the greedy search.
    #[arg(long, value_name = "KIND")]
    pub baseline: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ExplainArgs {
    pub fn resolve(self) -> Result<PipelineConfig, CliError> {
        if let Some(path) = &self.from_manifest {
            return from_manifest(path, "explain");
        }
        let baseline = self.baseline.unwrap_or_else(|| "greedy".into());
        if baseline != "greedy" && baseline != "random" {
            return Err(usage(format!(
                "unknown baseline `{baseline}` (expected greedy or random)"
            )));
        }
        Ok(PipelineConfig {
            model_file: self.model,
            train: self.train,
            test: self.test,
            out: self.out.expect("clap enforces --out"),
            per_hop: self.n,
            hops: self.k,
            retrain_epochs: self.retrain_epochs,
            retrain_lr: self.retrain_lr,
            negatives: self.negatives,
            baseline,
            seed: resolve_seed(self.seed),
            jobs: self.jobs,
            ..PipelineConfig::default()
        })
    }
}

#[derive(Args)]
pub struct DistillArgs {
    /// Re-run with the configuration recorded in a manifest; other flags are ignored.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    /// Trained model file (the teacher).
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub model: Option<PathBuf>,
    /// Training triple file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub train: Option<PathBuf>,
    /// Test facts for the faithfulness report.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub test: Option<PathBuf>,
    /// Output evaluator file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Pairwise-loss weight λ.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Negatives per positive.
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    /// Message-passing layers (default: 2 for graphs under 10k entities, 3 otherwise).
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden width d.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Enclosing-subgraph radius (k).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Sampled candidates for the faithfulness report (M).
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    /// Rank against every entity instead of a sample.
    #[arg(long)]
    pub full_candidates: bool,
    /// Directory for the enclosing-subgraph cache.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl DistillArgs {
    pub fn resolve(self) -> Result<PipelineConfig, CliError> {
        if let Some(path) = &self.from_manifest {
            return from_manifest(path, "distill");
        }
        Ok(PipelineConfig {
            model_file: self.model,
            train: self.train,
            test: self.test,
            out: self.out.expect("clap enforces --out"),
            epochs: self.epochs,
            learning_rate: self.lr,
            lambda: self.lambda,
            negatives: self.negatives,
            batch_size: self.batch_size,
            layers: self.layers,
            dim: self.dim,
            hops: self.k,
            candidates: self.candidates,
            full_candidates: self.full_candidates,
            cache_dir: self.cache_dir,
            seed: resolve_seed(self.seed),
            jobs: self.jobs,
            ..PipelineConfig::default()
        })
    }
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Re-run with the configuration recorded in a manifest; other flags are ignored.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    /// Trained model file (feature source for the evaluator).
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub model: Option<PathBuf>,
    /// Distilled evaluator file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub evaluator: Option<PathBuf>,
    /// Training triple file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub train: Option<PathBuf>,
    /// Test facts to evaluate.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub test: Option<PathBuf>,
    /// Explanation directory produced by `kgx explain`.
    #[arg(long, value_name = "DIR", required_unless_present = "from_manifest")]
    pub explanations: Option<PathBuf>,
    /// Output report file.
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub out: Option<PathBuf>,
    /// Enclosing-subgraph radius (k).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Sampled candidates per ranking (M).
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    /// Rank against every entity instead of a sample.
    #[arg(long)]
    pub full_candidates: bool,
    /// Directory for the enclosing-subgraph cache.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl EvaluateArgs {
    pub fn resolve(self) -> Result<PipelineConfig, CliError> {
        if let Some(path) = &self.from_manifest {
            return from_manifest(path, "evaluate");
        }
        Ok(PipelineConfig {
            model_file: self.model,
            evaluator_file: self.evaluator,
            train: self.train,
            test: self.test,
            explanations: self.explanations,
            out: self.out.expect("clap enforces --out"),
            hops: self.k,
            candidates: self.candidates,
            full_candidates: self.full_candidates,
            cache_dir: self.cache_dir,
            seed: resolve_seed(self.seed),
            jobs: self.jobs,
            ..PipelineConfig::default()
        })
    }
}

pub fn require<'a>(
    field: &'a Option<PathBuf>,
    name: &str,
) -> Result<&'a PathBuf, CliError> {
    field
        .as_ref()
        .ok_or_else(|| usage(format!("missing --{name} (or an incomplete manifest)")))
}
