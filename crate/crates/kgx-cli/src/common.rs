//! Shared helpers: error classification, input loading, seeding, and
//! candidate sampling.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgx_core::graph::{EntityId, KnowledgeGraph, Triple};
use kgx_core::model_io;
use kgx_core::{mix_seed, Evaluator, Model};

/// Failure with its exit class: usage/input errors exit 2, runtime errors 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

pub fn runtime(message: impl Into<String>) -> CliError {
    CliError::Runtime(message.into())
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, CliError> {
    KnowledgeGraph::load_tsv(path)
        .map_err(|e| usage(format!("cannot load graph from {}: {e}", path.display())))
}

pub fn load_model(path: &Path, graph: &KnowledgeGraph) -> Result<Model, CliError> {
    let model: Model = model_io::load_model(path)
        .map_err(|e| usage(format!("cannot load model from {}: {e}", path.display())))?;
    if !model.compatible_with(graph) {
        return Err(usage(format!(
            "model {} was trained on a different graph (dictionaries differ)",
            path.display()
        )));
    }
    Ok(model)
}

pub fn load_evaluator(path: &Path, model: &Model) -> Result<Evaluator, CliError> {
    let evaluator: Evaluator = model_io::load_evaluator(path)
        .map_err(|e| usage(format!("cannot load evaluator from {}: {e}", path.display())))?;
    if evaluator.input_dim() != model.entity_width()
        || evaluator.num_relations() != model.num_relations()
    {
        return Err(usage(format!(
            "evaluator {} does not fit the model (feature width or relation count differ)",
            path.display()
        )));
    }
    Ok(evaluator)
}

/// Seed resolution: explicit flag, then the `KGX_SEED` environment variable,
/// then the built-in default.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    if let Some(seed) = flag {
        return seed;
    }
    if let Ok(raw) = std::env::var("KGX_SEED") {
        if let Ok(seed) = raw.trim().parse() {
            return seed;
        }
    }
    42
}

/// Configure the global worker pool once; later calls are ignored.
pub fn init_jobs(jobs: Option<usize>) {
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

/// Candidate set for ranking one fact: the true tail plus `count` distinct
/// uniformly sampled other entities (or every entity with `full`).
pub fn candidates(
    graph: &KnowledgeGraph,
    fact: Triple,
    count: usize,
    full: bool,
    seed: u64,
    fact_index: usize,
) -> Vec<EntityId> {
    let total = graph.num_entities() as u32;
    if full || count as u32 >= total.saturating_sub(1) {
        return (0..total).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x0ca0_0000 ^ fact_index as u64));
    let mut set = BTreeSet::from([fact.tail]);
    while set.len() < count + 1 {
        let v = rng.random_range(0..total);
        if v != fact.tail {
            set.insert(v);
        }
    }
    set.into_iter().collect()
}

/// `fact_00042.json` / `fact_00042.dot` naming shared by explain and evaluate.
pub fn fact_file_stem(index: usize) -> String {
    format!("fact_{index:05}")
}
