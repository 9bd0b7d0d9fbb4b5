//! Link prediction over knowledge graphs, perturbation-based subgraph
//! explanations for individual predictions, and a distilled graph-attention
//! evaluator that scores explanations quantitatively.
//!
//! The pipeline has four stages, mirrored by the `kgx` command-line tool:
//!
//! 1. pre-train an embedding model (TransE / DistMult / RotatE) on a triple
//!    file ([`train::pretrain`]),
//! 2. explain individual predictions by greedy search over the enclosing
//!    subgraph, scoring candidate entities by removing them and fine-tuning
//!    the embeddings locally ([`explain::greedy_search`]),
//! 3. distill a relational graph-attention evaluator from the trained model
//!    so explanation subgraphs can be scored in isolation
//!    ([`distill::distill`]),
//! 4. rank test facts through the evaluator and aggregate Hits/Recall/F1
//!    plus sparsity and search-cost audits ([`metrics`]).
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! pipeline and the on-disk formats use [`Real`].

pub mod datagen;
pub mod distill;
pub mod error;
pub mod evaluator;
pub mod explain;
pub mod export;
pub mod graph;
pub mod kge;
pub mod metrics;
pub mod model_io;
pub mod retrain;
pub mod scalar;
pub mod subgraph;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the CLI pipeline and the on-disk formats.
pub type Real = f64;

/// Embedding model over [`Real`].
pub type Model = kge::EmbeddingModel<Real>;

/// Distilled subgraph evaluator over [`Real`].
/// Distilled subgraph evaluator over [`Real`].
pub type Evaluator = evaluator::EvaluatorModel<Real>;

/// Derive an independent seed from a base seed and a salt.
///
/// SplitMix64 finalizer; used to give per-fact and per-perturbation RNGs
/// their own deterministic streams so parallel and serial execution agree.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
