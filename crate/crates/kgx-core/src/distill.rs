//! Evaluator distillation and evaluator-based ranking.
//!
//! The evaluator is trained to reproduce the teacher's triple scores from
//! enclosing subgraphs alone: for every training fact the objective is
//!
//! ```text
//! ‖φ(h,r,t) − Z(h,r,t)‖² + λ·(−Z(h,r,t) + (1/N)·Σ_n Z(h,r,v_n))
//! ```
//!
//! with the `v_n` drawn uniformly, Z computed on the enclosing subgraph of
//! the scored pair, and the teacher's entity embeddings as initial features.
//! Updates use Adam. Per-fact gradients are reduced in a fixed order
//! (chunked by position), so the result does not depend on thread count.
//!
//! Pairs that are disconnected beyond 2k hops — frequent among corrupted
//! tails — fall back to the bare `{h, v}` pair subgraph, which carries no
//! edges and therefore scores at a learned baseline.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::evaluator::EvaluatorModel;
use crate::graph::{EntityId, KnowledgeGraph, Triple};
use crate::kge::EmbeddingModel;
use crate::mix_seed;
use crate::scalar::Scalar;
use crate::subgraph::enclosing_subgraph;
use crate::train::{negative_sample, CorruptionMode};

/// Distillation hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// λ, the weight of the pairwise ranking term.
    pub pairwise_weight: f64,
    /// Negatives per positive in the pairwise term.
    pub negatives: usize,
    pub batch_size: usize,
    /// Message-passing layers.
    pub layers: usize,
    /// Hidden width d.
    pub dim: usize,
    /// Enclosing-subgraph radius used for every scored pair.
    pub subgraph_hops: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.001,
            pairwise_weight: 0.5,
            negatives: 2,
            batch_size: 1024,
            layers: 2,
            dim: 64,
            subgraph_hops: 2,
            seed: 42,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.dim == 0 || self.batch_size == 0 || self.subgraph_hops == 0 {
            return Err(Error::InvalidQuery(
                "layers, dim, batch size and subgraph radius must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidQuery("learning rate must be positive".into()));
        }
        if !(self.pairwise_weight >= 0.0 && self.pairwise_weight.is_finite()) {
            return Err(Error::InvalidQuery(
                "pairwise weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A cached enclosing subgraph, lowered to plain entity and triple lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedSubgraph {
    pub entities: Vec<EntityId>,
    pub edges: Vec<Triple>,
    /// The pair was disconnected beyond 2k hops (or degenerate `h == t`);
    /// the subgraph is the bare pair.
    pub pair_fallback: bool,
}

/// Thread-safe cache of enclosing subgraphs keyed by `(head, tail)` at a
/// fixed radius, with optional directory persistence (an index file plus one
/// JSON record per line).
pub struct SubgraphCache {
    hops: usize,
    map: RwLock<HashMap<(EntityId, EntityId), Arc<CachedSubgraph>>>,
}

#[derive(Serialize, Deserialize)]
struct CacheIndex {
    hops: usize,
    entries: usize,
    graph_entities: usize,
    graph_triples: usize,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    head: EntityId,
    tail: EntityId,
    subgraph: CachedSubgraph,
}

impl SubgraphCache {
    pub fn new(hops: usize) -> Self {
        Self {
            hops,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The enclosing subgraph of `(head, tail)`, computed on first use.
    ///
    /// Disconnected and degenerate pairs fall back to the bare pair with its
    /// induced edges (none, by construction, except self-loops).
    pub fn get(
        &self,
        graph: &KnowledgeGraph,
        head: EntityId,
        tail: EntityId,
    ) -> Result<Arc<CachedSubgraph>> {
        graph.check_entity(head)?;
        graph.check_entity(tail)?;
        if let Some(hit) = self.map.read().unwrap().get(&(head, tail)) {
            return Ok(hit.clone());
        }
        let computed = if head == tail {
            CachedSubgraph {
                entities: vec![head],
                edges: graph
                    .incident(head)
                    .iter()
                    .map(|&e| graph.triple(e))
                    .filter(|t| t.head == t.tail)
                    .collect(),
                pair_fallback: true,
            }
        } else {
            match enclosing_subgraph(graph, head, tail, self.hops) {
                Ok(sub) => CachedSubgraph {
                    entities: sub.entities.iter().copied().collect(),
                    edges: sub.edges.iter().map(|&e| graph.triple(e)).collect(),
                    pair_fallback: false,
                },
                Err(Error::DisconnectedPair { .. }) => {
                    let mut entities = vec![head, tail];
                    entities.sort_unstable();
                    CachedSubgraph {
                        entities,
                        edges: Vec::new(),
                        pair_fallback: true,
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let arc = Arc::new(computed);
        self.map
            .write()
            .unwrap()
            .entry((head, tail))
            .or_insert_with(|| arc.clone());
        Ok(arc)
    }

    /// Persist every cached subgraph under `dir`.
    pub fn save_dir<P: AsRef<Path>>(&self, dir: P, graph: &KnowledgeGraph) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let map = self.map.read().unwrap();
        let mut keys: Vec<(EntityId, EntityId)> = map.keys().copied().collect();
        keys.sort_unstable();
        let mut data = String::new();
        for key in &keys {
            let record = CacheRecord {
                head: key.0,
                tail: key.1,
                subgraph: (*map[key]).clone(),
            };
            data.push_str(&serde_json::to_string(&record)?);
            data.push('\n');
        }
        fs::write(dir.join("subgraphs.jsonl"), data)?;
        let index = CacheIndex {
            hops: self.hops,
            entries: keys.len(),
            graph_entities: graph.num_entities(),
            graph_triples: graph.num_triples(),
            data: "subgraphs.jsonl".into(),
        };
        fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
        Ok(())
    }

    /// Load a cache directory, validating the radius and graph shape.
    pub fn load_dir<P: AsRef<Path>>(
        dir: P,
        hops: usize,
        graph: &KnowledgeGraph,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        let index: CacheIndex = serde_json::from_str(&fs::read_to_string(dir.join("index.json"))?)?;
        if index.hops != hops
            || index.graph_entities != graph.num_entities()
            || index.graph_triples != graph.num_triples()
        {
            return Err(Error::InvalidQuery(format!(
                "subgraph cache at {} does not match the graph or radius",
                dir.display()
            )));
        }
        let cache = Self::new(hops);
        {
            let mut map = cache.map.write().unwrap();
            for line in fs::read_to_string(dir.join(&index.data))?.lines() {
                let record: CacheRecord = serde_json::from_str(line)?;
                map.insert((record.head, record.tail), Arc::new(record.subgraph));
            }
        }
        Ok(cache)
    }
}

/// Distillation output: the evaluator, total-objective trace, and the
/// alignment-gap trace (mean `(φ−Z)²`). Index 0 of each trace is a full
/// pass at initialization; later entries are per-epoch running means.
#[derive(Debug)]
pub struct DistillOutcome<S> {
    pub evaluator: EvaluatorModel<S>,
    pub loss_trace: Vec<f64>,
    pub alignment_trace: Vec<f64>,
}

struct Adam<S> {
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
}

impl<S: Scalar> Adam<S> {
    fn new(len: usize) -> Self {
        Self {
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            step: 0,
        }
    }

    fn step(&mut self, params: &mut [S], grads: &[S], lr: f64) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let b1 = S::of(BETA1);
        let b2 = S::of(BETA2);
        let correction1 = S::of(1.0 - BETA1.powi(self.step as i32));
        let correction2 = S::of(1.0 - BETA2.powi(self.step as i32));
        let lr = S::of(lr);
        let eps = S::of(EPS);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (S::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (S::one() - b2) * g * g;
            let m_hat = self.m[i] / correction1;
            let v_hat = self.v[i] / correction2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Facts per parallel gradient chunk; fixed so the reduction order (and thus
/// the result) is independent of thread count.
const GRAD_CHUNK: usize = 32;

/// Distill a subgraph evaluator from a trained teacher.
pub fn distill<S: Scalar>(
    graph: &KnowledgeGraph,
    teacher: &EmbeddingModel<S>,
    cfg: &DistillConfig,
    cache: &SubgraphCache,
) -> Result<DistillOutcome<S>> {
    cfg.validate()?;
    if graph.num_triples() == 0 {
        return Err(Error::EmptyInput("cannot distill on an empty graph".into()));
    }
    if cache.hops() != cfg.subgraph_hops {
        return Err(Error::InvalidQuery(
            "cache radius differs from the configured subgraph radius".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluator = EvaluatorModel::init(teacher, cfg.layers, cfg.dim, &mut rng);
    let teacher_scores: Vec<S> = graph
        .triples()
        .iter()
        .map(|t| teacher.score_triple(t))
        .collect::<Result<_>>()?;

    let mut adam = Adam::new(evaluator.params().len());
    let mut loss_trace = Vec::with_capacity(cfg.epochs + 1);
    let mut alignment_trace = Vec::with_capacity(cfg.epochs + 1);

    // Full pass at initialization (gradients discarded).
    let (init_loss, init_align) = {
        let mut sums = (0.0, 0.0);
        let order: Vec<u32> = (0..graph.num_triples() as u32).collect();
        let stats: Vec<Result<(f64, f64)>> = order
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut loss = 0.0;
                let mut align = 0.0;
                for &fi in chunk {
                    let (l, a) = fact_pass::<S>(
                        graph,
                        teacher,
                        &evaluator,
                        cache,
                        cfg,
                        &teacher_scores,
                        fi,
                        0,
                        None,
                    )?;
                    loss += l;
                    align += a;
                }
                Ok((loss, align))
            })
            .collect();
        for s in stats {
            let (l, a) = s?;
            sums.0 += l;
            sums.1 += a;
        }
        let n = graph.num_triples() as f64;
        (sums.0 / n, sums.1 / n)
    };
    loss_trace.push(init_loss);
    alignment_trace.push(init_align);

    let mut order: Vec<u32> = (0..graph.num_triples() as u32).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_align = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            // Per-chunk gradients, reduced in chunk order.
            let partials: Vec<Result<(Vec<S>, f64, f64)>> = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut grads = vec![S::zero(); evaluator.params().len()];
                    let mut loss = 0.0;
                    let mut align = 0.0;
                    for &fi in chunk {
                        let (l, a) = fact_pass::<S>(
                            graph,
                            teacher,
                            &evaluator,
                            cache,
                            cfg,
                            &teacher_scores,
                            fi,
                            epoch as u64 + 1,
                            Some(&mut grads),
                        )?;
                        loss += l;
                        align += a;
                    }
                    Ok((grads, loss, align))
                })
                .collect();
            let mut grads = vec![S::zero(); evaluator.params().len()];
            for partial in partials {
                let (g, l, a) = partial?;
                for (acc, v) in grads.iter_mut().zip(&g) {
                    *acc += *v;
                }
                epoch_loss += l;
                epoch_align += a;
            }
            let scale = S::of(1.0 / batch.len() as f64);
            for g in grads.iter_mut() {
                *g *= scale;
            }
            adam.step(evaluator.params_mut(), &grads, cfg.learning_rate);
        }
        let n = graph.num_triples() as f64;
        let mean_loss = epoch_loss / n;
        if !mean_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_trace.push(mean_loss);
        alignment_trace.push(epoch_align / n);
    }

    Ok(DistillOutcome {
        evaluator,
        loss_trace,
        alignment_trace,
    })
}

/// Forward (and optionally backward) for one fact: the alignment term on the
/// positive subgraph plus the pairwise term over `N` sampled tails.
#[allow(clippy::too_many_arguments)]
fn fact_pass<S: Scalar>(
    graph: &KnowledgeGraph,
    teacher: &EmbeddingModel<S>,
    evaluator: &EvaluatorModel<S>,
    cache: &SubgraphCache,
    cfg: &DistillConfig,
    teacher_scores: &[S],
    fact_index: u32,
    epoch_salt: u64,
    mut grads: Option<&mut Vec<S>>,
) -> Result<(f64, f64)> {
    let fact = graph.triples()[fact_index as usize];
    let phi = teacher_scores[fact_index as usize];
    let lambda = cfg.pairwise_weight;

    let mut fact_rng = ChaCha8Rng::seed_from_u64(mix_seed(
        cfg.seed,
        (epoch_salt << 32) ^ fact_index as u64,
    ));
    let negatives = negative_sample(
        graph,
        fact,
        cfg.negatives,
        CorruptionMode::Tail,
        &mut fact_rng,
    );

    // Positive pass; ∂L/∂Z_pos = 2(Z − φ) − λ.
    let pos_sub = cache.get(graph, fact.head, fact.tail)?;
    let z_pos = match grads.as_deref_mut() {
        None => evaluator.score_for(teacher, &pos_sub.entities, &pos_sub.edges)?,
        Some(g) => {
            let raw = evaluator.gather_raw(teacher, &pos_sub.entities)?;
            let x0 = evaluator.project(&raw);
            let lg = evaluator.build_local(&pos_sub.entities, &pos_sub.edges)?;
            let (z, tape) = evaluator.score_with_tape(&lg, &x0)?;
            let pair_term = if negatives.is_empty() { 0.0 } else { lambda };
            let z_grad = S::of(2.0) * (z - phi) - S::of(pair_term);
            let mut x0_grad = vec![S::zero(); x0.len()];
            evaluator.backward_from_score(&lg, &tape, z_grad, g, Some(&mut x0_grad));
            evaluator.project_backward(&raw, &x0_grad, g);
            z
        }
    };

    let mut pairwise = 0.0;
    if !negatives.is_empty() {
        let inv_n = 1.0 / negatives.len() as f64;
        let mut neg_sum = 0.0;
        for neg in &negatives {
            let sub = cache.get(graph, neg.head, neg.tail)?;
            let z_n = match grads.as_deref_mut() {
                None => evaluator.score_for(teacher, &sub.entities, &sub.edges)?,
                Some(g) => evaluator.score_gradient_for(
                    teacher,
                    &sub.entities,
                    &sub.edges,
                    S::of(lambda * inv_n),
                    g,
                )?,
            };
            neg_sum += z_n.widen();
        }
        pairwise = -z_pos.widen() + inv_n * neg_sum;
    }

    let gap = (phi - z_pos).widen();
    let alignment = gap * gap;
    Ok((alignment + lambda * pairwise, alignment))
}

/// How the true tail's subgraph is chosen during ranking.
pub enum RankMode<'a> {
    /// Every candidate, the true tail included, is scored on its own full
    /// enclosing subgraph — the faithfulness protocol.
    Full,
    /// The true tail is scored on the explanation subgraph; every other
    /// candidate keeps its full enclosing subgraph.
    Explained {
        entities: &'a [EntityId],
        edges: &'a [Triple],
    },
}

/// Rank of the true tail among candidates under evaluator scores:
/// `|{v : Z_v ≥ Z_t}|`, so rank ≥ 1 and ties count against the true tail.
pub fn evaluator_rank<S: Scalar>(
    evaluator: &EvaluatorModel<S>,
    teacher: &EmbeddingModel<S>,
    graph: &KnowledgeGraph,
    cache: &SubgraphCache,
    fact: Triple,
    candidates: &[EntityId],
    mode: RankMode<'_>,
) -> Result<usize> {
    if !candidates.contains(&fact.tail) {
        return Err(Error::InvalidQuery(format!(
            "true tail {} is not among the candidates",
            fact.tail
        )));
    }
    let score_pair = |tail: EntityId| -> Result<S> {
        let sub = cache.get(graph, fact.head, tail)?;
        evaluator.score_for(teacher, &sub.entities, &sub.edges)
    };
    let z_true = match mode {
        RankMode::Full => score_pair(fact.tail)?,
        RankMode::Explained { entities, edges } => {
            evaluator.score_for(teacher, entities, edges)?
        }
    };
    let mut rank = 0usize;
    for &v in candidates {
        let z = if v == fact.tail {
            z_true
        } else {
            score_pair(v)?
        };
        if z >= z_true {
            rank += 1;
        }
    }
    Ok(rank)
}
