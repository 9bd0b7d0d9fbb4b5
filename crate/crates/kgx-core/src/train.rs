//! Pre-training: seeded initialization, uniform negative sampling, and
//! mini-batch SGD on the margin ranking loss
//! `max(0, γ − φ(pos) + φ(neg))` averaged over negatives.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::kge::{wrap_phase, EmbeddingModel, ModelKind, ScoreGradient};
use crate::scalar::Scalar;

/// Pre-training hyperparameters. A fixed seed makes the run bit-reproducible.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Negatives per positive.
    pub negatives: usize,
    /// Margin γ of the ranking loss; also stored in the model.
    pub margin: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            epochs: 200,
            learning_rate: 0.001,
            batch_size: 1024,
            negatives: 2,
            margin: 6.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidQuery(
                "dim and batch size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidQuery("learning rate must be positive".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidQuery("margin must be positive".into()));
        }
        Ok(())
    }
}

/// Which slot of the triple gets corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionMode {
    /// Always replace the tail (used for the distillation ranking loss).
    Tail,
    /// Replace head or tail with probability ½ each (pre-training).
    HeadOrTail,
}

/// Draw `count` corrupted triples: each replaces exactly one slot by an
/// entity sampled uniformly from the graph, never equal to the original.
///
/// Returns an empty list when the graph has fewer than two entities.
pub fn negative_sample<R: Rng>(
    graph: &KnowledgeGraph,
    positive: Triple,
    count: usize,
    mode: CorruptionMode,
    rng: &mut R,
) -> Vec<Triple> {
    let n = graph.num_entities() as u32;
    if n < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let corrupt_head = match mode {
                CorruptionMode::Tail => false,
                CorruptionMode::HeadOrTail => rng.random_bool(0.5),
            };
            let original = if corrupt_head {
                positive.head
            } else {
                positive.tail
            };
            let mut replacement = rng.random_range(0..n);
            while replacement == original {
                replacement = rng.random_range(0..n);
            }
            if corrupt_head {
                Triple::new(replacement, positive.relation, positive.tail)
            } else {
                Triple::new(positive.head, positive.relation, replacement)
            }
        })
        .collect()
}

/// The trained model plus the mean training loss per epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel<S> {
    pub model: EmbeddingModel<S>,
    pub loss_trace: Vec<f64>,
}

/// Pre-train an embedding model on the whole graph.
///
/// Zero epochs return the seeded initialization unchanged. A non-finite
/// epoch loss aborts with [`Error::TrainingDiverged`].
pub fn pretrain<S: Scalar>(
    graph: &KnowledgeGraph,
    kind: ModelKind,
    cfg: &TrainConfig,
) -> Result<TrainedModel<S>> {
    cfg.validate()?;
    if graph.num_triples() == 0 {
        return Err(Error::EmptyInput("cannot train on an empty graph".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model: EmbeddingModel<S> =
        EmbeddingModel::init(graph, kind, cfg.dim, cfg.margin, &mut rng);
    let mut order: Vec<u32> = (0..graph.num_triples() as u32).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let lr = S::of(cfg.learning_rate);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let mut ent_grads: HashMap<EntityId, Vec<S>> = HashMap::new();
            let mut rel_grads: HashMap<RelationId, Vec<S>> = HashMap::new();
            for &ti in batch {
                let positive = graph.triples()[ti as usize];
                let negatives = negative_sample(
                    graph,
                    positive,
                    cfg.negatives,
                    CorruptionMode::HeadOrTail,
                    &mut rng,
                );
                if negatives.is_empty() {
                    continue;
                }
                let pos_grad = model.score_gradient(&positive)?;
                let inv_n = 1.0 / negatives.len() as f64;
                let mut active = 0usize;
                for negative in &negatives {
                    let neg_grad = model.score_gradient(negative)?;
                    let hinge =
                        cfg.margin - pos_grad.score.widen() + neg_grad.score.widen();
                    if hinge > 0.0 {
                        epoch_loss += hinge * inv_n;
                        active += 1;
                        // ∂loss/∂φ(neg) = 1/N for an active hinge.
                        accumulate(
                            &mut ent_grads,
                            &mut rel_grads,
                            negative,
                            &neg_grad,
                            S::of(inv_n),
                        );
                    }
                }
                if active > 0 {
                    // ∂loss/∂φ(pos) = −(active hinges)/N.
                    let w = S::of(-(active as f64) / negatives.len() as f64);
                    accumulate(&mut ent_grads, &mut rel_grads, &positive, &pos_grad, w);
                }
            }
            apply_updates(&mut model, &ent_grads, &rel_grads, lr);
        }
        let mean = epoch_loss / graph.num_triples() as f64;
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_trace.push(mean);
    }

    Ok(TrainedModel { model, loss_trace })
}

fn accumulate<S: Scalar>(
    ent_grads: &mut HashMap<EntityId, Vec<S>>,
    rel_grads: &mut HashMap<RelationId, Vec<S>>,
    triple: &Triple,
    grad: &ScoreGradient<S>,
    scale: S,
) {
    add_scaled(ent_grads.entry(triple.head).or_default(), &grad.head, scale);
    add_scaled(
        rel_grads.entry(triple.relation).or_default(),
        &grad.relation,
        scale,
    );
    add_scaled(ent_grads.entry(triple.tail).or_default(), &grad.tail, scale);
}

fn add_scaled<S: Scalar>(acc: &mut Vec<S>, grad: &[S], scale: S) {
    if acc.is_empty() {
        acc.resize(grad.len(), S::zero());
    }
    for (a, g) in acc.iter_mut().zip(grad) {
        *a += scale * *g;
    }
}

fn apply_updates<S: Scalar>(
    model: &mut EmbeddingModel<S>,
    ent_grads: &HashMap<EntityId, Vec<S>>,
    rel_grads: &HashMap<RelationId, Vec<S>>,
    lr: S,
) {
    let rotate = model.kind() == ModelKind::RotatE;
    for (&id, grad) in ent_grads {
        let row = model.entity_row_mut(id);
        for (x, g) in row.iter_mut().zip(grad) {
            *x = *x - lr * *g;
        }
    }
    for (&id, grad) in rel_grads {
        let row = model.relation_row_mut(id);
        for (x, g) in row.iter_mut().zip(grad) {
            *x = *x - lr * *g;
            if rotate {
                *x = wrap_phase(*x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_graph() -> KnowledgeGraph {
        // Every (head, relation) pair is unique and no relation links two
        // facts that alias under DistMult's symmetry, so all three kinds can
        // rank every training triple first simultaneously.
        KnowledgeGraph::from_id_triples(4, 2, &[(0, 0, 1), (2, 0, 3), (0, 1, 2), (1, 1, 3)])
    }

    #[test]
    fn zero_negatives_gives_empty_list() {
        let g = toy_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let negs = negative_sample(
            &g,
            g.triples()[0],
            0,
            CorruptionMode::HeadOrTail,
            &mut rng,
        );
        assert!(negs.is_empty());
    }

    #[test]
    fn corrupted_triples_differ_in_exactly_one_slot() {
        let g = toy_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let positive = g.triples()[0];
        for neg in negative_sample(&g, positive, 50, CorruptionMode::HeadOrTail, &mut rng) {
            assert_eq!(neg.relation, positive.relation);
            let head_changed = neg.head != positive.head;
            let tail_changed = neg.tail != positive.tail;
            assert!(head_changed ^ tail_changed);
        }
        for neg in negative_sample(&g, positive, 50, CorruptionMode::Tail, &mut rng) {
            assert_eq!(neg.head, positive.head);
            assert_ne!(neg.tail, positive.tail);
        }
    }

    #[test]
    fn zero_epochs_returns_seeded_init() {
        let g = toy_graph();
        let cfg = TrainConfig {
            dim: 8,
            epochs: 0,
            seed: 9,
            ..TrainConfig::default()
        };
        let trained = pretrain::<f64>(&g, ModelKind::TransE, &cfg).unwrap();
        assert!(trained.loss_trace.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = EmbeddingModel::<f64>::init(&g, ModelKind::TransE, 8, cfg.margin, &mut rng);
        assert_eq!(trained.model, init);
    }

    #[test]
    fn fixed_seed_reproduces_identical_models() {
        let g = toy_graph();
        let cfg = TrainConfig {
            dim: 8,
            epochs: 20,
            batch_size: 2,
            seed: 3,
            ..TrainConfig::default()
        };
        let a = pretrain::<f64>(&g, ModelKind::RotatE, &cfg).unwrap();
        let b = pretrain::<f64>(&g, ModelKind::RotatE, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn toy_training_loss_trends_down_and_memorizes() {
        let g = toy_graph();
        let cfg = TrainConfig {
            dim: 16,
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 4,
            negatives: 2,
            margin: 2.0,
            seed: 7,
        };
        for kind in [ModelKind::TransE, ModelKind::DistMult, ModelKind::RotatE] {
            let trained = pretrain::<f64>(&g, kind, &cfg).unwrap();
            let early: f64 = trained.loss_trace[5..15].iter().sum::<f64>() / 10.0;
            let late: f64 = trained.loss_trace[190..].iter().sum::<f64>() / 10.0;
            assert!(
                late <= early,
                "{kind}: loss should not increase (early {early:.4}, late {late:.4})"
            );
            // Memorization: every training triple ranked first among all entities.
            let all: Vec<EntityId> = (0..g.num_entities() as u32).collect();
            for t in g.triples() {
                let rank =
                    crate::kge::tail_rank(&trained.model, t.head, t.relation, t.tail, &all)
                        .unwrap();
                assert_eq!(rank, 1, "{kind}: triple {t:?} not memorized");
            }
        }
    }

    #[test]
    fn rotate_phases_stay_in_range_after_training() {
        let g = toy_graph();
        let cfg = TrainConfig {
            dim: 8,
            epochs: 50,
            learning_rate: 0.1,
            batch_size: 4,
            margin: 4.0,
            ..TrainConfig::default()
        };
        let trained = pretrain::<f64>(&g, ModelKind::RotatE, &cfg).unwrap();
        for &phase in trained.model.relation_table() {
            assert!((0.0..std::f64::consts::TAU).contains(&phase));
        }
    }
}
