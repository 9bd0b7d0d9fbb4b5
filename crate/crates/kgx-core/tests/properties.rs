//! Property tests for cross-cutting invariants: sampling uniformity, score
//! stability under serialization, ranking consistency, k-hop monotonicity,
//! and export round-trips on arbitrary documents.

use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgx_core::export::{parse_json, to_json, CountersDoc, ExplanationDoc, FactDoc};
use kgx_core::graph::KnowledgeGraph;
use kgx_core::kge::{tail_rank, ModelKind};
use kgx_core::model_io::{load_model, save_model};
use kgx_core::subgraph::k_hop_neighbors;
use kgx_core::train::{negative_sample, pretrain, CorruptionMode, TrainConfig};

#[test]
fn tail_corruption_is_uniform_over_replacements() {
    // 10k tail corruptions over 5 entities: each of the 4 legal replacements
    // should land within 3σ of the expected quarter share.
    let graph = KnowledgeGraph::from_id_triples(5, 1, &[(0, 0, 1)]);
    let positive = graph.triples()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0xfa1);
    let mut counts = [0usize; 5];
    for negative in negative_sample(&graph, positive, 10_000, CorruptionMode::Tail, &mut rng) {
        counts[negative.tail as usize] += 1;
    }
    assert_eq!(counts[1], 0, "original tail must never be drawn");
    let expected = 10_000.0 / 4.0;
    let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
    for (entity, &count) in counts.iter().enumerate() {
        if entity == 1 {
            continue;
        }
        assert!(
            (count as f64 - expected).abs() <= 3.0 * sigma,
            "entity {entity} drawn {count} times (expected {expected} ± {:.1})",
            3.0 * sigma
        );
    }
}

#[test]
fn scores_survive_serialization_bit_exactly() {
    let graph =
        KnowledgeGraph::from_id_triples(5, 2, &[(0, 0, 1), (1, 1, 2), (2, 0, 3), (3, 1, 4)]);
    let dir = tempfile::tempdir().unwrap();
    for kind in [ModelKind::TransE, ModelKind::DistMult, ModelKind::RotatE] {
        let model = pretrain::<f64>(
            &graph,
            kind,
            &TrainConfig {
                dim: 8,
                epochs: 15,
                batch_size: 4,
                ..TrainConfig::default()
            },
        )
        .unwrap()
        .model;
        let path = dir.path().join(format!("{kind}.kgx"));
        save_model(&model, &path).unwrap();
        let loaded = load_model::<f64, _>(&path).unwrap();
        for h in 0..5u32 {
            for r in 0..2u32 {
                for t in 0..5u32 {
                    assert_eq!(
                        model.score(h, r, t).unwrap().to_bits(),
                        loaded.score(h, r, t).unwrap().to_bits(),
                        "{kind}: score({h},{r},{t}) changed across the round trip"
                    );
                }
            }
        }
    }
}

#[test]
fn unique_argmax_tail_always_ranks_first() {
    let graph =
        KnowledgeGraph::from_id_triples(8, 2, &[(0, 0, 1), (2, 1, 3), (4, 0, 5), (6, 1, 7)]);
    let candidates: Vec<u32> = (0..8).collect();
    for kind in [ModelKind::TransE, ModelKind::DistMult, ModelKind::RotatE] {
        for seed in 0..20 {
            let model = pretrain::<f64>(
                &graph,
                kind,
                &TrainConfig {
                    dim: 6,
                    epochs: 0,
                    seed,
                    ..TrainConfig::default()
                },
            )
            .unwrap()
            .model;
            for (h, r) in [(0u32, 0u32), (3, 1), (5, 0)] {
                let scores: Vec<f64> = candidates
                    .iter()
                    .map(|&v| model.score(h, r, v).unwrap())
                    .collect();
                let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let argmax: Vec<u32> = candidates
                    .iter()
                    .copied()
                    .filter(|&v| scores[v as usize] == best)
                    .collect();
                if argmax.len() == 1 {
                    assert_eq!(
                        tail_rank(&model, h, r, argmax[0], &candidates).unwrap(),
                        1,
                        "{kind}: the unique argmax must rank first"
                    );
                }
            }
        }
    }
}

fn name_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,8}".prop_map(|s| s)
}

fn fact_strategy() -> impl Strategy<Value = FactDoc> {
    (name_strategy(), name_strategy(), name_strategy()).prop_map(|(h, r, t)| FactDoc {
        head: h,
        relation: r,
        tail: t,
    })
}

fn doc_strategy() -> impl Strategy<Value = ExplanationDoc> {
    (
        fact_strategy(),
        proptest::collection::vec(name_strategy(), 0..6),
        proptest::collection::vec(fact_strategy(), 0..6),
        proptest::collection::btree_map(name_strategy(), -1e6f64..1e6, 0..6),
        (0usize..1000, 0usize..10),
        any::<bool>(),
    )
        .prop_map(|(fact, entities, edges, importance, (evals, hops), fallback)| {
            ExplanationDoc {
                fact,
                entities,
                edges,
                importance,
                counters: CountersDoc {
                    evaluations: evals,
                    hops,
                },
                fallback,
            }
        })
}

proptest! {
    #[test]
    fn export_round_trip_is_lossless_and_stable(doc in doc_strategy()) {
        let json = to_json(&doc);
        let parsed = parse_json(&json).unwrap();
        prop_assert_eq!(&parsed, &doc);
        prop_assert_eq!(to_json(&parsed), json);
    }

    #[test]
    fn k_hop_balls_nest(
        edges in proptest::collection::vec((0u32..12, 0u32..2, 0u32..12), 1..40),
        v in 0u32..12,
        k in 0usize..4,
    ) {
        let graph = KnowledgeGraph::from_id_triples(12, 2, &edges);
        let inner = k_hop_neighbors(&graph, v, k).unwrap();
        let outer = k_hop_neighbors(&graph, v, k + 1).unwrap();
        prop_assert!(inner.is_subset(&outer));
        prop_assert!(inner.contains(&v));
    }
}
