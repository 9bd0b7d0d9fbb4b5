//! Ranking metrics against plain counting oracles on random rank sets.
//!
//! The oracles are written as direct set arithmetic over (fact, rank) pairs
//! and share nothing with the metric implementations.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgx_core::metrics::{f1_at_n, hits_at_n, recall_at_n, RankSet};
use kgx_core::Error;

fn oracle_hits(pairs: &[(usize, usize)], n: usize) -> f64 {
    let hits = pairs.iter().filter(|&&(_, r)| r <= n).count();
    hits as f64 / pairs.len() as f64
}

fn oracle_recall(
    original: &[(usize, usize)],
    explained: &[(usize, usize)],
    n: usize,
) -> Option<f64> {
    let orig_within: std::collections::BTreeSet<usize> = original
        .iter()
        .filter(|&&(_, r)| r <= n)
        .map(|&(f, _)| f)
        .collect();
    if orig_within.is_empty() {
        return None;
    }
    let expl_within: std::collections::BTreeSet<usize> = explained
        .iter()
        .filter(|&&(_, r)| r <= n)
        .map(|&(f, _)| f)
        .collect();
    let kept = orig_within.intersection(&expl_within).count();
    Some(kept as f64 / orig_within.len() as f64)
}

fn oracle_f1(original: &[(usize, usize)], explained: &[(usize, usize)], n: usize) -> Option<f64> {
    let recall = oracle_recall(original, explained, n)?;
    let hits = oracle_hits(explained, n);
    Some(if recall + hits == 0.0 {
        0.0
    } else {
        2.0 * recall * hits / (recall + hits)
    })
}

#[test]
fn metrics_match_counting_oracles_on_1000_random_rank_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x313);
    for case in 0..1000 {
        let facts = rng.random_range(1..=50usize);
        let original: Vec<(usize, usize)> = (0..facts)
            .map(|f| (f, rng.random_range(1..=30usize)))
            .collect();
        let explained: Vec<(usize, usize)> = (0..facts)
            .map(|f| (f, rng.random_range(1..=30usize)))
            .collect();
        let orig_set = RankSet::from_pairs(original.iter().copied()).unwrap();
        let expl_set = RankSet::from_pairs(explained.iter().copied()).unwrap();
        for n in [1usize, 3, 10] {
            assert_eq!(
                hits_at_n(&orig_set, n).unwrap(),
                oracle_hits(&original, n),
                "case {case}: hits@{n}"
            );
            match (
                recall_at_n(&orig_set, &expl_set, n),
                oracle_recall(&original, &explained, n),
            ) {
                (Ok(got), Some(want)) => assert_eq!(got, want, "case {case}: recall@{n}"),
                (Err(Error::UndefinedMetric(_)), None) => {}
                (got, want) => panic!("case {case}: recall@{n} mismatch {got:?} vs {want:?}"),
            }
            match (
                f1_at_n(&orig_set, &expl_set, n),
                oracle_f1(&original, &explained, n),
            ) {
                (Ok(got), Some(want)) => assert_eq!(got, want, "case {case}: f1@{n}"),
                (Err(Error::UndefinedMetric(_)), None) => {}
                (got, want) => panic!("case {case}: f1@{n} mismatch {got:?} vs {want:?}"),
            }
            // Range and monotonicity properties that do hold.
            let hits_n = hits_at_n(&expl_set, n).unwrap();
            assert!((0.0..=1.0).contains(&hits_n));
            if let Ok(recall) = recall_at_n(&orig_set, &expl_set, n) {
                assert!((0.0..=1.0).contains(&recall));
                let f1 = f1_at_n(&orig_set, &expl_set, n).unwrap();
                assert!((0.0..=1.0).contains(&f1));
                // F1 never exceeds either component; it is 0 iff both are.
                assert!(f1 <= recall.max(hits_n) + 1e-12);
                assert_eq!(f1 == 0.0, recall * hits_n == 0.0);
            }
        }
        // Hits is monotone in N; recall of a set against itself is 1.
        assert!(
            hits_at_n(&orig_set, 1).unwrap() <= hits_at_n(&orig_set, 3).unwrap()
                && hits_at_n(&orig_set, 3).unwrap() <= hits_at_n(&orig_set, 10).unwrap()
        );
        for n in [1usize, 3, 10] {
            match recall_at_n(&orig_set, &orig_set, n) {
                Ok(v) => assert_eq!(v, 1.0),
                Err(Error::UndefinedMetric(_)) => {}
                Err(other) => panic!("unexpected: {other}"),
            }
        }
    }
}

#[test]
fn worked_f1_example_is_four_sevenths() {
    // Recall = 1/2, explanation-side hits = 2/3 ⇒ F1 = 4/7.
    let original = RankSet::from_pairs([(0, 1), (1, 1), (2, 5)]).unwrap();
    let explained = RankSet::from_pairs([(0, 1), (1, 4), (2, 1)]).unwrap();
    assert!((recall_at_n(&original, &explained, 1).unwrap() - 0.5).abs() < 1e-15);
    assert!((hits_at_n(&explained, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    let f1 = f1_at_n(&original, &explained, 1).unwrap();
    assert!((f1 - 4.0 / 7.0).abs() < 1e-15, "F1 = {f1}");
}
