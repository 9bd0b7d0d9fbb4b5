//! Ranking metrics (Hits@N, Recall@N, F1@N) over paired rank sets, plus the
//! search-cost audit against the `(1 + (L−2)n)·d_max` bound and sparsity
//! aggregation.
//!
//! Recall@N compares the facts the evaluator ranks within N on full
//! subgraphs against the facts it still ranks within N when restricted to
//! the explanation. F1@N balances that recall with the explanation-side hit
//! rate; the degenerate both-zero case is defined as 0. Undefined metrics
//! (empty inputs, empty denominators) are explicit errors, never NaN.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::scalar::Scalar;

/// Per-fact ranks, keyed by fact index so two sets can be paired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSet {
    ranks: BTreeMap<usize, usize>,
}

impl RankSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Result<Self> {
        let mut set = Self::new();
        for (fact, rank) in pairs {
            set.insert(fact, rank)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, fact: usize, rank: usize) -> Result<()> {
        if rank == 0 {
            return Err(Error::InvalidQuery(format!(
                "rank 0 for fact {fact}: ranks start at 1"
            )));
        }
        self.ranks.insert(fact, rank);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ranks.iter().map(|(&f, &r)| (f, r))
    }

    pub fn get(&self, fact: usize) -> Option<usize> {
        self.ranks.get(&fact).copied()
    }

    fn aligned_with(&self, other: &RankSet) -> Result<()> {
        if self.ranks.len() != other.ranks.len()
            || !self.ranks.keys().eq(other.ranks.keys())
        {
            return Err(Error::InvalidQuery(
                "rank sets cover different facts and cannot be paired".into(),
            ));
        }
        Ok(())
    }
}

/// Fraction of ranks at most N.
pub fn hits_at_n(ranks: &RankSet, n: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::UndefinedMetric("Hits@N over an empty rank set".into()));
    }
    if n == 0 {
        return Err(Error::InvalidQuery("Hits@N needs N ≥ 1".into()));
    }
    let hits = ranks.iter().filter(|&(_, r)| r <= n).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Of the facts ranked within N originally, the fraction still ranked
/// within N by their explanations.
pub fn recall_at_n(original: &RankSet, explained: &RankSet, n: usize) -> Result<f64> {
    original.aligned_with(explained)?;
    let denominator: Vec<usize> = original
        .iter()
        .filter(|&(_, r)| r <= n)
        .map(|(f, _)| f)
        .collect();
    if denominator.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "Recall@{n}: no fact has original rank ≤ {n}"
        )));
    }
    let kept = denominator
        .iter()
        .filter(|&&f| explained.get(f).is_some_and(|r| r <= n))
        .count();
    Ok(kept as f64 / denominator.len() as f64)
}

/// Harmonic mean of Recall@N and the explanation-side hit rate
/// `|{expl ≤ N}| / |S_exp|`; 0 when both are 0.
pub fn f1_at_n(original: &RankSet, explained: &RankSet, n: usize) -> Result<f64> {
    let recall = recall_at_n(original, explained, n)?;
    let hits_exp = hits_at_n(explained, n)?;
    if recall + hits_exp == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * recall * hits_exp / (recall + hits_exp))
}

/// Hits/Recall/F1 at one cutoff; undefined values carry their reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsAtN {
    pub n: usize,
    pub hits: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Why a metric is missing, when one is.
    pub undefined: Vec<String>,
}

/// All three metrics at the paper's cutoffs {1, 3, 10}, one pass.
pub fn metric_table(original: &RankSet, explained: &RankSet) -> Result<Vec<MetricsAtN>> {
    original.aligned_with(explained)?;
    let mut rows = Vec::new();
    for n in [1usize, 3, 10] {
        let mut undefined = Vec::new();
        let hits = match hits_at_n(explained, n) {
            Ok(v) => Some(v),
            Err(e) => {
                undefined.push(e.to_string());
                None
            }
        };
        let recall = match recall_at_n(original, explained, n) {
            Ok(v) => Some(v),
            Err(e) => {
                undefined.push(e.to_string());
                None
            }
        };
        let f1 = match (recall, hits) {
            (Some(r), Some(h)) => Some(if r + h == 0.0 { 0.0 } else { 2.0 * r * h / (r + h) }),
            _ => None,
        };
        rows.push(MetricsAtN {
            n,
            hits,
            recall,
            f1,
            undefined,
        });
    }
    Ok(rows)
}

/// One explanation's search-cost inputs for the audit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AuditInput {
    pub fact: usize,
    pub evaluations: usize,
    /// Search layers executed, terminal layer included.
    pub hops: usize,
    /// Whether the tail was reached during the search (the terminal layer
    /// then performed no evaluations).
    pub reached_tail: bool,
    /// n, entities retained per hop.
    pub per_hop: usize,
    /// Maximum degree within the enclosing subgraph.
    pub max_degree: usize,
    /// Edge count of the enclosing subgraph (size trend).
    pub enclosing_edges: usize,
    /// Edge count of the explanation subgraph (sparsity).
    pub explanation_edges: usize,
}

impl AuditInput {
    pub fn from_explanation<S: Scalar>(fact: usize, e: &Explanation<S>) -> Self {
        Self {
            fact,
            evaluations: e.evaluations,
            hops: e.hops_searched,
            reached_tail: e.reached_tail,
            per_hop: e.per_hop_limit,
            max_degree: e.enclosing_max_degree,
            enclosing_edges: e.enclosing_edge_count,
            explanation_edges: e.key_subgraph.num_edges(),
        }
    }

    /// Realized search depth L: when the tail was reached, the terminal
    /// layer evaluated nothing and L is the executed layer count; when the
    /// frontier drained, every executed layer evaluated and the zero-cost
    /// terminal layer is counted on top.
    pub fn realized_depth(&self) -> usize {
        if self.reached_tail {
            self.hops
        } else {
            self.hops + 1
        }
    }

    /// `(1 + (L−2)·n) · d_max`, clamped at zero (L ≤ 1 means the tail was
    /// adjacent before any evaluation, so zero evaluations are allowed).
    pub fn bound(&self) -> usize {
        let l = self.realized_depth() as i64;
        let units = 1 + (l - 2) * self.per_hop as i64;
        if units <= 0 {
            0
        } else {
            units as usize * self.max_degree
        }
    }
}

/// Aggregated audit over a corpus of explanations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub facts: usize,
    /// Facts whose evaluation count exceeded the bound.
    pub violations: Vec<usize>,
    pub mean_evaluations: f64,
    pub max_evaluations: usize,
    /// Mean enclosing-subgraph edge count (subgraph-size trend).
    pub mean_enclosing_edges: f64,
    /// Mean explanation edge count (sparsity).
    pub mean_explanation_edges: f64,
}

/// Metric values at the three reported cutoffs, keyed "1", "3", "10".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AtN {
    #[serde(rename = "1")]
    pub at1: Option<f64>,
    #[serde(rename = "3")]
    pub at3: Option<f64>,
    #[serde(rename = "10")]
    pub at10: Option<f64>,
}

impl AtN {
    pub fn from_rows(rows: &[MetricsAtN], pick: impl Fn(&MetricsAtN) -> Option<f64>) -> Self {
        let mut out = Self::default();
        for row in rows {
            let v = pick(row);
            match row.n {
                1 => out.at1 = v,
                3 => out.at3 = v,
                10 => out.at10 = v,
                _ => {}
            }
        }
        out
    }
}

/// Per-fact appendix line of a [`Report`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFact {
    pub index: usize,
    pub head: String,
    pub relation: String,
    pub tail: String,
    /// "ok", or why the fact is excluded from the paired metrics.
    pub status: String,
    pub original_rank: Option<usize>,
    pub explained_rank: Option<usize>,
    pub teacher_rank: Option<usize>,
    pub edges: Option<usize>,
    pub evaluations: Option<usize>,
}

/// The evaluation report written by the pipeline: explanation-side Hits,
/// Recall and F1 at {1, 3, 10}, sparsity and cost aggregates, and the
/// per-fact appendix. Undefined metrics are null with their reasons listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub hits: AtN,
    pub recall: AtN,
    pub f1: AtN,
    pub avg_edges: f64,
    pub avg_evaluations: f64,
    pub mean_time_s: f64,
    pub audit_violations: usize,
    pub undefined: Vec<String>,
    pub facts: Vec<ReportFact>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Aggregate the audit without failing; violations are listed.
pub fn audit_record(inputs: &[AuditInput]) -> AuditRecord {
    let mut violations = Vec::new();
    let mut eval_sum = 0usize;
    let mut eval_max = 0usize;
    let mut enclosing_sum = 0usize;
    let mut explanation_sum = 0usize;
    for input in inputs {
        if input.evaluations > input.bound() {
            violations.push(input.fact);
        }
        eval_sum += input.evaluations;
        eval_max = eval_max.max(input.evaluations);
        enclosing_sum += input.enclosing_edges;
        explanation_sum += input.explanation_edges;
    }
    let n = inputs.len().max(1) as f64;
    AuditRecord {
        facts: inputs.len(),
        violations,
        mean_evaluations: eval_sum as f64 / n,
        max_evaluations: eval_max,
        mean_enclosing_edges: enclosing_sum as f64 / n,
        mean_explanation_edges: explanation_sum as f64 / n,
    }
}

/// Audit a corpus, failing on the first fact whose importance-evaluation
/// count exceeds `(1 + (L−2)·n)·d_max` of its enclosing subgraph.
pub fn complexity_audit(inputs: &[AuditInput]) -> Result<AuditRecord> {
    let record = audit_record(inputs);
    if let Some(&fact) = record.violations.first() {
        let input = inputs.iter().find(|i| i.fact == fact).unwrap();
        return Err(Error::AuditViolation {
            fact,
            evaluations: input.evaluations,
            bound: input.bound(),
        });
    }
    Ok(record)
}
