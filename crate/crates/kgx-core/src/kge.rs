//! Embedding models over (head, relation, tail) triples: TransE, DistMult,
//! and RotatE score functions with analytic gradients.
//!
//! RotatE entity embeddings are complex vectors stored as `2d` reals (first
//! half real parts, second half imaginary parts); its relations are stored
//! as `d` phases in `[0, 2π)`, so every relation coefficient has modulus 1
//! by construction.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::scalar::Scalar;

/// Score-function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// φ = −‖e_h + e_r − e_t‖₂
    TransE,
    /// φ = Σ_i e_h[i]·e_r[i]·e_t[i]
    DistMult,
    /// φ = −Σ_i |e_h[i]∘e_r[i] − e_t[i]| over complex components
    RotatE,
}

impl ModelKind {
    /// Reals per entity row (`2d` for RotatE).
    pub fn entity_width(self, dim: usize) -> usize {
        match self {
            ModelKind::RotatE => 2 * dim,
            _ => dim,
        }
    }

    /// Reals per relation row (phases for RotatE).
    pub fn relation_width(self, dim: usize) -> usize {
        dim
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Some(ModelKind::TransE),
            "distmult" => Some(ModelKind::DistMult),
            "rotate" => Some(ModelKind::RotatE),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::RotatE => "rotate",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::DistMult => 1,
            ModelKind::RotatE => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::TransE),
            1 => Some(ModelKind::DistMult),
            2 => Some(ModelKind::RotatE),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Entity and relation embedding tables plus the score-function kind.
///
/// The name dictionaries travel with the model and are persisted in its
/// file so ids can be re-aligned with the training graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel<S> {
    kind: ModelKind,
    dim: usize,
    gamma: S,
    entity_rows: Vec<S>,
    relation_rows: Vec<S>,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
}

impl<S: Scalar> EmbeddingModel<S> {
    /// Seeded initialization: entries uniform in `[−6/√d, 6/√d]`, RotatE
    /// relation phases uniform in `[0, 2π)`.
    pub fn init<R: Rng>(
        graph: &KnowledgeGraph,
        kind: ModelKind,
        dim: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Self {
        let bound = 6.0 / (dim as f64).sqrt();
        let ew = kind.entity_width(dim);
        let rw = kind.relation_width(dim);
        let entity_rows = (0..graph.num_entities() * ew)
            .map(|_| S::of(rng.random_range(-bound..bound)))
            .collect();
        let relation_rows = (0..graph.num_relations() * rw)
            .map(|_| match kind {
                ModelKind::RotatE => S::of(rng.random_range(0.0..TAU)),
                _ => S::of(rng.random_range(-bound..bound)),
            })
            .collect();
        Self {
            kind,
            dim,
            gamma: S::of(gamma),
            entity_rows,
            relation_rows,
            entity_names: graph.entity_names().to_vec(),
            relation_names: graph.relation_names().to_vec(),
        }
    }

    /// Assemble a model from raw tables, validating shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: ModelKind,
        dim: usize,
        gamma: S,
        entity_rows: Vec<S>,
        relation_rows: Vec<S>,
        entity_names: Vec<String>,
        relation_names: Vec<String>,
    ) -> Result<Self> {
        if entity_rows.len() != entity_names.len() * kind.entity_width(dim) {
            return Err(Error::ShapeMismatch(format!(
                "entity table has {} values, expected {} rows × {}",
                entity_rows.len(),
                entity_names.len(),
                kind.entity_width(dim)
            )));
        }
        if relation_rows.len() != relation_names.len() * kind.relation_width(dim) {
            return Err(Error::ShapeMismatch(format!(
                "relation table has {} values, expected {} rows × {}",
                relation_rows.len(),
                relation_names.len(),
                kind.relation_width(dim)
            )));
        }
        Ok(Self {
            kind,
            dim,
            gamma,
            entity_rows,
            relation_rows,
            entity_names,
            relation_names,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_width(&self) -> usize {
        self.kind.entity_width(self.dim)
    }

    pub fn relation_width(&self) -> usize {
        self.kind.relation_width(self.dim)
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn entity_table(&self) -> &[S] {
        &self.entity_rows
    }

    pub fn relation_table(&self) -> &[S] {
        &self.relation_rows
    }

    pub fn check_entity(&self, id: EntityId) -> Result<()> {
        if (id as usize) < self.num_entities() {
            Ok(())
        } else {
            Err(Error::EntityOutOfRange {
                id,
                count: self.num_entities(),
            })
        }
    }

    pub fn check_relation(&self, id: RelationId) -> Result<()> {
        if (id as usize) < self.num_relations() {
            Ok(())
        } else {
            Err(Error::RelationOutOfRange {
                id,
                count: self.num_relations(),
            })
        }
    }

    pub fn entity_row(&self, id: EntityId) -> Result<&[S]> {
        self.check_entity(id)?;
        let w = self.entity_width();
        Ok(&self.entity_rows[id as usize * w..(id as usize + 1) * w])
    }

    pub fn relation_row(&self, id: RelationId) -> Result<&[S]> {
        self.check_relation(id)?;
        let w = self.relation_width();
        Ok(&self.relation_rows[id as usize * w..(id as usize + 1) * w])
    }

    pub(crate) fn entity_row_mut(&mut self, id: EntityId) -> &mut [S] {
        let w = self.entity_width();
        &mut self.entity_rows[id as usize * w..(id as usize + 1) * w]
    }

    pub(crate) fn relation_row_mut(&mut self, id: RelationId) -> &mut [S] {
        let w = self.relation_width();
        &mut self.relation_rows[id as usize * w..(id as usize + 1) * w]
    }

    /// Plausibility score φ(h, r, t). Deterministic; higher is more plausible.
    pub fn score(&self, head: EntityId, relation: RelationId, tail: EntityId) -> Result<S> {
        let h = self.entity_row(head)?;
        let r = self.relation_row(relation)?;
        let t = self.entity_row(tail)?;
        Ok(score_rows(self.kind, self.dim, h, r, t))
    }

    pub fn score_triple(&self, triple: &Triple) -> Result<S> {
        self.score(triple.head, triple.relation, triple.tail)
    }

    /// Analytic gradient of φ with respect to the three embedding rows.
    ///
    /// At non-differentiable points of the norms (zero difference vector)
    /// the zero subgradient is returned.
    pub fn score_gradient(&self, triple: &Triple) -> Result<ScoreGradient<S>> {
        let h = self.entity_row(triple.head)?;
        let r = self.relation_row(triple.relation)?;
        let t = self.entity_row(triple.tail)?;
        Ok(score_gradient_rows(self.kind, self.dim, h, r, t))
    }

    /// True iff the model's dictionaries match the graph's, so dense ids are
    /// interchangeable between the two.
    pub fn compatible_with(&self, graph: &KnowledgeGraph) -> bool {
        self.entity_names == graph.entity_names() && self.relation_names == graph.relation_names()
    }
}

/// Gradient of the score with respect to the involved rows, plus the score.
#[derive(Debug, Clone)]
pub struct ScoreGradient<S> {
    pub score: S,
    pub head: Vec<S>,
    pub relation: Vec<S>,
    pub tail: Vec<S>,
}

pub(crate) fn score_rows<S: Scalar>(kind: ModelKind, dim: usize, h: &[S], r: &[S], t: &[S]) -> S {
    match kind {
        ModelKind::TransE => {
            let mut sum = S::zero();
            for i in 0..dim {
                let d = h[i] + r[i] - t[i];
                sum += d * d;
            }
            -sum.sqrt()
        }
        ModelKind::DistMult => {
            let mut sum = S::zero();
            for i in 0..dim {
                sum += h[i] * r[i] * t[i];
            }
            sum
        }
        ModelKind::RotatE => {
            let mut total = S::zero();
            for i in 0..dim {
                let (cos, sin) = (r[i].cos(), r[i].sin());
                let rot_re = h[i] * cos - h[dim + i] * sin;
                let rot_im = h[i] * sin + h[dim + i] * cos;
                let d_re = rot_re - t[i];
                let d_im = rot_im - t[dim + i];
                total += (d_re * d_re + d_im * d_im).sqrt();
            }
            -total
        }
    }
}

pub(crate) fn score_gradient_rows<S: Scalar>(
    kind: ModelKind,
    dim: usize,
    h: &[S],
    r: &[S],
    t: &[S],
) -> ScoreGradient<S> {
    match kind {
        ModelKind::TransE => {
            let mut diff = vec![S::zero(); dim];
            let mut sum = S::zero();
            for i in 0..dim {
                let d = h[i] + r[i] - t[i];
                diff[i] = d;
                sum += d * d;
            }
            let norm = sum.sqrt();
            let mut head = vec![S::zero(); dim];
            let mut relation = vec![S::zero(); dim];
            let mut tail = vec![S::zero(); dim];
            if norm > S::zero() {
                for i in 0..dim {
                    let g = diff[i] / norm;
                    head[i] = -g;
                    relation[i] = -g;
                    tail[i] = g;
                }
            }
            ScoreGradient {
                score: -norm,
                head,
                relation,
                tail,
            }
        }
        ModelKind::DistMult => {
            let mut score = S::zero();
            let mut head = vec![S::zero(); dim];
            let mut relation = vec![S::zero(); dim];
            let mut tail = vec![S::zero(); dim];
            for i in 0..dim {
                score += h[i] * r[i] * t[i];
                head[i] = r[i] * t[i];
                relation[i] = h[i] * t[i];
                tail[i] = h[i] * r[i];
            }
            ScoreGradient {
                score,
                head,
                relation,
                tail,
            }
        }
        ModelKind::RotatE => {
            let mut score = S::zero();
            let mut head = vec![S::zero(); 2 * dim];
            let mut relation = vec![S::zero(); dim];
            let mut tail = vec![S::zero(); 2 * dim];
            for i in 0..dim {
                let (cos, sin) = (r[i].cos(), r[i].sin());
                let rot_re = h[i] * cos - h[dim + i] * sin;
                let rot_im = h[i] * sin + h[dim + i] * cos;
                let d_re = rot_re - t[i];
                let d_im = rot_im - t[dim + i];
                let modulus = (d_re * d_re + d_im * d_im).sqrt();
                score -= modulus;
                if modulus > S::zero() {
                    // ∂φ/∂d = −d / |d|, then chain through the rotation.
                    let g_re = -(d_re / modulus);
                    let g_im = -(d_im / modulus);
                    head[i] = g_re * cos + g_im * sin;
                    head[dim + i] = -g_re * sin + g_im * cos;
                    relation[i] = g_re * (-rot_im) + g_im * rot_re;
                    tail[i] = -g_re;
                    tail[dim + i] = -g_im;
                }
            }
            ScoreGradient {
                score,
                head,
                relation,
                tail,
            }
        }
    }
}

/// Wrap a phase into `[0, 2π)`.
pub(crate) fn wrap_phase<S: Scalar>(x: S) -> S {
    let tau = S::of(TAU);
    let mut v = x % tau;
    if v < S::zero() {
        v += tau;
    }
    v
}

/// Rank of the true tail among `candidates` for the query `(head, relation, ?)`:
/// the number of candidates scoring at least as high as the true tail, so the
/// result is ≥ 1 and ties count against the true tail.
pub fn tail_rank<S: Scalar>(
    model: &EmbeddingModel<S>,
    head: EntityId,
    relation: RelationId,
    tail: EntityId,
    candidates: &[EntityId],
) -> Result<usize> {
    if !candidates.contains(&tail) {
        return Err(Error::InvalidQuery(format!(
            "true tail {tail} is not among the candidates"
        )));
    }
    let target = model.score(head, relation, tail)?;
    let mut rank = 0;
    for &v in candidates {
        if model.score(head, relation, v)? >= target {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Head-side counterpart of [`tail_rank`] for queries `(?, relation, tail)`.
pub fn head_rank<S: Scalar>(
    model: &EmbeddingModel<S>,
    head: EntityId,
    relation: RelationId,
    tail: EntityId,
    candidates: &[EntityId],
) -> Result<usize> {
    if !candidates.contains(&head) {
        return Err(Error::InvalidQuery(format!(
            "true head {head} is not among the candidates"
        )));
    }
    let target = model.score(head, relation, tail)?;
    let mut rank = 0;
    for &v in candidates {
        if model.score(v, relation, tail)? >= target {
            rank += 1;
        }
    }
    Ok(rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model(kind: ModelKind, dim: usize, entity: Vec<f64>, relation: Vec<f64>) -> Model2 {
        let ne = entity.len() / kind.entity_width(dim);
        let nr = relation.len() / kind.relation_width(dim);
        EmbeddingModel::from_parts(
            kind,
            dim,
            6.0,
            entity,
            relation,
            (0..ne).map(|i| format!("e{i}")).collect(),
            (0..nr).map(|i| format!("r{i}")).collect(),
        )
        .unwrap()
    }

    type Model2 = EmbeddingModel<f64>;

    #[test]
    fn transe_exact_translation_scores_zero() {
        // e_h = (1, 0), e_r = (0, 1), e_t = (1, 1)
        let m = toy_model(
            ModelKind::TransE,
            2,
            vec![1.0, 0.0, 1.0, 1.0],
            vec![0.0, 1.0],
        );
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn distmult_all_ones_sums_dim() {
        let m = toy_model(
            ModelKind::DistMult,
            2,
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0],
        );
        assert_eq!(m.score(0, 0, 1).unwrap(), 2.0);
    }

    #[test]
    fn rotate_identity_rotation_scores_zero() {
        // Phases 0 rotate by 1; identical head and tail score 0 (the maximum).
        let m = toy_model(
            ModelKind::RotatE,
            2,
            vec![0.3, -0.7, 0.2, 0.9, 1.3, 0.7, -0.2, 0.4],
            vec![0.0, 0.0],
        );
        assert_eq!(m.score(0, 0, 0).unwrap(), 0.0);
        assert!(m.score(0, 0, 1).unwrap() < 0.0);
    }

    #[test]
    fn distmult_head_gradient_is_relation_times_tail() {
        let m = toy_model(
            ModelKind::DistMult,
            2,
            vec![0.5, -1.0, 2.0, 3.0],
            vec![0.25, 4.0],
        );
        let g = m.score_gradient(&Triple::new(0, 0, 1)).unwrap();
        assert_eq!(g.head, vec![0.25 * 2.0, 4.0 * 3.0]);
        assert_eq!(g.relation, vec![0.5 * 2.0, -1.0 * 3.0]);
        assert_eq!(g.tail, vec![0.5 * 0.25, -1.0 * 4.0]);
    }

    #[test]
    fn transe_gradient_at_singular_point_is_zero_subgradient() {
        let m = toy_model(
            ModelKind::TransE,
            2,
            vec![1.0, 0.0, 1.0, 1.0],
            vec![0.0, 1.0],
        );
        let g = m.score_gradient(&Triple::new(0, 0, 1)).unwrap();
        assert_eq!(g.head, vec![0.0, 0.0]);
        assert_eq!(g.relation, vec![0.0, 0.0]);
        assert_eq!(g.tail, vec![0.0, 0.0]);
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let m = toy_model(ModelKind::TransE, 2, vec![0.0, 0.0], vec![0.0, 0.0]);
        assert!(matches!(
            m.score(1, 0, 0),
            Err(Error::EntityOutOfRange { .. })
        ));
        assert!(matches!(
            m.score(0, 1, 0),
            Err(Error::RelationOutOfRange { .. })
        ));
    }

    #[test]
    fn tail_rank_counts_ties_pessimistically() {
        // Candidate scores under DistMult with r = (1): score = h·t.
        // h = 1, tails: t0 = 0.9 (true), t1 = 0.9, t2 = 0.5.
        let m = toy_model(
            ModelKind::DistMult,
            1,
            vec![1.0, 0.9, 0.9, 0.5],
            vec![1.0],
        );
        assert_eq!(tail_rank(&m, 0, 0, 1, &[1, 2, 3]).unwrap(), 2);
        assert_eq!(tail_rank(&m, 0, 0, 3, &[1, 2, 3]).unwrap(), 3);
    }

    #[test]
    fn tail_rank_requires_tail_among_candidates() {
        let m = toy_model(ModelKind::DistMult, 1, vec![1.0, 0.9], vec![1.0]);
        assert!(matches!(
            tail_rank(&m, 0, 0, 1, &[0]),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn strictly_highest_score_ranks_first() {
        let m = toy_model(
            ModelKind::DistMult,
            1,
            vec![1.0, 2.0, 0.5, -1.0],
            vec![1.0],
        );
        assert_eq!(tail_rank(&m, 0, 0, 1, &[1, 2, 3]).unwrap(), 1);
    }

    #[test]
    fn wrap_phase_stays_in_range() {
        assert!((wrap_phase(-0.1f64) - (TAU - 0.1)).abs() < 1e-12);
        assert_eq!(wrap_phase(0.0f64), 0.0);
        assert!((wrap_phase(TAU + 1.0) - 1.0).abs() < 1e-12);
    }
}
