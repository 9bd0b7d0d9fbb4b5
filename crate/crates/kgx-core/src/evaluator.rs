//! Relational graph-attention subgraph scorer.
//!
//! A stack of L message-passing layers over a subgraph's edges:
//!
//! ```text
//! x_i^l     = Σ_{r} Σ_{j ∈ N_r(i)} α_(i,r,j) · W_r^l · (e_r^{l−1} + x_j^{l−1})
//! α_(i,r,j) = sigmoid(W_1 · [x_i^{l−1} ⊕ x_j^{l−1} ⊕ e_r^{l−1}])
//! ```
//!
//! followed by a mean readout `X_sub = (1/|V|) Σ_i relu(A·x_i^L + b)` and a
//! linear score `Z = w·X_sub`. Attention stays sigmoid-valued and is not
//! normalized across neighbors. Neighborhoods use the undirected-augmented
//! view: each triple sends a message in both directions under the same
//! relation id. Entities without incoming messages get the zero vector.
//!
//! Initial features are the teacher model's entity embeddings; when the
//! teacher row width differs from the hidden width (RotatE stores complex
//! pairs as `2d` reals) a learned linear projection maps them down.
//!
//! Gradients for every parameter group are computed by explicit reverse
//! accumulation through the three equations above; see `backward_from_score`.

use std::collections::HashMap;
use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EntityId, Triple};
use crate::kge::{EmbeddingModel, ModelKind};
use crate::scalar::Scalar;

/// Parameters of the distilled subgraph scorer, stored as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorModel<S> {
    teacher_kind: ModelKind,
    layers: usize,
    dim: usize,
    input_dim: usize,
    relation_names: Vec<String>,
    params: Vec<S>,
}

/// Named index ranges into the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    /// Per-layer, per-relation d×d transforms `W_r^l`.
    pub rel_transforms: Range<usize>,
    /// Per-layer relation embeddings `e_r^{l−1}`, width d.
    pub rel_embeddings: Range<usize>,
    /// Attention vector `W_1`, width 3d.
    pub attention: Range<usize>,
    /// Readout transform `A`, d×d.
    pub readout_weight: Range<usize>,
    /// Readout bias `b`, width d.
    pub readout_bias: Range<usize>,
    /// Scoring vector `w`, width d.
    pub score_weight: Range<usize>,
    /// Input projection (input_dim → d), present iff the widths differ.
    pub input_proj: Option<Range<usize>>,
}

impl ParamLayout {
    fn new(layers: usize, relations: usize, dim: usize, input_dim: usize) -> Self {
        let mut at = 0usize;
        let mut take = |len: usize| {
            let range = at..at + len;
            at += len;
            range
        };
        let rel_transforms = take(layers * relations * dim * dim);
        let rel_embeddings = take(layers * relations * dim);
        let attention = take(3 * dim);
        let readout_weight = take(dim * dim);
        let readout_bias = take(dim);
        let score_weight = take(dim);
        let input_proj = (input_dim != dim).then(|| take(dim * input_dim));
        Self {
            rel_transforms,
            rel_embeddings,
            attention,
            readout_weight,
            readout_bias,
            score_weight,
            input_proj,
        }
    }

    fn total(&self) -> usize {
        self.input_proj
            .as_ref()
            .map(|r| r.end)
            .unwrap_or(self.score_weight.end)
    }

    /// Human-readable group of a parameter index.
    pub fn group_of(&self, idx: usize) -> &'static str {
        if self.rel_transforms.contains(&idx) {
            "relation-transform"
        } else if self.rel_embeddings.contains(&idx) {
            "relation-embedding"
        } else if self.attention.contains(&idx) {
            "attention"
        } else if self.readout_weight.contains(&idx) {
            "readout-weight"
        } else if self.readout_bias.contains(&idx) {
            "readout-bias"
        } else if self.score_weight.contains(&idx) {
            "score-weight"
        } else {
            "input-projection"
        }
    }
}

/// A subgraph lowered to local indices plus its directed message list.
#[derive(Debug, Clone)]
pub(crate) struct LocalGraph {
    pub n: usize,
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Message {
    pub dst: u32,
    pub src: u32,
    pub rel: u32,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape<S> {
    /// x[0] is the input, x[l] the states after layer l; each is n×d.
    x: Vec<Vec<S>>,
    /// Attention values per layer per message.
    alpha: Vec<Vec<S>>,
    /// Transformed messages `W_r·(e_r + x_j)` per layer, n_msg×d.
    msg: Vec<Vec<S>>,
}

impl<S: Scalar> ForwardTape<S> {
    /// Final per-entity states, n×d.
    pub fn final_states(&self) -> &[S] {
        self.x.last().expect("tape has at least the input layer")
    }
}

impl<S: Scalar> EvaluatorModel<S> {
    /// Total parameter count for the given shape, if representable.
    pub fn param_len(
        layers: usize,
        relations: usize,
        dim: usize,
        input_dim: usize,
    ) -> Option<usize> {
        if layers == 0 || dim == 0 || input_dim == 0 {
            return None;
        }
        let base = layers
            .checked_mul(relations)?
            .checked_mul(dim.checked_mul(dim)?)?
            .checked_add(layers.checked_mul(relations)?.checked_mul(dim)?)?
            .checked_add(3 * dim)?
            .checked_add(dim * dim)?
            .checked_add(2 * dim)?;
        if input_dim != dim {
            base.checked_add(dim.checked_mul(input_dim)?)
        } else {
            Some(base)
        }
    }

    /// Seeded Glorot-style initialization.
    pub fn init<R: Rng>(
        teacher: &EmbeddingModel<S>,
        layers: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let relations = teacher.num_relations();
        let input_dim = teacher.entity_width();
        let layout = ParamLayout::new(layers, relations, dim, input_dim);
        let mut params = vec![S::zero(); layout.total()];
        let mut fill = |range: Range<usize>, bound: f64, params: &mut Vec<S>| {
            for i in range {
                params[i] = S::of(rng.random_range(-bound..bound));
            }
        };
        let mat = (6.0 / (dim + dim) as f64).sqrt();
        let vec_b = (6.0 / (dim + 1) as f64).sqrt();
        fill(layout.rel_transforms.clone(), mat, &mut params);
        fill(layout.rel_embeddings.clone(), vec_b, &mut params);
        fill(
            layout.attention.clone(),
            (6.0 / (3 * dim + 1) as f64).sqrt(),
            &mut params,
        );
        fill(layout.readout_weight.clone(), mat, &mut params);
        // A random (not zero) bias keeps entities with all-zero states off the
        // rectifier kink and gives edgeless pair subgraphs a learnable
        // baseline score from the start.
        fill(layout.readout_bias.clone(), vec_b, &mut params);
        fill(layout.score_weight.clone(), vec_b, &mut params);
        if let Some(proj) = layout.input_proj.clone() {
            fill(proj, (6.0 / (input_dim + dim) as f64).sqrt(), &mut params);
        }
        Self {
            teacher_kind: teacher.kind(),
            layers,
            dim,
            input_dim,
            relation_names: teacher.relation_names().to_vec(),
            params,
        }
    }

    /// Assemble from a raw parameter vector, validating its length.
    pub fn from_parts(
        teacher_kind: ModelKind,
        layers: usize,
        dim: usize,
        input_dim: usize,
        params: Vec<S>,
        relation_names: Vec<String>,
    ) -> Result<Self> {
        let expected = Self::param_len(layers, relation_names.len(), dim, input_dim)
            .ok_or_else(|| Error::ShapeMismatch("degenerate evaluator shape".into()))?;
        if params.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "evaluator has {} parameters, expected {expected}",
                params.len()
            )));
        }
        Ok(Self {
            teacher_kind,
            layers,
            dim,
            input_dim,
            relation_names,
            params,
        })
    }

    pub fn teacher_kind(&self) -> ModelKind {
        self.teacher_kind
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    /// Mutable access for optimizers and finite-difference checks.
    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.layers, self.num_relations(), self.dim, self.input_dim)
    }

    fn w_r(&self, layer: usize, rel: u32) -> &[S] {
        let d2 = self.dim * self.dim;
        let start = (layer * self.num_relations() + rel as usize) * d2;
        &self.params[start..start + d2]
    }

    fn e_r(&self, layer: usize, rel: u32) -> &[S] {
        let base = self.layout().rel_embeddings.start;
        let start = base + (layer * self.num_relations() + rel as usize) * self.dim;
        &self.params[start..start + self.dim]
    }

    fn attention(&self) -> &[S] {
        let r = self.layout().attention;
        &self.params[r]
    }

    fn readout_weight(&self) -> &[S] {
        let r = self.layout().readout_weight;
        &self.params[r]
    }

    fn readout_bias(&self) -> &[S] {
        let r = self.layout().readout_bias;
        &self.params[r]
    }

    fn score_weight(&self) -> &[S] {
        let r = self.layout().score_weight;
        &self.params[r]
    }

    fn input_proj(&self) -> Option<&[S]> {
        self.layout().input_proj.map(|r| &self.params[r])
    }

    /// Lower a subgraph to local indices and the directed message list.
    pub(crate) fn build_local(
        &self,
        entities: &[EntityId],
        edges: &[Triple],
    ) -> Result<LocalGraph> {
        let mut index: HashMap<EntityId, u32> = HashMap::with_capacity(entities.len());
        for (i, &v) in entities.iter().enumerate() {
            if index.insert(v, i as u32).is_some() {
                return Err(Error::ShapeMismatch(format!("duplicate entity {v}")));
            }
        }
        let mut messages = Vec::with_capacity(edges.len() * 2);
        for t in edges {
            let h = *index.get(&t.head).ok_or(Error::InvalidSelection(t.head))?;
            let tl = *index.get(&t.tail).ok_or(Error::InvalidSelection(t.tail))?;
            if (t.relation as usize) >= self.num_relations() {
                return Err(Error::RelationOutOfRange {
                    id: t.relation,
                    count: self.num_relations(),
                });
            }
            messages.push(Message {
                dst: tl,
                src: h,
                rel: t.relation,
            });
            if h != tl {
                messages.push(Message {
                    dst: h,
                    src: tl,
                    rel: t.relation,
                });
            }
        }
        Ok(LocalGraph {
            n: entities.len(),
            messages,
        })
    }

    /// Gather teacher rows for the entities and project them to width d.
    pub fn initial_features(
        &self,
        teacher: &EmbeddingModel<S>,
        entities: &[EntityId],
    ) -> Result<Vec<S>> {
        let raw = self.gather_raw(teacher, entities)?;
        Ok(self.project(&raw))
    }

    pub(crate) fn gather_raw(
        &self,
        teacher: &EmbeddingModel<S>,
        entities: &[EntityId],
    ) -> Result<Vec<S>> {
        if teacher.entity_width() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "teacher rows are {} wide, evaluator expects {}",
                teacher.entity_width(),
                self.input_dim
            )));
        }
        let mut raw = Vec::with_capacity(entities.len() * self.input_dim);
        for &v in entities {
            raw.extend_from_slice(teacher.entity_row(v)?);
        }
        Ok(raw)
    }

    /// Apply the input projection (identity when widths match).
    pub(crate) fn project(&self, raw: &[S]) -> Vec<S> {
        match self.input_proj() {
            None => raw.to_vec(),
            Some(proj) => {
                let n = raw.len() / self.input_dim;
                let mut out = vec![S::zero(); n * self.dim];
                for i in 0..n {
                    let row = &raw[i * self.input_dim..(i + 1) * self.input_dim];
                    let dst = &mut out[i * self.dim..(i + 1) * self.dim];
                    for (a, o) in dst.iter_mut().enumerate() {
                        let prow = &proj[a * self.input_dim..(a + 1) * self.input_dim];
                        let mut acc = S::zero();
                        for (p, x) in prow.iter().zip(row) {
                            acc += *p * *x;
                        }
                        *o = acc;
                    }
                }
                out
            }
        }
    }

    /// Backward of the input projection: fold the gradient w.r.t. projected
    /// features into the projection's parameter gradients.
    pub(crate) fn project_backward(&self, raw: &[S], x0_grad: &[S], grads: &mut [S]) {
        let Some(range) = self.layout().input_proj else {
            return;
        };
        let n = raw.len() / self.input_dim;
        let proj_grads = &mut grads[range];
        for i in 0..n {
            let row = &raw[i * self.input_dim..(i + 1) * self.input_dim];
            let g = &x0_grad[i * self.dim..(i + 1) * self.dim];
            for a in 0..self.dim {
                let prow = &mut proj_grads[a * self.input_dim..(a + 1) * self.input_dim];
                let ga = g[a];
                for (p, x) in prow.iter_mut().zip(row) {
                    *p += ga * *x;
                }
            }
        }
    }

    fn check_features(&self, n: usize, x0: &[S]) -> Result<()> {
        if x0.len() != n * self.dim {
            return Err(Error::ShapeMismatch(format!(
                "features are {} values, expected {} entities × {}",
                x0.len(),
                n,
                self.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_tape(&self, lg: &LocalGraph, x0: &[S]) -> Result<ForwardTape<S>> {
        self.check_features(lg.n, x0)?;
        let d = self.dim;
        let att = self.attention();
        let mut x = Vec::with_capacity(self.layers + 1);
        x.push(x0.to_vec());
        let mut alphas = Vec::with_capacity(self.layers);
        let mut msgs = Vec::with_capacity(self.layers);
        for layer in 0..self.layers {
            let prev = &x[layer];
            let mut next = vec![S::zero(); lg.n * d];
            let mut alpha_l = Vec::with_capacity(lg.messages.len());
            let mut msg_l = vec![S::zero(); lg.messages.len() * d];
            for (mi, m) in lg.messages.iter().enumerate() {
                let xi = &prev[m.dst as usize * d..(m.dst as usize + 1) * d];
                let xj = &prev[m.src as usize * d..(m.src as usize + 1) * d];
                let er = self.e_r(layer, m.rel);
                let mut u = S::zero();
                for k in 0..d {
                    u += att[k] * xi[k] + att[d + k] * xj[k] + att[2 * d + k] * er[k];
                }
                let alpha = S::one() / (S::one() + (-u).exp());
                let w = self.w_r(layer, m.rel);
                let out = &mut msg_l[mi * d..(mi + 1) * d];
                for a in 0..d {
                    let wrow = &w[a * d..(a + 1) * d];
                    let mut acc = S::zero();
                    for k in 0..d {
                        acc += wrow[k] * (er[k] + xj[k]);
                    }
                    out[a] = acc;
                }
                let dst = m.dst as usize * d;
                for a in 0..d {
                    next[dst + a] += alpha * out[a];
                }
                alpha_l.push(alpha);
            }
            x.push(next);
            alphas.push(alpha_l);
            msgs.push(msg_l);
        }
        Ok(ForwardTape {
            x,
            alpha: alphas,
            msg: msgs,
        })
    }

    /// Per-entity states after all layers, flattened n×d.
    ///
    /// `x0` must cover the entities in order, width d (use
    /// [`Self::initial_features`] to build it from a teacher model).
    pub fn rgat_forward(
        &self,
        entities: &[EntityId],
        edges: &[Triple],
        x0: &[S],
    ) -> Result<Vec<S>> {
        let lg = self.build_local(entities, edges)?;
        let tape = self.forward_tape(&lg, x0)?;
        Ok(tape.x.into_iter().next_back().unwrap())
    }

    fn readout(&self, x_last: &[S], n: usize) -> (S, Vec<S>) {
        let d = self.dim;
        let a = self.readout_weight();
        let b = self.readout_bias();
        let w = self.score_weight();
        let mut x_sub = vec![S::zero(); d];
        for i in 0..n {
            let xi = &x_last[i * d..(i + 1) * d];
            for row in 0..d {
                let arow = &a[row * d..(row + 1) * d];
                let mut z = b[row];
                for k in 0..d {
                    z += arow[k] * xi[k];
                }
                if z > S::zero() {
                    x_sub[row] += z;
                }
            }
        }
        let inv = S::of(1.0 / n as f64);
        let mut score = S::zero();
        for row in 0..d {
            x_sub[row] *= inv;
            score += w[row] * x_sub[row];
        }
        (score, x_sub)
    }

    /// Subgraph score `Z`: mean rectified readout of the final states, dotted
    /// with the scoring vector. Errors on an empty entity set.
    pub fn subgraph_score(
        &self,
        entities: &[EntityId],
        edges: &[Triple],
        x0: &[S],
    ) -> Result<S> {
        if entities.is_empty() {
            return Err(Error::EmptyInput("cannot score an empty subgraph".into()));
        }
        let states = self.rgat_forward(entities, edges, x0)?;
        Ok(self.readout(&states, entities.len()).0)
    }

    /// Convenience: gather features from the teacher and score.
    pub fn score_for(
        &self,
        teacher: &EmbeddingModel<S>,
        entities: &[EntityId],
        edges: &[Triple],
    ) -> Result<S> {
        let x0 = self.initial_features(teacher, entities)?;
        self.subgraph_score(entities, edges, &x0)
    }

    /// Score the subgraph and accumulate `z_grad · ∂Z/∂θ` into `grads` for
    /// every parameter, the input projection included. Returns Z.
    pub fn score_gradient_for(
        &self,
        teacher: &EmbeddingModel<S>,
        entities: &[EntityId],
        edges: &[Triple],
        z_grad: S,
        grads: &mut [S],
    ) -> Result<S> {
        if grads.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient buffer has {} entries, expected {}",
                grads.len(),
                self.params.len()
            )));
        }
        if entities.is_empty() {
            return Err(Error::EmptyInput("cannot score an empty subgraph".into()));
        }
        let raw = self.gather_raw(teacher, entities)?;
        let x0 = self.project(&raw);
        let lg = self.build_local(entities, edges)?;
        let (z, tape) = self.score_with_tape(&lg, &x0)?;
        let mut x0_grad = vec![S::zero(); x0.len()];
        self.backward_from_score(&lg, &tape, z_grad, grads, Some(&mut x0_grad));
        self.project_backward(&raw, &x0_grad, grads);
        Ok(z)
    }

    /// Forward pass that also returns the score and the tape for backward.
    pub(crate) fn score_with_tape(
        &self,
        lg: &LocalGraph,
        x0: &[S],
    ) -> Result<(S, ForwardTape<S>)> {
        if lg.n == 0 {
            return Err(Error::EmptyInput("cannot score an empty subgraph".into()));
        }
        let tape = self.forward_tape(lg, x0)?;
        let (z, _) = self.readout(tape.final_states(), lg.n);
        Ok((z, tape))
    }

    /// Reverse accumulation from `∂L/∂Z = z_grad` into parameter gradients.
    ///
    /// When `x0_grad` is given, the gradient w.r.t. the (projected) input
    /// features is added to it, for the input-projection backward.
    pub(crate) fn backward_from_score(
        &self,
        lg: &LocalGraph,
        tape: &ForwardTape<S>,
        z_grad: S,
        grads: &mut [S],
        x0_grad: Option<&mut [S]>,
    ) {
        debug_assert_eq!(grads.len(), self.params.len());
        let d = self.dim;
        let n = lg.n;
        let layout = self.layout();
        let x_last = tape.final_states();

        // Readout backward. Z = w·X_sub, X_sub = (1/n) Σ relu(A x_i + b).
        let (_, x_sub) = self.readout(x_last, n);
        let w = self.score_weight();
        let a = self.readout_weight();
        let b = self.readout_bias();
        let mut gx = vec![S::zero(); n * d];
        let inv = S::of(1.0 / n as f64);
        {
            let gw = z_grad;
            for row in 0..d {
                grads[layout.score_weight.start + row] += gw * x_sub[row];
            }
            for i in 0..n {
                let xi = &x_last[i * d..(i + 1) * d];
                for row in 0..d {
                    let arow = &a[row * d..(row + 1) * d];
                    let mut z = b[row];
                    for k in 0..d {
                        z += arow[k] * xi[k];
                    }
                    if z > S::zero() {
                        let dz = z_grad * w[row] * inv;
                        grads[layout.readout_bias.start + row] += dz;
                        let ga = &mut grads
                            [layout.readout_weight.start + row * d..layout.readout_weight.start + (row + 1) * d];
                        for k in 0..d {
                            ga[k] += dz * xi[k];
                        }
                        let gxi = &mut gx[i * d..(i + 1) * d];
                        for k in 0..d {
                            gxi[k] += dz * arow[k];
                        }
                    }
                }
            }
        }

        // Layer backward, deepest first.
        let att = self.attention();
        for layer in (0..self.layers).rev() {
            let prev = &tape.x[layer];
            let alphas = &tape.alpha[layer];
            let msgs = &tape.msg[layer];
            let mut gx_prev = vec![S::zero(); n * d];
            for (mi, m) in lg.messages.iter().enumerate() {
                let dst = m.dst as usize * d;
                let src = m.src as usize * d;
                let gout = &gx[dst..dst + d];
                let alpha = alphas[mi];
                let mvec = &msgs[mi * d..(mi + 1) * d];
                let xi = &prev[dst..dst + d];
                let xj = &prev[src..src + d];
                let er = self.e_r(layer, m.rel);

                // Attention path.
                let mut dalpha = S::zero();
                for k in 0..d {
                    dalpha += gout[k] * mvec[k];
                }
                let du = dalpha * alpha * (S::one() - alpha);
                let att_base = layout.attention.start;
                for k in 0..d {
                    grads[att_base + k] += du * xi[k];
                    grads[att_base + d + k] += du * xj[k];
                    grads[att_base + 2 * d + k] += du * er[k];
                    gx_prev[dst + k] += du * att[k];
                    gx_prev[src + k] += du * att[d + k];
                }

                // Message path: m = W_r·(e_r + x_j).
                let w_r = self.w_r(layer, m.rel);
                let rel_t_base = layout.rel_transforms.start
                    + (layer * self.num_relations() + m.rel as usize) * d * d;
                let rel_e_base = layout.rel_embeddings.start
                    + (layer * self.num_relations() + m.rel as usize) * d;
                let mut dfused = vec![S::zero(); d];
                for arow in 0..d {
                    let dm = alpha * gout[arow];
                    let wrow = &w_r[arow * d..(arow + 1) * d];
                    for k in 0..d {
                        grads[rel_t_base + arow * d + k] += dm * (er[k] + xj[k]);
                        dfused[k] += wrow[k] * dm;
                    }
                }
                for k in 0..d {
                    gx_prev[src + k] += dfused[k];
                    // e_r enters both the message and the attention input.
                    grads[rel_e_base + k] += dfused[k] + du * att[2 * d + k];
                }
            }
            gx = gx_prev;
        }

        if let Some(out) = x0_grad {
            for (o, g) in out.iter_mut().zip(&gx) {
                *o += *g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::KnowledgeGraph;
    use crate::train::{pretrain, TrainConfig};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn teacher(kind: ModelKind, dim: usize) -> (KnowledgeGraph, EmbeddingModel<f64>) {
        let g = KnowledgeGraph::from_id_triples(4, 2, &[(0, 0, 1), (1, 1, 2), (2, 0, 3)]);
        let cfg = TrainConfig {
            dim,
            epochs: 5,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let m = pretrain(&g, kind, &cfg).unwrap().model;
        (g, m)
    }

    #[test]
    fn zero_parameters_give_zero_states_and_score() {
        let (g, m) = teacher(ModelKind::TransE, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ev = EvaluatorModel::init(&m, 2, 4, &mut rng);
        for p in ev.params_mut() {
            *p = 0.0;
        }
        let entities: Vec<EntityId> = vec![0, 1, 2];
        let edges: Vec<Triple> = g.triples()[..2].to_vec();
        let x0 = ev.initial_features(&m, &entities).unwrap();
        let states = ev.rgat_forward(&entities, &edges, &x0).unwrap();
        assert!(states.iter().all(|&v| v == 0.0));
        assert_eq!(ev.subgraph_score(&entities, &edges, &x0).unwrap(), 0.0);
    }

    #[test]
    fn isolated_entity_gets_zero_state() {
        let (_, m) = teacher(ModelKind::TransE, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = EvaluatorModel::init(&m, 1, 4, &mut rng);
        let entities: Vec<EntityId> = vec![3];
        let x0 = ev.initial_features(&m, &entities).unwrap();
        let states = ev.rgat_forward(&entities, &[], &x0).unwrap();
        assert!(states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_subgraph_is_invalid_input() {
        let (_, m) = teacher(ModelKind::TransE, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ev = EvaluatorModel::init(&m, 1, 4, &mut rng);
        assert!(matches!(
            ev.subgraph_score(&[], &[], &[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn rotate_teacher_projects_2d_features() {
        let (g, m) = teacher(ModelKind::RotatE, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ev = EvaluatorModel::init(&m, 2, 4, &mut rng);
        assert_eq!(ev.input_dim(), 8);
        assert!(ev.layout().input_proj.is_some());
        let entities: Vec<EntityId> = vec![0, 1, 2, 3];
        let z = ev.score_for(&m, &entities, g.triples()).unwrap();
        assert!(z.is_finite());
    }

    #[test]
    fn permutation_invariance_of_the_score() {
        let (g, m) = teacher(ModelKind::DistMult, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ev = EvaluatorModel::init(&m, 2, 6, &mut rng);
        let a: Vec<EntityId> = vec![0, 1, 2, 3];
        let b: Vec<EntityId> = vec![3, 1, 0, 2];
        let za = ev.score_for(&m, &a, g.triples()).unwrap();
        let zb = ev.score_for(&m, &b, g.triples()).unwrap();
        assert!((za - zb).abs() < 1e-9, "za {za} zb {zb}");
    }

    #[test]
    fn attention_values_lie_in_the_open_unit_interval() {
        let (g, m) = teacher(ModelKind::TransE, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ev = EvaluatorModel::init(&m, 2, 6, &mut rng);
        let entities: Vec<EntityId> = vec![0, 1, 2, 3];
        let lg = ev.build_local(&entities, g.triples()).unwrap();
        let x0 = ev.initial_features(&m, &entities).unwrap();
        let tape = ev.forward_tape(&lg, &x0).unwrap();
        for layer in &tape.alpha {
            for &a in layer {
                assert!(a > 0.0 && a < 1.0);
            }
        }
    }

    /// Hand-unrolled dense single-layer computation on a 3-node graph, written
    /// independently of the production path.
    #[test]
    fn matches_hand_unrolled_dense_oracle() {
        let g = KnowledgeGraph::from_id_triples(3, 1, &[(0, 0, 1), (1, 0, 2)]);
        let cfg = TrainConfig {
            dim: 3,
            epochs: 0,
            ..TrainConfig::default()
        };
        let m = pretrain::<f64>(&g, ModelKind::TransE, &cfg).unwrap().model;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ev = EvaluatorModel::init(&m, 1, 3, &mut rng);
        let entities: Vec<EntityId> = vec![0, 1, 2];
        let x0 = ev.initial_features(&m, &entities).unwrap();
        let states = ev.rgat_forward(&entities, g.triples(), &x0).unwrap();

        let d = 3usize;
        let att = ev.attention().to_vec();
        let er = ev.e_r(0, 0).to_vec();
        let w = ev.w_r(0, 0).to_vec();
        let x = |i: usize| &x0[i * d..(i + 1) * d];
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        // Messages on the path 0-1-2, both directions: 0→1, 1→0, 1→2, 2→1.
        let pairs = [(1usize, 0usize), (0, 1), (2, 1), (1, 2)];
        let mut expected = vec![0.0f64; 3 * d];
        for (dst, src) in pairs {
            let mut u = 0.0;
            for k in 0..d {
                u += att[k] * x(dst)[k] + att[d + k] * x(src)[k] + att[2 * d + k] * er[k];
            }
            let alpha = sigmoid(u);
            for a in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += w[a * d + k] * (er[k] + x(src)[k]);
                }
                expected[dst * d + a] += alpha * acc;
            }
        }
        for (got, want) in states.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
    }
}
