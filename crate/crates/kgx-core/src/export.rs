//! Explanation export: a structured JSON document with stable field names,
//! and a Graphviz DOT rendering derived from it.
//!
//! The structured form is the interchange format between pipeline stages;
//! `parse_json(to_json(doc))` is lossless and re-exporting a parsed document
//! reproduces it byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::explain::Explanation;
use crate::graph::{EntityId, KnowledgeGraph, Triple};
use crate::scalar::Scalar;

/// A fact or edge spelled with dictionary names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactDoc {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountersDoc {
    pub evaluations: usize,
    pub hops: usize,
}

/// Stable structured export of an explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub fact: FactDoc,
    pub entities: Vec<String>,
    pub edges: Vec<FactDoc>,
    /// Importance δ per evaluated entity, keyed by name.
    pub importance: BTreeMap<String, f64>,
    pub counters: CountersDoc,
    pub fallback: bool,
}

impl ExplanationDoc {
    /// Resolve the document's names back to graph ids.
    ///
    /// Returns the fact, the key entity ids (ascending), and the key edges.
    pub fn resolve(&self, graph: &KnowledgeGraph) -> Result<(Triple, Vec<EntityId>, Vec<Triple>)> {
        let fact = resolve_fact(&self.fact, graph)?;
        let mut entities = Vec::with_capacity(self.entities.len());
        for name in &self.entities {
            entities.push(graph.require_entity(name)?);
        }
        entities.sort_unstable();
        entities.dedup();
        let mut edges = Vec::with_capacity(self.edges.len());
        for edge in &self.edges {
            edges.push(resolve_fact(edge, graph)?);
        }
        Ok((fact, entities, edges))
    }
}

fn resolve_fact(doc: &FactDoc, graph: &KnowledgeGraph) -> Result<Triple> {
    Ok(Triple::new(
        graph.require_entity(&doc.head)?,
        graph.require_relation(&doc.relation)?,
        graph.require_entity(&doc.tail)?,
    ))
}

fn fact_doc(graph: &KnowledgeGraph, triple: &Triple) -> FactDoc {
    FactDoc {
        head: graph.entity_name(triple.head).to_string(),
        relation: graph.relation_name(triple.relation).to_string(),
        tail: graph.entity_name(triple.tail).to_string(),
    }
}

/// Convert an explanation into its structured document.
pub fn to_doc<S: Scalar>(explanation: &Explanation<S>, graph: &KnowledgeGraph) -> ExplanationDoc {
    ExplanationDoc {
        fact: fact_doc(graph, &explanation.fact),
        entities: explanation
            .key_entities
            .iter()
            .map(|&v| graph.entity_name(v).to_string())
            .collect(),
        edges: explanation
            .key_subgraph
            .edges
            .iter()
            .map(|&e| fact_doc(graph, &graph.triple(e)))
            .collect(),
        importance: explanation
            .importance
            .iter()
            .map(|(&v, &d)| (graph.entity_name(v).to_string(), d.widen()))
            .collect(),
        counters: CountersDoc {
            evaluations: explanation.evaluations,
            hops: explanation.hops_searched,
        },
        fallback: explanation.fallback,
    }
}

/// Serialize the document (pretty JSON, trailing newline).
pub fn to_json(doc: &ExplanationDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<ExplanationDoc> {
    Ok(serde_json::from_str(text)?)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render the document as a Graphviz digraph: explanation edges solid with
/// relation labels, the explained fact as one dashed annotated edge, and
/// importance values as six-decimal node labels.
pub fn to_dot(doc: &ExplanationDoc) -> String {
    let mut out = String::from("digraph explanation {\n");
    out.push_str("  rankdir=LR;\n");
    for name in &doc.entities {
        let esc = dot_escape(name);
        match doc.importance.get(name) {
            Some(delta) => out.push_str(&format!(
                "  \"{esc}\" [label=\"{esc}\\nδ={delta:.6}\"];\n"
            )),
            None => out.push_str(&format!("  \"{esc}\" [label=\"{esc}\"];\n")),
        }
    }
    for edge in &doc.edges {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
            dot_escape(&edge.head),
            dot_escape(&edge.tail),
            dot_escape(&edge.relation)
        ));
    }
    out.push_str(&format!(
        "  \"{}\" -> \"{}\" [label=\"{}\", style=dashed, color=red];\n",
        dot_escape(&doc.fact.head),
        dot_escape(&doc.fact.tail),
        dot_escape(&doc.fact.relation)
    ));
    out.push_str("}\n");
    out
}
