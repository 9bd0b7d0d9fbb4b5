//! Indexed triple storage with adjacency and degree access.
//!
//! Entities and relations receive dense contiguous ids in order of first
//! appearance; the name dictionaries are kept alongside and persisted into
//! model files. The graph is immutable after construction and safe for
//! concurrent reads.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense entity identifier.
pub type EntityId = u32;

/// Dense relation identifier.
pub type RelationId = u32;

/// A directed labeled edge `(head, relation, tail)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }

    /// The endpoint opposite to `v`. Self-loops return `v` itself.
    pub fn other_endpoint(&self, v: EntityId) -> EntityId {
        if self.head == v {
            self.tail
        } else {
            self.head
        }
    }
}

/// Immutable indexed triple store.
///
/// `incident[v]` lists the indices of every triple touching `v` in either
/// direction (a self-loop appears once), so `degree(v)` is the incident-edge
/// count and all neighborhood queries run on the undirected view. Triple
/// direction is preserved in the edge list for scoring.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
    triples: Vec<Triple>,
    incident: Vec<Vec<u32>>,
}

impl KnowledgeGraph {
    /// Build a graph from name triples. Ids are assigned by first appearance.
    pub fn from_named_triples<I, A, B, C>(rows: I) -> Self
    where
        I: IntoIterator<Item = (A, B, C)>,
        A: AsRef<str>,
        B: AsRef<str>,
        C: AsRef<str>,
    {
        let mut builder = GraphBuilder::new();
        for (h, r, t) in rows {
            builder.add(h.as_ref(), r.as_ref(), t.as_ref());
        }
        builder.build()
    }

    /// Build a graph from id triples with synthesized names (`e0`, `r0`, ...).
    ///
    /// Intended for tests and generated instances.
    pub fn from_id_triples(
        num_entities: usize,
        num_relations: usize,
        triples: &[(EntityId, RelationId, EntityId)],
    ) -> Self {
        let entity_names: Vec<String> = (0..num_entities).map(|i| format!("e{i}")).collect();
        let relation_names: Vec<String> = (0..num_relations).map(|i| format!("r{i}")).collect();
        let triples: Vec<Triple> = triples
            .iter()
            .map(|&(h, r, t)| {
                assert!((h as usize) < num_entities && (t as usize) < num_entities);
                assert!((r as usize) < num_relations);
                Triple::new(h, r, t)
            })
            .collect();
        Self::from_parts(entity_names, relation_names, triples)
    }

    fn from_parts(
        entity_names: Vec<String>,
        relation_names: Vec<String>,
        triples: Vec<Triple>,
    ) -> Self {
        let entity_ids = entity_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as EntityId))
            .collect();
        let relation_ids = relation_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as RelationId))
            .collect();
        let mut incident = vec![Vec::new(); entity_names.len()];
        for (idx, triple) in triples.iter().enumerate() {
            incident[triple.head as usize].push(idx as u32);
            if triple.tail != triple.head {
                incident[triple.tail as usize].push(idx as u32);
            }
        }
        Self {
            entity_names,
            relation_names,
            entity_ids,
            relation_ids,
            triples,
            incident,
        }
    }

    /// Load a graph from a tab-separated triple file.
    ///
    /// One `head<TAB>relation<TAB>tail` per line; blank lines and lines
    /// starting with `#` are ignored. Malformed lines fail with the path and
    /// line number.
    pub fn load_tsv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("cannot open: {e}"),
        })?;
        let mut builder = GraphBuilder::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            match parse_tsv_line(&line) {
                Ok(Some((h, r, t))) => builder.add(h, r, t),
                Ok(None) => {}
                Err(message) => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        message,
                    })
                }
            }
        }
        Ok(builder.build())
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, idx: u32) -> Triple {
        self.triples[idx as usize]
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id as usize]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id as usize]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn require_entity(&self, name: &str) -> Result<EntityId> {
        self.entity_id(name)
            .ok_or_else(|| Error::UnknownEntity(name.to_string()))
    }

    pub fn require_relation(&self, name: &str) -> Result<RelationId> {
        self.relation_id(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
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

    /// Indices of the triples incident to `v`, both directions.
    pub fn incident(&self, v: EntityId) -> &[u32] {
        &self.incident[v as usize]
    }

    /// Incident-edge count of `v`.
    pub fn degree(&self, v: EntityId) -> usize {
        self.incident[v as usize].len()
    }

    /// Distinct neighbors of `v` on the undirected view (excludes `v` unless
    /// it has a self-loop).
    pub fn neighbor_set(&self, v: EntityId) -> BTreeSet<EntityId> {
        self.incident[v as usize]
            .iter()
            .map(|&e| self.triples[e as usize].other_endpoint(v))
            .collect()
    }
}

fn parse_tsv_line(line: &str) -> std::result::Result<Option<(&str, &str, &str)>, String> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut fields = line.split('\t');
    let head = fields.next().unwrap_or("");
    let relation = fields.next().ok_or("expected 3 tab-separated fields")?;
    let tail = fields.next().ok_or("expected 3 tab-separated fields")?;
    if fields.next().is_some() {
        return Err("expected exactly 3 tab-separated fields".into());
    }
    if head.is_empty() || relation.is_empty() || tail.is_empty() {
        return Err("empty field".into());
    }
    Ok(Some((head, relation, tail)))
}

/// A test-file fact: the source line number plus the parse/lookup outcome.
///
/// Facts that reference entities or relations absent from the training graph
/// surface as per-record errors so callers can log and skip them.
#[derive(Debug)]
pub struct FactRecord {
    pub line: usize,
    pub names: Option<(String, String, String)>,
    pub result: Result<Triple>,
}

/// Read a test triple file, resolving names against `graph`.
pub fn read_facts<P: AsRef<Path>>(path: P, graph: &KnowledgeGraph) -> Result<Vec<FactRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: format!("cannot open: {e}"),
    })?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        match parse_tsv_line(&line) {
            Ok(None) => {}
            Ok(Some((h, r, t))) => {
                let resolve = || -> Result<Triple> {
                    Ok(Triple::new(
                        graph.require_entity(h)?,
                        graph.require_relation(r)?,
                        graph.require_entity(t)?,
                    ))
                };
                records.push(FactRecord {
                    line: lineno + 1,
                    names: Some((h.to_string(), r.to_string(), t.to_string())),
                    result: resolve(),
                });
            }
            Err(message) => records.push(FactRecord {
                line: lineno + 1,
                names: None,
                result: Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message,
                }),
            }),
        }
    }
    Ok(records)
}

/// Incremental builder interning names into dense ids.
pub struct GraphBuilder {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
    triples: Vec<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self {
            entity_names: Vec::new(),
            relation_names: Vec::new(),
            entity_ids: HashMap::new(),
            relation_ids: HashMap::new(),
            triples: Vec::new(),
        }
    }

    pub fn entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len() as EntityId;
        self.entity_names.push(name.to_string());
        self.entity_ids.insert(name.to_string(), id);
        id
    }

    pub fn relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len() as RelationId;
        self.relation_names.push(name.to_string());
        self.relation_ids.insert(name.to_string(), id);
        id
    }

    pub fn add(&mut self, head: &str, relation: &str, tail: &str) {
        let h = self.entity(head);
        let r = self.relation(relation);
        let t = self.entity(tail);
        self.triples.push(Triple::new(h, r, t));
    }

    pub fn build(self) -> KnowledgeGraph {
        KnowledgeGraph::from_parts(self.entity_names, self.relation_names, self.triples)
    }
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_first_appearance_ordered() {
        let g = KnowledgeGraph::from_named_triples([("a", "r", "b"), ("b", "s", "c")]);
        assert_eq!(g.num_entities(), 3);
        assert_eq!(g.num_relations(), 2);
        assert_eq!(g.entity_id("a"), Some(0));
        assert_eq!(g.entity_id("b"), Some(1));
        assert_eq!(g.entity_id("c"), Some(2));
        assert_eq!(g.relation_id("s"), Some(1));
        assert_eq!(g.entity_name(2), "c");
    }

    #[test]
    fn adjacency_covers_both_directions() {
        let g = KnowledgeGraph::from_id_triples(3, 1, &[(0, 0, 1), (1, 0, 2)]);
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.degree(2), 1);
        // Every triple appears in both endpoints' incident lists.
        for (idx, t) in g.triples().iter().enumerate() {
            assert!(g.incident(t.head).contains(&(idx as u32)));
            assert!(g.incident(t.tail).contains(&(idx as u32)));
        }
        assert_eq!(g.neighbor_set(1), BTreeSet::from([0, 2]));
    }

    #[test]
    fn self_loop_counts_once() {
        let g = KnowledgeGraph::from_id_triples(2, 1, &[(0, 0, 0), (0, 0, 1)]);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.neighbor_set(0), BTreeSet::from([0, 1]));
    }

    #[test]
    fn tsv_parsing_skips_blanks_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv");
        std::fs::write(&path, "# header\na\tr\tb\n\nb\tr\tc\n").unwrap();
        let g = KnowledgeGraph::load_tsv(&path).unwrap();
        assert_eq!(g.num_triples(), 2);
        assert_eq!(g.num_entities(), 3);
    }

    #[test]
    fn tsv_parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "a\tr\tb\noops\n").unwrap();
        let err = KnowledgeGraph::load_tsv(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn read_facts_flags_unknown_entities() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.tsv");
        std::fs::write(&train, "a\tr\tb\n").unwrap();
        let g = KnowledgeGraph::load_tsv(&train).unwrap();
        let test = dir.path().join("test.tsv");
        std::fs::write(&test, "a\tr\tb\nz\tr\tb\n").unwrap();
        let records = read_facts(&test, &g).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[0].result.is_ok());
        assert!(matches!(records[1].result, Err(Error::UnknownEntity(_))));
    }
}
