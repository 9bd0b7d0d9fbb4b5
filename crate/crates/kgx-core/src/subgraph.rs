//! Subgraph extraction: k-hop neighborhoods, enclosing subgraphs around a
//! query pair, the 1-hop extension used for localized retraining, and
//! entity-induced subgraphs.
//!
//! Neighborhoods and connectivity always use the undirected view of the
//! graph; triples keep their direction for scoring.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph};

/// What a subgraph is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubgraphRole {
    /// Entities within k hops of both query endpoints.
    Enclosing,
    /// Enclosing subgraph plus its 1-hop frontier.
    Extended,
    /// Connected explanation subgraph selected by the search.
    Key,
    /// Union of randomly sampled head-tail paths (baseline).
    Random,
}

/// A view on a parent [`KnowledgeGraph`]: an entity set plus a set of triple
/// indices whose endpoints all lie in the entity set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub entities: BTreeSet<EntityId>,
    /// Triple indices into the parent graph.
    pub edges: BTreeSet<u32>,
    pub role: SubgraphRole,
}

impl Subgraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_entity(&self, v: EntityId) -> bool {
        self.entities.contains(&v)
    }

    /// Distinct neighbors of `v` through the subgraph's own edges.
    pub fn neighbors_within(&self, graph: &KnowledgeGraph, v: EntityId) -> BTreeSet<EntityId> {
        graph
            .incident(v)
            .iter()
            .filter(|e| self.edges.contains(e))
            .map(|&e| graph.triple(e).other_endpoint(v))
            .collect()
    }

    /// Incident-edge count of `v` within the subgraph.
    pub fn degree_within(&self, graph: &KnowledgeGraph, v: EntityId) -> usize {
        graph
            .incident(v)
            .iter()
            .filter(|e| self.edges.contains(e))
            .count()
    }

    /// Maximum degree over the subgraph's entities.
    pub fn max_degree(&self, graph: &KnowledgeGraph) -> usize {
        self.entities
            .iter()
            .map(|&v| self.degree_within(graph, v))
            .max()
            .unwrap_or(0)
    }

    /// Whether the subgraph is a single connected component (undirected).
    pub fn is_connected(&self, graph: &KnowledgeGraph) -> bool {
        let Some(&start) = self.entities.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for nb in self.neighbors_within(graph, v) {
                if seen.insert(nb) {
                    queue.push_back(nb);
                }
            }
        }
        seen.len() == self.entities.len()
    }

    /// Shortest path between two member entities through the subgraph's
    /// edges, as the list of entities on it (endpoints included).
    pub fn shortest_path(
        &self,
        graph: &KnowledgeGraph,
        from: EntityId,
        to: EntityId,
    ) -> Option<Vec<EntityId>> {
        if !self.contains_entity(from) || !self.contains_entity(to) {
            return None;
        }
        if from == to {
            return Some(vec![from]);
        }
        let mut parent: HashMap<EntityId, EntityId> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        parent.insert(from, from);
        while let Some(v) = queue.pop_front() {
            for nb in self.neighbors_within(graph, v) {
                if !parent.contains_key(&nb) {
                    parent.insert(nb, v);
                    if nb == to {
                        let mut path = vec![to];
                        let mut cur = to;
                        while cur != from {
                            cur = parent[&cur];
                            path.push(cur);
                        }
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(nb);
                }
            }
        }
        None
    }
}

/// Entities whose embeddings stay frozen during localized retraining:
/// the 1-hop frontier added by [`extend_subgraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierSet(pub BTreeSet<EntityId>);

impl FrontierSet {
    pub fn contains(&self, v: EntityId) -> bool {
        self.0.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Entities within `k` hops of `v` on the undirected view, `v` included
/// (`d(v, v) = 0`).
pub fn k_hop_neighbors(
    graph: &KnowledgeGraph,
    v: EntityId,
    k: usize,
) -> Result<BTreeSet<EntityId>> {
    graph.check_entity(v)?;
    let mut seen = BTreeSet::from([v]);
    let mut queue = VecDeque::from([(v, 0usize)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == k {
            continue;
        }
        for &e in graph.incident(u) {
            let nb = graph.triple(e).other_endpoint(u);
            if seen.insert(nb) {
                queue.push_back((nb, d + 1));
            }
        }
    }
    Ok(seen)
}

/// All parent-graph edges whose endpoints both lie in `entities`.
fn induced_edges(graph: &KnowledgeGraph, entities: &BTreeSet<EntityId>) -> BTreeSet<u32> {
    let mut edges = BTreeSet::new();
    for &v in entities {
        for &e in graph.incident(v) {
            let t = graph.triple(e);
            if entities.contains(&t.head) && entities.contains(&t.tail) {
                edges.insert(e);
            }
        }
    }
    edges
}

/// The k-hop enclosing subgraph around a query pair.
///
/// Entity set is `(N_k(head) ∩ N_k(tail)) ∪ {head, tail}` — the endpoints are
/// always kept so a head-to-tail search stays well-posed — with all induced
/// edges. An empty intersection means the pair is more than 2k hops apart and
/// is reported as an error; the caller decides the fallback.
pub fn enclosing_subgraph(
    graph: &KnowledgeGraph,
    head: EntityId,
    tail: EntityId,
    k: usize,
) -> Result<Subgraph> {
    if head == tail {
        return Err(Error::InvalidQuery(format!(
            "enclosing subgraph requires distinct endpoints (got {head} twice)"
        )));
    }
    let from_head = k_hop_neighbors(graph, head, k)?;
    let from_tail = k_hop_neighbors(graph, tail, k)?;
    let mut entities: BTreeSet<EntityId> =
        from_head.intersection(&from_tail).copied().collect();
    if entities.is_empty() {
        return Err(Error::DisconnectedPair {
            head,
            tail,
            hops: 2 * k,
        });
    }
    entities.insert(head);
    entities.insert(tail);
    let edges = induced_edges(graph, &entities);
    Ok(Subgraph {
        entities,
        edges,
        role: SubgraphRole::Enclosing,
    })
}

/// Expand an enclosing subgraph by the 1-hop neighbors of its entities.
///
/// Returns the extended subgraph (induced edges over the enlarged entity
/// set) together with the frontier — exactly the newly added entities, whose
/// embeddings the retrainer must keep frozen.
pub fn extend_subgraph(graph: &KnowledgeGraph, sub: &Subgraph) -> (Subgraph, FrontierSet) {
    debug_assert_eq!(sub.role, SubgraphRole::Enclosing);
    let mut frontier = BTreeSet::new();
    for &v in &sub.entities {
        for &e in graph.incident(v) {
            let nb = graph.triple(e).other_endpoint(v);
            if !sub.entities.contains(&nb) {
                frontier.insert(nb);
            }
        }
    }
    let mut entities = sub.entities.clone();
    entities.extend(frontier.iter().copied());
    let edges = induced_edges(graph, &entities);
    (
        Subgraph {
            entities,
            edges,
            role: SubgraphRole::Extended,
        },
        FrontierSet(frontier),
    )
}

/// Restrict a subgraph to a subset of its entities, keeping the edges with
/// both endpoints selected. The result carries the `Key` role.
pub fn induced_subgraph(
    graph: &KnowledgeGraph,
    sub: &Subgraph,
    selection: &BTreeSet<EntityId>,
) -> Result<Subgraph> {
    if let Some(&outside) = selection.iter().find(|v| !sub.entities.contains(v)) {
        return Err(Error::InvalidSelection(outside));
    }
    let edges = sub
        .edges
        .iter()
        .copied()
        .filter(|&e| {
            let t = graph.triple(e);
            selection.contains(&t.head) && selection.contains(&t.tail)
        })
        .collect();
    Ok(Subgraph {
        entities: selection.clone(),
        edges,
        role: SubgraphRole::Key,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> KnowledgeGraph {
        // a - b - c
        KnowledgeGraph::from_id_triples(3, 1, &[(0, 0, 1), (1, 0, 2)])
    }

    #[test]
    fn zero_hops_is_the_entity_itself() {
        let g = path_graph();
        assert_eq!(k_hop_neighbors(&g, 0, 0).unwrap(), BTreeSet::from([0]));
    }

    #[test]
    fn one_hop_on_a_path() {
        let g = path_graph();
        assert_eq!(k_hop_neighbors(&g, 0, 1).unwrap(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn unknown_entity_is_rejected() {
        let g = path_graph();
        assert!(matches!(
            k_hop_neighbors(&g, 9, 1),
            Err(Error::EntityOutOfRange { .. })
        ));
    }

    #[test]
    fn enclosing_prunes_entities_near_only_one_endpoint() {
        // h=0, t=1, a=2, b=3, x=4; triples (h,a),(a,t),(h,b),(b,t),(h,x)
        let g = KnowledgeGraph::from_id_triples(
            5,
            1,
            &[(0, 0, 2), (2, 0, 1), (0, 0, 3), (3, 0, 1), (0, 0, 4)],
        );
        let sub = enclosing_subgraph(&g, 0, 1, 1).unwrap();
        assert_eq!(sub.entities, BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(sub.num_edges(), 4);
        assert_eq!(sub.role, SubgraphRole::Enclosing);
    }

    #[test]
    fn single_triple_keeps_both_endpoints() {
        let g = KnowledgeGraph::from_id_triples(2, 1, &[(0, 0, 1)]);
        let sub = enclosing_subgraph(&g, 0, 1, 1).unwrap();
        assert_eq!(sub.entities, BTreeSet::from([0, 1]));
        assert_eq!(sub.num_edges(), 1);
    }

    #[test]
    fn endpoints_kept_even_when_intersection_excludes_them() {
        // h - m - t with k = 1: intersection is {m} only.
        let g = path_graph();
        let sub = enclosing_subgraph(&g, 0, 2, 1).unwrap();
        assert_eq!(sub.entities, BTreeSet::from([0, 1, 2]));
        assert_eq!(sub.num_edges(), 2);
    }

    #[test]
    fn disconnected_pair_is_an_error() {
        // Two separate edges: 0-1 and 2-3.
        let g = KnowledgeGraph::from_id_triples(4, 1, &[(0, 0, 1), (2, 0, 3)]);
        assert!(matches!(
            enclosing_subgraph(&g, 0, 3, 2),
            Err(Error::DisconnectedPair { hops: 4, .. })
        ));
    }

    #[test]
    fn extend_adds_exactly_the_exterior_neighbors() {
        // Star: center 0, leaves 1..=3.
        let g = KnowledgeGraph::from_id_triples(4, 1, &[(0, 0, 1), (0, 0, 2), (0, 0, 3)]);
        let sub = Subgraph {
            entities: BTreeSet::from([0, 1]),
            edges: BTreeSet::from([0]),
            role: SubgraphRole::Enclosing,
        };
        let (extended, frontier) = extend_subgraph(&g, &sub);
        assert_eq!(frontier.0, BTreeSet::from([2, 3]));
        assert_eq!(extended.entities, BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(extended.num_edges(), 3);
        assert_eq!(extended.role, SubgraphRole::Extended);
    }

    #[test]
    fn extend_with_full_coverage_has_empty_frontier() {
        let g = path_graph();
        let sub = enclosing_subgraph(&g, 0, 2, 2).unwrap();
        let (extended, frontier) = extend_subgraph(&g, &sub);
        assert!(frontier.is_empty());
        assert_eq!(extended.entities, sub.entities);
        assert_eq!(extended.edges, sub.edges);
    }

    #[test]
    fn induced_identity_and_single_vertex() {
        let g = path_graph();
        let sub = enclosing_subgraph(&g, 0, 2, 2).unwrap();
        let all = induced_subgraph(&g, &sub, &sub.entities).unwrap();
        assert_eq!(all.edges, sub.edges);
        let lone = induced_subgraph(&g, &sub, &BTreeSet::from([0])).unwrap();
        assert_eq!(lone.num_edges(), 0);
        assert_eq!(lone.role, SubgraphRole::Key);
    }

    #[test]
    fn induced_on_triangle_keeps_only_selected_edge() {
        // Triangle h(0) - a(1) - t(2) - h.
        let g = KnowledgeGraph::from_id_triples(3, 1, &[(0, 0, 1), (1, 0, 2), (2, 0, 0)]);
        let sub = enclosing_subgraph(&g, 0, 2, 1).unwrap();
        let key = induced_subgraph(&g, &sub, &BTreeSet::from([0, 2])).unwrap();
        assert_eq!(key.edges, BTreeSet::from([2]));
    }

    #[test]
    fn induced_rejects_foreign_entities() {
        let g = path_graph();
        let sub = enclosing_subgraph(&g, 0, 2, 1).unwrap();
        let err = induced_subgraph(&g, &sub, &BTreeSet::from([0, 7])).unwrap_err();
        assert!(matches!(err, Error::InvalidSelection(7)));
    }

    #[test]
    fn connectivity_and_paths() {
        let g = path_graph();
        let sub = enclosing_subgraph(&g, 0, 2, 2).unwrap();
        assert!(sub.is_connected(&g));
        assert_eq!(sub.shortest_path(&g, 0, 2).unwrap(), vec![0, 1, 2]);
        let lone = induced_subgraph(&g, &sub, &BTreeSet::from([0, 2])).unwrap();
        assert!(!lone.is_connected(&g));
        assert!(lone.shortest_path(&g, 0, 2).is_none());
    }
}
