//! Synthetic kinship graphs for tests and desk-scale benchmark runs.
//!
//! Families (founder couple plus children) are generated independently,
//! then a marriage pass pairs children across families — components stay
//! bounded so the graph keeps many separate clusters — and married couples
//! get children of their own. Directed facts over 12 relations are derived
//! from the genealogy. Nuclear facts (husband/wife, father/mother,
//! son/daughter) go to the training split; composed relations
//! (brother/sister, uncle/aunt, nephew/niece) are split between train and
//! test, so every relation is trainable while test facts are held-out pairs
//! whose supporting chains live in the training graph.
//!
//! Fact emission is subsampled to keep the triples-per-entity ratio near
//! two, matching the sparsity of the kinship benchmarks this mimics
//! (~3k entities, ~6k training triples at the default family count). Test
//! facts are filtered to head-tail distance ≤ 3 in the training graph: with
//! a 2-hop enclosing subgraph every node of a shortest path then lies in
//! both 2-hop balls, so extraction always yields a connected explanation
//! candidate.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::KnowledgeGraph;

pub const RELATIONS: [&str; 12] = [
    "father", "mother", "husband", "wife", "son", "daughter", "brother", "sister", "uncle",
    "aunt", "nephew", "niece",
];

#[derive(Debug, Clone)]
pub struct KinshipConfig {
    pub families: usize,
    pub seed: u64,
    /// Fraction of composed facts that go to the training split.
    pub derived_train_fraction: f64,
    /// Maximum head-tail distance (in the training graph) for a test fact.
    pub test_distance_cap: usize,
    /// Fraction of eligible child pairs that marry (across families).
    pub marriage_rate: f64,
    /// Marriages never merge clusters beyond this many families.
    pub max_component_families: usize,
}

impl Default for KinshipConfig {
    fn default() -> Self {
        Self {
            families: 560,
            seed: 42,
            derived_train_fraction: 0.5,
            test_distance_cap: 3,
            marriage_rate: 0.55,
            max_component_families: 6,
        }
    }
}

pub type NamedTriple = (String, String, String);

#[derive(Debug, Clone)]
pub struct KinshipData {
    pub train: Vec<NamedTriple>,
    pub test: Vec<NamedTriple>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Gender {
    Male,
    Female,
}

struct Person {
    name: String,
    gender: Gender,
    family: usize,
}

struct Genealogy {
    people: Vec<Person>,
    /// (father, mother) per person, where known.
    parents: HashMap<usize, (usize, usize)>,
}

impl Genealogy {
    fn add(&mut self, family: usize, tag: String, gender: Gender) -> usize {
        self.people.push(Person {
            name: format!("f{family:03}_{tag}"),
            gender,
            family,
        });
        self.people.len() - 1
    }

    fn siblings_of(&self, person: usize) -> Vec<usize> {
        let Some(&pair) = self.parents.get(&person) else {
            return Vec::new();
        };
        let mut siblings: Vec<usize> = self
            .parents
            .iter()
            .filter(|&(&other, &p)| other != person && p == pair)
            .map(|(&other, _)| other)
            .collect();
        siblings.sort_unstable();
        siblings
    }
}

/// Union-find over family ids, tracking component sizes.
struct Components {
    parent: Vec<usize>,
    sizes: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    fn root(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            let up = self.parent[self.parent[v]];
            self.parent[v] = up;
            v = up;
        }
        v
    }

    fn merged_size(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            self.sizes[ra]
        } else {
            self.sizes[ra] + self.sizes[rb]
        }
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra != rb {
            self.parent[rb] = ra;
            self.sizes[ra] += self.sizes[rb];
        }
    }
}

pub fn generate_kinship(cfg: &KinshipConfig) -> KinshipData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gen = Genealogy {
        people: Vec::new(),
        parents: HashMap::new(),
    };
    let mut train: Vec<NamedTriple> = Vec::new();
    let mut derived: Vec<NamedTriple> = Vec::new();

    // Founders and their children.
    let mut bachelors: Vec<usize> = Vec::new();
    for family in 0..cfg.families {
        let father = gen.add(family, "m0".into(), Gender::Male);
        let mother = gen.add(family, "w0".into(), Gender::Female);
        train.push(fact(&gen, father, "husband", mother));
        if rng.random_bool(0.5) {
            train.push(fact(&gen, mother, "wife", father));
        }
        let n_children = rng.random_range(2..=3);
        for c in 0..n_children {
            let gender = if rng.random_bool(0.5) {
                Gender::Male
            } else {
                Gender::Female
            };
            let child = gen.add(family, format!("c{c}"), gender);
            gen.parents.insert(child, (father, mother));
            emit_parent_edges(&gen, child, father, mother, &mut train, &mut rng, 0.5);
            bachelors.push(child);
        }
    }

    // Marriage pass: pair children across families, keeping clusters small.
    let mut components = Components::new(cfg.families);
    bachelors.shuffle(&mut rng);
    let mut males: Vec<usize> = bachelors
        .iter()
        .copied()
        .filter(|&p| gen.people[p].gender == Gender::Male)
        .collect();
    let mut females: Vec<usize> = bachelors
        .iter()
        .copied()
        .filter(|&p| gen.people[p].gender == Gender::Female)
        .collect();
    let mut couples: Vec<(usize, usize)> = Vec::new();
    while let (Some(m), Some(f)) = (males.pop(), females.pop()) {
        let (fm, ff) = (gen.people[m].family, gen.people[f].family);
        if fm == ff || !rng.random_bool(cfg.marriage_rate) {
            continue;
        }
        if components.merged_size(fm, ff) > cfg.max_component_families {
            continue;
        }
        components.merge(fm, ff);
        couples.push((m, f));
        train.push(fact(&gen, m, "husband", f));
        if rng.random_bool(0.5) {
            train.push(fact(&gen, f, "wife", m));
        }
    }

    // Children of the married couples. Both parents are family-line people,
    // so sibling and avuncular relations span families.
    for (couple_index, &(father, mother)) in couples.iter().enumerate() {
        let n_kids = rng.random_range(1..=2);
        for k in 0..n_kids {
            let gender = if rng.random_bool(0.5) {
                Gender::Male
            } else {
                Gender::Female
            };
            let family = gen.people[father].family;
            let kid = gen.add(family, format!("g{couple_index}_{k}"), gender);
            gen.parents.insert(kid, (father, mother));
            emit_parent_edges(&gen, kid, father, mother, &mut train, &mut rng, 0.4);
        }
    }

    // Composed relations: sibling pairs, then avuncular pairs through either
    // parent.
    let sibling_groups: Vec<Vec<usize>> = {
        let mut groups: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut keyed: Vec<(usize, (usize, usize))> =
            gen.parents.iter().map(|(&p, &pair)| (p, pair)).collect();
        keyed.sort_unstable();
        for (person, pair) in keyed {
            groups.entry(pair).or_default().push(person);
        }
        let mut list: Vec<((usize, usize), Vec<usize>)> = groups.into_iter().collect();
        list.sort_unstable_by_key(|(pair, _)| *pair);
        list.into_iter().map(|(_, group)| group).collect()
    };
    for group in &sibling_groups {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                if rng.random_bool(0.7) {
                    let (x, y) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                    let rel = match gen.people[x].gender {
                        Gender::Male => "brother",
                        Gender::Female => "sister",
                    };
                    derived.push(fact(&gen, x, rel, y));
                }
            }
        }
    }

    let mut persons: Vec<usize> = gen.parents.keys().copied().collect();
    persons.sort_unstable();
    for kid in persons {
        let (father, mother) = gen.parents[&kid];
        for parent in [father, mother] {
            for sibling in gen.siblings_of(parent) {
                if rng.random_bool(0.5) {
                    let rel = match gen.people[sibling].gender {
                        Gender::Male => "uncle",
                        Gender::Female => "aunt",
                    };
                    derived.push(fact(&gen, sibling, rel, kid));
                }
                if rng.random_bool(0.5) {
                    let rel = match gen.people[kid].gender {
                        Gender::Male => "nephew",
                        Gender::Female => "niece",
                    };
                    derived.push(fact(&gen, kid, rel, sibling));
                }
            }
        }
    }

    // Split the composed facts.
    let mut test_candidates = Vec::new();
    for row in derived {
        if rng.random_bool(cfg.derived_train_fraction) {
            train.push(row);
        } else {
            test_candidates.push(row);
        }
    }

    // Keep test facts close enough in the training graph to be explainable.
    let graph = KnowledgeGraph::from_named_triples(
        train
            .iter()
            .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    );
    let test = test_candidates
        .into_iter()
        .filter(|(h, _, t)| match (graph.entity_id(h), graph.entity_id(t)) {
            (Some(a), Some(b)) => within_distance(&graph, a, b, cfg.test_distance_cap),
            _ => false,
        })
        .collect();

    KinshipData { train, test }
}

fn fact(gen: &Genealogy, x: usize, rel: &str, y: usize) -> NamedTriple {
    (
        gen.people[x].name.clone(),
        rel.to_string(),
        gen.people[y].name.clone(),
    )
}

/// One guaranteed parent edge, sometimes the second, sometimes a
/// son/daughter edge back.
fn emit_parent_edges(
    gen: &Genealogy,
    child: usize,
    father: usize,
    mother: usize,
    train: &mut Vec<NamedTriple>,
    rng: &mut ChaCha8Rng,
    child_edge_rate: f64,
) {
    let (primary, secondary, primary_rel, secondary_rel) = if rng.random_bool(0.5) {
        (father, mother, "father", "mother")
    } else {
        (mother, father, "mother", "father")
    };
    train.push(fact(gen, primary, primary_rel, child));
    if rng.random_bool(0.35) {
        train.push(fact(gen, secondary, secondary_rel, child));
    }
    if rng.random_bool(child_edge_rate) {
        let rel = match gen.people[child].gender {
            Gender::Male => "son",
            Gender::Female => "daughter",
        };
        let to = if rng.random_bool(0.5) { father } else { mother };
        train.push(fact(gen, child, rel, to));
    }
}

fn within_distance(graph: &KnowledgeGraph, from: u32, to: u32, cap: usize) -> bool {
    if from == to {
        return true;
    }
    let mut seen = vec![false; graph.num_entities()];
    seen[from as usize] = true;
    let mut queue = VecDeque::from([(from, 0usize)]);
    while let Some((v, d)) = queue.pop_front() {
        if d == cap {
            continue;
        }
        for &e in graph.incident(v) {
            let nb = graph.triple(e).other_endpoint(v);
            if nb == to {
                return true;
            }
            if !seen[nb as usize] {
                seen[nb as usize] = true;
                queue.push_back((nb, d + 1));
            }
        }
    }
    false
}

/// Write rows as a tab-separated triple file.
pub fn write_tsv<P: AsRef<Path>>(path: P, rows: &[NamedTriple]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (h, r, t) in rows {
        writeln!(out, "{h}\t{r}\t{t}")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn default_scale_matches_the_kinship_benchmark() {
        let data = generate_kinship(&KinshipConfig::default());
        let graph = KnowledgeGraph::from_named_triples(
            data.train
                .iter()
                .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
        );
        assert!(
            (2400..=3700).contains(&graph.num_entities()),
            "entities: {}",
            graph.num_entities()
        );
        assert!(
            (4500..=7500).contains(&graph.num_triples()),
            "train triples: {}",
            graph.num_triples()
        );
        assert!(data.test.len() >= 600, "test facts: {}", data.test.len());
        assert_eq!(graph.num_relations(), 12);
        for (h, r, t) in &data.test {
            let a = graph.entity_id(h).unwrap();
            let b = graph.entity_id(t).unwrap();
            graph.relation_id(r).unwrap();
            assert!(within_distance(&graph, a, b, 3));
        }
    }

    #[test]
    fn marriages_connect_but_clusters_stay_bounded() {
        let data = generate_kinship(&KinshipConfig::default());
        let graph = KnowledgeGraph::from_named_triples(
            data.train
                .iter()
                .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
        );
        // Some spouse edges must span families.
        let cross = data
            .train
            .iter()
            .filter(|(h, r, t)| (r == "husband" || r == "wife") && h[..4] != t[..4])
            .count();
        assert!(cross > 50, "cross-family marriages: {cross}");
        // Connected components stay far smaller than the whole graph.
        let mut seen = vec![false; graph.num_entities()];
        let mut largest = 0usize;
        for start in 0..graph.num_entities() as u32 {
            if seen[start as usize] {
                continue;
            }
            let mut size = 0usize;
            let mut queue = VecDeque::from([start]);
            seen[start as usize] = true;
            while let Some(v) = queue.pop_front() {
                size += 1;
                for &e in graph.incident(v) {
                    let nb = graph.triple(e).other_endpoint(v);
                    if !seen[nb as usize] {
                        seen[nb as usize] = true;
                        queue.push_back(nb);
                    }
                }
            }
            largest = largest.max(size);
        }
        assert!(
            largest < graph.num_entities() / 10,
            "largest component has {largest} entities"
        );
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let cfg = KinshipConfig {
            families: 12,
            ..KinshipConfig::default()
        };
        let a = generate_kinship(&cfg);
        let b = generate_kinship(&cfg);
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn small_instances_cover_all_relations_in_train() {
        let cfg = KinshipConfig {
            families: 60,
            seed: 3,
            ..KinshipConfig::default()
        };
        let data = generate_kinship(&cfg);
        let rels: HashSet<&str> = data.train.iter().map(|(_, r, _)| r.as_str()).collect();
        for rel in RELATIONS {
            assert!(rels.contains(rel), "missing relation {rel}");
        }
    }
}
