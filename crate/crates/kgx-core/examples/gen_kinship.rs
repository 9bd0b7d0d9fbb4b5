//! Regenerate the bundled kinship dataset:
//!
//! ```text
//! cargo run -p kgx-core --example gen_kinship -- data/kinship [families] [seed]
//! ```

use kgx_core::datagen::{generate_kinship, write_tsv, KinshipConfig};
use kgx_core::graph::KnowledgeGraph;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| "data/kinship".into()));
    let families = args
        .next()
        .map(|v| v.parse().expect("families must be a number"))
        .unwrap_or(380);
    let seed = args
        .next()
        .map(|v| v.parse().expect("seed must be a number"))
        .unwrap_or(42);
    let data = generate_kinship(&KinshipConfig {
        families,
        seed,
        ..KinshipConfig::default()
    });
    std::fs::create_dir_all(&dir).expect("create output directory");
    write_tsv(dir.join("train.tsv"), &data.train).expect("write train split");
    write_tsv(dir.join("test.tsv"), &data.test).expect("write test split");
    let graph = KnowledgeGraph::from_named_triples(
        data.train
            .iter()
            .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    );
    println!(
        "wrote {}: {} entities, {} relations, {} train triples, {} test facts",
        dir.display(),
        graph.num_entities(),
        graph.num_relations(),
        graph.num_triples(),
        data.test.len()
    );
}
