//! `kgx explain`: one structured JSON and one DOT export per test fact,
//! plus a manifest with per-fact counters and timings. Per-fact failures are
//! logged, skipped, and summarized; the run still succeeds.

use std::fs;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use kgx_core::explain::{greedy_search, random_explanation, Explanation, SearchConfig};
use kgx_core::export::{to_doc, to_dot, to_json};
use kgx_core::graph::read_facts;
use kgx_core::retrain::RetrainConfig;
use kgx_core::{mix_seed, Real};

use crate::common::{fact_file_stem, init_jobs, load_graph, load_model, runtime, usage, CliError};
use crate::config::{require, ExplainArgs, PipelineConfig};
use crate::manifest::{ExplainFactEntry, ExplainResults, Manifest};

pub fn run(args: ExplainArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    init_jobs(cfg.jobs);
    execute(cfg)
}

fn execute(cfg: PipelineConfig) -> Result<(), CliError> {
    let graph = load_graph(require(&cfg.train, "train")?)?;
    let model = load_model(require(&cfg.model_file, "model")?, &graph)?;
    let test_path = require(&cfg.test, "test")?;
    let records = read_facts(test_path, &graph)
        .map_err(|e| usage(format!("cannot read test facts from {}: {e}", test_path.display())))?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| usage(format!("cannot create {}: {e}", cfg.out.display())))?;
    let random_baseline = cfg.baseline == "random";

    let entries: Vec<ExplainFactEntry> = records
        .par_iter()
        .enumerate()
        .map(|(index, record)| {
            let (head, relation, tail) = record
                .names
                .clone()
                .unwrap_or_else(|| ("?".into(), "?".into(), "?".into()));
            let mut entry = ExplainFactEntry {
                index,
                line: record.line,
                head,
                relation,
                tail,
                status: "ok".into(),
                evaluations: 0,
                hops: 0,
                edges: 0,
                reached_tail: false,
                fallback: false,
                max_degree: 0,
                enclosing_edges: 0,
                time_s: 0.0,
                json_file: None,
                dot_file: None,
            };
            let fact = match &record.result {
                Ok(fact) => *fact,
                Err(e) => {
                    entry.status = e.to_string();
                    return entry;
                }
            };
            let fact_seed = mix_seed(cfg.seed, index as u64);
            let search = SearchConfig {
                per_hop: cfg.per_hop,
                hops: cfg.hops,
                retrain: RetrainConfig {
                    epochs: cfg.retrain_epochs,
                    learning_rate: cfg.retrain_lr,
                    negatives: cfg.negatives,
                    seed: fact_seed,
                },
                seed: fact_seed,
            };
            let started = Instant::now();
            let outcome: Result<Explanation<Real>, _> = if random_baseline {
                let mut rng = ChaCha8Rng::seed_from_u64(fact_seed);
                random_explanation(&graph, fact, &search, &mut rng)
            } else {
                greedy_search(&graph, &model, fact, &search)
            };
            entry.time_s = started.elapsed().as_secs_f64();
            match outcome {
                Ok(explanation) => {
                    let doc = to_doc(&explanation, &graph);
                    let stem = fact_file_stem(index);
                    let json_name = format!("{stem}.json");
                    let dot_name = format!("{stem}.dot");
                    let write = fs::write(cfg.out.join(&json_name), to_json(&doc))
                        .and_then(|_| fs::write(cfg.out.join(&dot_name), to_dot(&doc)));
                    if let Err(e) = write {
                        entry.status = format!("cannot write explanation: {e}");
                        return entry;
                    }
                    entry.evaluations = explanation.evaluations;
                    entry.hops = explanation.hops_searched;
                    entry.edges = explanation.key_subgraph.num_edges();
                    entry.reached_tail = explanation.reached_tail;
                    entry.fallback = explanation.fallback;
                    entry.max_degree = explanation.enclosing_max_degree;
                    entry.enclosing_edges = explanation.enclosing_edge_count;
                    entry.json_file = Some(json_name);
                    entry.dot_file = Some(dot_name);
                }
                Err(e) => entry.status = e.to_string(),
            }
            entry
        })
        .collect();

    let succeeded: Vec<&ExplainFactEntry> =
        entries.iter().filter(|e| e.status == "ok").collect();
    let failed = entries.len() - succeeded.len();
    let mean = |f: &dyn Fn(&ExplainFactEntry) -> f64| -> f64 {
        if succeeded.is_empty() {
            0.0
        } else {
            succeeded.iter().map(|e| f(e)).sum::<f64>() / succeeded.len() as f64
        }
    };
    let results = ExplainResults {
        succeeded: succeeded.len(),
        failed,
        mean_time_s: mean(&|e| e.time_s),
        mean_evaluations: mean(&|e| e.evaluations as f64),
        mean_edges: mean(&|e| e.edges as f64),
        facts: entries,
    };

    for entry in results.facts.iter().filter(|e| e.status != "ok") {
        eprintln!(
            "fact #{} (line {}): skipped: {}",
            entry.index, entry.line, entry.status
        );
    }
    println!(
        "explained {}/{} facts ({} skipped); mean {:.3} s, {:.1} evaluations, {:.1} edges per explanation",
        results.succeeded,
        results.facts.len(),
        results.failed,
        results.mean_time_s,
        results.mean_evaluations,
        results.mean_edges
    );

    let manifest_path = cfg.out.join("manifest.json");
    Manifest::new(
        "explain",
        cfg.clone(),
        serde_json::to_value(&results).expect("results serialize"),
    )
    .write(&manifest_path)
    .map_err(|e| runtime(format!("cannot write manifest: {e}")))?;
    println!("manifest written to {}", manifest_path.display());
    let _ = json!(null);
    Ok(())
}
