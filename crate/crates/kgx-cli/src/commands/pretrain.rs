//! `kgx pretrain`: train an embedding model, print the loss curve and the
//! train-split Hits@1, and write the model plus a manifest.

use rayon::prelude::*;
use serde_json::json;

use kgx_core::kge::{tail_rank, ModelKind};
use kgx_core::model_io::save_model;
use kgx_core::train::{pretrain, TrainConfig};
use kgx_core::Real;

use crate::common::{init_jobs, load_graph, runtime, usage, CliError};
use crate::config::{require, PipelineConfig, PretrainArgs};
use crate::manifest::Manifest;

pub fn run(args: PretrainArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    init_jobs(cfg.jobs);
    execute(cfg)
}

fn execute(cfg: PipelineConfig) -> Result<(), CliError> {
    let kind = ModelKind::parse(&cfg.kind)
        .ok_or_else(|| usage(format!("unknown model kind `{}`", cfg.kind)))?;
    let train_path = require(&cfg.train, "train")?;
    let graph = load_graph(train_path)?;
    println!(
        "loaded {}: {} entities, {} relations, {} triples",
        train_path.display(),
        graph.num_entities(),
        graph.num_relations(),
        graph.num_triples()
    );

    let train_cfg = TrainConfig {
        dim: cfg.dim,
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        negatives: cfg.negatives,
        margin: cfg.gamma,
        seed: cfg.seed,
    };
    let started = std::time::Instant::now();
    let trained = pretrain::<Real>(&graph, kind, &train_cfg)
        .map_err(|e| runtime(format!("pre-training failed: {e}")))?;
    for (epoch, loss) in trained.loss_trace.iter().enumerate() {
        println!("epoch {:>4}  loss {loss:.6}", epoch + 1);
    }

    // Train-split Hits@1 with full ranking.
    let all: Vec<u32> = (0..graph.num_entities() as u32).collect();
    let hits: usize = graph
        .triples()
        .par_iter()
        .map(|t| {
            match tail_rank(&trained.model, t.head, t.relation, t.tail, &all) {
                Ok(1) => 1usize,
                _ => 0,
            }
        })
        .sum();
    let train_hits1 = hits as f64 / graph.num_triples() as f64;
    println!("train hits@1: {train_hits1:.4}");

    save_model(&trained.model, &cfg.out)
        .map_err(|e| runtime(format!("cannot write model {}: {e}", cfg.out.display())))?;
    println!("model written to {}", cfg.out.display());

    let manifest_path = manifest_path_for(&cfg.out);
    Manifest::new(
        "pretrain",
        cfg,
        json!({
            "loss_trace": trained.loss_trace,
            "train_hits1": train_hits1,
            "elapsed_s": started.elapsed().as_secs_f64(),
        }),
    )
    .write(&manifest_path)
    .map_err(|e| runtime(format!("cannot write manifest: {e}")))?;
    println!("manifest written to {}", manifest_path.display());
    Ok(())
}

pub fn manifest_path_for(out: &std::path::Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
