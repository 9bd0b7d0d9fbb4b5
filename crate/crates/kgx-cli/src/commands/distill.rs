//! `kgx distill`: train the subgraph evaluator from a pre-trained model,
//! write it with its training curve, and report teacher vs evaluator
//! Hits@1 on the test split (the faithfulness row).

use rayon::prelude::*;
use serde_json::json;

use kgx_core::distill::{distill, evaluator_rank, DistillConfig, RankMode, SubgraphCache};
use kgx_core::graph::read_facts;
use kgx_core::kge::tail_rank;
use kgx_core::model_io::save_evaluator;
use kgx_core::Real;

use crate::common::{candidates, init_jobs, load_graph, load_model, runtime, usage, CliError};
use crate::config::{require, DistillArgs, PipelineConfig};
use crate::manifest::Manifest;

pub fn run(args: DistillArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    init_jobs(cfg.jobs);
    execute(cfg)
}

fn execute(mut cfg: PipelineConfig) -> Result<(), CliError> {
    let graph = load_graph(require(&cfg.train, "train")?)?;
    let model = load_model(require(&cfg.model_file, "model")?, &graph)?;
    let test_path = require(&cfg.test, "test")?.clone();

    // Small graphs get 2 message-passing layers, larger ones 3.
    let layers = cfg
        .layers
        .unwrap_or(if graph.num_entities() < 10_000 { 2 } else { 3 });
    cfg.layers = Some(layers);

    let cache = match &cfg.cache_dir {
        Some(dir) if dir.join("index.json").exists() => {
            SubgraphCache::load_dir(dir, cfg.hops, &graph)
                .map_err(|e| usage(format!("cannot load cache {}: {e}", dir.display())))?
        }
        _ => SubgraphCache::new(cfg.hops),
    };

    let distill_cfg = DistillConfig {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        pairwise_weight: cfg.lambda,
        negatives: cfg.negatives,
        batch_size: cfg.batch_size,
        layers,
        dim: cfg.dim,
        subgraph_hops: cfg.hops,
        seed: cfg.seed,
    };
    let started = std::time::Instant::now();
    let outcome = distill::<Real>(&graph, &model, &distill_cfg, &cache)
        .map_err(|e| runtime(format!("distillation failed: {e}")))?;
    for (epoch, (loss, gap)) in outcome
        .loss_trace
        .iter()
        .zip(&outcome.alignment_trace)
        .enumerate()
    {
        let tag = if epoch == 0 { "init " } else { "epoch" };
        println!(
            "{tag} {:>4}  loss {loss:.6}  alignment gap {gap:.6}",
            epoch
        );
    }

    // Faithfulness: teacher and evaluator Hits@1 over the same sampled
    // candidate sets on the test split.
    let records = read_facts(&test_path, &graph)
        .map_err(|e| usage(format!("cannot read test facts from {}: {e}", test_path.display())))?;
    let ranks: Vec<Option<(usize, usize)>> = records
        .par_iter()
        .enumerate()
        .map(|(index, record)| {
            let fact = record.result.as_ref().ok().copied()?;
            let cands = candidates(
                &graph,
                fact,
                cfg.candidates,
                cfg.full_candidates,
                cfg.seed,
                index,
            );
            let teacher =
                tail_rank(&model, fact.head, fact.relation, fact.tail, &cands).ok()?;
            let evaluator = evaluator_rank(
                &outcome.evaluator,
                &model,
                &graph,
                &cache,
                fact,
                &cands,
                RankMode::Full,
            )
            .ok()?;
            Some((teacher, evaluator))
        })
        .collect();
    let scored: Vec<(usize, usize)> = ranks.into_iter().flatten().collect();
    let skipped = records.len() - scored.len();
    let hits1 = |pick: &dyn Fn(&(usize, usize)) -> usize| -> f64 {
        if scored.is_empty() {
            return 0.0;
        }
        scored.iter().filter(|r| pick(r) == 1).count() as f64 / scored.len() as f64
    };
    let teacher_hits1 = hits1(&|r| r.0);
    let evaluator_hits1 = hits1(&|r| r.1);
    println!(
        "faithfulness over {} test facts ({} skipped): teacher hits@1 {:.4}, evaluator hits@1 {:.4}",
        scored.len(),
        skipped,
        teacher_hits1,
        evaluator_hits1
    );

    save_evaluator(&outcome.evaluator, &cfg.out)
        .map_err(|e| runtime(format!("cannot write evaluator {}: {e}", cfg.out.display())))?;
    println!("evaluator written to {}", cfg.out.display());

    if let Some(dir) = &cfg.cache_dir {
        cache
            .save_dir(dir, &graph)
            .map_err(|e| runtime(format!("cannot write cache {}: {e}", dir.display())))?;
        println!("subgraph cache ({} entries) written to {}", cache.len(), dir.display());
    }

    let manifest_path = super::pretrain::manifest_path_for(&cfg.out);
    Manifest::new(
        "distill",
        cfg,
        json!({
            "loss_trace": outcome.loss_trace,
            "alignment_trace": outcome.alignment_trace,
            "teacher_hits1": teacher_hits1,
            "evaluator_hits1": evaluator_hits1,
            "scored_facts": scored.len(),
            "skipped_facts": skipped,
            "elapsed_s": started.elapsed().as_secs_f64(),
        }),
    )
    .write(&manifest_path)
    .map_err(|e| runtime(format!("cannot write manifest: {e}")))?;
    println!("manifest written to {}", manifest_path.display());
    Ok(())
}
