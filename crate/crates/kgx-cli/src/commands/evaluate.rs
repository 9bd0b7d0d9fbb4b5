//! `kgx evaluate`: rank every test fact through the evaluator twice — full
//! enclosing subgraphs vs the stored explanations — then aggregate Hits,
//! Recall and F1 at {1, 3, 10}, sparsity, and the search-cost audit into a
//! report. Wall times come from the explain manifest so two evaluate runs
//! over the same inputs produce identical reports.

use std::fs;

use rayon::prelude::*;
use serde_json::json;

use kgx_core::distill::{evaluator_rank, RankMode, SubgraphCache};
use kgx_core::export::parse_json;
use kgx_core::graph::read_facts;
use kgx_core::kge::tail_rank;
use kgx_core::metrics::{
    audit_record, metric_table, AtN, AuditInput, RankSet, Report, ReportFact,
};

use crate::common::{
    candidates, fact_file_stem, init_jobs, load_evaluator, load_graph, load_model, runtime,
    usage, CliError,
};
use crate::config::{require, EvaluateArgs, PipelineConfig};
use crate::manifest::{ExplainResults, Manifest};

pub fn run(args: EvaluateArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    init_jobs(cfg.jobs);
    execute(cfg)
}

struct FactOutcome {
    report: ReportFact,
    audit: Option<AuditInput>,
}

fn execute(cfg: PipelineConfig) -> Result<(), CliError> {
    let graph = load_graph(require(&cfg.train, "train")?)?;
    let model = load_model(require(&cfg.model_file, "model")?, &graph)?;
    let evaluator = load_evaluator(require(&cfg.evaluator_file, "evaluator")?, &model)?;
    let test_path = require(&cfg.test, "test")?;
    let records = read_facts(test_path, &graph)
        .map_err(|e| usage(format!("cannot read test facts from {}: {e}", test_path.display())))?;
    let explain_dir = require(&cfg.explanations, "explanations")?;
    let explain_manifest = Manifest::read(&explain_dir.join("manifest.json")).map_err(|e| {
        usage(format!(
            "cannot read explain manifest in {}: {e}",
            explain_dir.display()
        ))
    })?;
    let explain_results: ExplainResults = serde_json::from_value(explain_manifest.results)
        .map_err(|e| usage(format!("malformed explain manifest: {e}")))?;
    let per_hop = explain_manifest.config.per_hop;

    let cache = match &cfg.cache_dir {
        Some(dir) if dir.join("index.json").exists() => {
            SubgraphCache::load_dir(dir, cfg.hops, &graph)
                .map_err(|e| usage(format!("cannot load cache {}: {e}", dir.display())))?
        }
        _ => SubgraphCache::new(cfg.hops),
    };

    let outcomes: Vec<FactOutcome> = records
        .par_iter()
        .enumerate()
        .map(|(index, record)| {
            let (head, relation, tail) = record
                .names
                .clone()
                .unwrap_or_else(|| ("?".into(), "?".into(), "?".into()));
            let mut report = ReportFact {
                index,
                head,
                relation,
                tail,
                status: "ok".into(),
                original_rank: None,
                explained_rank: None,
                teacher_rank: None,
                edges: None,
                evaluations: None,
            };
            let fact = match &record.result {
                Ok(fact) => *fact,
                Err(e) => {
                    report.status = format!("skipped input: {e}");
                    return FactOutcome {
                        report,
                        audit: None,
                    };
                }
            };
            let entry = explain_results.facts.iter().find(|f| f.index == index);
            let entry = match entry {
                Some(e) if e.status == "ok" => e,
                _ => {
                    report.status = "missing explanation".into();
                    return FactOutcome {
                        report,
                        audit: None,
                    };
                }
            };
            let doc_path = explain_dir.join(format!("{}.json", fact_file_stem(index)));
            let doc = match fs::read_to_string(&doc_path)
                .map_err(|e| e.to_string())
                .and_then(|text| parse_json(&text).map_err(|e| e.to_string()))
            {
                Ok(doc) => doc,
                Err(e) => {
                    report.status = format!("missing explanation: {e}");
                    return FactOutcome {
                        report,
                        audit: None,
                    };
                }
            };
            let (doc_fact, entities, edges) = match doc.resolve(&graph) {
                Ok(parts) => parts,
                Err(e) => {
                    report.status = format!("invalid explanation: {e}");
                    return FactOutcome {
                        report,
                        audit: None,
                    };
                }
            };
            if doc_fact != fact {
                report.status = "invalid explanation: fact mismatch".into();
                return FactOutcome {
                    report,
                    audit: None,
                };
            }
            let cands = candidates(
                &graph,
                fact,
                cfg.candidates,
                cfg.full_candidates,
                cfg.seed,
                index,
            );
            let ranks = (|| -> Result<(usize, usize, usize), kgx_core::Error> {
                let original = evaluator_rank(
                    &evaluator,
                    &model,
                    &graph,
                    &cache,
                    fact,
                    &cands,
                    RankMode::Full,
                )?;
                let explained = evaluator_rank(
                    &evaluator,
                    &model,
                    &graph,
                    &cache,
                    fact,
                    &cands,
                    RankMode::Explained {
                        entities: &entities,
                        edges: &edges,
                    },
                )?;
                let teacher = tail_rank(&model, fact.head, fact.relation, fact.tail, &cands)?;
                Ok((original, explained, teacher))
            })();
            match ranks {
                Ok((original, explained, teacher)) => {
                    report.original_rank = Some(original);
                    report.explained_rank = Some(explained);
                    report.teacher_rank = Some(teacher);
                    report.edges = Some(edges.len());
                    report.evaluations = Some(doc.counters.evaluations);
                    let audit = AuditInput {
                        fact: index,
                        evaluations: entry.evaluations,
                        hops: entry.hops,
                        reached_tail: entry.reached_tail,
                        per_hop,
                        max_degree: entry.max_degree,
                        enclosing_edges: entry.enclosing_edges,
                        explanation_edges: edges.len(),
                    };
                    FactOutcome {
                        report,
                        audit: Some(audit),
                    }
                }
                Err(e) => {
                    report.status = format!("ranking failed: {e}");
                    FactOutcome {
                        report,
                        audit: None,
                    }
                }
            }
        })
        .collect();

    let mut original = RankSet::new();
    let mut explained = RankSet::new();
    for outcome in &outcomes {
        if let (Some(o), Some(e)) = (
            outcome.report.original_rank,
            outcome.report.explained_rank,
        ) {
            original.insert(outcome.report.index, o).unwrap();
            explained.insert(outcome.report.index, e).unwrap();
        }
    }
    if original.is_empty() {
        eprintln!("warning: no fact could be evaluated; the report carries statuses only");
    }

    let (hits, recall, f1, mut undefined) = if original.is_empty() {
        (
            AtN::default(),
            AtN::default(),
            AtN::default(),
            vec!["no evaluated facts".to_string()],
        )
    } else {
        let rows = metric_table(&original, &explained)
            .map_err(|e| runtime(format!("metric aggregation failed: {e}")))?;
        let undefined: Vec<String> =
            rows.iter().flat_map(|r| r.undefined.clone()).collect();
        (
            AtN::from_rows(&rows, |r| r.hits),
            AtN::from_rows(&rows, |r| r.recall),
            AtN::from_rows(&rows, |r| r.f1),
            undefined,
        )
    };

    let audit_inputs: Vec<AuditInput> =
        outcomes.iter().filter_map(|o| o.audit).collect();
    let audit = audit_record(&audit_inputs);
    if !audit.violations.is_empty() {
        for fact in &audit.violations {
            eprintln!("warning: search-cost audit violation on fact #{fact}");
        }
        undefined.push(format!(
            "search-cost audit failed on {} facts",
            audit.violations.len()
        ));
    }

    let report = Report {
        hits,
        recall,
        f1,
        avg_edges: audit.mean_explanation_edges,
        avg_evaluations: audit.mean_evaluations,
        mean_time_s: explain_results.mean_time_s,
        audit_violations: audit.violations.len(),
        undefined,
        facts: outcomes.into_iter().map(|o| o.report).collect(),
    };
    fs::write(&cfg.out, report.to_json())
        .map_err(|e| runtime(format!("cannot write report {}: {e}", cfg.out.display())))?;
    println!(
        "evaluated {} facts: hits@1 {:?}, recall@1 {:?}, f1@1 {:?}, avg edges {:.3}, audit violations {}",
        original.len(),
        report.hits.at1,
        report.recall.at1,
        report.f1.at1,
        report.avg_edges,
        report.audit_violations
    );
    println!("report written to {}", cfg.out.display());

    let manifest_path = super::pretrain::manifest_path_for(&cfg.out);
    Manifest::new(
        "evaluate",
        cfg,
        json!({
            "evaluated_facts": original.len(),
            "report_file": true,
        }),
    )
    .write(&manifest_path)
    .map_err(|e| runtime(format!("cannot write manifest: {e}")))?;
    println!("manifest written to {}", manifest_path.display());
    Ok(())
}
