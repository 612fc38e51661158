use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use genclus::bundle::{Manifest, MANIFEST_FILE, THETA_FILE};
use genclus::eval::{rank_by_score, similarity, SimilarityKind};

use super::{load_run_network, load_run_theta};
use crate::util::{ensure_dir, sha256_file};
use crate::PredictArgs;

pub const PREDICTIONS_FILE: &str = "predictions.tsv";

pub fn run(a: &PredictArgs) -> Result<()> {
    let (graph, _) = load_run_network(&a.run, &a.data)?;
    let theta = load_run_theta(&a.run, &graph)?;
    let r = graph
        .relation_index(&a.relation)
        .with_context(|| format!("unknown relation `{}`", a.relation))?;
    let rel = graph.relation(r);
    let kind: SimilarityKind = a.similarity.into();
    let candidates = graph.objects_of_type(rel.target_type);
    let queries = if a.queries.is_empty() {
        graph.objects_of_type(rel.source_type)
    } else {
        a.queries
            .iter()
            .map(|id| {
                let v = graph.index_of(id).with_context(|| format!("unknown object `{id}`"))?;
                if graph.object_type(v) != rel.source_type {
                    bail!(
                        "`{id}` has type {}, relation `{}` starts at {}",
                        graph.type_name(graph.object_type(v)),
                        rel.name,
                        graph.type_name(rel.source_type)
                    );
                }
                Ok(v)
            })
            .collect::<Result<_>>()?
    };

    let mut out = String::from("# query\trank\tcandidate\tscore\n");
    for &q in &queries {
        let cands: Vec<usize> = candidates.iter().copied().filter(|&c| c != q).collect();
        let scores: Vec<f64> = cands.iter().map(|&c| similarity(theta.row(q), theta.row(c), kind)).collect();
        for (rank, c) in rank_by_score(&cands, &scores).into_iter().take(a.top).enumerate() {
            let s = similarity(theta.row(q), theta.row(c), kind);
            writeln!(out, "{}\t{}\t{}\t{s}", graph.id(q), rank + 1, graph.id(c)).unwrap();
        }
    }
    ensure_dir(&a.out)?;
    fs::write(a.out.join(PREDICTIONS_FILE), &out).context("writing predictions")?;

    let mut m = Manifest::new("predict");
    m.set("run", a.run.display());
    m.set("data", a.data.display());
    m.set("relation", &a.relation);
    m.set("similarity", kind);
    m.set("top", a.top);
    m.set("queries", queries.len());
    m.set("digest.theta", sha256_file(&a.run.join(THETA_FILE))?);
    m.write(&a.out.join(MANIFEST_FILE))?;
    println!("ranked candidates for {} queries", queries.len());
    Ok(())
}
