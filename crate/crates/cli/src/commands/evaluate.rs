use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use genclus::bundle::{read_labels_trace, Manifest, LABELS_TRACE_FILE, MANIFEST_FILE};
use genclus::eval::{map_score, nmi, RankingTask, SimilarityKind};
use genclus::io::{load_network, NetworkPaths};
use genclus::synth::read_truth_labels;

use super::{load_run_network, load_run_theta};
use crate::util::{ensure_dir, secs, sha256_file, with_threads};
use crate::EvaluateArgs;

pub const METRICS_FILE: &str = "metrics.txt";
pub const NMI_TRACE_FILE: &str = "nmi_trace.tsv";

pub fn run(a: &EvaluateArgs) -> Result<()> {
    let t0 = std::time::Instant::now();
    let (graph, _) = load_run_network(&a.run, &a.data)?;
    let theta = load_run_theta(&a.run, &graph)?;

    let labels: Vec<Option<String>> = match &a.truth {
        Some(p) => {
            let mut labels = vec![None; graph.num_objects()];
            for (id, label) in read_truth_labels(p)? {
                let v = graph
                    .index_of(&id)
                    .with_context(|| format!("truth object `{id}` is not in the run"))?;
                labels[v] = Some(label);
            }
            labels
        }
        None => (0..graph.num_objects()).map(|v| graph.label(v).map(String::from)).collect(),
    };
    let labeled: Vec<usize> = (0..graph.num_objects()).filter(|&v| labels[v].is_some()).collect();

    let mut metrics = String::new();
    let score = |objs: &[usize], pred: &dyn Fn(usize) -> usize| -> Result<f64> {
        let p: Vec<usize> = objs.iter().map(|&v| pred(v)).collect();
        let t: Vec<&str> = objs.iter().map(|&v| labels[v].as_deref().unwrap()).collect();
        Ok(nmi(&p, &t)?)
    };
    if !labeled.is_empty() {
        let argmax = |v: usize| theta.argmax(v);
        writeln!(metrics, "nmi.overall = {}", score(&labeled, &argmax)?).unwrap();
        for (t, name) in graph.type_names().iter().enumerate() {
            let objs: Vec<usize> = labeled.iter().copied().filter(|&v| graph.object_type(v) == t).collect();
            if !objs.is_empty() {
                writeln!(metrics, "nmi.{name} = {}", score(&objs, &argmax)?).unwrap();
            }
        }
    }

    let truth_graph = match &a.links {
        Some(dir) => {
            let (g, _) = load_network(&NetworkPaths::in_dir(dir))
                .with_context(|| format!("loading relevance links from {}", dir.display()))?;
            Some(g)
        }
        None => None,
    };
    let truth = truth_graph.as_ref().unwrap_or(&graph);
    let relations: Vec<String> = if a.relations.is_empty() {
        graph.relations().iter().map(|r| r.name.clone()).collect()
    } else {
        a.relations.clone()
    };
    let sims: Vec<SimilarityKind> = if a.similarities.is_empty() {
        SimilarityKind::ALL.to_vec()
    } else {
        a.similarities.iter().map(|&s| s.into()).collect()
    };
    for name in &relations {
        let r = graph.relation_index(name).with_context(|| format!("unknown relation `{name}`"))?;
        if truth.relation_index(name) != Some(r) {
            bail!("relation `{name}` is laid out differently in the relevance links");
        }
        let task = RankingTask::new(&graph, truth, r)?;
        for &kind in &sims {
            let s = with_threads(a.threads.unwrap_or(0), || map_score(&task, &theta, kind))??;
            writeln!(metrics, "map.{name}.{kind} = {}", s.map).unwrap();
            writeln!(metrics, "map.{name}.{kind}.queries = {}", s.n_queries).unwrap();
            writeln!(metrics, "map.{name}.{kind}.skipped = {}", s.n_skipped).unwrap();
        }
    }

    ensure_dir(&a.out)?;
    let metrics_path = a.out.join(METRICS_FILE);
    fs::write(&metrics_path, &metrics).with_context(|| format!("writing {}", metrics_path.display()))?;

    let trace_path = a.run.join(LABELS_TRACE_FILE);
    if !labeled.is_empty() && trace_path.exists() {
        let mut out = String::from("# outer_iter\tnmi\n");
        for (iter, rows) in read_labels_trace(&trace_path)? {
            let mut pred = vec![usize::MAX; graph.num_objects()];
            for (id, label) in rows {
                let v = graph
                    .index_of(&id)
                    .with_context(|| format!("trace object `{id}` is not in the network"))?;
                pred[v] = label;
            }
            if labeled.iter().any(|&v| pred[v] == usize::MAX) {
                bail!("{} misses labeled objects at iteration {iter}", trace_path.display());
            }
            writeln!(out, "{iter}\t{}", score(&labeled, &|v| pred[v])?).unwrap();
        }
        fs::write(a.out.join(NMI_TRACE_FILE), out).context("writing NMI trace")?;
    }

    let mut m = Manifest::new("evaluate");
    m.set("run", a.run.display());
    m.set("data", a.data.display());
    m.set("relations", relations.join(","));
    m.set("similarities", sims.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
    m.set("digest.theta", sha256_file(&a.run.join(genclus::bundle::THETA_FILE))?);
    if let Some(p) = &a.truth {
        m.set("digest.truth", sha256_file(p)?);
    }
    if let Some(d) = &a.links {
        m.set("links", d.display());
    }
    m.set("time.evaluate_s", secs(t0.elapsed()));
    m.write(&a.out.join(MANIFEST_FILE))?;
    print!("{metrics}");
    Ok(())
}
