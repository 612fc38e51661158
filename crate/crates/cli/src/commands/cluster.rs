use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use genclus::bundle::{cluster_config_from_kv, cluster_config_to_kv, write_result, Manifest, RunOptions, MANIFEST_FILE};
use genclus::driver::{run_genclus, GenClusConfig};
use genclus::eval::holdout_split;
use genclus::io::{load_network, save_network, KeyValues, NetworkPaths};
use log::info;

use crate::util::{apply_tuning, ensure_dir, secs, sha256_file, with_threads};
use crate::ClusterArgs;

pub const HELDOUT_DIR: &str = "heldout";

pub fn run(a: &ClusterArgs) -> Result<()> {
    let kv = match &a.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    let data: PathBuf = match (&a.data, kv.get("data")) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.into(),
        (None, None) => bail!("no network given: pass --data or set `data` in the config"),
    };
    // 0 marks "not given" until the config and flags have been applied
    let mut config = GenClusConfig::new(0, Vec::new());
    let mut options = RunOptions::default();
    cluster_config_from_kv(&kv, &mut config, &mut options)?;
    if let Some(k) = a.k {
        config.k = k;
    }
    if let Some(attrs) = &a.attributes {
        config.attributes = attrs.clone();
    }
    apply_tuning(&a.tuning, &mut config, &mut options);
    if a.materialize_inverses {
        options.materialize_inverses = true;
    }
    if let Some(h) = a.holdout {
        options.holdout = h;
    }
    if config.k == 0 {
        bail!("the number of clusters is required: pass --k or set `k` in the config");
    }

    let t0 = Instant::now();
    let paths = NetworkPaths::in_dir(&data);
    let (mut graph, table) =
        load_network(&paths).with_context(|| format!("loading network from {}", data.display()))?;
    if options.materialize_inverses {
        graph = graph.materialize_inverse_relations();
    }
    if kv.get("attributes").is_none() && a.attributes.is_none() {
        config.attributes = table.attributes().iter().map(|x| x.name().to_string()).collect();
    }
    ensure_dir(&a.out)?;
    if options.holdout > 0.0 {
        let (train, test) = holdout_split(&graph, None, options.holdout, config.seed)?;
        let dir = a.out.join(HELDOUT_DIR);
        ensure_dir(&dir)?;
        save_network(&test, &table, &NetworkPaths::in_dir(&dir))?;
        info!("held out {} of {} links", test.num_links(), graph.num_links());
        graph = train;
    }
    let t_load = t0.elapsed();

    let t0 = Instant::now();
    let result = with_threads(options.threads, || run_genclus(&graph, &table, &config))??;
    let t_cluster = t0.elapsed();

    let t0 = Instant::now();
    write_result(&a.out, &graph, &result)?;
    let t_write = t0.elapsed();

    let mut m = Manifest::new("cluster");
    m.set("data", data.display());
    m.extend(cluster_config_to_kv(&config, &options));
    if let Some(p) = &a.config {
        m.set("digest.config", sha256_file(p)?);
    }
    for (name, p) in ["nodes", "edges", "attributes", "schema"].iter().zip(paths.all()) {
        m.set(&format!("digest.{name}"), sha256_file(p)?);
    }
    m.set("outer_iters_run", result.trace.len());
    m.set("converged", result.converged);
    m.set("time.load_s", secs(t_load));
    m.set("time.cluster_s", secs(t_cluster));
    m.set("time.write_s", secs(t_write));
    m.write(&a.out.join(MANIFEST_FILE))?;

    let gamma: Vec<String> = graph
        .relations()
        .iter()
        .zip(result.gamma.as_slice())
        .map(|(r, g)| format!("{}={g:.4}", r.name))
        .collect();
    println!(
        "clustered {} objects into {} clusters in {} outer iterations; gamma: {}",
        graph.num_objects(),
        config.k,
        result.trace.len(),
        gamma.join(" ")
    );
    Ok(())
}
