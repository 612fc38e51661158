use std::time::Instant;

use anyhow::{Context, Result};
use genclus::bundle::{generator_config_from_kv, generator_config_to_kv, Manifest, MANIFEST_FILE};
use genclus::io::{save_network, KeyValues, NetworkPaths};
use genclus::synth::{generate, write_truth};

use crate::util::{ensure_dir, secs, sha256_file};
use crate::GenerateArgs;

pub const TRUTH_FILE: &str = "truth.tsv";

pub fn run(a: &GenerateArgs) -> Result<()> {
    let mut kv = match &a.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            kv.entries.push((key.to_string(), v, 0));
        }
    };
    set("setting", a.setting.map(|x| x.to_string()));
    set("n_temp", a.n_temp.map(|x| x.to_string()));
    set("n_precip", a.n_precip.map(|x| x.to_string()));
    set("n_obs", a.n_obs.map(|x| x.to_string()));
    set("knn", a.knn.map(|x| x.to_string()));
    set("seed", a.seed.map(|x| x.to_string()));
    let config = generator_config_from_kv(&kv).context("invalid generator config")?;

    let t0 = Instant::now();
    let (graph, table, truth) = generate(&config)?;
    let t_gen = t0.elapsed();
    ensure_dir(&a.out)?;
    let paths = NetworkPaths::in_dir(&a.out);
    save_network(&graph, &table, &paths)?;
    write_truth(&a.out.join(TRUTH_FILE), &graph, &truth)?;

    let mut m = Manifest::new("generate");
    m.set("setting", kv.get("setting").unwrap_or("1"));
    m.extend(generator_config_to_kv(&config));
    if let Some(p) = &a.config {
        m.set("config", p.display());
        m.set("digest.config", sha256_file(p)?);
    }
    m.set("objects", graph.num_objects());
    m.set("links", graph.num_links());
    m.set("time.generate_s", secs(t_gen));
    m.write(&a.out.join(MANIFEST_FILE))?;
    println!(
        "wrote {} objects, {} links to {}",
        graph.num_objects(),
        graph.num_links(),
        a.out.display()
    );
    Ok(())
}
