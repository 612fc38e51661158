pub mod cluster;
pub mod evaluate;
pub mod generate;
pub mod predict;
pub mod reproduce;

use std::path::Path;

use anyhow::{bail, Context, Result};
use genclus::bundle::{read_theta, Manifest, MANIFEST_FILE, THETA_FILE};
use genclus::io::{load_network, NetworkPaths};
use genclus::{AttributeTable, HinGraph, Membership};

/// Loads the network a run was trained on, with inverse relations added
/// when the run's manifest says so.
pub(crate) fn load_run_network(run: &Path, data: &Path) -> Result<(HinGraph, AttributeTable)> {
    let (graph, table) =
        load_network(&NetworkPaths::in_dir(data)).with_context(|| format!("loading network from {}", data.display()))?;
    let inverses = Manifest::read(&run.join(MANIFEST_FILE))
        .ok()
        .and_then(|m| m.get("materialize_inverses").map(|v| v == "true"))
        .unwrap_or(false);
    Ok(if inverses { (graph.materialize_inverse_relations(), table) } else { (graph, table) })
}

/// Reads the run's Θ and reorders it to the graph's object order.
pub(crate) fn load_run_theta(run: &Path, graph: &HinGraph) -> Result<Membership> {
    let (ids, theta) = read_theta(&run.join(THETA_FILE))?;
    if ids.len() != graph.num_objects() {
        bail!(
            "run has {} objects but the network has {}",
            ids.len(),
            graph.num_objects()
        );
    }
    let mut rows = vec![Vec::new(); ids.len()];
    for (i, id) in ids.iter().enumerate() {
        let v = graph
            .index_of(id)
            .with_context(|| format!("run object `{id}` is not in the network"))?;
        rows[v] = theta.row(i).to_vec();
    }
    Ok(Membership::from_rows(&rows)?)
}
