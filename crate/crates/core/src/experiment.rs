//! Weather-network trials: GenClus against k-means on interpolated sensor means.

use std::time::Instant;

use crate::attributes::AttributeTable;
use crate::baseline::{kmeans, KMeansFit};
use crate::driver::{run_genclus, GenClusConfig, GenClusResult};
use crate::error::Result;
use crate::eval::{label_agreement, nmi};
use crate::graph::HinGraph;
use crate::rng;
use crate::synth::{generate, interpolate_missing, GeneratorConfig, GroundTruth, PRECIPITATION, TEMPERATURE};

/// Sensor counts and observation counts of the reproduction grid.
pub const GRID_N_TEMP: usize = 1000;
pub const GRID_N_PRECIP: [usize; 3] = [250, 500, 1000];
pub const GRID_N_OBS: [usize; 3] = [1, 5, 20];
pub const BASELINE_RESTARTS: usize = 10;

/// The nine (#P, observations) configurations of a setting.
pub fn grid() -> Vec<(usize, usize)> {
    GRID_N_PRECIP
        .iter()
        .flat_map(|&p| GRID_N_OBS.iter().map(move |&o| (p, o)))
        .collect()
}

/// GenClus defaults on both weather attributes.
pub fn weather_cluster_config(k: usize, seed: u64) -> GenClusConfig {
    let mut c = GenClusConfig::new(k, vec![TEMPERATURE.into(), PRECIPITATION.into()]);
    c.seed = seed;
    c
}

/// k-means with [`BASELINE_RESTARTS`] restarts on each sensor's
/// interpolated (temperature, precipitation) pair.
pub fn kmeans_baseline(graph: &HinGraph, table: &AttributeTable, k: usize, seed: u64) -> Result<KMeansFit> {
    let interp = interpolate_missing(graph, table)?;
    let points: Vec<Vec<f64>> = (0..graph.num_objects())
        .map(|v| interp.attributes().iter().map(|a| a.observations(v)[0]).collect())
        .collect();
    kmeans(&points, k, BASELINE_RESTARTS, &mut rng::stream(seed, "baseline"))
}

#[derive(Clone, Debug)]
pub struct WeatherTrial {
    pub generator: GeneratorConfig,
    pub graph: HinGraph,
    pub truth: GroundTruth,
    pub result: GenClusResult,
    pub genclus_nmi: f64,
    /// NMI per sensor type.
    pub genclus_nmi_per_type: Vec<(String, f64)>,
    pub kmeans_nmi: f64,
    pub genclus_seconds: f64,
    pub kmeans_seconds: f64,
}

impl WeatherTrial {
    pub fn genclus_wins(&self) -> bool {
        self.genclus_nmi >= self.kmeans_nmi
    }

    /// Learned strength of the named relation.
    pub fn gamma(&self, relation: &str) -> Option<f64> {
        self.graph.relation_index(relation).map(|r| self.result.gamma.get(r))
    }
}

/// Generates one network, clusters it, and scores both methods against the
/// generating labels. The baseline shares the generator seed.
pub fn run_weather_trial(generator: &GeneratorConfig, config: &GenClusConfig) -> Result<WeatherTrial> {
    let (graph, table, truth) = generate(generator)?;
    let t0 = Instant::now();
    let result = run_genclus(&graph, &table, config)?;
    let genclus_seconds = t0.elapsed().as_secs_f64();
    let genclus_nmi = nmi(&result.theta.hard_labels(), &truth.labels)?;
    let genclus_nmi_per_type = label_agreement(&graph, &result.theta)?.per_type.into_iter().collect();
    let t0 = Instant::now();
    let km = kmeans_baseline(&graph, &table, generator.k(), generator.seed)?;
    let kmeans_seconds = t0.elapsed().as_secs_f64();
    let kmeans_nmi = nmi(&km.labels, &truth.labels)?;
    Ok(WeatherTrial {
        generator: generator.clone(),
        graph,
        truth,
        result,
        genclus_nmi,
        genclus_nmi_per_type,
        kmeans_nmi,
        genclus_seconds,
        kmeans_seconds,
    })
}
