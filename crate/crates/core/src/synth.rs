//! Synthetic weather sensor networks.
//!
//! Temperature (T) and precipitation (P) sensors sit uniformly in the unit
//! disk. Each sensor links to its k nearest sensors of each type. The disk is
//! cut into K equal-width rings, one weather pattern per ring; a sensor's true
//! membership favors the rings closest to its radius, and every observation
//! is drawn by first picking a pattern from that membership and then sampling
//! the sensor's own attribute from the pattern's Gaussian.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};

use crate::attributes::{AttributeKind, AttributeTable, AttributeTableBuilder};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, HinGraph, ObjectIx};
use crate::io::{content_lines, read_text, write_text};
use crate::model::Membership;
use crate::rng;

pub const TEMPERATURE: &str = "temperature";
pub const PRECIPITATION: &str = "precipitation";

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_temp: usize,
    pub n_precip: usize,
    /// Out-links per sensor and target type.
    pub knn: usize,
    /// Pattern (temperature, precipitation) means, one per ring from the center out.
    pub means: Vec<(f64, f64)>,
    pub temp_std: f64,
    pub precip_std: f64,
    /// Kept for completeness; each sensor observes a single attribute, so it has no effect.
    pub correlation: f64,
    pub n_obs: usize,
    /// Added to the ring distance before taking reciprocals.
    pub ring_epsilon: f64,
    pub temp_support: usize,
    pub precip_support: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    /// The two pattern layouts: 1 has means on the diagonal, 2 on the corners
    /// of a square, where neither attribute alone identifies the pattern.
    pub fn setting(id: u8, n_temp: usize, n_precip: usize, n_obs: usize, seed: u64) -> Result<Self> {
        let means = match id {
            1 => vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)],
            2 => vec![(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)],
            _ => return Err(Error::Config(format!("unknown weather setting {id}; expected 1 or 2"))),
        };
        Ok(GeneratorConfig {
            n_temp,
            n_precip,
            knn: 5,
            means,
            temp_std: 0.2,
            precip_std: 0.2,
            correlation: 0.0,
            n_obs,
            ring_epsilon: 0.05,
            temp_support: 2,
            precip_support: 3,
            seed,
        })
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let fail = |m: String| Err(Error::Config(m));
        if k == 0 {
            return fail("at least one pattern is required".into());
        }
        if self.n_temp < k || self.n_precip < k {
            return fail(format!(
                "need at least K = {k} sensors of each type, got {} T and {} P",
                self.n_temp, self.n_precip
            ));
        }
        if self.knn == 0 {
            return fail("knn must be at least 1".into());
        }
        if !(self.temp_std > 0.0 && self.precip_std > 0.0) {
            return fail("standard deviations must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return fail(format!("correlation {} outside [-1, 1]", self.correlation));
        }
        if self.n_obs == 0 {
            return fail("n_obs must be at least 1".into());
        }
        if !(self.ring_epsilon > 0.0) {
            return fail("ring_epsilon must be positive".into());
        }
        if self.temp_support == 0 || self.precip_support == 0 {
            return fail("membership support must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub membership: Membership,
    pub labels: Vec<usize>,
    pub positions: Vec<(f64, f64)>,
}

/// Ring membership of a sensor at radius `r`: proportional to
/// 1 / (|r − c_t| + ε) over the `support` nearest ring centers c_t = (t − ½)/K.
pub fn ring_membership(r: f64, k: usize, support: usize, epsilon: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=k)
        .map(|t| 1.0 / ((r - (t as f64 - 0.5) / k as f64).abs() + epsilon))
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let mut m = vec![0.0; k];
    for &t in order.iter().take(support.min(k)) {
        m[t] = weights[t];
    }
    let s: f64 = m.iter().sum();
    m.iter_mut().for_each(|x| *x /= s);
    m
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

pub fn generate(config: &GeneratorConfig) -> Result<(HinGraph, AttributeTable, GroundTruth)> {
    config.validate()?;
    let k = config.k();
    let mut rng = rng::stream(config.seed, "generator");
    let n = config.n_temp + config.n_precip;
    let is_temp = |v: usize| v < config.n_temp;

    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            (r * a.cos(), r * a.sin())
        })
        .collect();

    let mut gb = GraphBuilder::new();
    for (name, src, dst) in [("TT", "T", "T"), ("TP", "T", "P"), ("PT", "P", "T"), ("PP", "P", "P")] {
        gb.add_relation(name, src, dst)?;
    }
    let mut membership = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for (v, &(x, y)) in positions.iter().enumerate() {
        let support = if is_temp(v) { config.temp_support } else { config.precip_support };
        let m = ring_membership((x * x + y * y).sqrt(), k, support, config.ring_epsilon);
        let label = crate::model::argmax(&m);
        let (ty, id) = if is_temp(v) {
            ("T", format!("T{v:05}"))
        } else {
            ("P", format!("P{:05}", v - config.n_temp))
        };
        gb.add_object(&id, ty, Some(&label.to_string()))?;
        membership.extend(m);
        labels.push(label);
    }

    let temps: Vec<ObjectIx> = (0..config.n_temp).collect();
    let precs: Vec<ObjectIx> = (config.n_temp..n).collect();
    for v in 0..n {
        let src = if is_temp(v) { 'T' } else { 'P' };
        for (dst, pool) in [('T', &temps), ('P', &precs)] {
            let mut cands: Vec<(f64, ObjectIx)> = pool
                .iter()
                .filter(|&&u| u != v)
                .map(|&u| (dist2(positions[v], positions[u]), u))
                .collect();
            let take = config.knn.min(cands.len());
            if take < cands.len() {
                cands.select_nth_unstable_by(take, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            }
            let rel = gb.relation_index(&format!("{src}{dst}")).expect("declared above");
            for &(_, u) in &cands[..take] {
                gb.add_link_ix(v, u, rel, 1.0)?;
            }
        }
    }
    let graph = gb.build();

    let mut tb = AttributeTableBuilder::new(n);
    let t_attr = tb.declare(TEMPERATURE, AttributeKind::Numerical)?;
    let p_attr = tb.declare(PRECIPITATION, AttributeKind::Numerical)?;
    let t_noise = Normal::new(0.0, config.temp_std).map_err(|e| Error::Config(e.to_string()))?;
    let p_noise = Normal::new(0.0, config.precip_std).map_err(|e| Error::Config(e.to_string()))?;
    for v in 0..n {
        let m = &membership[v * k..(v + 1) * k];
        let pick = WeightedIndex::new(m).map_err(|e| Error::Config(e.to_string()))?;
        for _ in 0..config.n_obs {
            let z = pick.sample(&mut rng);
            if is_temp(v) {
                tb.add_value(v, t_attr, config.means[z].0 + t_noise.sample(&mut rng))?;
            } else {
                tb.add_value(v, p_attr, config.means[z].1 + p_noise.sample(&mut rng))?;
            }
        }
    }
    let truth = GroundTruth {
        membership: Membership::from_flat(k, membership)?,
        labels,
        positions,
    };
    Ok((graph, tb.build(), truth))
}

/// One observation per object and attribute: the mean of the object's own
/// observations and its out-neighbors' observations, or the attribute's
/// global mean when none of them observe it.
pub fn interpolate_missing(graph: &HinGraph, table: &AttributeTable) -> Result<AttributeTable> {
    let n = graph.num_objects();
    let mut tb = AttributeTableBuilder::new(n);
    for attr in table.attributes() {
        if attr.kind() != AttributeKind::Numerical {
            return Err(Error::AttributeKind {
                attribute: attr.name().to_string(),
                expected: "numerical",
                found: attr.kind().name(),
            });
        }
        let a = tb.declare(attr.name(), AttributeKind::Numerical)?;
        let all = attr.values();
        let global = if all.is_empty() { 0.0 } else { all.iter().sum::<f64>() / all.len() as f64 };
        for v in 0..n {
            let mut sum = 0.0;
            let mut count = 0usize;
            for u in std::iter::once(v).chain(graph.out_links(v).iter().map(|l| l.target)) {
                let obs = attr.observations(u);
                sum += obs.iter().sum::<f64>();
                count += obs.len();
            }
            tb.add_value(v, a, if count > 0 { sum / count as f64 } else { global })?;
        }
    }
    Ok(tb.build())
}

/// Writes `id<TAB>label<TAB>p_1 … p_K` rows.
pub fn write_truth(path: &Path, graph: &HinGraph, truth: &GroundTruth) -> Result<()> {
    let mut out = String::from("# id\tlabel\tmembership\n");
    for v in 0..graph.num_objects() {
        out.push_str(graph.id(v));
        out.push('\t');
        out.push_str(&truth.labels[v].to_string());
        for p in truth.membership.row(v) {
            out.push('\t');
            out.push_str(&p.to_string());
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Reads `(id, label)` pairs from a truth file; trailing membership columns are ignored.
pub fn read_truth_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            let mut cols = l.split('\t');
            match (cols.next(), cols.next()) {
                (Some(id), Some(label)) if !id.is_empty() => Ok((id.to_string(), label.to_string())),
                _ => Err(Error::parse(path, line, "expected id<TAB>label")),
            }
        })
        .collect()
}
