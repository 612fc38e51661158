//! Evaluation: NMI against ground-truth partitions, membership similarities,
//! and MAP of similarity-ranked link prediction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{HinGraph, ObjectIx, RelationIx};
use crate::model::Membership;
use crate::rng;

fn entropy_of_counts(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    let mut c: Vec<usize> = counts.collect();
    c.sort_unstable();
    -c.iter()
        .map(|&x| {
            let p = x as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Normalized mutual information I(A;B) / √(H(A) H(B)) of two hard partitions.
///
/// Two single-cluster partitions score 1; if exactly one of them has zero
/// entropy the score is 0.
pub fn nmi<A, B>(labels_a: &[A], labels_b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch {
            expected: labels_a.len(),
            found: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(Error::Config("nmi of empty partitions".into()));
    }
    let n = labels_a.len() as f64;
    let mut ca: HashMap<&A, usize> = HashMap::new();
    let mut cb: HashMap<&B, usize> = HashMap::new();
    let mut cab: HashMap<(&A, &B), usize> = HashMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *ca.entry(a).or_default() += 1;
        *cb.entry(b).or_default() += 1;
        *cab.entry((a, b)).or_default() += 1;
    }
    let ha = entropy_of_counts(ca.into_values(), n);
    let hb = entropy_of_counts(cb.into_values(), n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let hab = entropy_of_counts(cab.into_values(), n);
    let mi = ha + hb - hab;
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimilarityKind {
    Cosine,
    NegEuclidean,
    NegCrossEntropy,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 3] = [SimilarityKind::Cosine, SimilarityKind::NegEuclidean, SimilarityKind::NegCrossEntropy];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::Cosine => "cosine",
            SimilarityKind::NegEuclidean => "neg_euclidean",
            SimilarityKind::NegCrossEntropy => "neg_cross_entropy",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown similarity {s:?}; expected cosine, neg_euclidean or neg_cross_entropy")))
    }
}

/// Similarity of candidate θ_j to query θ_i.
///
/// `NegCrossEntropy` is −H(θ_j, θ_i) = Σ_k θ_{j,k} log θ_{i,k}, which is not symmetric.
pub fn similarity(theta_i: &[f64], theta_j: &[f64], kind: SimilarityKind) -> f64 {
    match kind {
        SimilarityKind::Cosine => {
            let dot: f64 = theta_i.iter().zip(theta_j).map(|(a, b)| a * b).sum();
            let ni = theta_i.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj = theta_j.iter().map(|a| a * a).sum::<f64>().sqrt();
            dot / (ni * nj)
        }
        SimilarityKind::NegEuclidean => -theta_i.iter().zip(theta_j).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        SimilarityKind::NegCrossEntropy => theta_j
            .iter()
            .zip(theta_i)
            .filter(|(&tj, _)| tj > 0.0)
            .map(|(tj, ti)| tj * ti.ln())
            .sum(),
    }
}

/// Link prediction for one relation ⟨A,B⟩: every A-typed object queries all
/// B-typed objects other than itself; its relevant set is its set of link
/// targets under the relation.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingTask {
    pub relation: RelationIx,
    pub candidates: Vec<ObjectIx>,
    /// (query, sorted relevant candidates) for every A-typed object.
    pub queries: Vec<(ObjectIx, Vec<ObjectIx>)>,
}

impl RankingTask {
    /// Queries and candidates come from `graph`, relevance from the links of
    /// `relation` in `truth` (which may be `graph` itself or held-out links).
    pub fn new(graph: &HinGraph, truth: &HinGraph, relation: RelationIx) -> Result<Self> {
        if relation >= graph.num_relations() || relation >= truth.num_relations() {
            return Err(Error::UnknownRelation(relation.to_string()));
        }
        let rel = graph.relation(relation);
        let candidates = graph.objects_of_type(rel.target_type);
        let queries = graph
            .objects_of_type(rel.source_type)
            .into_iter()
            .map(|q| {
                let mut relevant: Vec<ObjectIx> = truth
                    .out_links(q)
                    .iter()
                    .filter(|l| l.relation == relation && l.weight > 0.0 && l.target != q)
                    .map(|l| l.target)
                    .collect();
                relevant.sort_unstable();
                relevant.dedup();
                (q, relevant)
            })
            .collect();
        Ok(RankingTask {
            relation,
            candidates,
            queries,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapScore {
    pub map: f64,
    pub n_queries: usize,
    /// Queries without any relevant candidate, left out of the mean.
    pub n_skipped: usize,
}

/// Average precision of a relevance sequence in ranked order.
pub fn average_precision(ranked_relevance: impl IntoIterator<Item = bool>) -> f64 {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, rel) in ranked_relevance.into_iter().enumerate() {
        if rel {
            hits += 1;
            total += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        total / hits as f64
    }
}

/// Ranks candidates by descending score; equal scores keep candidate order.
pub fn rank_by_score(candidates: &[ObjectIx], scores: &[f64]) -> Vec<ObjectIx> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.into_iter().map(|i| candidates[i]).collect()
}

/// Mean average precision of similarity ranking over all queries with at
/// least one relevant candidate.
pub fn map_score(task: &RankingTask, theta: &Membership, kind: SimilarityKind) -> Result<MapScore> {
    map_score_with(task, |q, c| similarity(theta.row(q), theta.row(c), kind))
}

/// [`map_score`] with an arbitrary query–candidate score.
pub fn map_score_with(task: &RankingTask, score: impl Fn(ObjectIx, ObjectIx) -> f64 + Sync) -> Result<MapScore> {
    let aps: Vec<Option<f64>> = task
        .queries
        .par_iter()
        .map(|(q, relevant)| {
            if relevant.is_empty() {
                return None;
            }
            let cands: Vec<ObjectIx> = task.candidates.iter().copied().filter(|c| c != q).collect();
            let scores: Vec<f64> = cands.iter().map(|&c| score(*q, c)).collect();
            let ranked = rank_by_score(&cands, &scores);
            Some(average_precision(ranked.iter().map(|c| relevant.binary_search(c).is_ok())))
        })
        .collect();
    let kept: Vec<f64> = aps.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    Ok(MapScore {
        map: kept.iter().sum::<f64>() / kept.len() as f64,
        n_queries: kept.len(),
        n_skipped: aps.len() - kept.len(),
    })
}

/// Splits the links of `relation` (or of every relation) into a training
/// graph and a held-out graph, each link going to the held-out side with
/// probability `fraction`.
pub fn holdout_split(graph: &HinGraph, relation: Option<RelationIx>, fraction: f64, seed: u64) -> Result<(HinGraph, HinGraph)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("holdout fraction must lie in [0, 1], got {fraction}")));
    }
    let mut rng = rng::stream(seed, "holdout");
    let held: Vec<bool> = graph
        .links()
        .map(|(_, l)| relation.is_none_or(|r| r == l.relation) && rng.random::<f64>() < fraction)
        .collect();
    let mut i = 0;
    let train = graph.filter_links(|_, _| {
        i += 1;
        !held[i - 1]
    });
    let mut i = 0;
    let test = graph.filter_links(|_, _| {
        i += 1;
        held[i - 1]
    });
    Ok((train, test))
}

/// NMI of argmax labels against graph labels, over all labeled objects and per object type.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelAgreement {
    pub overall: Option<f64>,
    pub per_type: BTreeMap<String, f64>,
}

pub fn label_agreement(graph: &HinGraph, theta: &Membership) -> Result<LabelAgreement> {
    let labeled: Vec<ObjectIx> = (0..graph.num_objects()).filter(|&v| graph.label(v).is_some()).collect();
    let score = |objs: &[ObjectIx]| -> Result<f64> {
        let pred: Vec<usize> = objs.iter().map(|&v| theta.argmax(v)).collect();
        let truth: Vec<&str> = objs.iter().map(|&v| graph.label(v).unwrap()).collect();
        nmi(&pred, &truth)
    };
    let overall = if labeled.is_empty() { None } else { Some(score(&labeled)?) };
    let mut per_type = BTreeMap::new();
    for (t, name) in graph.type_names().iter().enumerate() {
        let objs: Vec<ObjectIx> = labeled.iter().copied().filter(|&v| graph.object_type(v) == t).collect();
        if !objs.is_empty() {
            per_type.insert(name.clone(), score(&objs)?);
        }
    }
    Ok(LabelAgreement { overall, per_type })
}
