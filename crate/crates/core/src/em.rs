//! Cluster optimization with link strengths held fixed: EM over the
//! memberships Θ and the attribute components β maximizing
//!
//! g₁(Θ, β) = Σ_{e=⟨v_i,v_j⟩} γ(φ(e)) w(e) Σ_k θ_{j,k} log θ_{i,k} + Σ_X log p(v[X] | Θ, β).
//!
//! The membership update is the weighted-average rule: θ_v is proportional to
//! the strength-weighted memberships of v's out-neighbors plus the
//! responsibility mass of v's own observations. That rule ignores the terms in
//! which θ_v appears linearly (v as the target of someone else's link), so a
//! step can lower g₁. When it does, the iteration is redone with an exact
//! coordinate-ascent sweep over objects that is guaranteed not to decrease g₁.

use log::{debug, trace};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::attributes::{AttributeKind, AttributeTable};
use crate::error::{Error, Result};
use crate::graph::{HinGraph, ObjectIx, RelationIx};
use crate::mixture::{check_params, e_step_responsibilities, object_log_likelihood, Responsibilities};
use crate::model::{
    floor_distribution, CategoricalParams, ComponentParams, GaussianParams, Membership, StrengthVector, BETA_FLOOR,
    THETA_FLOOR, VARIANCE_FLOOR,
};
use crate::rng::{self, StreamRng};

/// Components whose total responsibility falls below this are reinitialized.
pub const DEGENERATE_MASS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub max_inner_iters: usize,
    /// Stop once the relative improvement of g₁ drops below this.
    pub rel_tol: f64,
    pub n_restarts: usize,
    pub restart_probe_steps: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_inner_iters: 50,
            rel_tol: 1e-6,
            n_restarts: 5,
            restart_probe_steps: 3,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_inner_iters == 0 {
            return Err(Error::Config("max_inner_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.n_restarts == 0 {
            return Err(Error::Config("n_restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Memberships and per-attribute components.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterState {
    pub theta: Membership,
    pub params: Vec<ComponentParams>,
}

impl ClusterState {
    pub fn permute_clusters(&self, perm: &[usize]) -> Self {
        ClusterState {
            theta: self.theta.permute_clusters(perm),
            params: self.params.iter().map(|p| p.permute_clusters(perm)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClusterFit {
    pub state: ClusterState,
    /// g₁ of the starting point followed by g₁ after every accepted iteration.
    pub g1_trace: Vec<f64>,
    /// Iterations that needed the exact coordinate-ascent sweep.
    pub exact_sweeps: usize,
}

/// Σ_e γ(φ(e)) w(e) Σ_k θ_{j,k} log θ_{i,k}
pub fn link_objective(graph: &HinGraph, theta: &Membership, gamma: &StrengthVector) -> f64 {
    let per_object: Vec<f64> = (0..graph.num_objects())
        .into_par_iter()
        .map(|v| {
            let tv = theta.row(v);
            graph
                .out_links(v)
                .iter()
                .map(|l| {
                    let g = gamma.get(l.relation);
                    if g == 0.0 {
                        return 0.0;
                    }
                    let tu = theta.row(l.target);
                    g * l.weight * tu.iter().zip(tv).map(|(a, b)| a * b.ln()).sum::<f64>()
                })
                .sum()
        })
        .collect();
    per_object.iter().sum()
}

fn attribute_objective(table: &AttributeTable, theta: &Membership, params: &[ComponentParams]) -> f64 {
    let per_object: Vec<f64> = (0..table.num_objects())
        .into_par_iter()
        .map(|v| {
            table
                .attributes()
                .iter()
                .zip(params)
                .map(|(a, p)| if a.holds(v) { object_log_likelihood(a, v, theta.row(v), p) } else { 0.0 })
                .sum()
        })
        .collect();
    per_object.iter().sum()
}

fn check_inputs(graph: &HinGraph, table: &AttributeTable, theta: &Membership, gamma: &StrengthVector) -> Result<()> {
    if table.num_objects() != graph.num_objects() {
        return Err(Error::LengthMismatch {
            expected: graph.num_objects(),
            found: table.num_objects(),
        });
    }
    if theta.num_objects() != graph.num_objects() {
        return Err(Error::LengthMismatch {
            expected: graph.num_objects(),
            found: theta.num_objects(),
        });
    }
    if gamma.len() != graph.num_relations() {
        return Err(Error::LengthMismatch {
            expected: graph.num_relations(),
            found: gamma.len(),
        });
    }
    Ok(())
}

/// g₁(Θ, β) for fixed strengths γ.
pub fn g1_objective(
    graph: &HinGraph,
    table: &AttributeTable,
    theta: &Membership,
    params: &[ComponentParams],
    gamma: &StrengthVector,
) -> Result<f64> {
    check_inputs(graph, table, theta, gamma)?;
    check_params(table, theta, params)?;
    Ok(g1_unchecked(graph, table, theta, params, gamma))
}

fn g1_unchecked(
    graph: &HinGraph,
    table: &AttributeTable,
    theta: &Membership,
    params: &[ComponentParams],
    gamma: &StrengthVector,
) -> f64 {
    link_objective(graph, theta, gamma) + attribute_objective(table, theta, params)
}

/// Per-object responsibility mass Σ_X Σ_{entries of v} c · p(z = k), flattened |V|×K.
fn responsibility_mass(table: &AttributeTable, resp: &Responsibilities) -> Vec<f64> {
    let k = resp.k();
    let mut mass = vec![0.0; table.num_objects() * k];
    mass.par_chunks_mut(k).enumerate().for_each(|(v, m)| {
        for (a, attr) in table.attributes().iter().enumerate() {
            for e in attr.entries(v) {
                let w = attr.weight(e);
                for (mk, r) in m.iter_mut().zip(resp.entry(a, e)) {
                    *mk += w * r;
                }
            }
        }
    });
    mass
}

fn theta_update_from_mass(graph: &HinGraph, mass: &[f64], prev: &Membership, gamma: &StrengthVector) -> Membership {
    let k = prev.k();
    let mut data = vec![0.0; prev.as_slice().len()];
    data.par_chunks_mut(k).enumerate().for_each(|(v, row)| {
        row.copy_from_slice(&mass[v * k..(v + 1) * k]);
        for l in graph.out_links(v) {
            let g = gamma.get(l.relation) * l.weight;
            if g == 0.0 {
                continue;
            }
            for (x, t) in row.iter_mut().zip(prev.row(l.target)) {
                *x += g * t;
            }
        }
        if row.iter().sum::<f64>() > 0.0 {
            floor_distribution(row, THETA_FLOOR);
        } else {
            row.copy_from_slice(prev.row(v));
        }
    });
    Membership::from_raw(k, data)
}

/// Membership update θ_{v,k} ∝ Σ_{e=⟨v,u⟩} γ(φ(e)) w(e) θ^{t−1}_{u,k} + Σ_X Σ_{entries of v} c · p(z = k),
/// normalized and floored. Objects with neither out-links nor observations keep
/// their previous row.
pub fn m_step_theta(
    graph: &HinGraph,
    table: &AttributeTable,
    resp: &Responsibilities,
    theta_prev: &Membership,
    gamma: &StrengthVector,
) -> Result<Membership> {
    check_inputs(graph, table, theta_prev, gamma)?;
    if resp.num_attributes() != table.len() || resp.k() != theta_prev.k() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            found: resp.num_attributes(),
        });
    }
    let mass = responsibility_mass(table, resp);
    Ok(theta_update_from_mass(graph, &mass, theta_prev, gamma))
}

fn corpus_unigram(attr: &crate::attributes::Attribute, vocab: usize) -> Vec<f64> {
    let mut u = vec![0.0; vocab];
    for e in 0..attr.num_entries() {
        u[attr.term(e)] += attr.weight(e);
    }
    u
}

fn perturbed_unigram(unigram: &[f64], rng: &mut StreamRng) -> Vec<f64> {
    let mut row: Vec<f64> = unigram.iter().map(|&p| p * rng.random_range(0.9..1.1)).collect();
    floor_distribution(&mut row, BETA_FLOOR);
    row
}

fn global_mean_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 1.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.max(VARIANCE_FLOOR))
}

/// Component update from the current responsibilities.
///
/// Categorical: β_{k,l} ∝ Σ_v c_{v,l} p(z_{v,l} = k), floored. Gaussian: the
/// responsibility-weighted mean and the weighted (biased) variance around the
/// new mean, floored by the variance floor. A component whose total
/// responsibility is below [`DEGENERATE_MASS`] is reinitialized from `rescue`
/// (perturbed corpus unigram, or a random observation with the global
/// variance); without a generator it keeps its previous parameters.
pub fn m_step_beta(
    table: &AttributeTable,
    resp: &Responsibilities,
    prev: &[ComponentParams],
    mut rescue: Option<&mut StreamRng>,
) -> Result<Vec<ComponentParams>> {
    if prev.len() != table.len() || resp.num_attributes() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            found: prev.len(),
        });
    }
    let k = resp.k();
    let mut out = Vec::with_capacity(table.len());
    for (a, (attr, p)) in table.attributes().iter().zip(prev).enumerate() {
        let r = resp.attribute(a);
        match (attr.kind(), p) {
            (AttributeKind::Categorical { vocab }, ComponentParams::Categorical(prev_c)) => {
                let mut beta = vec![0.0; k * vocab];
                for e in 0..attr.num_entries() {
                    let (t, w) = (attr.term(e), attr.weight(e));
                    for j in 0..k {
                        beta[j * vocab + t] += w * r[e * k + j];
                    }
                }
                let unigram = corpus_unigram(attr, vocab);
                for (j, row) in beta.chunks_mut(vocab).enumerate() {
                    let total: f64 = row.iter().sum();
                    if total < DEGENERATE_MASS {
                        match rescue.as_deref_mut() {
                            Some(rng) => {
                                debug!("attribute {}: reinitializing empty cluster {j}", attr.name());
                                row.copy_from_slice(&perturbed_unigram(&unigram, rng));
                            }
                            None => row.copy_from_slice(prev_c.row(j)),
                        }
                    } else {
                        floor_distribution(row, BETA_FLOOR);
                    }
                }
                out.push(ComponentParams::Categorical(CategoricalParams { vocab, beta }));
            }
            (AttributeKind::Numerical, ComponentParams::Gaussian(prev_g)) => {
                let xs = attr.values();
                let mut mass = vec![0.0; k];
                let mut sum = vec![0.0; k];
                for (e, &x) in xs.iter().enumerate() {
                    for j in 0..k {
                        mass[j] += r[e * k + j];
                        sum[j] += r[e * k + j] * x;
                    }
                }
                let mean: Vec<f64> = (0..k).map(|j| sum[j] / mass[j]).collect();
                let mut sq = vec![0.0; k];
                for (e, &x) in xs.iter().enumerate() {
                    for j in 0..k {
                        let d = x - mean[j];
                        sq[j] += r[e * k + j] * d * d;
                    }
                }
                let (_, global_var) = global_mean_variance(xs);
                let mut g = GaussianParams {
                    mean: vec![0.0; k],
                    variance: vec![0.0; k],
                };
                for j in 0..k {
                    if mass[j] < DEGENERATE_MASS {
                        match rescue.as_deref_mut() {
                            Some(rng) if !xs.is_empty() => {
                                debug!("attribute {}: reinitializing empty cluster {j}", attr.name());
                                g.mean[j] = xs[rng.random_range(0..xs.len())];
                                g.variance[j] = global_var;
                            }
                            _ => {
                                g.mean[j] = prev_g.mean[j];
                                g.variance[j] = prev_g.variance[j];
                            }
                        }
                    } else {
                        g.mean[j] = mean[j];
                        g.variance[j] = (sq[j] / mass[j]).max(VARIANCE_FLOOR);
                    }
                }
                out.push(ComponentParams::Gaussian(g));
            }
            (_, p) => {
                return Err(Error::AttributeKind {
                    attribute: attr.name().to_string(),
                    expected: attr.kind().name(),
                    found: p.kind_name(),
                })
            }
        }
    }
    Ok(out)
}

/// Incoming links per object as (source, relation, weight).
fn in_links(graph: &HinGraph) -> Vec<Vec<(ObjectIx, RelationIx, f64)>> {
    let mut incoming = vec![Vec::new(); graph.num_objects()];
    for (src, l) in graph.links() {
        incoming[l.target].push((src, l.relation, l.weight));
    }
    incoming
}

/// Maximizes Σ_k c_k log θ_k + Σ_k l_k θ_k over the floored simplex.
///
/// The KKT conditions give θ_k = max(ε, c_k / (λ − l_k)); λ is found by
/// bisection on Σ_k θ_k(λ) = 1, which is decreasing in λ.
fn maximize_row(c: &[f64], l: &[f64], out: &mut [f64]) {
    let lmax = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if l.iter().all(|&x| x == lmax) {
        out.copy_from_slice(c);
        floor_distribution(out, THETA_FLOOR);
        return;
    }
    let total: f64 = c.iter().sum();
    let mass_at = |lam: f64| -> f64 {
        c.iter()
            .zip(l)
            .map(|(&ck, &lk)| (ck / (lam - lk)).max(THETA_FLOOR))
            .sum()
    };
    let mut lo = lmax;
    let mut hi = lmax + total;
    while mass_at(hi) > 1.0 {
        hi = lmax + 2.0 * (hi - lmax);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for ((o, &ck), &lk) in out.iter_mut().zip(c).zip(l) {
        *o = (ck / (hi - lk)).max(THETA_FLOOR);
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
}

/// One Gauss–Seidel pass maximizing g₁ over each θ_v in turn, with the
/// attribute term replaced by its EM lower bound at the current responsibilities.
///
/// For object v the objective is Σ_k (A_k + R_k) log θ_{v,k} + Σ_k L_k θ_{v,k}
/// with A the strength-weighted out-neighbor memberships, R the responsibility
/// mass and L_k = Σ_{e=⟨u,v⟩} γ w log θ_{u,k}. Self-loops are linearized at the
/// current row. Each step is tight at the current row, so g₁ cannot decrease.
fn exact_theta_sweep(
    graph: &HinGraph,
    incoming: &[Vec<(ObjectIx, RelationIx, f64)>],
    mass: &[f64],
    prev: &Membership,
    gamma: &StrengthVector,
) -> Membership {
    let k = prev.k();
    let mut theta = prev.clone();
    let mut c = vec![0.0; k];
    let mut l = vec![0.0; k];
    let mut row = vec![0.0; k];
    for v in 0..graph.num_objects() {
        c.copy_from_slice(&mass[v * k..(v + 1) * k]);
        l.fill(0.0);
        for link in graph.out_links(v) {
            let g = gamma.get(link.relation) * link.weight;
            if g == 0.0 {
                continue;
            }
            if link.target == v {
                for (lk, t) in l.iter_mut().zip(theta.row(v)) {
                    *lk += g * t.ln();
                }
            } else {
                for (ck, t) in c.iter_mut().zip(theta.row(link.target)) {
                    *ck += g * t;
                }
            }
        }
        for &(u, r, w) in &incoming[v] {
            let g = gamma.get(r) * w;
            if g == 0.0 || u == v {
                continue;
            }
            for (lk, t) in l.iter_mut().zip(theta.row(u)) {
                *lk += g * t.ln();
            }
        }
        if c.iter().sum::<f64>() > 0.0 {
            maximize_row(&c, &l, &mut row);
            theta.row_mut(v).copy_from_slice(&row);
        }
    }
    theta
}

struct Run<'a> {
    graph: &'a HinGraph,
    table: &'a AttributeTable,
    gamma: &'a StrengthVector,
    incoming: Option<Vec<Vec<(ObjectIx, RelationIx, f64)>>>,
}

enum Step {
    Accepted { g1: f64, exact: bool },
    Stalled,
}

impl Run<'_> {
    fn g1(&self, state: &ClusterState) -> f64 {
        g1_unchecked(self.graph, self.table, &state.theta, &state.params, self.gamma)
    }

    fn step(&mut self, state: &mut ClusterState, g_old: f64, rng: &mut StreamRng) -> Result<Step> {
        let resp = e_step_responsibilities(self.table, &state.theta, &state.params)?;
        let mass = responsibility_mass(self.table, &resp);
        let theta = theta_update_from_mass(self.graph, &mass, &state.theta, self.gamma);
        let params = m_step_beta(self.table, &resp, &state.params, Some(rng))?;
        let candidate = ClusterState { theta, params };
        let g = self.g1(&candidate);
        if g >= g_old {
            *state = candidate;
            return Ok(Step::Accepted { g1: g, exact: false });
        }
        trace!("weighted-average update lowered g1 by {:e}; running exact sweep", g_old - g);
        let graph = self.graph;
        let incoming = self.incoming.get_or_insert_with(|| in_links(graph));
        let theta = exact_theta_sweep(self.graph, incoming, &mass, &state.theta, self.gamma);
        let resp = e_step_responsibilities(self.table, &theta, &state.params)?;
        let params = m_step_beta(self.table, &resp, &state.params, None)?;
        let candidate = ClusterState { theta, params };
        let g = self.g1(&candidate);
        if g >= g_old {
            *state = candidate;
            Ok(Step::Accepted { g1: g, exact: true })
        } else {
            Ok(Step::Stalled)
        }
    }

    /// Runs up to `iters` iterations, extending `fit.g1_trace`. Returns true on convergence.
    fn iterate(&mut self, fit: &mut ClusterFit, iters: usize, rel_tol: f64, rng: &mut StreamRng) -> Result<bool> {
        for _ in 0..iters {
            let g_old = *fit.g1_trace.last().expect("trace starts with the initial objective");
            match self.step(&mut fit.state, g_old, rng)? {
                Step::Stalled => return Ok(true),
                Step::Accepted { g1, exact } => {
                    fit.exact_sweeps += exact as usize;
                    fit.g1_trace.push(g1);
                    if g1 - g_old <= rel_tol * g_old.abs() {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }
}

/// Random starting point: Dirichlet(1) membership rows; categorical components
/// from the corpus unigram with ±10% multiplicative noise; Gaussian means at K
/// random observations with the global variance.
pub fn initialize(table: &AttributeTable, n: usize, k: usize, rng: &mut StreamRng) -> ClusterState {
    let mut data = Vec::with_capacity(n * k);
    for _ in 0..n {
        let row: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        data.extend(row);
    }
    data.chunks_mut(k).for_each(|r| floor_distribution(r, THETA_FLOOR));
    let params = table
        .attributes()
        .iter()
        .map(|attr| match attr.kind() {
            AttributeKind::Categorical { vocab } => {
                let unigram = corpus_unigram(attr, vocab);
                let beta = (0..k).flat_map(|_| perturbed_unigram(&unigram, rng)).collect();
                ComponentParams::Categorical(CategoricalParams { vocab, beta })
            }
            AttributeKind::Numerical => {
                let xs = attr.values();
                let (global_mean, global_var) = global_mean_variance(xs);
                let mean = (0..k)
                    .map(|_| if xs.is_empty() { global_mean } else { xs[rng.random_range(0..xs.len())] })
                    .collect();
                ComponentParams::Gaussian(GaussianParams {
                    mean,
                    variance: vec![global_var; k],
                })
            }
        })
        .collect();
    ClusterState {
        theta: Membership::from_raw(k, data),
        params,
    }
}

/// Maximizes g₁ over (Θ, β) for fixed γ.
///
/// Without a warm start, `n_restarts` random starts each run
/// `restart_probe_steps` iterations and the one with the highest g₁ continues
/// until the relative improvement falls below `rel_tol` or `max_inner_iters`
/// iterations in total. A warm start skips the restarts.
pub fn optimize_clusters(
    graph: &HinGraph,
    table: &AttributeTable,
    gamma: &StrengthVector,
    k: usize,
    config: &EmConfig,
    warm: Option<&ClusterState>,
) -> Result<ClusterFit> {
    config.validate()?;
    if k == 0 {
        return Err(Error::Config("number of clusters must be positive".into()));
    }
    let n = graph.num_objects();
    check_inputs(graph, table, &Membership::uniform(n, k), gamma)?;
    let mut run = Run {
        graph,
        table,
        gamma,
        incoming: None,
    };
    if let Some(state) = warm {
        check_params(table, &state.theta, &state.params)?;
        if state.theta.k() != k || state.theta.num_objects() != n {
            return Err(Error::LengthMismatch {
                expected: n * k,
                found: state.theta.as_slice().len(),
            });
        }
        let mut rng = rng::stream(config.seed, "em.warm");
        let mut fit = ClusterFit {
            g1_trace: vec![run.g1(state)],
            state: state.clone(),
            exact_sweeps: 0,
        };
        run.iterate(&mut fit, config.max_inner_iters, config.rel_tol, &mut rng)?;
        return Ok(fit);
    }

    let probe = config.restart_probe_steps.min(config.max_inner_iters);
    let mut best: Option<(ClusterFit, StreamRng, bool)> = None;
    for r in 0..config.n_restarts {
        let mut rng = rng::stream(config.seed, &format!("em.restart.{r}"));
        let state = initialize(table, n, k, &mut rng);
        let mut fit = ClusterFit {
            g1_trace: vec![run.g1(&state)],
            state,
            exact_sweeps: 0,
        };
        let done = run.iterate(&mut fit, probe, config.rel_tol, &mut rng)?;
        let g = *fit.g1_trace.last().unwrap();
        debug!("restart {r}: g1 = {g} after {} probe steps", fit.g1_trace.len() - 1);
        if best.as_ref().is_none_or(|(b, _, _)| g > *b.g1_trace.last().unwrap()) {
            best = Some((fit, rng, done));
        }
    }
    let (mut fit, mut rng, done) = best.expect("at least one restart");
    if !done {
        let remaining = config.max_inner_iters - (fit.g1_trace.len() - 1);
        run.iterate(&mut fit, remaining, config.rel_tol, &mut rng)?;
    }
    Ok(fit)
}
