//! Independent reference computations and random fixtures for the integration tests.
#![allow(dead_code)]

use genclus::rng::{stream, StreamRng};
use genclus::{AttributeKind, AttributeTable, AttributeTableBuilder, GraphBuilder, HinGraph, Membership, StrengthVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Tanh-sinh (double exponential) quadrature of `f` over (a, b). Endpoints
/// are never evaluated.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let mut prev = f64::NAN;
    let mut h = 1.0;
    for level in 0..12 {
        let mut sum = 0.0;
        let n = (6.0 / h) as i64;
        for i in -n..=n {
            let t = i as f64 * h;
            let u = pi2 * t.sinh();
            let x = u.tanh();
            let w = pi2 * t.cosh() / (u.cosh() * u.cosh());
            // distance to the nearer endpoint, computed without cancellation
            let gap = half / (u.abs().exp() * u.cosh());
            let xs = if x < 0.0 { a + gap } else { b - gap };
            if w == 0.0 || xs <= a || xs >= b {
                continue;
            }
            sum += w * f(xs);
        }
        let est = sum * h * half;
        if level > 3 && (est - prev).abs() <= 1e-14 * est.abs() {
            return est;
        }
        prev = est;
        h *= 0.5;
    }
    prev
}

/// Maximizer of a unimodal `f` on [lo, hi] by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Plain PLSA: `counts[v][l]`, rows of `theta` (objects × K), rows of `beta`
/// (K × terms). One iteration is a full E-step followed by both M-steps.
pub fn plsa_step(counts: &[Vec<f64>], theta: &[Vec<f64>], beta: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = beta.len();
    let m = beta[0].len();
    let mut new_theta = vec![vec![0.0; k]; counts.len()];
    let mut new_beta = vec![vec![0.0; m]; k];
    for (v, row) in counts.iter().enumerate() {
        for (l, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let joint: Vec<f64> = (0..k).map(|z| theta[v][z] * beta[z][l]).collect();
            let total: f64 = joint.iter().sum();
            for z in 0..k {
                let p = c * joint[z] / total;
                new_theta[v][z] += p;
                new_beta[z][l] += p;
            }
        }
    }
    for row in new_theta.iter_mut().chain(new_beta.iter_mut()) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    (new_theta, new_beta)
}

pub fn plsa_log_likelihood(counts: &[Vec<f64>], theta: &[Vec<f64>], beta: &[Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    for (v, row) in counts.iter().enumerate() {
        for (l, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let p: f64 = (0..beta.len()).map(|z| theta[v][z] * beta[z][l]).sum();
                ll += c * p.ln();
            }
        }
    }
    ll
}

/// g₂′ straight from its definition, one Dirichlet per object with out-links,
/// using the `statrs` log-gamma.
pub fn g2_prime_reference(graph: &HinGraph, theta: &Membership, gamma: &[f64], sigma: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let k = theta.k();
    let mut total = 0.0;
    for v in 0..graph.num_objects() {
        let mut alpha = vec![1.0; k];
        let mut feature = 0.0;
        for l in graph.out_links(v) {
            let g = gamma[l.relation];
            for z in 0..k {
                alpha[z] += g * l.weight * theta.row(l.target)[z];
                feature += g * l.weight * theta.row(l.target)[z] * theta.row(v)[z].ln();
            }
        }
        let ln_b: f64 = alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(alpha.iter().sum());
        total += feature - ln_b;
    }
    total - gamma.iter().map(|g| g * g).sum::<f64>() / (2.0 * sigma * sigma)
}

/// Σ_e γ w Σ_k θ_{u,k} log θ_{v,k} plus the attribute log-likelihood, summed
/// one observation at a time with no log-domain tricks.
pub fn g1_reference(
    graph: &HinGraph,
    table: &AttributeTable,
    theta: &Membership,
    params: &[genclus::ComponentParams],
    gamma: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (v, l) in graph.links() {
        for z in 0..theta.k() {
            total += gamma[l.relation] * l.weight * theta.row(l.target)[z] * theta.row(v)[z].ln();
        }
    }
    for (attr, p) in table.attributes().iter().zip(params) {
        for v in 0..table.num_objects() {
            for e in attr.entries(v) {
                let lik: f64 = (0..theta.k())
                    .map(|z| {
                        theta.row(v)[z]
                            * match p {
                                genclus::ComponentParams::Categorical(c) => c.prob(z, attr.term(e)),
                                genclus::ComponentParams::Gaussian(g) => {
                                    let d = attr.value(e) - g.mean[z];
                                    (-d * d / (2.0 * g.variance[z])).exp()
                                        / (2.0 * std::f64::consts::PI * g.variance[z]).sqrt()
                                }
                            }
                    })
                    .sum();
                total += attr.weight(e) * lik.ln();
            }
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttrSetup {
    Categorical,
    OneGaussian,
    TwoGaussians,
}

/// Random two-type network with three relations, random positive weights,
/// and attributes observed on a random subset of objects.
pub fn random_network(seed: u64, n: usize, setup: AttrSetup) -> (HinGraph, AttributeTable) {
    let mut rng = stream(seed, "fixture");
    let mut gb = GraphBuilder::new();
    let types: Vec<&str> = (0..n).map(|_| if rng.random_bool(0.6) { "A" } else { "B" }).collect();
    for (v, t) in types.iter().enumerate() {
        gb.add_object(&format!("o{v}"), t, None).unwrap();
    }
    gb.add_relation("AA", "A", "A").unwrap();
    gb.add_relation("AB", "A", "B").unwrap();
    gb.add_relation("BA", "B", "A").unwrap();
    for v in 0..n {
        for _ in 0..rng.random_range(0..5) {
            let u = rng.random_range(0..n);
            let rel = match (types[v], types[u]) {
                ("A", "A") => "AA",
                ("A", "B") => "AB",
                ("B", "A") => "BA",
                _ => continue,
            };
            let w = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.2..3.0) };
            gb.add_link(&format!("o{v}"), &format!("o{u}"), rel, w).unwrap();
        }
    }
    let graph = gb.build();
    let table = random_attributes(&mut rng, n, setup);
    (graph, table)
}

fn random_attributes(rng: &mut StreamRng, n: usize, setup: AttrSetup) -> AttributeTable {
    let mut tb = AttributeTableBuilder::new(n);
    match setup {
        AttrSetup::Categorical => {
            let a = tb.declare("text", AttributeKind::Categorical { vocab: 12 }).unwrap();
            for v in 0..n {
                if rng.random_bool(0.8) {
                    let topic = v % 3;
                    for _ in 0..rng.random_range(1..8) {
                        let term = if rng.random_bool(0.7) { topic * 4 + rng.random_range(0..4) } else { rng.random_range(0..12) };
                        tb.add_count(v, a, term, rng.random_range(1..4)).unwrap();
                    }
                }
            }
        }
        AttrSetup::OneGaussian | AttrSetup::TwoGaussians => {
            let names: &[&str] = if setup == AttrSetup::OneGaussian { &["x"] } else { &["x", "y"] };
            for (i, name) in names.iter().enumerate() {
                let a = tb.declare(name, AttributeKind::Numerical).unwrap();
                for v in 0..n {
                    if rng.random_bool(0.7) {
                        let mean = ((v + i) % 3) as f64 * 2.0;
                        let d = Normal::new(mean, 0.5).unwrap();
                        for _ in 0..rng.random_range(1..4) {
                            tb.add_value(v, a, d.sample(rng)).unwrap();
                        }
                    }
                }
            }
        }
    }
    tb.build()
}

/// Random Dirichlet(1) membership with strictly positive entries.
pub fn random_membership(rng: &mut StreamRng, n: usize, k: usize) -> Membership {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let r: Vec<f64> = (0..k).map(|_| -rng.random_range(1e-3..1.0f64).ln()).collect();
            let s: f64 = r.iter().sum();
            r.iter().map(|x| x / s).collect()
        })
        .collect();
    Membership::from_rows(&rows).unwrap()
}

pub fn random_gamma(rng: &mut StreamRng, n: usize, hi: f64) -> StrengthVector {
    StrengthVector::new((0..n).map(|_| rng.random_range(0.0..hi)).collect()).unwrap()
}

/// Planted author–conference network: `areas` research areas with five
/// conferences each, authors publishing mostly inside their own area and
/// carrying a bag of area-specific words. Conferences have no attributes.
/// Relations are `AC` (author to conference, weight = paper count) and its
/// inverse `CA`.
pub fn ac_network(seed: u64, n_authors: usize, areas: usize) -> (HinGraph, AttributeTable) {
    let mut rng = stream(seed, "ac");
    let n_conf = 5 * areas;
    let mut gb = GraphBuilder::new();
    for c in 0..n_conf {
        gb.add_object(&format!("c{c}"), "C", Some(&(c / 5).to_string())).unwrap();
    }
    for a in 0..n_authors {
        gb.add_object(&format!("a{a}"), "A", Some(&(a % areas).to_string())).unwrap();
    }
    gb.add_relation("AC", "A", "C").unwrap();
    gb.add_relation("CA", "C", "A").unwrap();
    let mut tb = AttributeTableBuilder::new(n_conf + n_authors);
    let vocab = 10 * areas;
    let text = tb.declare("text", AttributeKind::Categorical { vocab }).unwrap();
    let mut papers = vec![vec![0u32; n_conf]; n_authors];
    for (a, row) in papers.iter_mut().enumerate() {
        let area = a % areas;
        for _ in 0..rng.random_range(2..8) {
            let c = if rng.random_bool(0.85) { area * 5 + rng.random_range(0..5) } else { rng.random_range(0..n_conf) };
            row[c] += 1;
        }
        if rng.random_bool(0.7) {
            for _ in 0..rng.random_range(3..12) {
                let term = if rng.random_bool(0.8) { area * 10 + rng.random_range(0..10) } else { rng.random_range(0..vocab) };
                tb.add_count(n_conf + a, text, term, 1).unwrap();
            }
        }
    }
    for (a, row) in papers.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            if n > 0 {
                gb.add_link(&format!("a{a}"), &format!("c{c}"), "AC", n as f64).unwrap();
                gb.add_link(&format!("c{c}"), &format!("a{a}"), "CA", n as f64).unwrap();
            }
        }
    }
    (gb.build(), tb.build())
}
