//! Link-type strength learning.
//!
//! With Θ fixed, γ maximizes the pseudo-log-likelihood
//!
//! g₂′(γ) = Σ_i ( Σ_{e=⟨v_i,v_j⟩} f(θ_i, θ_j, e, γ) − log B(α_i) ) − ‖γ‖² / (2σ²)
//!
//! where the conditional law of θ_i given its out-neighbors is Dirichlet with
//! α_{ik} = 1 + Σ_r γ(r) S_{i,r,k}, S_{i,r,k} = Σ_{e=⟨v_i,v_j⟩, φ(e)=r} w(e) θ_{j,k}.
//! g₂′ is concave in γ; it is maximized by projected Newton–Raphson.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{HinGraph, RelationIx};
use crate::model::{Membership, StrengthVector};
use crate::rng;
use crate::special::{digamma, ln_gamma, ln_multivariate_beta, trigamma};

/// Objects per reduction chunk; fixed so sums do not depend on the thread count.
const CHUNK: usize = 256;
const MAX_CONDITION: f64 = 1e12;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// f(θ_i, θ_j, e) = γ(r) w(e) Σ_k θ_{j,k} log θ_{i,k} = −γ(r) w(e) H(θ_j, θ_i).
///
/// Terms with θ_{j,k} = 0 contribute nothing.
pub fn feature_fn(theta_i: &[f64], theta_j: &[f64], link_weight: f64, gamma_r: f64) -> f64 {
    let h: f64 = theta_j
        .iter()
        .zip(theta_i)
        .filter(|(&tj, _)| tj > 0.0)
        .map(|(tj, ti)| tj * ti.ln())
        .sum();
    gamma_r * link_weight * h
}

/// Per-object sufficient statistics of g₂′, which depend on Θ but not on γ.
#[derive(Clone, Debug)]
pub struct DirichletPatches {
    k: usize,
    n_relations: usize,
    /// Objects without out-links; each contributes the constant log Γ(K).
    n_isolated: usize,
    offsets: Vec<usize>,
    relation: Vec<RelationIx>,
    /// S_{i,r,·}, K values per (object, relation) entry.
    s: Vec<f64>,
    /// W_{i,r} = Σ w(e)
    w: Vec<f64>,
    /// F_{i,r} = Σ_e w(e) Σ_k θ_{j,k} log θ_{i,k}
    f: Vec<f64>,
}

struct PatchEntry {
    relation: RelationIx,
    s: Vec<f64>,
    w: f64,
    f: f64,
}

impl DirichletPatches {
    pub fn new(graph: &HinGraph, theta: &Membership) -> Self {
        let k = theta.k();
        let per_object: Vec<Vec<PatchEntry>> = (0..graph.num_objects())
            .into_par_iter()
            .map(|i| {
                let ti = theta.row(i);
                graph
                    .out_links_by_relation(i)
                    .map(|(r, links)| {
                        let mut s = vec![0.0; k];
                        let mut w = 0.0;
                        let mut f = 0.0;
                        for l in links {
                            let tj = theta.row(l.target);
                            for (sk, t) in s.iter_mut().zip(tj) {
                                *sk += l.weight * t;
                            }
                            w += l.weight;
                            f += feature_fn(ti, tj, l.weight, 1.0);
                        }
                        PatchEntry { relation: r, s, w, f }
                    })
                    .collect()
            })
            .collect();
        let mut p = DirichletPatches {
            k,
            n_relations: graph.num_relations(),
            n_isolated: 0,
            offsets: vec![0],
            relation: Vec::new(),
            s: Vec::new(),
            w: Vec::new(),
            f: Vec::new(),
        };
        for entries in per_object {
            if entries.is_empty() {
                p.n_isolated += 1;
                continue;
            }
            for e in entries {
                p.relation.push(e.relation);
                p.s.extend(e.s);
                p.w.push(e.w);
                p.f.push(e.f);
            }
            p.offsets.push(p.relation.len());
        }
        p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    fn n_patches(&self) -> usize {
        self.offsets.len() - 1
    }

    fn alpha(&self, patch: usize, gamma: &[f64], out: &mut [f64]) {
        out.fill(1.0);
        for e in self.offsets[patch]..self.offsets[patch + 1] {
            let g = gamma[self.relation[e]];
            for (a, s) in out.iter_mut().zip(&self.s[e * self.k..(e + 1) * self.k]) {
                *a += g * s;
            }
        }
    }

    fn check(&self, gamma: &StrengthVector) -> Result<()> {
        if gamma.len() != self.n_relations {
            return Err(Error::LengthMismatch {
                expected: self.n_relations,
                found: gamma.len(),
            });
        }
        Ok(())
    }

    /// Sums `per_patch` over patches in fixed-size chunks, then over chunks in order.
    fn reduce<T, F>(&self, zero: impl Fn() -> T + Sync, add: impl Fn(&mut T, &T) + Sync, per_patch: F) -> T
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync,
    {
        let n = self.n_patches();
        let chunks: Vec<T> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = zero();
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    per_patch(i, &mut acc);
                }
                acc
            })
            .collect();
        let mut total = zero();
        for c in &chunks {
            add(&mut total, c);
        }
        total
    }

    pub fn value(&self, gamma: &StrengthVector, sigma: f64) -> f64 {
        let g = gamma.as_slice();
        let k = self.k;
        let patches = self.reduce(
            || 0.0,
            |a, b| *a += b,
            |i, acc| {
                let mut alpha = vec![0.0; k];
                self.alpha(i, g, &mut alpha);
                let link: f64 = (self.offsets[i]..self.offsets[i + 1])
                    .map(|e| g[self.relation[e]] * self.f[e])
                    .sum();
                *acc += link - ln_multivariate_beta(&alpha);
            },
        );
        let isolated = self.n_isolated as f64 * ln_gamma(k as f64);
        patches + isolated - g.iter().map(|x| x * x).sum::<f64>() / (2.0 * sigma * sigma)
    }

    pub fn gradient(&self, gamma: &StrengthVector, sigma: f64) -> Vec<f64> {
        let g = gamma.as_slice();
        let (k, nr) = (self.k, self.n_relations);
        let mut grad = self.reduce(
            || vec![0.0; nr],
            |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            |i, acc| {
                let mut alpha = vec![0.0; k];
                self.alpha(i, g, &mut alpha);
                let psi_sum = digamma(alpha.iter().sum());
                let psi: Vec<f64> = alpha.iter().map(|&a| digamma(a)).collect();
                for e in self.offsets[i]..self.offsets[i + 1] {
                    let s = &self.s[e * k..(e + 1) * k];
                    let dot: f64 = psi.iter().zip(s).map(|(p, s)| p * s).sum();
                    acc[self.relation[e]] += self.f[e] - dot + psi_sum * self.w[e];
                }
            },
        );
        for (d, x) in grad.iter_mut().zip(g) {
            *d -= x / (sigma * sigma);
        }
        grad
    }

    /// Row-major |ℛ|×|ℛ| Hessian.
    pub fn hessian(&self, gamma: &StrengthVector, sigma: f64) -> Vec<f64> {
        let g = gamma.as_slice();
        let (k, nr) = (self.k, self.n_relations);
        let mut h = self.reduce(
            || vec![0.0; nr * nr],
            |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            |i, acc| {
                let mut alpha = vec![0.0; k];
                self.alpha(i, g, &mut alpha);
                let tri_sum = trigamma(alpha.iter().sum());
                let tri: Vec<f64> = alpha.iter().map(|&a| trigamma(a)).collect();
                for e1 in self.offsets[i]..self.offsets[i + 1] {
                    let s1 = &self.s[e1 * k..(e1 + 1) * k];
                    for e2 in self.offsets[i]..self.offsets[i + 1] {
                        let s2 = &self.s[e2 * k..(e2 + 1) * k];
                        let quad: f64 = (0..k).map(|j| tri[j] * s1[j] * s2[j]).sum();
                        acc[self.relation[e1] * nr + self.relation[e2]] += -quad + tri_sum * self.w[e1] * self.w[e2];
                    }
                }
            },
        );
        for r in 0..nr {
            h[r * nr + r] -= 1.0 / (sigma * sigma);
        }
        h
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// g₂′(γ) for memberships Θ and prior standard deviation σ.
pub fn g2_prime(graph: &HinGraph, theta: &Membership, gamma: &StrengthVector, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let p = DirichletPatches::new(graph, theta);
    p.check(gamma)?;
    Ok(p.value(gamma, sigma))
}

/// ∂g₂′/∂γ(r) = Σ_i [ F_{i,r} − Σ_k ψ(α_{ik}) S_{i,r,k} + ψ(Σ_k α_{ik}) W_{i,r} ] − γ(r)/σ².
pub fn g2_prime_gradient(graph: &HinGraph, theta: &Membership, gamma: &StrengthVector, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let p = DirichletPatches::new(graph, theta);
    p.check(gamma)?;
    Ok(p.gradient(gamma, sigma))
}

/// ∂²g₂′/∂γ(r₁)∂γ(r₂) = Σ_i [ −Σ_k ψ′(α_{ik}) S_{i,r₁,k} S_{i,r₂,k} + ψ′(Σ_k α_{ik}) W_{i,r₁} W_{i,r₂} ] − 𝟙[r₁=r₂]/σ².
pub fn g2_prime_hessian(graph: &HinGraph, theta: &Membership, gamma: &StrengthVector, sigma: f64) -> Result<DMatrix<f64>> {
    check_sigma(sigma)?;
    let p = DirichletPatches::new(graph, theta);
    p.check(gamma)?;
    let nr = p.n_relations();
    Ok(DMatrix::from_row_slice(nr, nr, &p.hessian(gamma, sigma)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Standard deviation of the Gaussian prior on γ.
    pub sigma: f64,
    pub max_iters: usize,
    /// Stop once ‖∇g₂′‖∞ over the unclamped coordinates falls below this.
    pub grad_tol: f64,
    /// Compare the analytic gradient with central differences before optimizing.
    pub fd_validation: bool,
    pub seed: u64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            sigma: 0.1,
            max_iters: 100,
            grad_tol: 1e-8,
            fd_validation: false,
            seed: 0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        check_sigma(self.sigma)?;
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    Gradient,
}

#[derive(Clone, Debug)]
pub struct StrengthFit {
    pub gamma: StrengthVector,
    pub objective: f64,
    /// (γ, g₂′) at the start and after every accepted step.
    pub trajectory: Vec<(StrengthVector, f64)>,
    pub steps: Vec<StepKind>,
    pub converged: bool,
    /// Largest relative gap between the analytic and central-difference gradient.
    pub fd_max_rel_error: Option<f64>,
}

fn fd_check(p: &DirichletPatches, gamma: &StrengthVector, sigma: f64, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, "strength.fd");
    let h = 1e-4;
    let point: Vec<f64> = gamma.as_slice().iter().map(|&g| g.max(2.0 * h) + rng.random_range(0.0..0.1)).collect();
    let at = StrengthVector::new(point.clone()).expect("nonnegative");
    let grad = p.gradient(&at, sigma);
    let mut worst: f64 = 0.0;
    for r in 0..point.len() {
        let mut up = point.clone();
        let mut down = point.clone();
        up[r] += h;
        down[r] -= h;
        let fd = (p.value(&StrengthVector::from_raw(up), sigma) - p.value(&StrengthVector::from_raw(down), sigma)) / (2.0 * h);
        worst = worst.max((fd - grad[r]).abs() / grad[r].abs().max(1.0));
    }
    worst
}

/// Newton direction on the free coordinates, or None if −H_FF is not safely positive definite.
fn newton_direction(hess: &[f64], grad: &[f64], free: &[usize], nr: usize) -> Option<Vec<f64>> {
    let m = free.len();
    let neg_h = DMatrix::from_fn(m, m, |a, b| -hess[free[a] * nr + free[b]]);
    let eig = SymmetricEigen::new(neg_h);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return None;
    }
    let g = DVector::from_iterator(m, free.iter().map(|&r| grad[r]));
    let coeffs = eig.eigenvectors.transpose() * g;
    let scaled = DVector::from_iterator(m, coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c / l));
    let d = &eig.eigenvectors * scaled;
    let mut out = vec![0.0; nr];
    for (a, &r) in free.iter().enumerate() {
        out[r] = d[a];
    }
    Some(out)
}

fn project(gamma: &[f64], dir: &[f64], t: f64) -> StrengthVector {
    StrengthVector::from_raw(gamma.iter().zip(dir).map(|(g, d)| (g + t * d).max(0.0)).collect())
}

/// Projected Newton–Raphson ascent on g₂′ from `warm`.
///
/// Each iteration takes a full Newton step on the unclamped coordinates and
/// clamps negative entries to 0. If −H is ill-conditioned or the step fails to
/// increase g₂′, a projected gradient step with halving backtracking (Armijo)
/// is used instead. Coordinates at 0 whose gradient points below 0 are
/// excluded from both the step and the convergence test.
pub fn learn_strengths(
    graph: &HinGraph,
    theta: &Membership,
    config: &NewtonConfig,
    warm: &StrengthVector,
) -> Result<StrengthFit> {
    config.validate()?;
    let patches = DirichletPatches::new(graph, theta);
    patches.check(warm)?;
    learn_from_patches(&patches, config, warm)
}

pub fn learn_from_patches(patches: &DirichletPatches, config: &NewtonConfig, warm: &StrengthVector) -> Result<StrengthFit> {
    let nr = patches.n_relations();
    let sigma = config.sigma;
    let fd_max_rel_error = config.fd_validation.then(|| {
        let err = fd_check(patches, warm, sigma, config.seed);
        if err > 1e-5 {
            warn!("gradient disagrees with central differences: relative error {err:e}");
        }
        err
    });
    let mut gamma = warm.clone();
    let mut value = patches.value(&gamma, sigma);
    let mut fit = StrengthFit {
        gamma: gamma.clone(),
        objective: value,
        trajectory: vec![(gamma.clone(), value)],
        steps: Vec::new(),
        converged: false,
        fd_max_rel_error,
    };
    for it in 0..config.max_iters {
        let grad = patches.gradient(&gamma, sigma);
        let free: Vec<usize> = (0..nr).filter(|&r| gamma.get(r) > 0.0 || grad[r] > 0.0).collect();
        let gnorm = free.iter().map(|&r| grad[r].abs()).fold(0.0, f64::max);
        if gnorm < config.grad_tol {
            fit.converged = true;
            break;
        }
        let mut accepted = None;
        let hess = patches.hessian(&gamma, sigma);
        if let Some(d) = newton_direction(&hess, &grad, &free, nr) {
            let cand = project(gamma.as_slice(), &d, 1.0);
            let v = patches.value(&cand, sigma);
            if v > value {
                accepted = Some((cand, v, StepKind::Newton));
            }
        }
        if accepted.is_none() {
            let mut dir = vec![0.0; nr];
            for &r in &free {
                dir[r] = grad[r];
            }
            let mut t = 1.0;
            for _ in 0..MAX_HALVINGS {
                let cand = project(gamma.as_slice(), &dir, t);
                let gain: f64 = (0..nr).map(|r| grad[r] * (cand.get(r) - gamma.get(r))).sum();
                let v = patches.value(&cand, sigma);
                if v > value && v >= value + ARMIJO_C * gain {
                    accepted = Some((cand, v, StepKind::Gradient));
                    break;
                }
                t *= 0.5;
            }
        }
        match accepted {
            Some((cand, v, kind)) => {
                debug!("strength step {it} ({kind:?}): g2' {value} -> {v}");
                gamma = cand;
                value = v;
                fit.trajectory.push((gamma.clone(), value));
                fit.steps.push(kind);
            }
            None => {
                // no ascent direction survives rounding: γ is optimal to working precision
                debug!("strength search stalled at |grad| = {gnorm:e}");
                fit.converged = gnorm < 1e-6 * value.abs().max(1.0);
                break;
            }
        }
    }
    fit.gamma = gamma;
    fit.objective = value;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    #[test]
    fn feature_on_uniform_source() {
        let u = [1.0 / 3.0; 3];
        let f = feature_fn(&u, &[0.2, 0.5, 0.3], 1.0, 1.0);
        assert!((f + 1.0986).abs() < 1e-4);
        assert!((f + 3f64.ln()).abs() < 1e-15);
        assert_eq!(feature_fn(&[1.0, 0.0], &[1.0, 0.0], 1.0, 1.0), 0.0);
        let t = [0.7, 0.3];
        assert_eq!(feature_fn(&t, &[0.4, 0.6], 2.0, 1.0), 2.0 * feature_fn(&t, &[0.4, 0.6], 1.0, 1.0));
        assert_eq!(feature_fn(&t, &[0.4, 0.6], 1.0, 0.0), 0.0);
    }

    fn two_relation_graph() -> HinGraph {
        let mut b = GraphBuilder::new();
        b.add_relation("ab", "A", "B").unwrap();
        b.add_relation("ba", "B", "A").unwrap();
        b.add_object("a1", "A", None).unwrap();
        b.add_object("a2", "A", None).unwrap();
        b.add_object("b1", "B", None).unwrap();
        b.add_link("a1", "b1", "ab", 1.0).unwrap();
        b.add_link("a2", "b1", "ab", 2.0).unwrap();
        b.build()
    }

    #[test]
    fn zero_strength_value_is_log_factorial() {
        let g = two_relation_graph();
        for k in 2..6 {
            let theta = Membership::uniform(3, k);
            let v = g2_prime(&g, &theta, &StrengthVector::zeros(2), 0.1).unwrap();
            let lf: f64 = (1..k).map(|i| (i as f64).ln()).sum();
            assert!((v - 3.0 * lf).abs() < 1e-12, "K = {k}");
        }
    }

    #[test]
    fn unused_relation_only_feels_the_prior() {
        let g = two_relation_graph();
        let theta = Membership::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
        let gamma = StrengthVector::new(vec![0.7, 0.3]).unwrap();
        let grad = g2_prime_gradient(&g, &theta, &gamma, 0.1).unwrap();
        assert_eq!(grad[1], -0.3 / (0.1 * 0.1));
        let grad0 = g2_prime_gradient(&g, &theta, &StrengthVector::new(vec![0.7, 0.0]).unwrap(), 0.1).unwrap();
        assert_eq!(grad0[1], 0.0);
    }

    #[test]
    fn empty_graph_hessian_is_prior() {
        let mut b = GraphBuilder::new();
        b.add_relation("r", "A", "A").unwrap();
        b.add_relation("s", "A", "A").unwrap();
        b.add_object("x", "A", None).unwrap();
        let g = b.build();
        let h = g2_prime_hessian(&g, &Membership::uniform(1, 3), &StrengthVector::ones(2), 0.5).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[-4.0, 0.0, 0.0, -4.0]));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = two_relation_graph();
        let theta = Membership::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let p = DirichletPatches::new(&g, &theta);
        let gamma = StrengthVector::new(vec![1.3, 0.4]).unwrap();
        assert!(fd_check(&p, &gamma, 0.5, 7) < 1e-6);
    }

    #[test]
    fn newton_never_lowers_the_objective() {
        let g = two_relation_graph();
        let theta = Membership::from_rows(&[vec![0.1, 0.9], vec![0.15, 0.85], vec![0.05, 0.95]]).unwrap();
        let cfg = NewtonConfig {
            sigma: 1.0,
            fd_validation: true,
            ..NewtonConfig::default()
        };
        let fit = learn_strengths(&g, &theta, &cfg, &StrengthVector::ones(2)).unwrap();
        for w in fit.trajectory.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9);
        }
        assert!(fit.gamma.as_slice().iter().all(|&x| x >= 0.0));
        assert!(fit.fd_max_rel_error.unwrap() < 1e-5);
        assert!(fit.converged);
    }
}
