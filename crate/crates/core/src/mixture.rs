//! Attribute mixture models: each object's observations of an attribute are
//! drawn from a K-component mixture whose mixing proportions are the object's
//! membership row θ_v and whose components are shared across objects.
//!
//! Categorical attributes use term distributions β_k (PLSA-style); numerical
//! attributes use univariate Gaussians (μ_k, σ_k²). Multiple attributes are
//! independent given Θ, so their log-likelihoods add.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::attributes::{Attribute, AttributeKind, AttributeTable};
use crate::error::{Error, Result};
use crate::graph::ObjectIx;
use crate::model::{CategoricalParams, ComponentParams, GaussianParams, Membership};

/// Per-entry posterior cluster probabilities, one flat `entries × K` block per
/// attribute aligned with the attribute's entry order.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities {
    k: usize,
    per_attribute: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn attribute(&self, a: usize) -> &[f64] {
        &self.per_attribute[a]
    }

    /// Responsibility vector of one entry of attribute `a`.
    pub fn entry(&self, a: usize, entry: usize) -> &[f64] {
        &self.per_attribute[a][entry * self.k..(entry + 1) * self.k]
    }

    pub fn num_attributes(&self) -> usize {
        self.per_attribute.len()
    }
}

pub(crate) fn gaussian_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - d * d / (2.0 * variance)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

fn kind_mismatch(attr: &Attribute, params: &ComponentParams) -> Error {
    Error::AttributeKind {
        attribute: attr.name().to_string(),
        expected: attr.kind().name(),
        found: params.kind_name(),
    }
}

fn check_k(theta: &Membership, params: &ComponentParams) -> Result<()> {
    if theta.k() != params.k() {
        return Err(Error::LengthMismatch {
            expected: theta.k(),
            found: params.k(),
        });
    }
    Ok(())
}

/// Log-likelihood contribution of object `v`'s observations of one attribute.
pub(crate) fn object_log_likelihood(attr: &Attribute, v: ObjectIx, theta_v: &[f64], params: &ComponentParams) -> f64 {
    let mut total = 0.0;
    match params {
        ComponentParams::Categorical(c) => {
            for e in attr.entries(v) {
                let term = attr.term(e);
                let p: f64 = theta_v.iter().enumerate().map(|(k, &t)| t * c.prob(k, term)).sum();
                total += attr.weight(e) * p.ln();
            }
        }
        ComponentParams::Gaussian(g) => {
            let mut buf = vec![0.0; theta_v.len()];
            for &x in attr.observations(v) {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = theta_v[k].ln() + gaussian_ln_pdf(x, g.mean[k], g.variance[k]);
                }
                total += log_sum_exp(&buf);
            }
        }
    }
    total
}

fn attribute_log_likelihood_unchecked(attr: &Attribute, theta: &Membership, params: &ComponentParams) -> f64 {
    let per_object: Vec<f64> = (0..attr.num_objects())
        .into_par_iter()
        .map(|v| object_log_likelihood(attr, v, theta.row(v), params))
        .collect();
    per_object.iter().sum()
}

/// Σ_{v∈V_X} Σ_l c_{v,l} log Σ_k θ_{v,k} β_{k,l}
pub fn categorical_log_likelihood(attr: &Attribute, theta: &Membership, params: &CategoricalParams) -> Result<f64> {
    let params = ComponentParams::Categorical(params.clone());
    if !matches!(attr.kind(), AttributeKind::Categorical { .. }) {
        return Err(kind_mismatch(attr, &params));
    }
    check_k(theta, &params)?;
    Ok(attribute_log_likelihood_unchecked(attr, theta, &params))
}

/// Σ_{v∈V_X} Σ_{x∈v[X]} log Σ_k θ_{v,k} N(x; μ_k, σ_k²), accumulated in the log domain.
pub fn gaussian_log_likelihood(attr: &Attribute, theta: &Membership, params: &GaussianParams) -> Result<f64> {
    let params = ComponentParams::Gaussian(params.clone());
    if attr.kind() != AttributeKind::Numerical {
        return Err(kind_mismatch(attr, &params));
    }
    check_k(theta, &params)?;
    Ok(attribute_log_likelihood_unchecked(attr, theta, &params))
}

pub fn attribute_log_likelihood(attr: &Attribute, theta: &Membership, params: &ComponentParams) -> Result<f64> {
    match params {
        ComponentParams::Categorical(c) => categorical_log_likelihood(attr, theta, c),
        ComponentParams::Gaussian(g) => gaussian_log_likelihood(attr, theta, g),
    }
}

/// Sum of the per-attribute log-likelihoods; attributes are independent given Θ.
pub fn multi_attribute_log_likelihood(table: &AttributeTable, theta: &Membership, params: &[ComponentParams]) -> Result<f64> {
    check_params(table, theta, params)?;
    let mut total = 0.0;
    for (attr, p) in table.attributes().iter().zip(params) {
        total += attribute_log_likelihood(attr, theta, p)?;
    }
    Ok(total)
}

pub(crate) fn check_params(table: &AttributeTable, theta: &Membership, params: &[ComponentParams]) -> Result<()> {
    if params.len() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            found: params.len(),
        });
    }
    for (attr, p) in table.attributes().iter().zip(params) {
        let ok = matches!(
            (attr.kind(), p),
            (AttributeKind::Categorical { .. }, ComponentParams::Categorical(_))
                | (AttributeKind::Numerical, ComponentParams::Gaussian(_))
        );
        if !ok {
            return Err(kind_mismatch(attr, p));
        }
        if let (AttributeKind::Categorical { vocab }, ComponentParams::Categorical(c)) = (attr.kind(), p) {
            if c.vocab != vocab {
                return Err(Error::LengthMismatch {
                    expected: vocab,
                    found: c.vocab,
                });
            }
        }
        check_k(theta, p)?;
    }
    Ok(())
}

/// Posterior of the hidden cluster label of every entry of one attribute:
/// p(z = k) ∝ θ_{v,k} β_{k,l} (categorical) or θ_{v,k} N(x; μ_k, σ_k²) (Gaussian).
pub fn attribute_responsibilities(attr: &Attribute, theta: &Membership, params: &ComponentParams) -> Vec<f64> {
    let k = theta.k();
    let mut out = vec![0.0; attr.num_entries() * k];
    out.par_chunks_mut(k).enumerate().for_each(|(e, r)| {
        let theta_v = theta.row(attr.owner(e));
        match params {
            ComponentParams::Categorical(c) => {
                let term = attr.term(e);
                for (j, rj) in r.iter_mut().enumerate() {
                    *rj = theta_v[j] * c.prob(j, term);
                }
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|x| *x /= s);
            }
            ComponentParams::Gaussian(g) => {
                let x = attr.value(e);
                for (j, rj) in r.iter_mut().enumerate() {
                    *rj = theta_v[j].ln() + gaussian_ln_pdf(x, g.mean[j], g.variance[j]);
                }
                let lse = log_sum_exp(r);
                r.iter_mut().for_each(|x| *x = (*x - lse).exp());
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|x| *x /= s);
            }
        }
    });
    out
}

/// E-step over every attribute of the table.
pub fn e_step_responsibilities(
    table: &AttributeTable,
    theta: &Membership,
    params: &[ComponentParams],
) -> Result<Responsibilities> {
    check_params(table, theta, params)?;
    Ok(Responsibilities {
        k: theta.k(),
        per_attribute: table
            .attributes()
            .iter()
            .zip(params)
            .map(|(a, p)| attribute_responsibilities(a, theta, p))
            .collect(),
    })
}
