//! Model parameters: soft memberships, link-type strengths and per-cluster
//! attribute components.

use crate::error::{Error, Result};
use crate::graph::ObjectIx;

/// Lower bound on every membership probability.
pub const THETA_FLOOR: f64 = 1e-10;
/// Lower bound on every categorical term probability.
pub const BETA_FLOOR: f64 = 1e-10;
/// Lower bound on every Gaussian component variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Normalizes `p` in place and raises every entry to at least `floor`,
/// taking the added mass proportionally from the unclamped entries.
///
/// Entries already above the floor keep their relative proportions. An
/// all-zero input becomes uniform.
pub fn floor_distribution(p: &mut [f64], floor: f64) {
    let k = p.len();
    debug_assert!(floor * k as f64 <= 1.0);
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        p.fill(1.0 / k as f64);
        return;
    }
    p.iter_mut().for_each(|x| *x /= total);
    if p.iter().all(|&x| x >= floor) {
        return;
    }
    let mut clamped = vec![false; k];
    loop {
        let mut changed = false;
        for i in 0..k {
            if !clamped[i] && p[i] < floor {
                clamped[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let n_clamped = clamped.iter().filter(|&&c| c).count();
        let free_mass: f64 = (0..k).filter(|&i| !clamped[i]).map(|i| p[i]).sum();
        let target = 1.0 - n_clamped as f64 * floor;
        for i in 0..k {
            if clamped[i] {
                p[i] = floor;
            } else {
                p[i] *= target / free_mass;
            }
        }
    }
}

/// Row-stochastic |V|×K membership matrix Θ.
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    k: usize,
    data: Vec<f64>,
}

impl Membership {
    pub fn uniform(n: usize, k: usize) -> Self {
        Membership {
            k,
            data: vec![1.0 / k as f64; n * k],
        }
    }

    /// Builds from raw row-major probabilities, checking that rows sum to one.
    pub fn from_flat(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || data.len() % k != 0 {
            return Err(Error::LengthMismatch {
                expected: k,
                found: data.len(),
            });
        }
        for row in data.chunks(k) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("membership row {row:?} is not a distribution")));
            }
        }
        Ok(Membership { k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Config("membership rows of unequal length".into()));
        }
        Self::from_flat(k, rows.concat())
    }

    /// Applies [`floor_distribution`] with [`THETA_FLOOR`] to every row.
    pub fn floored(mut self) -> Self {
        let k = self.k;
        self.data.chunks_mut(k).for_each(|r| floor_distribution(r, THETA_FLOOR));
        self
    }

    pub(crate) fn from_raw(k: usize, data: Vec<f64>) -> Self {
        Membership { k, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_objects(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn row(&self, v: ObjectIx) -> &[f64] {
        &self.data[v * self.k..(v + 1) * self.k]
    }

    pub fn row_mut(&mut self, v: ObjectIx) -> &mut [f64] {
        &mut self.data[v * self.k..(v + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.k)
    }

    /// Hard label of `v`; ties go to the lowest cluster index.
    pub fn argmax(&self, v: ObjectIx) -> usize {
        argmax(self.row(v))
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.num_objects()).map(|v| self.argmax(v)).collect()
    }

    /// Column permutation: new cluster `perm[k]` takes old cluster `k`.
    pub fn permute_clusters(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (src, dst) in self.rows().zip(out.data.chunks_mut(self.k)) {
            for (k, &p) in perm.iter().enumerate() {
                dst[p] = src[k];
            }
        }
        out
    }

    /// Largest absolute entry-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &Membership) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Nonnegative strength γ(r) per relation.
#[derive(Clone, Debug, PartialEq)]
pub struct StrengthVector(Vec<f64>);

impl StrengthVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::Config(format!("strengths must be finite and nonnegative: {values:?}")));
        }
        Ok(StrengthVector(values))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        StrengthVector(values)
    }

    pub fn ones(n_relations: usize) -> Self {
        StrengthVector(vec![1.0; n_relations])
    }

    pub fn zeros(n_relations: usize) -> Self {
        StrengthVector(vec![0.0; n_relations])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, r: usize) -> f64 {
        self.0[r]
    }

    pub fn max_abs_diff(&self, other: &StrengthVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-cluster term distributions β_k, stored row-major K×m.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalParams {
    pub vocab: usize,
    pub beta: Vec<f64>,
}

impl CategoricalParams {
    pub fn k(&self) -> usize {
        self.beta.len() / self.vocab
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.beta[k * self.vocab..(k + 1) * self.vocab]
    }

    pub fn prob(&self, k: usize, term: usize) -> f64 {
        self.beta[k * self.vocab + term]
    }

    /// From K rows; each row is normalized and floored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let vocab = rows[0].len();
        let mut beta = rows.concat();
        beta.chunks_mut(vocab).for_each(|r| floor_distribution(r, BETA_FLOOR));
        CategoricalParams { vocab, beta }
    }
}

/// Per-cluster univariate Gaussian components.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GaussianParams {
    pub fn k(&self) -> usize {
        self.mean.len()
    }
}

/// Component parameters β for one attribute.
#[derive(Clone, Debug, PartialEq)]
pub enum ComponentParams {
    Categorical(CategoricalParams),
    Gaussian(GaussianParams),
}

impl ComponentParams {
    pub fn k(&self) -> usize {
        match self {
            ComponentParams::Categorical(c) => c.k(),
            ComponentParams::Gaussian(g) => g.k(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ComponentParams::Categorical(_) => "categorical",
            ComponentParams::Gaussian(_) => "numerical",
        }
    }

    pub fn permute_clusters(&self, perm: &[usize]) -> Self {
        match self {
            ComponentParams::Categorical(c) => {
                let mut beta = c.beta.clone();
                for (k, &p) in perm.iter().enumerate() {
                    beta[p * c.vocab..(p + 1) * c.vocab].copy_from_slice(c.row(k));
                }
                ComponentParams::Categorical(CategoricalParams { vocab: c.vocab, beta })
            }
            ComponentParams::Gaussian(g) => {
                let mut mean = g.mean.clone();
                let mut variance = g.variance.clone();
                for (k, &p) in perm.iter().enumerate() {
                    mean[p] = g.mean[k];
                    variance[p] = g.variance[k];
                }
                ComponentParams::Gaussian(GaussianParams { mean, variance })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floor_keeps_valid_rows_untouched() {
        let mut p = vec![0.2, 0.3, 0.5];
        floor_distribution(&mut p, THETA_FLOOR);
        assert_eq!(p, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn floor_lifts_zeros() {
        let mut p = vec![1.0, 0.0, 0.0];
        floor_distribution(&mut p, 1e-3);
        assert_eq!(p[1], 1e-3);
        assert_eq!(p[2], 1e-3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_row_becomes_uniform() {
        let mut p = vec![0.0; 4];
        floor_distribution(&mut p, THETA_FLOOR);
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn strength_rejects_negative() {
        assert!(StrengthVector::new(vec![1.0, -0.1]).is_err());
        assert!(StrengthVector::new(vec![0.0, 2.0]).is_ok());
    }

    proptest! {
        #[test]
        fn floored_rows_are_distributions(raw in proptest::collection::vec(0.0f64..1.0, 2..9), zeros in proptest::collection::vec(any::<bool>(), 9)) {
            let mut p: Vec<f64> = raw.iter().zip(&zeros).map(|(&x, &z)| if z { 0.0 } else { x }).collect();
            floor_distribution(&mut p, 1e-4);
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 1e-4 * (1.0 - 1e-12)));
        }
    }
}
