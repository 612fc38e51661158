//! The outer alternation: cluster optimization with γ fixed, then strength
//! learning with Θ fixed, until γ stops moving.

use log::info;
use rand::RngCore;

use crate::attributes::AttributeTable;
use crate::em::{g1_objective, optimize_clusters, ClusterState, EmConfig};
use crate::error::{Error, Result};
use crate::eval::label_agreement;
use crate::graph::HinGraph;
use crate::model::{ComponentParams, Membership, StrengthVector};
use crate::rng;
use crate::strength::{learn_strengths, NewtonConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct GenClusConfig {
    pub k: usize,
    /// Attributes that guide the clustering; the rest of the table is ignored.
    pub attributes: Vec<String>,
    pub em: EmConfig,
    pub newton: NewtonConfig,
    pub max_outer_iters: usize,
    /// Stop once ‖γᵗ − γᵗ⁻¹‖∞ falls below this.
    pub outer_tol: f64,
    /// Continue from the previous Θ and β instead of fresh restarts in every outer iteration.
    pub warm_theta: bool,
    pub seed: u64,
}

impl GenClusConfig {
    pub fn new(k: usize, attributes: Vec<String>) -> Self {
        GenClusConfig {
            k,
            attributes,
            em: EmConfig::default(),
            newton: NewtonConfig::default(),
            max_outer_iters: 10,
            outer_tol: 1e-4,
            warm_theta: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("K must be at least 2, got {}", self.k)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be at least 1".into()));
        }
        if !(self.outer_tol >= 0.0) {
            return Err(Error::Config(format!("outer_tol must be nonnegative, got {}", self.outer_tol)));
        }
        self.em.validate()?;
        self.newton.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterIteration {
    /// 1-based outer iteration.
    pub iter: usize,
    /// Strengths used while clustering in this iteration.
    pub gamma_in: StrengthVector,
    /// Strengths learned at the end of this iteration.
    pub gamma: StrengthVector,
    /// Final g₁ of the cluster step.
    pub g1: f64,
    pub g1_trace: Vec<f64>,
    /// g₂′ at the learned strengths.
    pub g2: f64,
    /// Attribute log-likelihood plus g₂′: the objective with the link term in pseudo-likelihood form.
    pub surrogate: f64,
    pub theta: Membership,
    /// NMI of argmax labels against graph labels, when the graph is labeled.
    pub nmi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenClusResult {
    pub theta: Membership,
    pub gamma: StrengthVector,
    pub attributes: Vec<String>,
    pub params: Vec<ComponentParams>,
    pub trace: Vec<OuterIteration>,
    pub converged: bool,
}

fn derived_seed(seed: u64, name: &str) -> u64 {
    rng::stream(seed, name).next_u64()
}

pub fn run_genclus(graph: &HinGraph, table: &AttributeTable, config: &GenClusConfig) -> Result<GenClusResult> {
    config.validate()?;
    let n = graph.num_objects();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if config.k > n {
        return Err(Error::TooManyClusters { k: config.k, n });
    }
    if table.num_objects() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: table.num_objects(),
        });
    }
    let table = table.select(&config.attributes)?;

    let mut gamma = StrengthVector::ones(graph.num_relations());
    let mut trace = Vec::new();
    let mut state: Option<ClusterState> = None;
    let mut converged = false;
    for t in 1..=config.max_outer_iters {
        let em = EmConfig {
            seed: derived_seed(config.seed, &format!("outer.{t}.em")),
            ..config.em.clone()
        };
        let warm = if config.warm_theta { state.as_ref() } else { None };
        let fit = optimize_clusters(graph, &table, &gamma, config.k, &em, warm)?;
        let newton = NewtonConfig {
            seed: derived_seed(config.seed, &format!("outer.{t}.strength")),
            ..config.newton.clone()
        };
        let strengths = learn_strengths(graph, &fit.state.theta, &newton, &gamma)?;
        let attr_ll = g1_objective(
            graph,
            &table,
            &fit.state.theta,
            &fit.state.params,
            &StrengthVector::zeros(graph.num_relations()),
        )?;
        let nmi = if graph.has_labels() {
            label_agreement(graph, &fit.state.theta)?.overall
        } else {
            None
        };
        let delta = strengths.gamma.max_abs_diff(&gamma);
        let g1 = *fit.g1_trace.last().expect("nonempty trace");
        info!(
            "outer {t}: g1 = {g1:.6}, gamma = {:?}, |dgamma| = {delta:.3e}{}",
            strengths.gamma.as_slice(),
            nmi.map(|x| format!(", nmi = {x:.4}")).unwrap_or_default()
        );
        trace.push(OuterIteration {
            iter: t,
            gamma_in: gamma.clone(),
            gamma: strengths.gamma.clone(),
            g1,
            g1_trace: fit.g1_trace.clone(),
            g2: strengths.objective,
            surrogate: attr_ll + strengths.objective,
            theta: fit.state.theta.clone(),
            nmi,
        });
        gamma = strengths.gamma;
        state = Some(fit.state);
        if delta < config.outer_tol {
            converged = true;
            break;
        }
    }
    let state = state.expect("at least one outer iteration");
    Ok(GenClusResult {
        theta: state.theta,
        gamma,
        attributes: table.attributes().iter().map(|a| a.name().to_string()).collect(),
        params: state.params,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GeneratorConfig};

    #[test]
    fn input_validation() {
        let (g, t, _) = generate(&GeneratorConfig::setting(1, 8, 8, 1, 0).unwrap()).unwrap();
        let cfg = GenClusConfig::new(4, vec!["temperature".into()]);
        assert!(matches!(
            run_genclus(&g, &t, &GenClusConfig { k: 1, ..cfg.clone() }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_genclus(&g, &t, &GenClusConfig { k: 17, ..cfg.clone() }),
            Err(Error::TooManyClusters { .. })
        ));
        let missing = GenClusConfig::new(4, vec!["humidity".into()]);
        match run_genclus(&g, &t, &missing) {
            Err(Error::UnknownAttribute(a)) => assert_eq!(a, "humidity"),
            other => panic!("{other:?}"),
        }
        let empty = crate::graph::GraphBuilder::new().build();
        assert!(matches!(
            run_genclus(&empty, &AttributeTable::empty(0), &GenClusConfig::new(2, vec![])),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn single_outer_iteration_is_one_cluster_step() {
        let (g, t, _) = generate(&GeneratorConfig::setting(1, 30, 20, 2, 3).unwrap()).unwrap();
        let mut cfg = GenClusConfig::new(4, vec!["temperature".into(), "precipitation".into()]);
        cfg.max_outer_iters = 1;
        cfg.seed = 17;
        let res = run_genclus(&g, &t, &cfg).unwrap();
        let em = EmConfig {
            seed: derived_seed(17, "outer.1.em"),
            ..cfg.em.clone()
        };
        let fit = optimize_clusters(&g, &t, &StrengthVector::ones(4), 4, &em, None).unwrap();
        assert_eq!(res.theta, fit.state.theta);
        assert_eq!(res.trace.len(), 1);
        assert_ne!(res.gamma, StrengthVector::ones(4));
        assert!(res.trace[0].nmi.is_some());
    }
}
