mod common;

use common::*;
use genclus::rng::stream;
use genclus::strength::{g2_prime, g2_prime_gradient, g2_prime_hessian, learn_strengths, DirichletPatches, NewtonConfig};
use genclus::{GraphBuilder, HinGraph, Membership, StrengthVector};
use proptest::prelude::*;

#[test]
fn pseudo_likelihood_matches_definition() {
    for seed in 0..6 {
        let (graph, _) = random_network(seed, 70, AttrSetup::Categorical);
        let mut rng = stream(seed, "g2");
        let k = 2 + seed as usize % 4;
        let theta = random_membership(&mut rng, graph.num_objects(), k);
        let gamma = random_gamma(&mut rng, graph.num_relations(), 5.0);
        let got = g2_prime(&graph, &theta, &gamma, 0.7).unwrap();
        let want = g2_prime_reference(&graph, &theta, gamma.as_slice(), 0.7);
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }
}

/// Objects on a ring, each linking to the next; memberships lean toward
/// cluster `v % 2` with the given agreement between neighbors.
fn ring(n: usize, theta: &Membership, relations: &[&str]) -> HinGraph {
    let mut gb = GraphBuilder::new();
    for v in 0..n {
        gb.add_object(&format!("v{v}"), "X", None).unwrap();
    }
    for r in relations {
        gb.add_relation(r, "X", "X").unwrap();
    }
    assert_eq!(theta.num_objects(), n);
    for v in 0..n {
        for r in relations {
            gb.add_link(&format!("v{v}"), &format!("v{}", (v + 1) % n), r, 1.0).unwrap();
        }
    }
    gb.build()
}

fn leaning(n: usize, p: f64, alternate: bool) -> Membership {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            let hi = if alternate { v % 2 } else { 0 };
            (0..2).map(|z| if z == hi { p } else { 1.0 - p }).collect()
        })
        .collect();
    Membership::from_rows(&rows).unwrap()
}

#[test]
fn single_relation_newton_matches_golden_section() {
    for (p, sigma) in [(0.9, 1.0), (0.75, 0.5), (0.97, 2.0)] {
        let theta = leaning(30, p, false);
        let graph = ring(30, &theta, &["next"]);
        let config = NewtonConfig { sigma, ..NewtonConfig::default() };
        let fit = learn_strengths(&graph, &theta, &config, &StrengthVector::ones(1)).unwrap();
        assert!(fit.converged);
        let f = |g: f64| g2_prime(&graph, &theta, &StrengthVector::new(vec![g]).unwrap(), sigma).unwrap();
        let best = golden_section_max(f, 0.0, 100.0, 1e-10);
        assert!(best > 0.0);
        assert!((fit.gamma.get(0) - best).abs() <= 1e-6 * best.max(1.0), "{} vs {best}", fit.gamma.get(0));
    }
}

#[test]
fn disagreeing_neighbors_pin_strength_at_zero() {
    let theta = leaning(30, 0.95, true);
    let graph = ring(30, &theta, &["next"]);
    let fit = learn_strengths(&graph, &theta, &NewtonConfig::default(), &StrengthVector::ones(1)).unwrap();
    assert_eq!(fit.gamma.get(0), 0.0);
    let g = g2_prime_gradient(&graph, &theta, &fit.gamma, 0.1).unwrap();
    assert!(g[0] <= 0.0);
}

#[test]
fn identical_relations_get_identical_strengths() {
    let theta = leaning(24, 0.85, false);
    let graph = ring(24, &theta, &["a", "b"]);
    let config = NewtonConfig { sigma: 1.0, ..NewtonConfig::default() };
    let fit = learn_strengths(&graph, &theta, &config, &StrengthVector::new(vec![0.2, 3.0]).unwrap()).unwrap();
    assert!(fit.gamma.get(0) > 0.0);
    assert!((fit.gamma.get(0) - fit.gamma.get(1)).abs() <= 1e-8, "{:?}", fit.gamma);
}

#[test]
fn patches_agree_with_graph_level_functions() {
    let (graph, _) = random_network(21, 50, AttrSetup::Categorical);
    let mut rng = stream(21, "patches");
    let theta = random_membership(&mut rng, graph.num_objects(), 3);
    let gamma = random_gamma(&mut rng, graph.num_relations(), 2.0);
    let p = DirichletPatches::new(&graph, &theta);
    assert_eq!(p.value(&gamma, 0.3), g2_prime(&graph, &theta, &gamma, 0.3).unwrap());
    assert_eq!(p.gradient(&gamma, 0.3), g2_prime_gradient(&graph, &theta, &gamma, 0.3).unwrap());
    let h = g2_prime_hessian(&graph, &theta, &gamma, 0.3).unwrap();
    assert_eq!(p.hessian(&gamma, 0.3), h.transpose().as_slice().to_vec());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hessian_is_negative_definite(seed in 0u64..1000, k in 2usize..7, hi in 0.0f64..8.0, sigma in 0.05f64..5.0) {
        let (graph, _) = random_network(seed, 40, AttrSetup::Categorical);
        let mut rng = stream(seed, "concave");
        let theta = random_membership(&mut rng, graph.num_objects(), k);
        let gamma = random_gamma(&mut rng, graph.num_relations(), hi);
        let h = g2_prime_hessian(&graph, &theta, &gamma, sigma).unwrap();
        let eig = h.symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l < 0.0), "{:?}", eig.eigenvalues);
    }

    #[test]
    fn newton_result_is_a_kkt_point(seed in 0u64..1000, k in 2usize..5) {
        let (graph, _) = random_network(seed, 60, AttrSetup::Categorical);
        let theta = random_membership(&mut stream(seed, "kkt"), graph.num_objects(), k);
        let fit = learn_strengths(&graph, &theta, &NewtonConfig::default(), &StrengthVector::ones(graph.num_relations())).unwrap();
        let g = g2_prime_gradient(&graph, &theta, &fit.gamma, 0.1).unwrap();
        for (r, &gr) in g.iter().enumerate() {
            if fit.gamma.get(r) > 0.0 {
                prop_assert!(gr.abs() <= 1e-6, "relation {r}: gradient {gr}");
            } else {
                prop_assert!(gr <= 1e-6, "relation {r} at 0 with gradient {gr}");
            }
        }
    }
}
