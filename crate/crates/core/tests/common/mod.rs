#![allow(dead_code)]

use fluxmp_core::graph::{Direction, Edge, FactorNode, VariableNode};
use fluxmp_core::DirectedFactorGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid graph with `n` factors and `k` variables. Each variable
/// touches between one and `max_links` distinct factors in random
/// directions; factors left without edges get a fresh source variable.
pub fn random_graph(seed: u64, n: usize, k: usize, max_links: usize) -> DirectedFactorGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut touched = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    for v in 0..k {
        order.shuffle(&mut rng);
        let links = rng.random_range(1..=max_links.min(n).max(1));
        for &f in &order[..links] {
            touched[f] = true;
            let direction = if rng.random_bool(0.5) {
                Direction::VariableToFactor
            } else {
                Direction::FactorToVariable
            };
            let coefficient = if rng.random_bool(0.2) { 2.0 } else { 1.0 };
            edges.push(Edge {
                factor: f,
                variable: v,
                direction,
                coefficient,
            });
        }
    }
    let mut k = k;
    for (f, t) in touched.iter().enumerate() {
        if !t {
            edges.push(Edge {
                factor: f,
                variable: k,
                direction: Direction::VariableToFactor,
                coefficient: 1.0,
            });
            k += 1;
        }
    }
    let factors = (0..n)
        .map(|id| FactorNode {
            id,
            name: format!("f{id}"),
        })
        .collect();
    let variables = (0..k)
        .map(|id| VariableNode {
            id,
            name: format!("v{id}"),
            features: vec!["x".into(), "y".into()],
        })
        .collect();
    DirectedFactorGraph::new(factors, variables, edges).expect("random graph is valid")
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
