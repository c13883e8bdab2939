//! Seeded random problem instances shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_alloc::functions::{NodeFn, Quadratic, ShiftedSquare, SquaredDistance};
use saddle_alloc::solver::{estimate_lipschitz, SampleBox};
use saddle_alloc::weights::{design_weights, WeightMatrix, WeightStrategy};
use saddle_alloc::{Graph, ProblemInstance, StepSizes};

pub struct Instance {
    pub problem: ProblemInstance,
    pub weights: WeightMatrix,
    pub steps: StepSizes,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph: a random spanning tree plus each remaining pair with probability `extra`.
pub fn random_graph(rng: &mut impl Rng, nodes: usize, extra: f64) -> Graph {
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..nodes {
        let parent = order[rng.gen_range(0..k)];
        let child = order[k];
        edges.push((parent.min(child), parent.max(child)));
    }
    for i in 0..nodes {
        for j in i + 1..nodes {
            if !edges.contains(&(i, j)) && rng.gen_bool(extra) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(nodes, &edges).expect("spanning tree is connected")
}

fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Convex cost: a weighted squared distance or a random positive semidefinite quadratic.
pub fn random_cost(rng: &mut impl Rng, n: usize) -> NodeFn {
    if rng.gen_bool(0.5) {
        Arc::new(ShiftedSquare::new(
            rng.gen_range(0.2..2.0),
            uniform_vec(rng, n, -1.0, 1.0),
            0.0,
        ))
    } else {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = &a * a.transpose() * 0.5;
        Arc::new(Quadratic::new(
            q,
            uniform_vec(rng, n, -1.0, 1.0),
            rng.gen_range(-1.0..1.0),
        ))
    }
}

/// Random instance with range constraints on every edge, balls on some nodes and the
/// given regularization.
pub fn random_problem(rng: &mut impl Rng, nodes: usize, n: usize, nu: f64, epsilon: f64) -> ProblemInstance {
    let graph = random_graph(rng, nodes, 0.3);
    let mut b = ProblemInstance::builder(graph, n)
        .all_edges(Arc::new(SquaredDistance::new(rng.gen_range(0.5..2.0))))
        .x_tot(
            uniform_vec(rng, n, -1.0, 1.0)
                .into_iter()
                .map(|v| v * nodes as f64 * 0.5)
                .collect(),
        )
        .regularization(nu, epsilon);
    for i in 0..nodes {
        b = b.cost(i, random_cost(rng, n));
        if rng.gen_bool(0.5) {
            let r: f64 = rng.gen_range(1.0..3.0);
            b = b.node_constraint(i, Arc::new(ShiftedSquare::new(1.0, vec![0.0; n], -r * r)));
        }
    }
    b.build().expect("random instance is valid")
}

/// Step sizes from an estimated Lipschitz constant: `β = 0.9/λ_max`, `α = φ/F²`.
pub fn steps_for(p: &ProblemInstance, w: &WeightMatrix, seed: u64) -> StepSizes {
    let region = SampleBox {
        center: p.uniform_split(),
        node_radius: vec![2.0; p.node_count()],
        mu_max: 2.0,
    };
    let f = estimate_lipschitz(p, &region, 200, seed).expect("estimate").value;
    StepSizes::new(p.phi() / (f * f), 0.9 / w.spectral().lambda_max).expect("positive steps")
}

/// Random instance with `N ∈ [2, 10]`, `n ∈ [1, 3]`, `ν, ε ∈ [0.5, 2]`, Laplacian weights.
pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let nodes = r.gen_range(2..=10);
    let n = r.gen_range(1..=3);
    let nu = r.gen_range(0.5..2.0);
    let epsilon = r.gen_range(0.5..2.0);
    let problem = random_problem(&mut r, nodes, n, nu, epsilon);
    let weights = design_weights(problem.graph(), WeightStrategy::Laplacian);
    let steps = steps_for(&problem, &weights, seed);
    Instance {
        problem,
        weights,
        steps,
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
