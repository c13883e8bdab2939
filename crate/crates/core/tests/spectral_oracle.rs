//! Laplacian spectra checked against an independent cyclic Jacobi eigenvalue solver.

mod common;

use saddle_alloc::weights::{laplacian, spectral_summary, validate_weight_matrix, DEFAULT_TOL};
use saddle_alloc::Graph;

/// Eigenvalues of the robot ring's Laplacian, computed by [`jacobi_eigenvalues`].
#[allow(clippy::excessive_precision)]
const RING_SPECTRUM: [f64; 7] = [
    0.0,
    0.75302039628253293895,
    1.4679111137620439296,
    2.4450418679126288086,
    2.6527036446661393023,
    3.8019377358048382525,
    4.8793852415718167681,
];

/// Cyclic Jacobi rotations on a dense symmetric matrix; returns sorted eigenvalues.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense Laplacian built directly from the edge list.
fn dense_laplacian(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut l = vec![vec![0.0; n]; n];
    for &(i, j) in g.edges() {
        l[i][i] += 1.0;
        l[j][j] += 1.0;
        l[i][j] -= 1.0;
        l[j][i] -= 1.0;
    }
    l
}

#[test]
fn ring_spectrum_matches_frozen_values() {
    let ev = jacobi_eigenvalues(dense_laplacian(&Graph::seven_robot_ring()));
    for (a, b) in ev.iter().zip(RING_SPECTRUM) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn ring_summary_matches_oracle() {
    let w = laplacian(&Graph::seven_robot_ring());
    let s = w.spectral();
    assert!((s.lambda2 - RING_SPECTRUM[1]).abs() < 1e-10);
    assert!((s.lambda_max - RING_SPECTRUM[6]).abs() < 1e-10);
    // symmetric positive semidefinite: singular values are the eigenvalues
    assert!((s.sigma_max - RING_SPECTRUM[6]).abs() < 1e-10);
    assert!(
        validate_weight_matrix(w.entries(), &Graph::seven_robot_ring(), DEFAULT_TOL)
            .unwrap()
            .passed()
    );
}

#[test]
fn path_and_complete_graphs_have_closed_form_spectra() {
    for n in 2..=9 {
        let path = Graph::path(n).unwrap();
        let ev = jacobi_eigenvalues(dense_laplacian(&path));
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / n as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
        let complete = Graph::complete(n).unwrap();
        let s = laplacian(&complete).spectral();
        assert!((s.lambda2 - n as f64).abs() < 1e-10);
        assert!((s.lambda_max - n as f64).abs() < 1e-10);
    }
}

#[test]
fn random_graph_summaries_match_oracle() {
    for seed in 0..30 {
        let mut r = common::rng(seed);
        let nodes = 2 + (seed as usize % 11);
        let g = common::random_graph(&mut r, nodes, 0.3);
        let ev = jacobi_eigenvalues(dense_laplacian(&g));
        let s = spectral_summary(laplacian(&g).entries());
        assert!(ev[0].abs() < 1e-12);
        assert!((s.lambda2 - ev[1]).abs() < 1e-9, "seed {seed}");
        assert!((s.lambda_max - ev[nodes - 1]).abs() < 1e-9, "seed {seed}");
        assert!((s.sigma_max - ev[nodes - 1]).abs() < 1e-9, "seed {seed}");
    }
}
