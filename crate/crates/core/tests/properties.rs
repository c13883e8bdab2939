//! Property-based invariants.

mod common;

use proptest::prelude::*;
use saddle_alloc::oracle::{affine_projector, project_consensus_complement};
use saddle_alloc::solver::{certify, LipschitzEstimate, WeightBound};
use saddle_alloc::tracker::{format_number, Mode, StepRecord, TrackingSummary, TrajectoryLog};
use saddle_alloc::weights::{laplacian, validate_weight_matrix, DEFAULT_TOL};
use saddle_alloc::{Graph, RunOptions, SaddleSolver, StepSizes};

use common::{norm, random_graph, random_instance, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn iterates_stay_feasible_and_duals_nonnegative(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let opts = RunOptions { max_iter: 300, snapshot_every: 1, keep_states: true, ..Default::default() };
        let trace = SaddleSolver::new(&inst.problem, &inst.weights, inst.steps).unwrap().run(&opts).unwrap();
        let tol = 1e-9 * (1.0 + norm(inst.problem.x_tot()));
        prop_assert!(trace.feasibility.iter().all(|&r| r <= tol));
        for (_, z) in trace.states() {
            prop_assert!(z.mu.iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn laplacians_of_connected_graphs_are_admissible(seed in any::<u64>(), nodes in 2usize..12) {
        let g = random_graph(&mut rng(seed), nodes, 0.3);
        let w = laplacian(&g);
        prop_assert!(validate_weight_matrix(w.entries(), &g, DEFAULT_TOL).unwrap().passed());
        prop_assert!(w.spectral().lambda2 > 1e-9);
    }

    #[test]
    fn spectrum_is_invariant_under_relabelling(seed in any::<u64>(), nodes in 2usize..10) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, nodes, 0.4);
        let mut perm: Vec<usize> = (0..nodes).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let h = g.relabel(&perm).unwrap();
        let (a, b) = (laplacian(&g).spectral(), laplacian(&h).spectral());
        prop_assert!((a.lambda2 - b.lambda2).abs() < 1e-9);
        prop_assert!((a.lambda_max - b.lambda_max).abs() < 1e-9);
        prop_assert!((a.sigma_max - b.sigma_max).abs() < 1e-9);
    }

    #[test]
    fn graph_json_round_trips(seed in any::<u64>(), nodes in 2usize..10) {
        let g = random_graph(&mut rng(seed), nodes, 0.3);
        prop_assert_eq!(Graph::from_json_str(&g.to_json_string()).unwrap(), g);
    }

    #[test]
    fn consensus_projection_is_idempotent(
        nodes in 1usize..6,
        n in 1usize..4,
        v in prop::collection::vec(-10.0f64..10.0, 15),
    ) {
        let v = &v[..(nodes * n).min(v.len())];
        prop_assume!(v.len() == nodes * n);
        let once = project_consensus_complement(v, nodes, n);
        let twice = project_consensus_complement(&once, nodes, n);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // the projection removes every per-coordinate sum
        for c in 0..n {
            let s: f64 = (0..nodes).map(|i| once[i * n + c]).sum();
            prop_assert!(s.abs() < 1e-11);
        }
        let p = affine_projector(nodes, n);
        prop_assert!(((&p * &p) - &p).abs().max() < 1e-12);
    }

    #[test]
    fn certified_steps_contract(
        phi in 1e-3f64..1.0,
        lip_ratio in 1.0f64..50.0,
        lambda_max in 0.1f64..10.0,
        beta_frac in 0.01f64..2.0,
        alpha_frac in 0.01f64..2.0,
    ) {
        let f = phi * lip_ratio;
        let steps = StepSizes::new(alpha_frac * 2.0 * phi / (f * f), beta_frac / lambda_max).unwrap();
        let c = certify(WeightBound::Symmetric { lambda_max }, phi, LipschitzEstimate::analytic(f), steps).unwrap();
        let expected = 1.0 - 2.0 * c.alpha * c.kappa + c.alpha * c.alpha * c.c * c.c * f * f;
        prop_assert!((c.rate - expected).abs() <= 1e-15 * expected.abs().max(1.0));
        if c.is_certified() {
            prop_assert!(c.kappa > 0.0);
            prop_assert!(c.rate < 1.0);
        }
    }

    #[test]
    fn formatted_numbers_keep_twelve_digits(v in prop_oneof![-1e6f64..1e6, -1e-3f64..1e-3, -1e20f64..1e20]) {
        let s = format_number(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-12 * v.abs(), "{v} -> {s}");
    }

    #[test]
    fn trajectory_logs_round_trip(
        positions in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..5),
        steps in 1usize..4,
        dev in prop::option::of(0.0f64..1.0),
    ) {
        let pts: Vec<[f64; 2]> = positions.iter().map(|&(a, b)| [a, b]).collect();
        let records: Vec<StepRecord> = (1..=steps)
            .map(|k| StepRecord {
                k,
                target: [0.1 * k as f64, -0.3],
                positions: pts.clone(),
                feasibility_residual: 1e-15 * k as f64,
                barycenter_residual: 1e-16,
                max_edge_distance: 0.7,
                iterations: 2000,
                wall_time_s: 0.01,
                oracle_deviation: dev,
                regularization_gap: None,
            })
            .collect();
        let log = TrajectoryLog {
            initial: pts.clone(),
            records,
            summary: TrackingSummary {
                mode: Mode::Distributed,
                steps,
                max_barycenter_residual: 1e-16,
                max_oracle_deviation: dev,
                max_regularization_gap: None,
                messages: None,
            },
        };
        prop_assert_eq!(TrajectoryLog::from_json_str(&log.to_json_string()).unwrap(), log);
    }
}
