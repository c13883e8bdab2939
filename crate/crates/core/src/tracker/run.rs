//! End-to-end tracking runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dist::{run_network, MessageStats};
use crate::error::{Error, Result};
use crate::oracle::{solve_original_small, solve_regularized_centralized, ORIGINAL_SIZE_LIMIT};
use crate::problem::{norm, sq_dist, StackedPoint};
use crate::solver::{RunOptions, SaddleSolver, StepSizes};
use crate::weights::design_weights;

use super::scenario::{step_problem, warm_start, Scenario, DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Centralized,
    Distributed,
}

/// KKT tolerance of the per-step reference solve.
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub target: [f64; 2],
    pub positions: Vec<[f64; 2]>,
    /// `||Σ_i x_i(k) − N·y(k)||`.
    pub feasibility_residual: f64,
    /// `||(1/N) Σ_i x_i(k) − y(k)||`.
    pub barycenter_residual: f64,
    pub max_edge_distance: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// `||x_solver(k) − x*(k)||` against the regularized reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_deviation: Option<f64>,
    /// `||x*(k) − x_opt(k)||` against the unregularized optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub mode: Mode,
    pub steps: usize,
    pub max_barycenter_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_oracle_deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_regularization_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<MessageStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    /// Positions at `k = 0`.
    pub initial: Vec<[f64; 2]>,
    /// One record per step `k = 1..=K`.
    pub records: Vec<StepRecord>,
    pub summary: TrackingSummary,
}

impl TrajectoryLog {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let log: TrajectoryLog = serde_json::from_str(s)?;
        let nodes = log.initial.len();
        if log.records.iter().any(|r| r.positions.len() != nodes) {
            return Err(Error::InvalidParameter(
                "records disagree on the number of robots".into(),
            ));
        }
        Ok(log)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory log serializes")
    }

    /// Copy with every wall time set to zero, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut log = self.clone();
        for r in &mut log.records {
            r.wall_time_s = 0.0;
        }
        log
    }
}

fn to_points(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks(DIM).map(|c| [c[0], c[1]]).collect()
}

/// Runs every step of `s` in sequence, each warm-started from the previous positions.
///
/// With `oracle_check`, each step is also solved by the reference solvers and the
/// deviations are logged. A failing step aborts the run with its index.
pub fn run_tracking(s: &Scenario, mode: Mode, oracle_check: bool) -> Result<TrajectoryLog> {
    let w = design_weights(&s.graph, s.weight_strategy);
    let steps = StepSizes::new(s.solver.alpha, s.solver.beta)?;
    let nodes = s.node_count();
    let mut prev = s.initial.clone();
    let mut records = Vec::with_capacity(s.steps());
    let mut messages = (mode == Mode::Distributed).then(MessageStats::default);

    for k in 1..=s.steps() {
        let wrap = |e: Error| Error::Step { k, source: Box::new(e) };
        let start = Instant::now();
        let p = step_problem(s, k, &prev).map_err(wrap)?;
        let x0 = warm_start(s, k, &prev).map_err(wrap)?;
        let opts = RunOptions {
            max_iter: s.solver.iters_per_step,
            snapshot_every: 0,
            initial: Some(StackedPoint::new(x0, vec![0.0; p.m()])),
            ..Default::default()
        };
        let trace = match mode {
            Mode::Centralized => SaddleSolver::new(&p, &w, steps)
                .and_then(|solver| solver.run(&opts))
                .map_err(wrap)?,
            Mode::Distributed => {
                let (trace, stats) = run_network(&p, &w, steps, &opts).map_err(wrap)?;
                if let Some(m) = messages.as_mut() {
                    m.rounds += stats.rounds;
                    m.messages_total += stats.messages_total;
                    m.scalars_transferred += stats.scalars_transferred;
                }
                trace
            }
        };
        let wall_time_s = start.elapsed().as_secs_f64();
        let x = trace.final_state.x;

        let (oracle_deviation, regularization_gap) = if oracle_check {
            let sol = solve_regularized_centralized(&p, ORACLE_TOL, ORACLE_MAX_ITER).map_err(wrap)?;
            let gap = if p.dim_x() <= ORIGINAL_SIZE_LIMIT {
                let (x_opt, _) = solve_original_small(&p).map_err(wrap)?;
                Some(sq_dist(&sol.x_star, &x_opt).sqrt())
            } else {
                None
            };
            (Some(sq_dist(&x, &sol.x_star).sqrt()), gap)
        } else {
            (None, None)
        };

        let y = s.target(k);
        let gap = p.resource_gap(&x).map_err(wrap)?;
        let feasibility_residual = norm(&gap);
        let barycenter_residual = feasibility_residual / nodes as f64;
        let max_edge_distance = s
            .graph
            .edges()
            .iter()
            .map(|&(i, j)| sq_dist(p.block(&x, i), p.block(&x, j)).sqrt())
            .fold(0.0, f64::max);

        records.push(StepRecord {
            k,
            target: y,
            positions: to_points(&x),
            feasibility_residual,
            barycenter_residual,
            max_edge_distance,
            iterations: trace.iterations,
            wall_time_s,
            oracle_deviation,
            regularization_gap,
        });
        prev = x;
    }

    let max_of =
        |f: &dyn Fn(&StepRecord) -> Option<f64>| -> Option<f64> { records.iter().filter_map(f).reduce(f64::max) };
    let summary = TrackingSummary {
        mode,
        steps: records.len(),
        max_barycenter_residual: max_of(&|r| Some(r.barycenter_residual)).unwrap_or(0.0),
        max_oracle_deviation: max_of(&|r| r.oracle_deviation),
        max_regularization_gap: max_of(&|r| r.regularization_gap),
        messages,
    };
    Ok(TrajectoryLog {
        initial: to_points(&s.initial),
        records,
        summary,
    })
}
