//! Scenario files and per-step problem construction for barycenter tracking.
//!
//! At every time step `k ≥ 1` the robots solve
//!
//! ```text
//! minimize    Σ_i Q_i ||x_i − x_i(k−1)||²
//! subject to  ||x_i − x_j||² ≤ R²                (i, j) ∈ E
//!             ||x_i − x_i(k−1)||² ≤ v_max,i²      where bounded
//!             Σ_i x_i = N·y(k)
//! ```
//!
//! so the target `y(k)` is always the barycenter of the formation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::functions::{ShiftedSquare, SquaredDistance};
use crate::graph::Graph;
use crate::problem::ProblemInstance;
use crate::weights::WeightStrategy;

/// Robots move in the plane.
pub const DIM: usize = 2;
/// Default number of steps of the synthetic target path.
pub const DEFAULT_STEPS: usize = 150;
/// Upper limit on path length accepted from files.
pub const MAX_STEPS: usize = 100_000;
/// Circumradius of the automatic initial formation.
pub const AUTO_RADIUS: f64 = 0.6;

/// The default smooth target path `y(k) = (0.02k, 0.5·sin(0.04k))`.
pub fn synthetic_target(k: usize) -> [f64; 2] {
    let t = k as f64;
    [0.02 * t, 0.5 * (0.04 * t).sin()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub nu: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_iters")]
    pub iters_per_step: usize,
}

fn default_iters() -> usize {
    2000
}

/// Settings of the sampled Lipschitz estimate used by certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSettings {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Half-width of the sampled box around each robot; defaults to the range `R`.
    #[serde(default)]
    pub node_radius: Option<f64>,
    #[serde(default = "default_mu_max")]
    pub mu_max: f64,
}

fn default_samples() -> usize {
    2000
}

fn default_seed() -> u64 {
    7
}

fn default_mu_max() -> f64 {
    1.0
}

impl Default for LipschitzSettings {
    fn default() -> Self {
        LipschitzSettings {
            samples: default_samples(),
            seed: default_seed(),
            node_radius: None,
            mu_max: default_mu_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPath {
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetPath {
    /// `y(0), …, y(K)`.
    Explicit(Vec<[f64; 2]>),
    Synthetic {
        synthetic: SyntheticPath,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// Regular polygon of circumradius 0.6 around `y(0)`.
    Auto,
    /// Every robot at `y(0)`.
    AtTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialPositions {
    Mode(InitialMode),
    /// Explicit positions, shifted uniformly so that their barycenter is `y(0)`.
    Explicit(Vec<[f64; 2]>),
}

impl Default for InitialPositions {
    fn default() -> Self {
        InitialPositions::Mode(InitialMode::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    /// 1-based node pairs.
    pub edges: Vec<[usize; 2]>,
}

/// The scenario file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: GraphSpec,
    pub q_weights: Vec<f64>,
    pub range_r: f64,
    /// Per-robot step limit; `null` means unbounded. Omitted means all unbounded.
    #[serde(default)]
    pub v_max: Option<Vec<Option<f64>>>,
    pub target_path: TargetPath,
    #[serde(default)]
    pub initial_positions: InitialPositions,
    pub solver: SolverSettings,
    #[serde(default)]
    pub weight_strategy: WeightStrategy,
    #[serde(default)]
    pub lipschitz: Option<LipschitzSettings>,
}

/// A validated tracking scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: Graph,
    pub q_weights: Vec<f64>,
    pub range_r: f64,
    pub v_max: Vec<Option<f64>>,
    /// `y(0), …, y(K)`.
    pub target: Vec<[f64; 2]>,
    /// `x_i(0)`, stacked, with barycenter `y(0)`.
    pub initial: Vec<f64>,
    pub solver: SolverSettings,
    pub weight_strategy: WeightStrategy,
    pub lipschitz: LipschitzSettings,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")))
    }
}

fn finite_points(name: &str, pts: &[[f64; 2]]) -> Result<()> {
    if pts.iter().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.graph.nodes > self.graph.edges.len() + 1 {
            return Err(Error::DisconnectedGraph {
                components: self.graph.nodes - self.graph.edges.len(),
            });
        }
        let edges: Vec<(usize, usize)> = self.graph.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Graph::from_one_based(self.graph.nodes, &edges)?;
        let nodes = graph.node_count();

        check_dim("q_weights", nodes, self.q_weights.len())?;
        if self.q_weights.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
            return Err(Error::InvalidParameter("q_weights must be nonnegative".into()));
        }
        positive("range_r", self.range_r)?;
        let v_max = self.v_max.unwrap_or_else(|| vec![None; nodes]);
        check_dim("v_max", nodes, v_max.len())?;
        for v in v_max.iter().flatten() {
            positive("v_max", *v)?;
        }

        let target = match self.target_path {
            TargetPath::Explicit(points) => points,
            TargetPath::Synthetic { synthetic } => {
                if synthetic.steps > MAX_STEPS {
                    return Err(Error::InvalidParameter(format!("at most {MAX_STEPS} steps")));
                }
                (0..=synthetic.steps).map(synthetic_target).collect()
            }
        };
        if target.len() < 2 {
            return Err(Error::InvalidParameter(
                "target path needs at least two points (K >= 1)".into(),
            ));
        }
        if target.len() > MAX_STEPS + 1 {
            return Err(Error::InvalidParameter(format!("at most {MAX_STEPS} steps")));
        }
        finite_points("target path", &target)?;

        let s = self.solver;
        for (name, v) in [
            ("nu", s.nu),
            ("epsilon", s.epsilon),
            ("alpha", s.alpha),
            ("beta", s.beta),
        ] {
            positive(name, v)?;
        }
        let lipschitz = self.lipschitz.unwrap_or_default();
        if lipschitz.samples == 0 {
            return Err(Error::InvalidParameter("lipschitz.samples must be positive".into()));
        }
        if let Some(r) = lipschitz.node_radius {
            positive("lipschitz.node_radius", r)?;
        }
        if !(lipschitz.mu_max >= 0.0 && lipschitz.mu_max.is_finite()) {
            return Err(Error::InvalidParameter("lipschitz.mu_max must be nonnegative".into()));
        }

        let y0 = target[0];
        let mut initial: Vec<f64> = match self.initial_positions {
            InitialPositions::Mode(InitialMode::AtTarget) => (0..nodes).flat_map(|_| y0).collect(),
            InitialPositions::Mode(InitialMode::Auto) => (0..nodes)
                .flat_map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / nodes as f64;
                    [y0[0] + AUTO_RADIUS * a.cos(), y0[1] + AUTO_RADIUS * a.sin()]
                })
                .collect(),
            InitialPositions::Explicit(points) => {
                check_dim("initial_positions", nodes, points.len())?;
                finite_points("initial_positions", &points)?;
                points.into_iter().flatten().collect()
            }
        };
        center_on(&mut initial, y0);

        Ok(Scenario {
            graph,
            q_weights: self.q_weights,
            range_r: self.range_r,
            v_max,
            target,
            initial,
            solver: s,
            weight_strategy: self.weight_strategy,
            lipschitz,
        })
    }
}

/// Shifts all blocks uniformly so that their barycenter is `y`.
fn center_on(x: &mut [f64], y: [f64; 2]) {
    let nodes = (x.len() / DIM) as f64;
    let mut mean = [0.0; DIM];
    for (k, v) in x.iter().enumerate() {
        mean[k % DIM] += v / nodes;
    }
    for (k, v) in x.iter_mut().enumerate() {
        *v += y[k % DIM] - mean[k % DIM];
    }
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(s)?;
        file.into_scenario()
    }

    /// Seven robots on the ring-with-chords graph, `R = 1.2`, `Q_6 = 0`, `v_max,6 = 0.5`,
    /// `ν = 10`, `ε = 0.01`, `α = 0.01`, `β = 0.2`, 2000 iterations per step, and the
    /// synthetic target path with `steps` steps.
    pub fn seven_robots(steps: usize) -> Result<Self> {
        let g = Graph::seven_robot_ring();
        let file = ScenarioFile {
            graph: GraphSpec {
                nodes: 7,
                edges: g.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            },
            q_weights: vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0],
            range_r: 1.2,
            v_max: Some(vec![None, None, None, None, None, Some(0.5), None]),
            target_path: TargetPath::Synthetic {
                synthetic: SyntheticPath { steps },
            },
            initial_positions: InitialPositions::default(),
            solver: SolverSettings {
                nu: 10.0,
                epsilon: 0.01,
                alpha: 0.01,
                beta: 0.2,
                iters_per_step: 2000,
            },
            weight_strategy: WeightStrategy::Laplacian,
            lipschitz: None,
        };
        file.into_scenario()
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Number of time steps `K`.
    pub fn steps(&self) -> usize {
        self.target.len() - 1
    }

    pub fn target(&self, k: usize) -> [f64; 2] {
        self.target[k]
    }

    /// Radius of the boxes sampled when estimating the Lipschitz constant.
    pub fn lipschitz_radius(&self) -> f64 {
        self.lipschitz.node_radius.unwrap_or(self.range_r)
    }
}

/// The instance solved at step `k ≥ 1` given the positions `x(k−1)`.
pub fn step_problem(s: &Scenario, k: usize, prev: &[f64]) -> Result<ProblemInstance> {
    if k == 0 || k > s.steps() {
        return Err(Error::InvalidParameter(format!("step {k} outside 1..={}", s.steps())));
    }
    let nodes = s.node_count();
    check_dim("previous positions", nodes * DIM, prev.len())?;
    let y = s.target(k);
    let mut b = ProblemInstance::builder(s.graph.clone(), DIM)
        .all_edges(Arc::new(SquaredDistance::new(s.range_r)))
        .x_tot(vec![nodes as f64 * y[0], nodes as f64 * y[1]])
        .regularization(s.solver.nu, s.solver.epsilon);
    for i in 0..nodes {
        let anchor = prev[i * DIM..(i + 1) * DIM].to_vec();
        b = b.cost(i, Arc::new(ShiftedSquare::new(s.q_weights[i], anchor.clone(), 0.0)));
        if let Some(v) = s.v_max[i] {
            b = b.node_constraint(i, Arc::new(ShiftedSquare::new(1.0, anchor, -v * v)));
        }
    }
    b.build()
}

/// `x_i(k)⁽⁰⁾ = x_i(k−1) + (y(k) − y(k−1))`, and `x_i(0)⁽⁰⁾ = y(0)`.
pub fn warm_start(s: &Scenario, k: usize, prev: &[f64]) -> Result<Vec<f64>> {
    let nodes = s.node_count();
    if k > s.steps() {
        return Err(Error::InvalidParameter(format!("step {k} outside 0..={}", s.steps())));
    }
    if k == 0 {
        return Ok((0..nodes).flat_map(|_| s.target(0)).collect());
    }
    check_dim("previous positions", nodes * DIM, prev.len())?;
    let (y, y_prev) = (s.target(k), s.target(k - 1));
    let shift = [y[0] - y_prev[0], y[1] - y_prev[1]];
    Ok(prev.iter().enumerate().map(|(k, v)| v + shift[k % DIM]).collect())
}
