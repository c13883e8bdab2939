//! The feasibility-preserving regularized saddle-point iteration.
//!
//! ```text
//! x⁺ = x − αβ (W ⊗ Iₙ) ∇ₓL(x, μ)
//! μ⁺ = max(0, μ + α ∇_μL(x, μ))
//! ```
//!
//! Both updates read the same iterate `z = (x, μ)`. Because `1ᵀW = 0`, the primal
//! update never moves `Σ_i x_i`, so a feasible start stays feasible.

mod bounds;
mod certify;

pub use bounds::{suboptimality_bound, violation_bound, EmpiricalConstants};
pub use certify::{
    certify, certify_weights, estimate_lipschitz, max_beta_nonsymmetric, Certificate, LipschitzEstimate,
    LipschitzSource, SampleBox, Verdict, WeightBound,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{norm, BarrierConfig, ProblemInstance, StackedPoint};
use crate::weights::WeightMatrix;

/// Absolute slack allowed on the coupling constraint at the start of a run,
/// scaled by `1 + ||x_tot||`.
pub const START_FEASIBILITY_TOL: f64 = 1e-9;

/// Smallest step-scaling factor the barrier backtrack may reach.
pub const BARRIER_GAMMA_FLOOR: f64 = 1e-12;

/// Relative margin kept between a barrier iterate and its ball boundary.
pub const BARRIER_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: f64,
}

impl StepSizes {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step sizes must be strictly positive (alpha = {alpha}, beta = {beta})"
            )));
        }
        Ok(StepSizes { alpha, beta })
    }
}

/// `acc = Σ_j w_ij g_j` over `row` (ascending `j`), then `dir = ab · acc`.
///
/// Shared by the centralized and the message-passing paths so both sum in the same order.
#[inline]
pub(crate) fn weighted_direction<'a>(ab: f64, row: impl Iterator<Item = (f64, &'a [f64])>, dir: &mut [f64]) {
    dir.fill(0.0);
    for (w, g) in row {
        for (d, gk) in dir.iter_mut().zip(g) {
            *d += w * gk;
        }
    }
    for d in dir.iter_mut() {
        *d *= ab;
    }
}

#[inline]
pub(crate) fn dual_update(mu: f64, g: f64, alpha: f64, epsilon: f64) -> f64 {
    (mu + alpha * (g - epsilon * mu)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIter,
    ResidualThreshold,
    BarrierBacktrackFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tau: usize,
    pub feasibility_residual: f64,
    pub grad_x_norm: f64,
    pub grad_mu_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dist_to_reference: Option<f64>,
    #[serde(skip)]
    pub state: Option<StackedPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktrackEvent {
    pub tau: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Snapshots every `snapshot_every` iterations, plus the final iterate.
    pub records: Vec<TraceRecord>,
    /// Coupling-constraint residual at every iterate `τ = 0..=iterations`.
    pub feasibility: Vec<f64>,
    pub backtracks: Vec<BacktrackEvent>,
    pub termination: Termination,
    pub iterations: usize,
    /// `||z⁽τ⁺¹⁾ − z⁽τ⁾||` of the last step taken.
    pub last_step_norm: f64,
    pub final_state: StackedPoint,
}

impl Trace {
    /// One JSON object per snapshot.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn max_feasibility_residual(&self) -> f64 {
        self.feasibility.iter().copied().fold(0.0, f64::max)
    }

    /// Snapshot states, when the run kept them.
    pub fn states(&self) -> impl Iterator<Item = (usize, &StackedPoint)> {
        self.records.iter().filter_map(|r| r.state.as_ref().map(|s| (r.tau, s)))
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_iter: usize,
    /// Stop once `||z⁽τ⁺¹⁾ − z⁽τ⁾|| ≤ residual_tol`; `0` disables the test.
    pub residual_tol: f64,
    /// Snapshot period; `0` records only the first and final iterates.
    pub snapshot_every: usize,
    /// Keep the full state in each snapshot.
    pub keep_states: bool,
    pub barrier: Option<BarrierConfig>,
    pub reference: Option<StackedPoint>,
    /// Defaults to the uniform split with `μ = 0`.
    pub initial: Option<StackedPoint>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_iter: 2000,
            residual_tol: 0.0,
            snapshot_every: 100,
            keep_states: false,
            barrier: None,
            reference: None,
            initial: None,
        }
    }
}

/// Result of one joint step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: StackedPoint,
    pub grad_x: Vec<f64>,
    pub grad_mu: Vec<f64>,
    /// Barrier step scaling actually applied (1 when no backtrack happened).
    pub gamma: f64,
}

/// The iteration bound to a problem, a weight matrix and fixed step sizes.
#[derive(Debug, Clone, Copy)]
pub struct SaddleSolver<'a> {
    problem: &'a ProblemInstance,
    weights: &'a WeightMatrix,
    steps: StepSizes,
}

impl<'a> SaddleSolver<'a> {
    pub fn new(problem: &'a ProblemInstance, weights: &'a WeightMatrix, steps: StepSizes) -> Result<Self> {
        check_dim("weight matrix size", problem.node_count(), weights.node_count())?;
        Ok(SaddleSolver {
            problem,
            weights,
            steps,
        })
    }

    pub fn problem(&self) -> &'a ProblemInstance {
        self.problem
    }

    pub fn weights(&self) -> &'a WeightMatrix {
        self.weights
    }

    pub fn steps(&self) -> StepSizes {
        self.steps
    }

    /// Row `i` of `W` restricted to `N_i ∪ {i}`, ascending.
    pub(crate) fn weight_row(&self, i: usize) -> Vec<(usize, f64)> {
        let mut cols: Vec<usize> = self.problem.graph().neighbors(i).to_vec();
        cols.push(i);
        cols.sort_unstable();
        cols.into_iter().map(|j| (j, self.weights.get(i, j))).collect()
    }

    /// `αβ (W ⊗ Iₙ) grad`, block by block.
    fn primal_direction(&self, grad: &[f64]) -> Vec<f64> {
        let n = self.problem.n();
        let ab = self.steps.alpha * self.steps.beta;
        let mut dir = vec![0.0; grad.len()];
        for i in 0..self.problem.node_count() {
            let row = self.weight_row(i);
            weighted_direction(
                ab,
                row.iter().map(|&(j, w)| (w, &grad[j * n..(j + 1) * n])),
                &mut dir[i * n..(i + 1) * n],
            );
        }
        dir
    }

    /// `x − αβ (W ⊗ Iₙ) ∇ₓL(x, μ)`.
    pub fn primal_step(&self, z: &StackedPoint) -> Result<Vec<f64>> {
        let grad = self.problem.grad_x(z)?;
        let dir = self.primal_direction(&grad);
        Ok(z.x.iter().zip(&dir).map(|(x, d)| x - 1.0 * d).collect())
    }

    /// `max(0, μ + α(g(x) − εμ))`.
    pub fn dual_step(&self, z: &StackedPoint) -> Result<Vec<f64>> {
        self.problem.check_point(z)?;
        let g = self.problem.eval_constraints(&z.x)?;
        let (alpha, eps) = (self.steps.alpha, self.problem.epsilon());
        Ok(z.mu
            .iter()
            .zip(&g)
            .map(|(&m, &v)| dual_update(m, v, alpha, eps))
            .collect())
    }

    /// One joint (Jacobi) step; with a barrier, the primal move is scaled back until
    /// every block stays strictly inside its ball.
    pub fn step(&self, z: &StackedPoint, barrier: Option<&BarrierConfig>, tau: usize) -> Result<StepOutcome> {
        let p = self.problem;
        let mut grad_x = p.grad_x(z)?;
        if let Some(b) = barrier {
            check_dim("barrier radii", p.node_count(), b.radii.len())?;
            p.add_barrier_gradient(&z.x, b, &mut grad_x);
        }
        let g = p.eval_constraints(&z.x)?;
        let eps = p.epsilon();
        let grad_mu: Vec<f64> = g.iter().zip(&z.mu).map(|(v, m)| v - eps * m).collect();
        let mu: Vec<f64> =
            z.mu.iter()
                .zip(&g)
                .map(|(&m, &v)| dual_update(m, v, self.steps.alpha, eps))
                .collect();

        let dir = self.primal_direction(&grad_x);
        let mut gamma = 1.0;
        let x = loop {
            let candidate: Vec<f64> = z.x.iter().zip(&dir).map(|(x, d)| x - gamma * d).collect();
            match barrier {
                Some(b) if !self.strictly_inside(&candidate, b) => {
                    gamma *= 0.5;
                    if gamma < BARRIER_GAMMA_FLOOR {
                        return Err(Error::BarrierBreakdown { tau, gamma });
                    }
                }
                _ => break candidate,
            }
        };
        Ok(StepOutcome {
            next: StackedPoint::new(x, mu),
            grad_x,
            grad_mu,
            gamma,
        })
    }

    fn strictly_inside(&self, x: &[f64], b: &BarrierConfig) -> bool {
        (0..self.problem.node_count()).all(|i| {
            let r = norm(self.problem.block(x, i));
            // NaN fails this comparison and forces a backtrack
            r < b.radii[i] * (1.0 - BARRIER_MARGIN)
        })
    }

    pub(crate) fn initial_point(&self, opts: &RunOptions) -> Result<StackedPoint> {
        let p = self.problem;
        let z = match &opts.initial {
            Some(z) => z.clone(),
            None => StackedPoint::new(p.uniform_split(), vec![0.0; p.m()]),
        };
        p.check_point(&z)?;
        let residual = p.feasibility_residual(&z.x)?;
        if residual > START_FEASIBILITY_TOL * (1.0 + norm(p.x_tot())) {
            return Err(Error::InfeasibleStart { residual });
        }
        if !z.dual_feasible() {
            return Err(Error::InvalidParameter("initial duals must be nonnegative".into()));
        }
        if let Some(b) = &opts.barrier {
            check_dim("barrier radii", p.node_count(), b.radii.len())?;
            for i in 0..p.node_count() {
                let r = norm(p.block(&z.x, i));
                if r >= b.radii[i] {
                    return Err(Error::OutsideBall {
                        node: i,
                        norm: r,
                        radius: b.radii[i],
                    });
                }
            }
        }
        Ok(z)
    }

    fn record(
        &self,
        opts: &RunOptions,
        tau: usize,
        z: &StackedPoint,
        feasibility: f64,
        grad_x: &[f64],
        grad_mu: &[f64],
    ) -> TraceRecord {
        TraceRecord {
            tau,
            feasibility_residual: feasibility,
            grad_x_norm: norm(grad_x),
            grad_mu_norm: norm(grad_mu),
            dist_to_reference: opts.reference.as_ref().map(|r| z.distance(r)),
            state: opts.keep_states.then(|| z.clone()),
        }
    }

    /// Runs the iteration and returns the trace; barrier breakdown is an error.
    pub fn run(&self, opts: &RunOptions) -> Result<Trace> {
        let (trace, err) = self.run_partial(opts)?;
        match err {
            Some(e) => Err(e),
            None => Ok(trace),
        }
    }

    /// Like [`run`](Self::run), but a barrier breakdown still returns the trace up to
    /// the failing iteration alongside the error.
    pub fn run_partial(&self, opts: &RunOptions) -> Result<(Trace, Option<Error>)> {
        let barrier = opts.barrier.clone();
        self.drive(opts, |z, tau| self.step(z, barrier.as_ref(), tau))
    }

    /// The run loop shared by every execution backend: `advance(z, τ)` must return the
    /// iterate `z⁽τ⁺¹⁾` together with the gradients it evaluated at `z⁽τ⁾`.
    pub(crate) fn drive(
        &self,
        opts: &RunOptions,
        mut advance: impl FnMut(&StackedPoint, usize) -> Result<StepOutcome>,
    ) -> Result<(Trace, Option<Error>)> {
        let p = self.problem;
        if let Some(r) = &opts.reference {
            p.check_point(r)?;
        }
        let mut z = self.initial_point(opts)?;
        let mut records = Vec::new();
        let mut feasibility = Vec::with_capacity(opts.max_iter + 1);
        let mut backtracks = Vec::new();
        let mut termination = Termination::MaxIter;
        let mut last_step_norm = 0.0;
        let mut failure = None;
        let mut tau = 0;

        while tau < opts.max_iter {
            let feas = p.feasibility_residual(&z.x)?;
            feasibility.push(feas);
            let outcome = match advance(&z, tau) {
                Ok(o) => o,
                Err(e @ Error::BarrierBreakdown { .. }) => {
                    termination = Termination::BarrierBacktrackFloor;
                    failure = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            };
            if !outcome.next.x.iter().chain(&outcome.next.mu).all(|v| v.is_finite()) {
                return Err(Error::Diverged { tau: tau + 1 });
            }
            let snapshot = if opts.snapshot_every == 0 {
                tau == 0
            } else {
                tau % opts.snapshot_every == 0
            };
            if snapshot {
                records.push(self.record(opts, tau, &z, feas, &outcome.grad_x, &outcome.grad_mu));
            }
            if outcome.gamma < 1.0 {
                backtracks.push(BacktrackEvent {
                    tau,
                    gamma: outcome.gamma,
                });
            }
            last_step_norm = outcome.next.distance(&z);
            z = outcome.next;
            tau += 1;
            if opts.residual_tol > 0.0 && last_step_norm <= opts.residual_tol {
                termination = Termination::ResidualThreshold;
                break;
            }
        }

        if failure.is_none() {
            let feas = p.feasibility_residual(&z.x)?;
            feasibility.push(feas);
            let mut grad_x = p.grad_x(&z)?;
            if let Some(b) = &opts.barrier {
                p.add_barrier_gradient(&z.x, b, &mut grad_x);
            }
            let grad_mu = p.grad_mu(&z)?;
            if records.last().is_none_or(|r| r.tau != tau) {
                records.push(self.record(opts, tau, &z, feas, &grad_x, &grad_mu));
            }
        }

        Ok((
            Trace {
                records,
                feasibility,
                backtracks,
                termination,
                iterations: tau,
                last_step_norm,
                final_state: z,
            },
            failure,
        ))
    }
}
