//! The saddle-point iteration executed as communicating node programs.
//!
//! Each iteration is one synchronous round made of two message phases:
//!
//! 1. every node computes its gradient block `∇_{x_i}L` from its own data, cached neighbor
//!    blocks and edge duals, and sends it to its neighbors;
//! 2. every node combines `Σ_j W_ij ∇_{x_j}L`, updates `x_i` and the duals it owns, and
//!    sends the new block plus the shared edge duals to its neighbors.
//!
//! The dual of edge `(i, j)` is owned by `min(i, j)`; the other endpoint keeps a mirror
//! refreshed in phase 2. A round therefore moves exactly `4E` directed messages. Caches
//! are seeded from the initial state when the network is partitioned.
//!
//! Nodes sum in ascending neighbor order through the same kernels as
//! [`SaddleSolver`], so the reassembled state equals the centralized iterate bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{EdgeFn, NodeFn};
use crate::problem::{local_grad_block, IncidentTerm, ProblemInstance, StackedPoint};
use crate::solver::{dual_update, weighted_direction, RunOptions, SaddleSolver, StepOutcome, StepSizes, Trace};
use crate::weights::WeightMatrix;

/// An incident edge constraint as stored by one endpoint.
#[derive(Clone)]
struct LocalEdge {
    index: usize,
    other: usize,
    /// Whether this node is the smaller endpoint (and so owns the dual).
    owner: bool,
    g: EdgeFn,
}

/// The state and local data of one node.
#[derive(Clone)]
pub struct NodeProgram {
    id: usize,
    x: Vec<f64>,
    cost: NodeFn,
    nu: f64,
    epsilon: f64,
    steps: StepSizes,
    edges: Vec<LocalEdge>,
    node_constraint: Option<NodeFn>,
    node_dual: f64,
    /// Duals of owned edges, keyed by edge index.
    owned_duals: BTreeMap<usize, f64>,
    /// Read-only copies of duals owned by neighbors.
    mirrored_duals: BTreeMap<usize, f64>,
    /// `W_ij` for `j ∈ N_i ∪ {i}`, ascending in `j`.
    row: Vec<(usize, f64)>,
    neighbor_x: BTreeMap<usize, Vec<f64>>,
    /// Own gradient block from phase 1.
    grad: Vec<f64>,
    rounds: usize,
}

impl std::fmt::Debug for NodeProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeProgram")
            .field("id", &self.id)
            .field("x", &self.x)
            .field("owned_duals", &self.owned_duals)
            .field("mirrored_duals", &self.mirrored_duals)
            .field("node_dual", &self.node_dual)
            .field("row", &self.row)
            .finish()
    }
}

impl NodeProgram {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn owned_duals(&self) -> &BTreeMap<usize, f64> {
        &self.owned_duals
    }

    pub fn mirrored_duals(&self) -> &BTreeMap<usize, f64> {
        &self.mirrored_duals
    }

    /// Dual of the node constraint, if the node has one.
    pub fn node_dual(&self) -> Option<f64> {
        self.node_constraint.as_ref().map(|_| self.node_dual)
    }

    pub fn weight_row(&self) -> &[(usize, f64)] {
        &self.row
    }

    /// Incident edge indices this node knows about.
    pub fn incident_edges(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.index).collect()
    }

    pub fn neighbors(&self) -> Vec<usize> {
        self.neighbor_x.keys().copied().collect()
    }

    fn edge_dual(&self, e: &LocalEdge) -> f64 {
        if e.owner {
            self.owned_duals[&e.index]
        } else {
            self.mirrored_duals[&e.index]
        }
    }

    fn compute_gradient(&mut self) {
        let mut grad = std::mem::take(&mut self.grad);
        let terms = self.edges.iter().map(|e| IncidentTerm {
            g: &e.g,
            first: e.owner,
            other: &self.neighbor_x[&e.other],
            mu: self.edge_dual(e),
        });
        local_grad_block(
            &self.cost,
            self.nu,
            &self.x,
            terms,
            self.node_constraint.as_ref().map(|h| (h, self.node_dual)),
            &mut grad,
        );
        self.grad = grad;
    }

    fn phase1(&mut self) -> Vec<RoundMessage> {
        self.compute_gradient();
        self.neighbor_x
            .keys()
            .map(|&to| RoundMessage {
                from: self.id,
                to,
                payload: Payload::Gradient {
                    grad_block: self.grad.clone(),
                },
            })
            .collect()
    }

    fn phase2(&mut self, grads: &BTreeMap<usize, Vec<f64>>) -> Result<Vec<RoundMessage>> {
        for &(j, _) in &self.row {
            if j != self.id && !grads.contains_key(&j) {
                return Err(Error::MissingMessage {
                    node: self.id,
                    from: j,
                    phase: 1,
                });
            }
        }
        let (alpha, eps) = (self.steps.alpha, self.epsilon);
        // duals first: they read the old blocks
        let mut new_owned = BTreeMap::new();
        for e in self.edges.iter().filter(|e| e.owner) {
            let g = e.g.value(&self.x, &self.neighbor_x[&e.other]);
            new_owned.insert(e.index, dual_update(self.owned_duals[&e.index], g, alpha, eps));
        }
        if let Some(h) = &self.node_constraint {
            self.node_dual = dual_update(self.node_dual, h.value(&self.x), alpha, eps);
        }
        self.owned_duals = new_owned;

        let mut dir = vec![0.0; self.x.len()];
        let own = &self.grad;
        weighted_direction(
            alpha * self.steps.beta,
            self.row.iter().map(|&(j, w)| {
                (
                    w,
                    if j == self.id {
                        own.as_slice()
                    } else {
                        grads[&j].as_slice()
                    },
                )
            }),
            &mut dir,
        );
        for (x, d) in self.x.iter_mut().zip(&dir) {
            *x -= 1.0 * d;
        }

        let mut out = Vec::with_capacity(self.neighbor_x.len());
        for &to in self.neighbor_x.keys() {
            let edge_duals: Vec<(usize, f64)> = self
                .edges
                .iter()
                .filter(|e| e.owner && e.other == to)
                .map(|e| (e.index, self.owned_duals[&e.index]))
                .collect();
            out.push(RoundMessage {
                from: self.id,
                to,
                payload: Payload::State {
                    x_block: self.x.clone(),
                    edge_duals,
                },
            });
        }
        self.rounds += 1;
        Ok(out)
    }

    fn absorb_state(&mut self, msg: &RoundMessage) -> Result<()> {
        let Payload::State { x_block, edge_duals } = &msg.payload else {
            return Err(Error::ScheduleMismatch(format!(
                "node {} got a gradient message from {} between rounds",
                self.id, msg.from
            )));
        };
        let slot = self
            .neighbor_x
            .get_mut(&msg.from)
            .ok_or_else(|| Error::InvalidParameter(format!("message from non-neighbor {} to {}", msg.from, self.id)))?;
        slot.clone_from(x_block);
        for &(e, v) in edge_duals {
            match self.mirrored_duals.get_mut(&e) {
                Some(m) => *m = v,
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "node {} does not mirror edge {e}",
                        self.id
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// Phase 1.
    Gradient { grad_block: Vec<f64> },
    /// Phase 2: new block and the duals of edges shared with the recipient and owned by the sender.
    State {
        x_block: Vec<f64>,
        edge_duals: Vec<(usize, f64)>,
    },
}

impl Payload {
    pub fn phase(&self) -> u8 {
        match self {
            Payload::Gradient { .. } => 1,
            Payload::State { .. } => 2,
        }
    }

    /// Number of scalars carried.
    pub fn size(&self) -> usize {
        match self {
            Payload::Gradient { grad_block } => grad_block.len(),
            Payload::State { x_block, edge_duals } => x_block.len() + edge_duals.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMessage {
    pub from: usize,
    pub to: usize,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MessageStats {
    pub rounds: usize,
    pub messages_total: usize,
    pub scalars_transferred: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLogEntry {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub phase: u8,
    pub size: usize,
}

/// Splits `p` into node programs holding the state `z`.
///
/// Node `i` receives `f_i`, `h_i`, the constraints of its incident edges, row `i` of `W`
/// restricted to `N_i ∪ {i}`, and copies of its neighbors' blocks and shared duals from `z`.
pub fn partition(
    p: &ProblemInstance,
    w: &WeightMatrix,
    steps: StepSizes,
    z: &StackedPoint,
) -> Result<Vec<NodeProgram>> {
    p.check_point(z)?;
    let solver = SaddleSolver::new(p, w, steps)?;
    let graph = p.graph();
    let mut nodes = Vec::with_capacity(p.node_count());
    for i in 0..p.node_count() {
        let mut edges = Vec::new();
        let mut owned_duals = BTreeMap::new();
        let mut mirrored_duals = BTreeMap::new();
        for &e in graph.incident_edges(i) {
            let Some(g) = p.edge_fn(e) else { continue };
            let (a, b) = graph.edges()[e];
            let owner = i == a;
            let mu = z.mu[p.edge_slot(e).expect("present constraint has a slot")];
            if owner {
                owned_duals.insert(e, mu);
            } else {
                mirrored_duals.insert(e, mu);
            }
            edges.push(LocalEdge {
                index: e,
                other: if owner { b } else { a },
                owner,
                g: g.clone(),
            });
        }
        let neighbor_x = graph
            .neighbors(i)
            .iter()
            .map(|&j| (j, p.block(&z.x, j).to_vec()))
            .collect();
        nodes.push(NodeProgram {
            id: i,
            x: p.block(&z.x, i).to_vec(),
            cost: p.cost_fn(i).clone(),
            nu: p.nu(),
            epsilon: p.epsilon(),
            steps,
            edges,
            node_constraint: p.node_fn(i).cloned(),
            node_dual: p.node_slot(i).map_or(0.0, |q| z.mu[q]),
            owned_duals,
            mirrored_duals,
            row: solver.weight_row(i),
            neighbor_x,
            grad: vec![0.0; p.n()],
            rounds: 0,
        });
    }
    Ok(nodes)
}

/// Stacks the node states back into `z = (x, μ)`.
pub fn reassemble(p: &ProblemInstance, nodes: &[NodeProgram]) -> StackedPoint {
    let mut x = Vec::with_capacity(p.dim_x());
    for node in nodes {
        x.extend_from_slice(&node.x);
    }
    let mut mu = vec![0.0; p.m()];
    for node in nodes {
        for (&e, &v) in &node.owned_duals {
            mu[p.edge_slot(e).expect("owned edge has a slot")] = v;
        }
        if let Some(q) = p.node_slot(node.id) {
            mu[q] = node.node_dual;
        }
    }
    StackedPoint::new(x, mu)
}

fn check_edge(nodes: &[NodeProgram], msg: &RoundMessage) -> Result<()> {
    let ok = msg.to < nodes.len() && nodes[msg.to].neighbor_x.contains_key(&msg.from);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "message {} -> {} does not follow an edge",
            msg.from, msg.to
        )))
    }
}

/// One synchronous round.
///
/// `inbox` holds the previous round's phase-2 messages (empty for the first round, whose
/// caches come from [`partition`]). Returns this round's phase-2 messages, which are the
/// next round's inbox, and the round's message count and size.
pub fn round(
    nodes: &mut [NodeProgram],
    inbox: &[RoundMessage],
    mut log: Option<&mut Vec<MessageLogEntry>>,
) -> Result<(Vec<RoundMessage>, MessageStats)> {
    let round_no = nodes.first().map_or(0, |n| n.rounds);
    if nodes.iter().any(|n| n.rounds != round_no) {
        return Err(Error::ScheduleMismatch("nodes are in different rounds".into()));
    }
    // previous phase 2 must be complete
    if round_no > 0 {
        for node in nodes.iter() {
            for &j in node.neighbor_x.keys() {
                if !inbox.iter().any(|m| m.to == node.id && m.from == j) {
                    return Err(Error::MissingMessage {
                        node: node.id,
                        from: j,
                        phase: 2,
                    });
                }
            }
        }
    }
    for msg in inbox {
        check_edge(nodes, msg)?;
        nodes[msg.to].absorb_state(msg)?;
    }

    let mut stats = MessageStats {
        rounds: 1,
        ..Default::default()
    };
    let mut record = |msg: &RoundMessage, stats: &mut MessageStats| {
        stats.messages_total += 1;
        stats.scalars_transferred += msg.payload.size();
        if let Some(log) = log.as_deref_mut() {
            log.push(MessageLogEntry {
                round: round_no,
                from: msg.from,
                to: msg.to,
                phase: msg.payload.phase(),
                size: msg.payload.size(),
            });
        }
    };

    let mut grads: Vec<BTreeMap<usize, Vec<f64>>> = vec![BTreeMap::new(); nodes.len()];
    let mut phase1 = Vec::new();
    for node in nodes.iter_mut() {
        phase1.extend(node.phase1());
    }
    for msg in phase1 {
        check_edge(nodes, &msg)?;
        record(&msg, &mut stats);
        if let Payload::Gradient { grad_block } = msg.payload {
            grads[msg.to].insert(msg.from, grad_block);
        }
    }

    let mut outbox = Vec::new();
    for (node, g) in nodes.iter_mut().zip(&grads) {
        outbox.extend(node.phase2(g)?);
    }
    for msg in &outbox {
        check_edge(nodes, msg)?;
        record(msg, &mut stats);
    }
    Ok((outbox, stats))
}

/// Runs the iteration over the simulated network with the same options and trace
/// schema as [`SaddleSolver::run`]. Barriers are not supported here.
pub fn run_network(
    p: &ProblemInstance,
    w: &WeightMatrix,
    steps: StepSizes,
    opts: &RunOptions,
) -> Result<(Trace, MessageStats)> {
    let (trace, stats, _) = run_network_logged(p, w, steps, opts, false)?;
    Ok((trace, stats))
}

/// [`run_network`] that can also return the per-message log.
pub fn run_network_logged(
    p: &ProblemInstance,
    w: &WeightMatrix,
    steps: StepSizes,
    opts: &RunOptions,
    keep_log: bool,
) -> Result<(Trace, MessageStats, Vec<MessageLogEntry>)> {
    if opts.barrier.is_some() {
        return Err(Error::InvalidParameter(
            "the barrier variant is only available in centralized mode".into(),
        ));
    }
    let solver = SaddleSolver::new(p, w, steps)?;
    let z0 = solver.initial_point(opts)?;
    let mut nodes = partition(p, w, steps, &z0)?;
    let mut inbox = Vec::new();
    let mut stats = MessageStats::default();
    let mut log = Vec::new();

    let (trace, err) = solver.drive(opts, |z, _| {
        // observer-side quantity for the trace only; nodes never see it
        let grad_mu = p.grad_mu(z)?;
        let (out, s) = round(&mut nodes, &inbox, keep_log.then_some(&mut log))?;
        inbox = out;
        stats.rounds += s.rounds;
        stats.messages_total += s.messages_total;
        stats.scalars_transferred += s.scalars_transferred;
        let mut grad_x = Vec::with_capacity(p.dim_x());
        for node in &nodes {
            grad_x.extend_from_slice(&node.grad);
        }
        let next = reassemble(p, &nodes);
        Ok(StepOutcome {
            next,
            grad_x,
            grad_mu,
            gamma: 1.0,
        })
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((trace, stats, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    /// Max over snapshots of `||z_a − z_b||∞`.
    pub max_deviation: f64,
    /// First snapshot `τ` at which the states differ at all.
    pub first_divergent_tau: Option<usize>,
}

/// Compares two traces recorded with the same snapshot schedule and `keep_states`.
pub fn equivalence_check(a: &Trace, b: &Trace) -> Result<Equivalence> {
    let taus_a: Vec<usize> = a.records.iter().map(|r| r.tau).collect();
    let taus_b: Vec<usize> = b.records.iter().map(|r| r.tau).collect();
    if taus_a != taus_b {
        return Err(Error::ScheduleMismatch(format!("{taus_a:?} vs {taus_b:?}")));
    }
    let mut max_deviation: f64 = 0.0;
    let mut first_divergent_tau = None;
    for (ra, rb) in a.records.iter().zip(&b.records) {
        let (Some(sa), Some(sb)) = (&ra.state, &rb.state) else {
            return Err(Error::ScheduleMismatch(format!("no state recorded at tau {}", ra.tau)));
        };
        if sa.x.len() != sb.x.len() || sa.mu.len() != sb.mu.len() {
            return Err(Error::ScheduleMismatch(format!("state sizes differ at tau {}", ra.tau)));
        }
        let d = sa.max_abs_diff(sb);
        if d > 0.0 && first_divergent_tau.is_none() {
            first_divergent_tau = Some(ra.tau);
        }
        max_deviation = max_deviation.max(d);
    }
    Ok(Equivalence {
        max_deviation,
        first_divergent_tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{ShiftedSquare, SquaredDistance};
    use crate::graph::Graph;
    use crate::weights::laplacian;
    use std::sync::Arc;

    fn ring_problem() -> ProblemInstance {
        let g = Graph::seven_robot_ring();
        let mut b = ProblemInstance::builder(g, 2)
            .all_edges(Arc::new(SquaredDistance::new(1.2)))
            .node_constraint(5, Arc::new(ShiftedSquare::new(1.0, vec![0.1, 0.0], -0.25)))
            .x_tot(vec![0.7, -0.35])
            .regularization(10.0, 0.01);
        for i in 0..7 {
            let c = vec![(i as f64).cos(), (i as f64).sin()];
            b = b.cost(i, Arc::new(ShiftedSquare::new(if i == 5 { 0.0 } else { 1.0 }, c, 0.0)));
        }
        b.build().unwrap()
    }

    #[test]
    fn ownership_follows_smaller_index() {
        let p = ring_problem();
        let w = laplacian(p.graph());
        let z = StackedPoint::new(p.uniform_split(), vec![0.0; p.m()]);
        let nodes = partition(&p, &w, StepSizes::new(0.01, 0.2).unwrap(), &z).unwrap();
        // node 1 (0-based 0) owns (1,2), (1,4), (1,7)
        let owned: Vec<(usize, usize)> = nodes[0].owned_duals().keys().map(|&e| p.graph().edges()[e]).collect();
        assert_eq!(owned, vec![(0, 1), (0, 3), (0, 6)]);
        assert!(nodes[6].owned_duals().is_empty());
        for node in &nodes {
            let mut all: Vec<usize> = node
                .owned_duals()
                .keys()
                .chain(node.mirrored_duals().keys())
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, p.graph().incident_edges(node.id()));
        }
        assert_eq!(reassemble(&p, &nodes), z);
    }

    #[test]
    fn round_matches_centralized_step_bitwise() {
        let p = ring_problem();
        let w = laplacian(p.graph());
        let steps = StepSizes::new(0.01, 0.2).unwrap();
        let solver = SaddleSolver::new(&p, &w, steps).unwrap();
        let mut z = StackedPoint::new(p.uniform_split(), vec![0.0; p.m()]);
        z.x[0] += 0.3;
        z.x[4] -= 0.3;
        z.mu[2] = 0.5;
        let mut nodes = partition(&p, &w, steps, &z).unwrap();
        let mut inbox = Vec::new();
        for tau in 0..5 {
            let (out, stats) = round(&mut nodes, &inbox, None).unwrap();
            assert_eq!(stats.messages_total, 4 * p.graph().edge_count());
            inbox = out;
            z = solver.step(&z, None, tau).unwrap().next;
            assert_eq!(reassemble(&p, &nodes), z);
        }
    }

    #[test]
    fn missing_phase2_message_is_detected() {
        let p = ring_problem();
        let w = laplacian(p.graph());
        let steps = StepSizes::new(0.01, 0.2).unwrap();
        let z = StackedPoint::new(p.uniform_split(), vec![0.0; p.m()]);
        let mut nodes = partition(&p, &w, steps, &z).unwrap();
        let (mut out, _) = round(&mut nodes, &[], None).unwrap();
        out.retain(|m| !(m.from == 2 && m.to == 3));
        assert!(matches!(
            round(&mut nodes, &out, None),
            Err(Error::MissingMessage {
                node: 3,
                from: 2,
                phase: 2
            })
        ));
    }

    #[test]
    fn zero_iterations_sends_nothing() {
        let p = ring_problem();
        let w = laplacian(p.graph());
        let opts = RunOptions {
            max_iter: 0,
            ..Default::default()
        };
        let (trace, stats) = run_network(&p, &w, StepSizes::new(0.01, 0.2).unwrap(), &opts).unwrap();
        assert_eq!(stats, MessageStats::default());
        assert_eq!(trace.final_state.x, p.uniform_split());
    }

    #[test]
    fn equivalence_reports_divergence() {
        let p = ring_problem();
        let w = laplacian(p.graph());
        let steps = StepSizes::new(0.01, 0.2).unwrap();
        let opts = RunOptions {
            max_iter: 30,
            snapshot_every: 10,
            keep_states: true,
            ..Default::default()
        };
        let central = SaddleSolver::new(&p, &w, steps).unwrap().run(&opts).unwrap();
        let (dist, stats) = run_network(&p, &w, steps, &opts).unwrap();
        assert_eq!(stats.messages_total, 30 * 4 * 8);
        let eq = equivalence_check(&central, &dist).unwrap();
        assert_eq!(eq.max_deviation, 0.0);
        assert_eq!(eq.first_divergent_tau, None);

        let mut tampered = dist.clone();
        tampered.records[2].state.as_mut().unwrap().mu[0] += 1.0;
        let eq = equivalence_check(&central, &tampered).unwrap();
        assert_eq!(eq.first_divergent_tau, Some(20));
        assert!(eq.max_deviation >= 1.0);

        let mut short = dist;
        short.records.pop();
        assert!(matches!(
            equivalence_check(&central, &short),
            Err(Error::ScheduleMismatch(_))
        ));
    }
}
