//! Separable convex problems with a resource-allocation coupling constraint.
//!
//! ```text
//! minimize    Σ_i f_i(x_i)
//! subject to  g_ij(x_i, x_j) ≤ 0    (i, j) ∈ E
//!             h_i(x_i) ≤ 0          i ∈ V
//!             Σ_i x_i = x_tot
//! ```
//!
//! The inequality constraints are stacked edges-first (in [`Graph::edges`] order), then
//! nodes by index. Absent constraints are skipped, so `m ≤ E + N`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::functions::{EdgeFn, NodeFn, Quadratic, ShiftedSquare, SquaredDistance};
use crate::graph::Graph;

/// Primal-dual point `z = (x, μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedPoint {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
}

impl StackedPoint {
    pub fn new(x: Vec<f64>, mu: Vec<f64>) -> Self {
        StackedPoint { x, mu }
    }

    pub fn dual_feasible(&self) -> bool {
        self.mu.iter().all(|&m| m >= 0.0)
    }

    /// Euclidean distance over the stacked vector.
    pub fn distance(&self, other: &StackedPoint) -> f64 {
        (sq_dist(&self.x, &other.x) + sq_dist(&self.mu, &other.mu)).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (norm_sq(&self.x) + norm_sq(&self.mu)).sqrt()
    }

    /// Max-norm distance over the stacked vector.
    pub fn max_abs_diff(&self, other: &StackedPoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.mu.iter().zip(&other.mu))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Per-node ball radii and barrier sharpness for the log-barrier variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    pub radii: Vec<f64>,
    pub t: f64,
}

impl BarrierConfig {
    pub fn new(radii: Vec<f64>, t: f64) -> Result<Self> {
        if !(t > 0.0) || radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidParameter(
                "barrier radii and t must be strictly positive".into(),
            ));
        }
        Ok(BarrierConfig { radii, t })
    }
}

/// Where a stacked constraint component comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSlot {
    /// Index into [`Graph::edges`].
    Edge(usize),
    Node(usize),
}

#[derive(Clone)]
pub struct ProblemInstance {
    n: usize,
    graph: Graph,
    costs: Vec<NodeFn>,
    edge_constraints: Vec<Option<EdgeFn>>,
    node_constraints: Vec<Option<NodeFn>>,
    x_tot: Vec<f64>,
    nu: f64,
    epsilon: f64,
    slots: Vec<ConstraintSlot>,
    edge_slot: Vec<Option<usize>>,
    node_slot: Vec<Option<usize>>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("n", &self.n)
            .field("nodes", &self.graph.node_count())
            .field("m", &self.slots.len())
            .field("x_tot", &self.x_tot)
            .field("nu", &self.nu)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

pub struct ProblemBuilder {
    n: usize,
    graph: Graph,
    costs: Vec<NodeFn>,
    edge_constraints: Vec<Option<EdgeFn>>,
    node_constraints: Vec<Option<NodeFn>>,
    x_tot: Vec<f64>,
    nu: f64,
    epsilon: f64,
}

impl ProblemBuilder {
    pub fn cost(mut self, node: usize, f: NodeFn) -> Self {
        self.costs[node] = f;
        self
    }

    pub fn edge_constraint(mut self, edge: usize, g: EdgeFn) -> Self {
        self.edge_constraints[edge] = Some(g);
        self
    }

    /// Attaches the same constraint to every edge.
    pub fn all_edges(mut self, g: EdgeFn) -> Self {
        for slot in &mut self.edge_constraints {
            *slot = Some(g.clone());
        }
        self
    }

    pub fn node_constraint(mut self, node: usize, h: NodeFn) -> Self {
        self.node_constraints[node] = Some(h);
        self
    }

    pub fn x_tot(mut self, x_tot: Vec<f64>) -> Self {
        self.x_tot = x_tot;
        self
    }

    pub fn regularization(mut self, nu: f64, epsilon: f64) -> Self {
        self.nu = nu;
        self.epsilon = epsilon;
        self
    }

    pub fn build(self) -> Result<ProblemInstance> {
        check_dim("x_tot", self.n, self.x_tot.len())?;
        if !(self.nu > 0.0 && self.nu.is_finite()) || !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be strictly positive (nu = {}, epsilon = {})",
                self.nu, self.epsilon
            )));
        }
        let mut slots = Vec::new();
        let mut edge_slot = vec![None; self.edge_constraints.len()];
        let mut node_slot = vec![None; self.node_constraints.len()];
        for (e, g) in self.edge_constraints.iter().enumerate() {
            if g.is_some() {
                edge_slot[e] = Some(slots.len());
                slots.push(ConstraintSlot::Edge(e));
            }
        }
        for (i, h) in self.node_constraints.iter().enumerate() {
            if h.is_some() {
                node_slot[i] = Some(slots.len());
                slots.push(ConstraintSlot::Node(i));
            }
        }
        Ok(ProblemInstance {
            n: self.n,
            graph: self.graph,
            costs: self.costs,
            edge_constraints: self.edge_constraints,
            node_constraints: self.node_constraints,
            x_tot: self.x_tot,
            nu: self.nu,
            epsilon: self.epsilon,
            slots,
            edge_slot,
            node_slot,
        })
    }
}

impl ProblemInstance {
    /// Starts a builder with zero costs, no inequality constraints, `x_tot = 0`, `ν = ε = 1`.
    pub fn builder(graph: Graph, n: usize) -> ProblemBuilder {
        let nodes = graph.node_count();
        let edges = graph.edge_count();
        let zero: NodeFn = Arc::new(Quadratic::zero(n));
        ProblemBuilder {
            n,
            costs: vec![zero; nodes],
            edge_constraints: vec![None; edges],
            node_constraints: vec![None; nodes],
            x_tot: vec![0.0; n],
            nu: 1.0,
            epsilon: 1.0,
            graph,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: QuadraticProblemFile = serde_json::from_str(s)?;
        file.into_problem()
    }

    /// Same instance with different regularization parameters.
    pub fn with_regularization(&self, nu: f64, epsilon: f64) -> Result<Self> {
        if !(nu > 0.0) || !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(
                "regularization must be strictly positive".into(),
            ));
        }
        let mut p = self.clone();
        p.nu = nu;
        p.epsilon = epsilon;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// `nN`.
    pub fn dim_x(&self) -> usize {
        self.n * self.graph.node_count()
    }

    /// Number of stacked inequality constraints.
    pub fn m(&self) -> usize {
        self.slots.len()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn x_tot(&self) -> &[f64] {
        &self.x_tot
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Strong monotonicity constant `min(ν, ε)` of the saddle operator.
    pub fn phi(&self) -> f64 {
        self.nu.min(self.epsilon)
    }

    pub fn slots(&self) -> &[ConstraintSlot] {
        &self.slots
    }

    pub fn edge_slot(&self, edge: usize) -> Option<usize> {
        self.edge_slot[edge]
    }

    pub fn node_slot(&self, node: usize) -> Option<usize> {
        self.node_slot[node]
    }

    pub fn cost_fn(&self, node: usize) -> &NodeFn {
        &self.costs[node]
    }

    pub fn edge_fn(&self, edge: usize) -> Option<&EdgeFn> {
        self.edge_constraints[edge].as_ref()
    }

    pub fn node_fn(&self, node: usize) -> Option<&NodeFn> {
        self.node_constraints[node].as_ref()
    }

    #[inline]
    pub fn block<'a>(&self, x: &'a [f64], node: usize) -> &'a [f64] {
        &x[node * self.n..(node + 1) * self.n]
    }

    pub fn check_x(&self, x: &[f64]) -> Result<()> {
        check_dim("primal vector", self.dim_x(), x.len())
    }

    pub fn check_point(&self, z: &StackedPoint) -> Result<()> {
        self.check_x(&z.x)?;
        check_dim("dual vector", self.m(), z.mu.len())
    }

    /// Uniform split `x_i = x_tot / N`, which always satisfies the coupling constraint.
    pub fn uniform_split(&self) -> Vec<f64> {
        let nodes = self.node_count() as f64;
        let share: Vec<f64> = self.x_tot.iter().map(|v| v / nodes).collect();
        share.iter().cycle().take(self.dim_x()).copied().collect()
    }

    pub fn eval_cost(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        Ok((0..self.node_count())
            .map(|i| self.costs[i].value(self.block(x, i)))
            .sum())
    }

    /// `∇f(x)`.
    pub fn cost_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut g = vec![0.0; x.len()];
        for i in 0..self.node_count() {
            let range = i * self.n..(i + 1) * self.n;
            self.costs[i].add_gradient(self.block(x, i), 1.0, &mut g[range]);
        }
        Ok(g)
    }

    fn slot_value(&self, slot: ConstraintSlot, x: &[f64]) -> f64 {
        match slot {
            ConstraintSlot::Edge(e) => {
                let (i, j) = self.graph.edges()[e];
                self.edge_constraints[e]
                    .as_ref()
                    .expect("slot refers to a present constraint")
                    .value(self.block(x, i), self.block(x, j))
            }
            ConstraintSlot::Node(i) => self.node_constraints[i]
                .as_ref()
                .expect("slot refers to a present constraint")
                .value(self.block(x, i)),
        }
    }

    /// Stacked `g(x) ∈ Rᵐ`.
    pub fn eval_constraints(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        Ok(self.slots.iter().map(|&s| self.slot_value(s, x)).collect())
    }

    /// Full-length gradient `∇g_q(x) ∈ R^{nN}` of stacked constraint `q`.
    pub fn constraint_gradient(&self, q: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let n = self.n;
        let mut g = vec![0.0; x.len()];
        match self.slots[q] {
            ConstraintSlot::Edge(e) => {
                let (i, j) = self.graph.edges()[e];
                let (lo, hi) = g.split_at_mut(j * n);
                self.edge_constraints[e].as_ref().unwrap().add_gradient(
                    self.block(x, i),
                    self.block(x, j),
                    1.0,
                    &mut lo[i * n..(i + 1) * n],
                    &mut hi[..n],
                );
            }
            ConstraintSlot::Node(i) => {
                self.node_constraints[i].as_ref().unwrap().add_gradient(
                    self.block(x, i),
                    1.0,
                    &mut g[i * n..(i + 1) * n],
                );
            }
        }
        Ok(g)
    }

    /// `f(x) + (ν/2)||x||² + μᵀg(x) − (ε/2)||μ||²`.
    pub fn reg_lagrangian(&self, z: &StackedPoint) -> Result<f64> {
        self.check_point(z)?;
        let g = self.eval_constraints(&z.x)?;
        let coupling: f64 = z.mu.iter().zip(&g).map(|(m, v)| m * v).sum();
        Ok(self.eval_cost(&z.x)? + 0.5 * self.nu * norm_sq(&z.x) + coupling - 0.5 * self.epsilon * norm_sq(&z.mu))
    }

    /// Writes `∇_{x_i} L` into `out` using only node-local data.
    ///
    /// `neighbor_x(j)` must return the current block of neighbor `j`, `edge_mu(e)` the
    /// dual of incident edge `e`, and `node_mu` the dual of `h_i` (ignored when absent).
    pub(crate) fn grad_x_block_into<'a>(
        &'a self,
        node: usize,
        x_i: &[f64],
        neighbor_x: impl Fn(usize) -> &'a [f64],
        edge_mu: impl Fn(usize) -> f64,
        node_mu: f64,
        out: &mut [f64],
    ) {
        let edges = self.graph.incident_edges(node).iter().filter_map(|&e| {
            let g = self.edge_constraints[e].as_ref()?;
            let (a, b) = self.graph.edges()[e];
            let first = node == a;
            Some(IncidentTerm {
                g,
                first,
                other: neighbor_x(if first { b } else { a }),
                mu: edge_mu(e),
            })
        });
        local_grad_block(
            &self.costs[node],
            self.nu,
            x_i,
            edges,
            self.node_constraints[node].as_ref().map(|h| (h, node_mu)),
            out,
        );
    }

    /// `∇_x L(x, μ) = ∇f(x) + νx + Σ_q μ_q ∇g_q(x)`, assembled block by block.
    pub fn grad_x(&self, z: &StackedPoint) -> Result<Vec<f64>> {
        self.check_point(z)?;
        let n = self.n;
        let mut out = vec![0.0; z.x.len()];
        for i in 0..self.node_count() {
            let x = &z.x;
            self.grad_x_block_into(
                i,
                self.block(x, i),
                |j| self.block(x, j),
                |e| z.mu[self.edge_slot[e].expect("incident edge has a constraint")],
                self.node_slot[i].map_or(0.0, |q| z.mu[q]),
                &mut out[i * n..(i + 1) * n],
            );
        }
        Ok(out)
    }

    /// `∇_μ L(x, μ) = g(x) − εμ`.
    pub fn grad_mu(&self, z: &StackedPoint) -> Result<Vec<f64>> {
        self.check_point(z)?;
        let g = self.eval_constraints(&z.x)?;
        Ok(g.iter().zip(&z.mu).map(|(v, m)| v - self.epsilon * m).collect())
    }

    fn check_ball(&self, x: &[f64], b: &BarrierConfig) -> Result<()> {
        check_dim("barrier radii", self.node_count(), b.radii.len())?;
        for i in 0..self.node_count() {
            let r = norm(self.block(x, i));
            if r >= b.radii[i] {
                return Err(Error::OutsideBall {
                    node: i,
                    norm: r,
                    radius: b.radii[i],
                });
            }
        }
        Ok(())
    }

    /// `L(x, μ) − (1/t) Σ_i log(X̂_i − ||x_i||)`.
    pub fn barrier_lagrangian(&self, z: &StackedPoint, b: &BarrierConfig) -> Result<f64> {
        self.check_point(z)?;
        self.check_ball(&z.x, b)?;
        let barrier: f64 = (0..self.node_count())
            .map(|i| (b.radii[i] - norm(self.block(&z.x, i))).ln())
            .sum();
        Ok(self.reg_lagrangian(z)? - barrier / b.t)
    }

    /// Adds the barrier gradient to an existing `∇_x L`.
    pub(crate) fn add_barrier_gradient(&self, x: &[f64], b: &BarrierConfig, out: &mut [f64]) {
        let n = self.n;
        for i in 0..self.node_count() {
            let xi = self.block(x, i);
            let r = norm(xi);
            if r == 0.0 {
                // zero subgradient at the center
                continue;
            }
            let scale = 1.0 / (b.t * (b.radii[i] - r) * r);
            for k in 0..n {
                out[i * n + k] += scale * xi[k];
            }
        }
    }

    /// `∇_x L̂ = ∇_x L + (1/t) · x_i / ((X̂_i − ||x_i||)·||x_i||)` per block.
    pub fn barrier_grad_x(&self, z: &StackedPoint, b: &BarrierConfig) -> Result<Vec<f64>> {
        self.check_point(z)?;
        self.check_ball(&z.x, b)?;
        let mut g = self.grad_x(z)?;
        self.add_barrier_gradient(&z.x, b, &mut g);
        Ok(g)
    }

    /// `Σ_i x_i − x_tot`.
    pub fn resource_gap(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut gap: Vec<f64> = self.x_tot.iter().map(|v| -v).collect();
        for i in 0..self.node_count() {
            for (g, v) in gap.iter_mut().zip(self.block(x, i)) {
                *g += v;
            }
        }
        Ok(gap)
    }

    /// `||Σ_i x_i − x_tot||₂`.
    pub fn feasibility_residual(&self, x: &[f64]) -> Result<f64> {
        Ok(norm(&self.resource_gap(x)?))
    }
}

/// An incident edge seen from one endpoint.
pub(crate) struct IncidentTerm<'a> {
    pub g: &'a EdgeFn,
    /// Whether the local node is the smaller endpoint.
    pub first: bool,
    pub other: &'a [f64],
    pub mu: f64,
}

/// `∇f_i(x_i) + νx_i + Σ_e μ_e ∇_{x_i} g_e + μ_i ∇h_i(x_i)`, with the edges visited in
/// the order given. Every caller (centralized or per node) goes through this function so
/// the floating-point summation order is the same everywhere.
pub(crate) fn local_grad_block<'a>(
    cost: &NodeFn,
    nu: f64,
    x_i: &[f64],
    edges: impl Iterator<Item = IncidentTerm<'a>>,
    node: Option<(&NodeFn, f64)>,
    out: &mut [f64],
) {
    out.fill(0.0);
    cost.add_gradient(x_i, 1.0, out);
    for (o, v) in out.iter_mut().zip(x_i) {
        *o += nu * v;
    }
    for t in edges {
        if t.first {
            t.g.add_gradient_i(x_i, t.other, t.mu, out);
        } else {
            t.g.add_gradient_j(t.other, x_i, t.mu, out);
        }
    }
    if let Some((h, mu)) = node {
        h.add_gradient(x_i, mu, out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeRange {
    Uniform(f64),
    PerEdge(Vec<Option<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticNodeFile {
    /// `Q_i` (n × n, row-major).
    pub quad: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    /// Step limit `||x_i − anchor||² ≤ v_max²`; `null` means unbounded.
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
}

/// JSON description of a problem with quadratic costs, range-limited edges and
/// optional per-node step limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticProblemFile {
    pub n: usize,
    pub graph: serde_json::Value,
    pub nodes: Vec<QuadraticNodeFile>,
    #[serde(default)]
    pub edge_range: Option<EdgeRange>,
    pub x_tot: Vec<f64>,
    pub nu: f64,
    pub epsilon: f64,
}

impl QuadraticProblemFile {
    pub fn into_problem(self) -> Result<ProblemInstance> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        check_dim("x_tot", n, self.x_tot.len())?;
        let graph = Graph::from_json_str(&self.graph.to_string())?;
        check_dim("node descriptions", graph.node_count(), self.nodes.len())?;
        let mut b = ProblemInstance::builder(graph.clone(), n)
            .x_tot(self.x_tot)
            .regularization(self.nu, self.epsilon);
        for (i, node) in self.nodes.into_iter().enumerate() {
            check_dim("Q rows", n, node.quad.len())?;
            let mut q = DMatrix::zeros(n, n);
            for (r, row) in node.quad.iter().enumerate() {
                check_dim("Q columns", n, row.len())?;
                for (c, v) in row.iter().enumerate() {
                    q[(r, c)] = *v;
                }
            }
            check_dim("linear term", n, node.linear.len())?;
            b = b.cost(i, Arc::new(Quadratic::new(q, node.linear, node.constant)));
            if let Some(v) = node.v_max {
                if !(v > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "v_max of node {} must be positive",
                        i + 1
                    )));
                }
                let anchor = node.anchor.unwrap_or_else(|| vec![0.0; n]);
                check_dim("anchor", n, anchor.len())?;
                b = b.node_constraint(i, Arc::new(ShiftedSquare::new(1.0, anchor, -v * v)));
            }
        }
        match self.edge_range {
            None => {}
            Some(EdgeRange::Uniform(r)) => {
                if !(r > 0.0) {
                    return Err(Error::InvalidParameter("edge range must be positive".into()));
                }
                b = b.all_edges(Arc::new(SquaredDistance::new(r)));
            }
            Some(EdgeRange::PerEdge(list)) => {
                // aligned with the file's edge list, which may be unsorted
                let file_edges: Vec<[usize; 2]> = serde_json::from_value(self.graph["edges"].clone())?;
                check_dim("edge ranges", file_edges.len(), list.len())?;
                for (pair, r) in file_edges.iter().zip(list) {
                    if let Some(r) = r {
                        if !(r > 0.0) {
                            return Err(Error::InvalidParameter("edge range must be positive".into()));
                        }
                        let e = graph
                            .edge_index(pair[0] - 1, pair[1] - 1)
                            .expect("edge validated by graph construction");
                        b = b.edge_constraint(e, Arc::new(SquaredDistance::new(r)));
                    }
                }
            }
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::ClosureNode;

    fn squares(nodes: usize, n: usize) -> ProblemInstance {
        let graph = Graph::path(nodes).unwrap();
        let mut b = ProblemInstance::builder(graph, n);
        for i in 0..nodes {
            b = b.cost(i, Arc::new(ShiftedSquare::new(1.0, vec![0.0; n], 0.0)));
        }
        b.build().unwrap()
    }

    #[test]
    fn cost_of_squares() {
        let p = squares(2, 1);
        assert_eq!(p.eval_cost(&[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(p.eval_cost(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(p.eval_cost(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constraint_stacking_is_edges_then_nodes() {
        let g = Graph::seven_robot_ring();
        let p = ProblemInstance::builder(g, 2)
            .all_edges(Arc::new(SquaredDistance::new(1.2)))
            .node_constraint(5, Arc::new(ShiftedSquare::new(1.0, vec![0.0, 0.0], -0.25)))
            .build()
            .unwrap();
        assert_eq!(p.m(), 9);
        assert_eq!(p.slots()[0], ConstraintSlot::Edge(0));
        assert_eq!(p.slots()[8], ConstraintSlot::Node(5));
        assert_eq!(p.node_slot(5), Some(8));
        assert_eq!(p.node_slot(0), None);
    }

    #[test]
    fn robots_at_range_and_coincident() {
        let g = Graph::path(2).unwrap();
        let p = ProblemInstance::builder(g, 2)
            .all_edges(Arc::new(SquaredDistance::new(1.2)))
            .build()
            .unwrap();
        let at_range = p.eval_constraints(&[0.0, 0.0, 1.2, 0.0]).unwrap();
        assert!(at_range[0].abs() < 1e-15);
        let coincident = p.eval_constraints(&[0.4, 0.1, 0.4, 0.1]).unwrap();
        assert!((coincident[0] + 1.44).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_hand_values() {
        let p = squares(2, 1).with_regularization(1.0, 1.0).unwrap();
        let zero = StackedPoint::new(vec![0.0, 0.0], vec![]);
        assert_eq!(p.reg_lagrangian(&zero).unwrap(), 0.0);

        // one node, f = 0, g(x) = x − 1, ν = ε = 2, x = μ = 1: 0 + 1 + 0 − 1 = 0
        let single = Graph::new(1, &[]).unwrap();
        let p = ProblemInstance::builder(single, 1)
            .node_constraint(0, Arc::new(Quadratic::affine(vec![1.0], -1.0)))
            .regularization(2.0, 2.0)
            .build()
            .unwrap();
        let z = StackedPoint::new(vec![1.0], vec![1.0]);
        assert_eq!(p.reg_lagrangian(&z).unwrap(), 0.0);
    }

    #[test]
    fn gradient_is_regularizer_when_duals_vanish() {
        let g = Graph::path(3).unwrap();
        let p = ProblemInstance::builder(g, 2)
            .all_edges(Arc::new(SquaredDistance::new(1.0)))
            .regularization(3.0, 0.5)
            .build()
            .unwrap();
        let x = vec![0.1, -0.2, 0.3, 0.7, -1.1, 0.05];
        let z = StackedPoint::new(x.clone(), vec![0.0; 2]);
        let gx = p.grad_x(&z).unwrap();
        let expected: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert_eq!(gx, expected);
        assert_eq!(p.grad_mu(&z).unwrap(), p.eval_constraints(&x).unwrap());
    }

    #[test]
    fn grad_mu_with_zero_constraint() {
        let g = Graph::path(2).unwrap();
        let zero_g = Arc::new(ClosureNode::new(|_| 0.0, |_, g| g.fill(0.0)));
        let p = ProblemInstance::builder(g, 1)
            .node_constraint(0, zero_g.clone())
            .node_constraint(1, zero_g)
            .regularization(10.0, 0.01)
            .build()
            .unwrap();
        let z = StackedPoint::new(vec![0.3, 0.2], vec![1.0, 1.0]);
        for v in p.grad_mu(&z).unwrap() {
            assert!((v + 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_gradient_vanishes_for_coincident_robots() {
        let g = Graph::path(2).unwrap();
        let p = ProblemInstance::builder(g, 2)
            .all_edges(Arc::new(SquaredDistance::new(1.2)))
            .regularization(1.0, 1.0)
            .build()
            .unwrap();
        let z = StackedPoint::new(vec![0.0; 4], vec![1.0]);
        assert_eq!(p.grad_x(&z).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn barrier_at_origin_and_near_boundary() {
        let g = Graph::path(3).unwrap();
        let p = ProblemInstance::builder(g, 2).build().unwrap();
        let b = BarrierConfig::new(vec![1.0; 3], 1e6).unwrap();
        let z = StackedPoint::new(vec![0.0; 6], vec![]);
        assert_eq!(p.barrier_lagrangian(&z, &b).unwrap(), 0.0);
        assert_eq!(p.barrier_grad_x(&z, &b).unwrap(), vec![0.0; 6]);

        let mut last = f64::NEG_INFINITY;
        for k in 1..=6 {
            let r = 1.0 - 10f64.powi(-k);
            let z = StackedPoint::new(vec![r, 0.0, 0.0, 0.0, 0.0, 0.0], vec![]);
            let v = p.barrier_lagrangian(&z, &b).unwrap();
            assert!(v > last, "barrier not increasing at k = {k}");
            last = v;
        }
        let outside = StackedPoint::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![]);
        assert!(matches!(
            p.barrier_lagrangian(&outside, &b),
            Err(Error::OutsideBall { node: 0, .. })
        ));
    }

    #[test]
    fn feasibility_of_uniform_split() {
        let g = Graph::seven_robot_ring();
        let p = ProblemInstance::builder(g, 2).x_tot(vec![0.7, -1.4]).build().unwrap();
        let mut x = p.uniform_split();
        assert!(p.feasibility_residual(&x).unwrap() < 1e-15);
        x[0] += 1e-3;
        assert!((p.feasibility_residual(&x).unwrap() - 1e-3).abs() < 1e-15);
        let zero = ProblemInstance::builder(Graph::path(2).unwrap(), 1).build().unwrap();
        assert_eq!(zero.feasibility_residual(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_regularization() {
        let g = Graph::path(2).unwrap();
        assert!(ProblemInstance::builder(g.clone(), 1)
            .regularization(0.0, 1.0)
            .build()
            .is_err());
        assert!(ProblemInstance::builder(g, 1)
            .regularization(1.0, -1.0)
            .build()
            .is_err());
    }

    #[test]
    fn json_description() {
        let text = r#"{
            "n": 1,
            "graph": {"nodes": 3, "edges": [[2, 3], [1, 2]]},
            "nodes": [
                {"quad": [[1.0]], "linear": [0.0]},
                {"quad": [[1.0]], "linear": [-2.0], "constant": 1.0, "v_max": 0.5, "anchor": [0.2]},
                {"quad": [[0.0]], "linear": [0.0]}
            ],
            "edge_range": [1.5, null],
            "x_tot": [3.0],
            "nu": 1.0,
            "epsilon": 0.1
        }"#;
        let p = ProblemInstance::from_json_str(text).unwrap();
        assert_eq!(p.m(), 2);
        // file edge [2,3] is sorted edge index 1
        assert_eq!(p.slots()[0], ConstraintSlot::Edge(1));
        assert_eq!(p.slots()[1], ConstraintSlot::Node(1));
        let g = p.eval_constraints(&[0.0, 1.0, 2.0]).unwrap();
        assert!((g[0] - (1.0 - 2.25)).abs() < 1e-15);
        assert!((g[1] - (0.64 - 0.25)).abs() < 1e-15);
        assert!(ProblemInstance::from_json_str(r#"{"n": 1}"#).is_err());
    }
}
