//! Smooth convex building blocks for costs and constraints.
//!
//! Node functions act on one block `x_i ∈ Rⁿ`; edge functions act on the pair
//! `(x_i, x_j)` of an edge with `i < j`. Gradients are accumulated (`out += scale·∇`)
//! so that callers control the summation order.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

/// A differentiable function of a single node block.
pub trait NodeFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// `out += scale · ∇f(x)`.
    fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]);

    /// Hessian at `x`. The default uses central differences of the gradient.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        let mut probe = x.to_vec();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for k in 0..n {
            let step = 1e-6 * (1.0 + x[k].abs());
            probe[k] = x[k] + step;
            gp.fill(0.0);
            self.add_gradient(&probe, 1.0, &mut gp);
            probe[k] = x[k] - step;
            gm.fill(0.0);
            self.add_gradient(&probe, 1.0, &mut gm);
            probe[k] = x[k];
            for r in 0..n {
                h[(r, k)] = (gp[r] - gm[r]) / (2.0 * step);
            }
        }
        (&h + h.transpose()) * 0.5
    }
}

/// A differentiable function of the two blocks joined by an edge.
pub trait EdgeFunction: Send + Sync {
    fn value(&self, xi: &[f64], xj: &[f64]) -> f64;

    /// `out_i += scale · ∇_{x_i} g`, `out_j += scale · ∇_{x_j} g`.
    fn add_gradient(&self, xi: &[f64], xj: &[f64], scale: f64, out_i: &mut [f64], out_j: &mut [f64]);

    /// `out += scale · ∇_{x_i} g` only. Callers that own one endpoint use this.
    fn add_gradient_i(&self, xi: &[f64], xj: &[f64], scale: f64, out: &mut [f64]) {
        let mut scratch = vec![0.0; xj.len()];
        self.add_gradient(xi, xj, scale, out, &mut scratch);
    }

    /// `out += scale · ∇_{x_j} g` only.
    fn add_gradient_j(&self, xi: &[f64], xj: &[f64], scale: f64, out: &mut [f64]) {
        let mut scratch = vec![0.0; xi.len()];
        self.add_gradient(xi, xj, scale, &mut scratch, out);
    }

    /// Joint `2n × 2n` Hessian over `(x_i, x_j)`; central differences by default.
    fn hessian(&self, xi: &[f64], xj: &[f64]) -> DMatrix<f64> {
        let n = xi.len();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        let mut a = xi.to_vec();
        let mut b = xj.to_vec();
        let mut gp = vec![0.0; 2 * n];
        let mut gm = vec![0.0; 2 * n];
        for k in 0..2 * n {
            let base = if k < n { xi[k] } else { xj[k - n] };
            let step = 1e-6 * (1.0 + base.abs());
            for (sign, g) in [(1.0, &mut gp), (-1.0, &mut gm)] {
                if k < n {
                    a[k] = base + sign * step;
                } else {
                    b[k - n] = base + sign * step;
                }
                g.fill(0.0);
                let (gi, gj) = g.split_at_mut(n);
                self.add_gradient(&a, &b, 1.0, gi, gj);
            }
            if k < n {
                a[k] = base;
            } else {
                b[k - n] = base;
            }
            for r in 0..2 * n {
                h[(r, k)] = (gp[r] - gm[r]) / (2.0 * step);
            }
        }
        (&h + h.transpose()) * 0.5
    }
}

pub type NodeFn = Arc<dyn NodeFunction>;
pub type EdgeFn = Arc<dyn EdgeFunction>;

/// `xᵀQx + qᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub quad: DMatrix<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl Quadratic {
    pub fn new(quad: DMatrix<f64>, linear: Vec<f64>, constant: f64) -> Self {
        assert_eq!(quad.nrows(), linear.len());
        assert_eq!(quad.ncols(), linear.len());
        Quadratic { quad, linear, constant }
    }

    /// `qᵀx + c`.
    pub fn affine(linear: Vec<f64>, constant: f64) -> Self {
        let n = linear.len();
        Self::new(DMatrix::zeros(n, n), linear, constant)
    }

    pub fn zero(n: usize) -> Self {
        Self::affine(vec![0.0; n], 0.0)
    }
}

// dense matrix–vector loops read better with explicit indices
#[allow(clippy::needless_range_loop)]
impl NodeFunction for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = self.constant;
        for r in 0..n {
            let mut row = 0.0;
            for c in 0..n {
                row += self.quad[(r, c)] * x[c];
            }
            v += x[r] * row + self.linear[r] * x[r];
        }
        v
    }

    fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let n = x.len();
        for r in 0..n {
            let mut g = self.linear[r];
            for c in 0..n {
                g += (self.quad[(r, c)] + self.quad[(c, r)]) * x[c];
            }
            out[r] += scale * g;
        }
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        &self.quad + self.quad.transpose()
    }
}

/// `w · ||x − center||² + offset`.
///
/// Covers weighted displacement costs (`offset = 0`) and squared step limits
/// (`w = 1`, `offset = −v²`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSquare {
    pub weight: f64,
    pub center: Vec<f64>,
    pub offset: f64,
}

impl ShiftedSquare {
    pub fn new(weight: f64, center: Vec<f64>, offset: f64) -> Self {
        ShiftedSquare { weight, center, offset }
    }
}

impl NodeFunction for ShiftedSquare {
    fn value(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        self.weight * d2 + self.offset
    }

    fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for ((o, a), c) in out.iter_mut().zip(x).zip(&self.center) {
            *o += scale * (2.0 * self.weight * (a - c));
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len()) * (2.0 * self.weight)
    }
}

/// Range constraint `||x_i − x_j||² − R²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredDistance {
    pub radius: f64,
}

impl SquaredDistance {
    pub fn new(radius: f64) -> Self {
        SquaredDistance { radius }
    }
}

impl EdgeFunction for SquaredDistance {
    fn value(&self, xi: &[f64], xj: &[f64]) -> f64 {
        let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 - self.radius * self.radius
    }

    fn add_gradient(&self, xi: &[f64], xj: &[f64], scale: f64, out_i: &mut [f64], out_j: &mut [f64]) {
        for k in 0..xi.len() {
            let d = 2.0 * (xi[k] - xj[k]);
            out_i[k] += scale * d;
            out_j[k] -= scale * d;
        }
    }

    fn add_gradient_i(&self, xi: &[f64], xj: &[f64], scale: f64, out: &mut [f64]) {
        for k in 0..xi.len() {
            out[k] += scale * (2.0 * (xi[k] - xj[k]));
        }
    }

    fn add_gradient_j(&self, xi: &[f64], xj: &[f64], scale: f64, out: &mut [f64]) {
        for k in 0..xi.len() {
            out[k] -= scale * (2.0 * (xi[k] - xj[k]));
        }
    }

    fn hessian(&self, xi: &[f64], _xj: &[f64]) -> DMatrix<f64> {
        let n = xi.len();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            h[(k, k)] = 2.0;
            h[(k + n, k + n)] = 2.0;
            h[(k, k + n)] = -2.0;
            h[(k + n, k)] = -2.0;
        }
        h
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A node function given by a value closure and a gradient closure that writes `∇f(x)`.
pub struct ClosureNode {
    value: Box<ValueFn>,
    grad: Box<GradFn>,
}

impl ClosureNode {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        ClosureNode {
            value: Box::new(value),
            grad: Box::new(grad),
        }
    }
}

impl fmt::Debug for ClosureNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosureNode")
    }
}

impl NodeFunction for ClosureNode {
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let mut g = vec![0.0; x.len()];
        (self.grad)(x, &mut g);
        for (o, gk) in out.iter_mut().zip(g) {
            *o += scale * gk;
        }
    }
}
