//! Independent centralized reference solutions.
//!
//! None of these routines use the weight matrix. The coupling constraint is handled
//! through the affine projector `P = I − (1/N)(11ᵀ ⊗ Iₙ)` and exact KKT solves instead.
//!
//! The regularized saddle point is found by eliminating the duals: for fixed `x`,
//! `max_{μ ≥ 0} μg − (ε/2)μ² = max(0, g)²/(2ε)`, attained at `μ = max(0, g)/ε`. So
//! `x*` minimizes
//!
//! ```text
//! ψ(x) = f(x) + (ν/2)||x||² + (1/2ε) Σ_q max(0, g_q(x))²   subject to  Σ_i x_i = x_tot,
//! ```
//!
//! a strictly convex, once-differentiable problem solved by damped semismooth Newton
//! steps on the equality-constrained KKT system. Then `μ* = max(0, g(x*))/ε`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{norm, ConstraintSlot, ProblemInstance, StackedPoint};

/// Largest `nN` accepted by [`solve_original_small`].
pub const ORIGINAL_SIZE_LIMIT: usize = 16;
/// Largest `nN` accepted by [`grid_search_original`].
pub const GRID_SIZE_LIMIT: usize = 4;

/// `P = I_{nN} − (1/N)(1_N 1_Nᵀ ⊗ Iₙ)`.
pub fn affine_projector(node_count: usize, n: usize) -> DMatrix<f64> {
    let dim = node_count * n;
    let inv = 1.0 / node_count as f64;
    DMatrix::from_fn(dim, dim, |r, c| {
        let same_coord = r % n == c % n;
        let id = if r == c { 1.0 } else { 0.0 };
        if same_coord {
            id - inv
        } else {
            id
        }
    })
}

/// `P v` without forming `P`: subtract the per-coordinate block mean.
pub fn project_consensus_complement(v: &[f64], node_count: usize, n: usize) -> Vec<f64> {
    let mean = block_mean(v, node_count, n);
    v.iter().enumerate().map(|(k, x)| x - mean[k % n]).collect()
}

fn block_mean(v: &[f64], node_count: usize, n: usize) -> Vec<f64> {
    let mut mean = vec![0.0; n];
    for (k, x) in v.iter().enumerate() {
        mean[k % n] += x;
    }
    mean.iter_mut().for_each(|m| *m /= node_count as f64);
    mean
}

/// Residuals of the KKT conditions of the regularized saddle-point problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KKTResidual {
    /// `min_p ||∇ₓL + (1_N ⊗ Iₙ)p||`.
    pub stationarity: f64,
    /// Norm of `∇_μL` on components with `μ > 0` together with `max(0, ∇_μL)` on `μ = 0`.
    pub dual_feas: f64,
    /// `||Σ_i x_i − x_tot||`.
    pub primal_feas: f64,
    /// `max_q |μ_q ∂L/∂μ_q|`.
    pub complementarity: f64,
    /// `max(0, −min μ)`.
    pub nonneg: f64,
    /// Minimizing multiplier `p` of the coupling constraint.
    pub p: Vec<f64>,
}

impl KKTResidual {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.dual_feas,
            self.primal_feas,
            self.complementarity,
            self.nonneg,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// KKT residual of `(x, μ)`; the coupling multiplier is eliminated in closed form.
pub fn kkt_residual(p: &ProblemInstance, x: &[f64], mu: &[f64]) -> Result<KKTResidual> {
    check_dim("primal vector", p.dim_x(), x.len())?;
    check_dim("dual vector", p.m(), mu.len())?;
    let z = StackedPoint::new(x.to_vec(), mu.to_vec());
    let gx = p.grad_x(&z)?;
    let gmu = p.grad_mu(&z)?;
    let stationarity = norm(&project_consensus_complement(&gx, p.node_count(), p.n()));
    let multiplier: Vec<f64> = block_mean(&gx, p.node_count(), p.n()).iter().map(|m| -m).collect();
    let mut dual_sq = 0.0;
    let mut complementarity: f64 = 0.0;
    for (&m, &g) in mu.iter().zip(&gmu) {
        let r = if m > 0.0 { g } else { g.max(0.0) };
        dual_sq += r * r;
        complementarity = complementarity.max((m * g).abs());
    }
    let nonneg = mu.iter().copied().fold(0.0f64, |acc, m| acc.max(-m));
    Ok(KKTResidual {
        stationarity,
        dual_feas: dual_sq.sqrt(),
        primal_feas: p.feasibility_residual(x)?,
        complementarity,
        nonneg,
        p: multiplier,
    })
}

/// Reference solution data, serializable for reuse as a solver reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub x_star: Vec<f64>,
    pub mu_star: Vec<f64>,
    /// Cost `f(x*)` at the regularized solution (without the regularization terms).
    pub f_star: f64,
    #[serde(default)]
    pub x_opt: Option<Vec<f64>>,
    #[serde(default)]
    pub f_opt: Option<f64>,
    pub residual: KKTResidual,
}

impl OracleSolution {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let sol: OracleSolution = serde_json::from_str(s)?;
        if sol.x_opt.is_some() != sol.f_opt.is_some() {
            return Err(Error::InvalidParameter("x_opt and f_opt must be given together".into()));
        }
        Ok(sol)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle solution serializes")
    }

    pub fn saddle_point(&self) -> StackedPoint {
        StackedPoint::new(self.x_star.clone(), self.mu_star.clone())
    }
}

/// `f(x) + (ν/2)||x||² + (ρ/2) Σ max(0, g)²` and its derivatives.
struct Penalty<'a> {
    p: &'a ProblemInstance,
    nu: f64,
    rho: f64,
    /// Added to the Hessian diagonal only.
    damping: f64,
}

impl Penalty<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let g = self.p.eval_constraints(x)?;
        let pen: f64 = g.iter().map(|v| v.max(0.0).powi(2)).sum();
        Ok(self.p.eval_cost(x)? + 0.5 * self.nu * x.iter().map(|v| v * v).sum::<f64>() + 0.5 * self.rho * pen)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut grad = self.p.cost_gradient(x)?;
        for (gk, xk) in grad.iter_mut().zip(x) {
            *gk += self.nu * xk;
        }
        let g = self.p.eval_constraints(x)?;
        for (q, &v) in g.iter().enumerate() {
            if v > 0.0 {
                let dg = self.p.constraint_gradient(q, x)?;
                for (gk, d) in grad.iter_mut().zip(&dg) {
                    *gk += self.rho * v * d;
                }
            }
        }
        Ok(grad)
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let p = self.p;
        let n = p.n();
        let dim = p.dim_x();
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..p.node_count() {
            let hi = p.cost_fn(i).hessian(p.block(x, i));
            let mut v = h.view_mut((i * n, i * n), (n, n));
            v += &hi;
        }
        for k in 0..dim {
            h[(k, k)] += self.nu + self.damping;
        }
        let g = p.eval_constraints(x)?;
        for (q, &v) in g.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let dg = DVector::from_vec(p.constraint_gradient(q, x)?);
            h += &dg * dg.transpose() * self.rho;
            match p.slots()[q] {
                ConstraintSlot::Edge(e) => {
                    let (i, j) = p.graph().edges()[e];
                    let he = p
                        .edge_fn(e)
                        .expect("slot has a constraint")
                        .hessian(p.block(x, i), p.block(x, j));
                    for (bi, a) in [(0, i), (1, j)] {
                        for (bj, b) in [(0, i), (1, j)] {
                            let blk = he.view((bi * n, bj * n), (n, n)) * (self.rho * v);
                            let mut v = h.view_mut((a * n, b * n), (n, n));
                            v += &blk;
                        }
                    }
                }
                ConstraintSlot::Node(i) => {
                    let hn = p.node_fn(i).expect("slot has a constraint").hessian(p.block(x, i));
                    let mut blk = h.view_mut((i * n, i * n), (n, n));
                    blk += hn * (self.rho * v);
                }
            }
        }
        Ok(h)
    }

    /// Damped Newton on `min ψ s.t. Σ x_i = const`, from a feasible `x`.
    ///
    /// Returns the minimizer and the final projected gradient norm.
    fn minimize(&self, mut x: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        let p = self.p;
        let (nodes, n, dim) = (p.node_count(), p.n(), p.dim_x());
        let mut grad = self.gradient(&x)?;
        let mut pg = norm(&project_consensus_complement(&grad, nodes, n));
        let mut value = self.value(&x)?;
        for _ in 0..max_iter {
            if pg <= tol {
                return Ok((x, pg));
            }
            let h = self.hessian(&x)?;
            // KKT matrix [[H, Aᵀ], [A, 0]] with A = 1ᵀ ⊗ Iₙ
            let mut k = DMatrix::zeros(dim + n, dim + n);
            k.view_mut((0, 0), (dim, dim)).copy_from(&h);
            for r in 0..dim {
                k[(r, dim + r % n)] = 1.0;
                k[(dim + r % n, r)] = 1.0;
            }
            let mut rhs = DVector::zeros(dim + n);
            for r in 0..dim {
                rhs[r] = -grad[r];
            }
            let newton = k
                .lu()
                .solve(&rhs)
                .map(|s| s.rows(0, dim).iter().copied().collect::<Vec<f64>>());
            let slope_of = |d: &[f64]| d.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
            let mut dir = match newton {
                Some(d) if d.iter().all(|v| v.is_finite()) && slope_of(&d) < 0.0 => d,
                _ => project_consensus_complement(&grad, nodes, n)
                    .iter()
                    .map(|v| -v)
                    .collect(),
            };
            // keep the direction exactly in the null space of A
            dir = project_consensus_complement(&dir, nodes, n);
            let slope = slope_of(&dir);

            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-14 {
                let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let cv = self.value(&cand)?;
                if cv <= value + 1e-4 * t * slope {
                    accepted = Some((cand, cv));
                    break;
                }
                // near the optimum ψ stops resolving; fall back to the gradient norm
                let cg = self.gradient(&cand)?;
                let cpg = norm(&project_consensus_complement(&cg, nodes, n));
                if cv <= value + 1e-12 * value.abs().max(1.0) && cpg < pg {
                    accepted = Some((cand, cv));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, nv)) = accepted else {
                return Err(Error::NoConvergence {
                    iterations: max_iter,
                    residual: pg,
                });
            };
            x = next;
            value = nv;
            grad = self.gradient(&x)?;
            pg = norm(&project_consensus_complement(&grad, nodes, n));
        }
        if pg <= tol {
            Ok((x, pg))
        } else {
            Err(Error::NoConvergence {
                iterations: max_iter,
                residual: pg,
            })
        }
    }
}

/// Moves `x` onto `Σ_i x_i = x_tot` by a uniform shift.
fn restore_feasibility(p: &ProblemInstance, x: &mut [f64]) -> Result<()> {
    let gap = p.resource_gap(x)?;
    let nodes = p.node_count() as f64;
    let n = p.n();
    for (k, v) in x.iter_mut().enumerate() {
        *v -= gap[k % n] / nodes;
    }
    Ok(())
}

/// The regularized saddle point `(x*, μ*)` with KKT residual at most `tol`.
pub fn solve_regularized_centralized(p: &ProblemInstance, tol: f64, max_iter: usize) -> Result<OracleSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let pen = Penalty {
        p,
        nu: p.nu(),
        rho: 1.0 / p.epsilon(),
        damping: 0.0,
    };
    let (mut x, _) = pen.minimize(p.uniform_split(), 0.1 * tol, max_iter)?;
    restore_feasibility(p, &mut x)?;
    let mu: Vec<f64> = p
        .eval_constraints(&x)?
        .iter()
        .map(|g| g.max(0.0) / p.epsilon())
        .collect();
    let residual = kkt_residual(p, &x, &mu)?;
    if residual.max() > tol {
        return Err(Error::NoConvergence {
            iterations: max_iter,
            residual: residual.max(),
        });
    }
    Ok(OracleSolution {
        f_star: p.eval_cost(&x)?,
        x_star: x,
        mu_star: mu,
        x_opt: None,
        f_opt: None,
        residual,
    })
}

/// Solution of the inequality-constrained problem with primal regularization only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSolution {
    pub x: Vec<f64>,
    /// `f(x)` (without the regularization term).
    pub f: f64,
    /// Multiplier estimates `ρ·max(0, g(x))` from the last penalty stage.
    pub mu: Vec<f64>,
}

/// `min f(x) + (ν/2)||x||²  s.t.  g(x) ≤ 0, Σ_i x_i = x_tot` for `nN ≤ 16`, by a
/// quadratic-penalty homotopy (weights `10¹ … 10⁸`, each stage warm-started from the
/// previous one). `ν = 0` gives the original problem.
pub fn solve_constrained_small(p: &ProblemInstance, nu: f64) -> Result<ConstrainedSolution> {
    if p.dim_x() > ORIGINAL_SIZE_LIMIT {
        return Err(Error::TooLarge {
            size: p.dim_x(),
            limit: ORIGINAL_SIZE_LIMIT,
        });
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter("nu must be nonnegative".into()));
    }
    let mut x = p.uniform_split();
    let mut rho = 1.0;
    for stage in 1..=8 {
        rho = 10f64.powi(stage);
        let pen = Penalty {
            p,
            nu,
            rho,
            damping: 1e-10,
        };
        let tol = 1e-10 * (1.0 + rho.sqrt());
        x = match pen.minimize(x.clone(), tol, 200) {
            Ok((x, _)) => x,
            // the last stages are badly conditioned; a nearly stationary point is enough
            Err(Error::NoConvergence { residual, .. }) if residual <= 1e-6 => {
                let mut best = x;
                if let Ok((y, _)) = pen.minimize(best.clone(), residual * 1.01, 200) {
                    best = y;
                }
                best
            }
            Err(e) => return Err(e),
        };
    }
    let mu = p.eval_constraints(&x)?.iter().map(|g| rho * g.max(0.0)).collect();
    restore_feasibility(p, &mut x)?;
    let f = p.eval_cost(&x)?;
    Ok(ConstrainedSolution { x, f, mu })
}

/// Optimum `(x_opt, f_opt)` of the unregularized problem for `nN ≤ 16`.
pub fn solve_original_small(p: &ProblemInstance) -> Result<(Vec<f64>, f64)> {
    let sol = solve_constrained_small(p, 0.0)?;
    Ok((sol.x, sol.f))
}

/// [`solve_regularized_centralized`] plus, when `nN ≤ 16`, the original optimum.
pub fn solve_reference(p: &ProblemInstance, tol: f64, max_iter: usize) -> Result<OracleSolution> {
    let mut sol = solve_regularized_centralized(p, tol, max_iter)?;
    if p.dim_x() <= ORIGINAL_SIZE_LIMIT {
        let (x, f) = solve_original_small(p)?;
        sol.x_opt = Some(x);
        sol.f_opt = Some(f);
    }
    Ok(sol)
}

/// Grid brute force for the original problem, `nN ≤ 4`.
///
/// The last block is eliminated through the coupling constraint and the remaining
/// coordinates are searched on successively finer grids (21 points per axis, shrinking
/// around the incumbent) from pitch `2·half_width/20` down to at most `1e-4`. Only grid
/// points with `g ≤ feas_tol` count as feasible; if none are, the least-violating point
/// is refined instead.
pub fn grid_search_original(
    p: &ProblemInstance,
    center: &[f64],
    half_width: f64,
    feas_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if p.dim_x() > GRID_SIZE_LIMIT {
        return Err(Error::TooLarge {
            size: p.dim_x(),
            limit: GRID_SIZE_LIMIT,
        });
    }
    check_dim("grid center", p.dim_x(), center.len())?;
    if !(half_width > 0.0) {
        return Err(Error::InvalidParameter("grid half width must be positive".into()));
    }
    let n = p.n();
    let free = p.dim_x() - n;
    let lift = |y: &[f64]| -> Vec<f64> {
        let mut x = y.to_vec();
        let mut last = p.x_tot().to_vec();
        for (k, v) in y.iter().enumerate() {
            last[k % n] -= v;
        }
        x.extend(last);
        x
    };
    // (max violation, cost) compared lexicographically after clamping small violations
    let score = |y: &[f64]| -> Result<(f64, f64)> {
        let x = lift(y);
        let viol = p.eval_constraints(&x)?.into_iter().fold(0.0f64, f64::max);
        Ok((if viol <= feas_tol { 0.0 } else { viol }, p.eval_cost(&x)?))
    };
    let better = |a: (f64, f64), b: (f64, f64)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);

    const POINTS: usize = 21;
    let mut mid: Vec<f64> = center[..free].to_vec();
    let mut hw = half_width;
    let mut best_y = mid.clone();
    let mut best = score(&best_y)?;
    loop {
        let pitch = 2.0 * hw / (POINTS - 1) as f64;
        let total = POINTS.pow(free as u32);
        for idx in 0..total {
            let mut rem = idx;
            let y: Vec<f64> = (0..free)
                .map(|k| {
                    let i = rem % POINTS;
                    rem /= POINTS;
                    mid[k] - hw + pitch * i as f64
                })
                .collect();
            let s = score(&y)?;
            if better(s, best) {
                best = s;
                best_y = y;
            }
        }
        if pitch <= 1e-4 || free == 0 {
            break;
        }
        mid.clone_from(&best_y);
        hw = 4.0 * pitch;
    }
    let x = lift(&best_y);
    let f = p.eval_cost(&x)?;
    Ok((x, f))
}

/// Largest relative error between `grad_fn(point)` and central differences of
/// `value_fn` with step `h`, relative to `max(||grad||∞, 1e-12)`.
pub fn finite_diff_check(
    value_fn: impl Fn(&[f64]) -> f64,
    grad_fn: impl Fn(&[f64]) -> Vec<f64>,
    point: &[f64],
    h: f64,
) -> f64 {
    let grad = grad_fn(point);
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-12);
    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..point.len() {
        probe[k] = point[k] + h;
        let fp = value_fn(&probe);
        probe[k] = point[k] - h;
        let fm = value_fn(&probe);
        probe[k] = point[k];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    worst
}
