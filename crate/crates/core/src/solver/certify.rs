//! Step-size certificates for the regularized iteration.
//!
//! With `φ = min(ν, ε)` and `F` a Lipschitz constant of the saddle operator
//! `Φ(z) = (∇ₓL(z), −∇_μL(z))`, the symmetric path uses
//!
//! ```text
//! C = max(βλ_max, 1),   κ = φ − F(βλ_max − 1),
//! certified  ⇔  βλ_max < 1 + φ/F  and  α < 2κ / (C²F²),
//! rate       r = 1 − 2ακ + α²C²F².
//! ```
//!
//! The non-symmetric path replaces `βλ_max` by `βσ_max(W)` in `C` and `βλ_max − 1` by
//! `σ_max(βW − I)` in `κ`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{norm, ProblemInstance, StackedPoint};
use crate::weights::{largest_singular_value, WeightMatrix};

use super::StepSizes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzSource {
    /// Derived from known constants of the problem.
    Analytic,
    /// Sampled; not a guaranteed upper bound.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub source: LipschitzSource,
}

impl LipschitzEstimate {
    pub fn analytic(value: f64) -> Self {
        LipschitzEstimate {
            value,
            source: LipschitzSource::Analytic,
        }
    }
}

/// Spectral information about `W` used by [`certify`].
#[derive(Debug, Clone, Copy)]
pub enum WeightBound<'a> {
    Symmetric {
        lambda_max: f64,
    },
    NonSymmetric {
        sigma_max: f64,
        matrix: Option<&'a DMatrix<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub symmetric: bool,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub f_phi: f64,
    pub f_phi_source: LipschitzSource,
    pub c: f64,
    pub kappa: f64,
    pub rate: f64,
    /// Largest admissible `α` for the given `β` (`2κ/(C²F²)`, or 0 when `κ ≤ 0`).
    pub alpha_bound: f64,
    /// `βλ_max` (symmetric) or `σ_max(βW − I)` (non-symmetric).
    pub beta_lhs: f64,
    /// `1 + φ/F` (symmetric) or `φ/F` (non-symmetric).
    pub beta_rhs: f64,
    pub reasons: Vec<String>,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite (got {v})"
        )))
    }
}

/// Evaluates the step-size conditions and the contraction rate.
pub fn certify(bound: WeightBound<'_>, phi: f64, f_phi: LipschitzEstimate, steps: StepSizes) -> Result<Certificate> {
    check_positive("phi", phi)?;
    check_positive("Lipschitz constant", f_phi.value)?;
    let StepSizes { alpha, beta } = steps;
    let f = f_phi.value;

    let (symmetric, c, kappa, beta_lhs, beta_rhs) = match bound {
        WeightBound::Symmetric { lambda_max } => {
            check_positive("lambda_max", lambda_max)?;
            let bl = beta * lambda_max;
            (true, bl.max(1.0), phi - f * (bl - 1.0), bl, 1.0 + phi / f)
        }
        WeightBound::NonSymmetric { sigma_max, matrix } => {
            let w = matrix.ok_or(Error::MissingMatrix)?;
            check_positive("sigma_max", sigma_max)?;
            let s = shifted_sigma(w, beta);
            (false, (beta * sigma_max).max(1.0), phi - f * s, s, phi / f)
        }
    };

    let alpha_bound = if kappa > 0.0 {
        2.0 * kappa / (c * c * f * f)
    } else {
        0.0
    };
    let rate = 1.0 - 2.0 * alpha * kappa + alpha * alpha * c * c * f * f;

    let mut reasons = Vec::new();
    if !(beta_lhs < beta_rhs) {
        reasons.push(if symmetric {
            format!("beta*lambda_max = {beta_lhs} is not below 1 + phi/F = {beta_rhs}")
        } else {
            format!("sigma_max(beta W - I) = {beta_lhs} is not below phi/F = {beta_rhs}")
        });
    }
    if !(kappa > 0.0 && alpha < alpha_bound) {
        reasons.push(format!(
            "alpha = {alpha} is not below 2 kappa/(C^2 F^2) = {alpha_bound}"
        ));
    }
    // both conditions together imply κ > 0 and r < 1; guard against rounding at the boundary
    if reasons.is_empty() && !(rate < 1.0) {
        reasons.push(format!("contraction rate {rate} is not below 1"));
    }
    let verdict = if reasons.is_empty() {
        Verdict::Certified
    } else {
        Verdict::Uncertified
    };
    Ok(Certificate {
        verdict,
        symmetric,
        alpha,
        beta,
        phi,
        f_phi: f,
        f_phi_source: f_phi.source,
        c,
        kappa,
        rate,
        alpha_bound,
        beta_lhs,
        beta_rhs,
        reasons,
    })
}

/// [`certify`] with the path chosen from the matrix itself.
pub fn certify_weights(w: &WeightMatrix, phi: f64, f_phi: LipschitzEstimate, steps: StepSizes) -> Result<Certificate> {
    let s = w.spectral();
    let bound = if w.is_symmetric() {
        WeightBound::Symmetric {
            lambda_max: s.lambda_max,
        }
    } else {
        WeightBound::NonSymmetric {
            sigma_max: s.sigma_max,
            matrix: Some(w.entries()),
        }
    };
    certify(bound, phi, f_phi, steps)
}

/// `σ_max(βW − I)`.
fn shifted_sigma(w: &DMatrix<f64>, beta: f64) -> f64 {
    let n = w.nrows();
    largest_singular_value(&(w * beta - DMatrix::identity(n, n)))
}

/// Largest `β` with `σ_max(βW − I) < φ/F`.
///
/// `σ(β) = σ_max(βW − I)` is convex in `β` and at least 1 (because `(βW − I)1 = −1`),
/// so the feasible set is an interval, empty unless `φ/F > 1`. Beyond
/// `β = (1 + φ/F)/σ_max(W)` the reverse triangle inequality rules out feasibility, so
/// that is the search bracket. The minimizer is located by golden-section search and
/// the upper boundary by bisection down to `tol`.
pub fn max_beta_nonsymmetric(w: &DMatrix<f64>, phi: f64, f_phi: f64, tol: f64) -> Result<f64> {
    check_positive("phi", phi)?;
    check_positive("Lipschitz constant", f_phi)?;
    check_dim("weight matrix columns", w.nrows(), w.ncols())?;
    let threshold = phi / f_phi;
    let sigma_w = largest_singular_value(w);
    if !(sigma_w > 0.0) {
        return Err(Error::InvalidParameter("weight matrix is zero".into()));
    }
    let sigma = |b: f64| shifted_sigma(w, b);
    let hi = (1.0 + threshold) / sigma_w;

    // golden-section search for the minimizer on [0, hi]
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (sigma(c), sigma(d));
    while b - a > tol.max(1e-14 * hi) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = sigma(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = sigma(d);
        }
    }
    let best = 0.5 * (a + b);
    let best_sigma = sigma(best);
    if !(best_sigma < threshold) {
        return Err(Error::NoFeasibleBeta { threshold, best_sigma });
    }

    // bisection on [best, hi]: σ(lo) < threshold ≤ σ(hi)
    let (mut lo, mut up) = (best, hi);
    while up - lo > tol {
        let mid = 0.5 * (lo + up);
        if sigma(mid) < threshold {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok(lo)
}

/// Axis-aligned region sampled by [`estimate_lipschitz`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    /// Center of the primal box (length `nN`).
    pub center: Vec<f64>,
    /// Half-width of the box for each node block.
    pub node_radius: Vec<f64>,
    /// Duals are sampled in `[0, mu_max]`.
    pub mu_max: f64,
}

fn saddle_operator(p: &ProblemInstance, z: &StackedPoint) -> Result<Vec<f64>> {
    let mut v = p.grad_x(z)?;
    v.extend(p.grad_mu(z)?.into_iter().map(|g| -g));
    Ok(v)
}

/// Sampled estimate of the Lipschitz constant of `Φ` over `region`.
///
/// Half of the pairs differ in one coordinate, half in a random direction; the largest
/// observed ratio `||Φ(a) − Φ(b)|| / ||a − b||` is inflated by 1.5. The result is
/// labelled [`LipschitzSource::Estimated`].
pub fn estimate_lipschitz(
    p: &ProblemInstance,
    region: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    check_dim("sample box center", p.dim_x(), region.center.len())?;
    check_dim("sample box radii", p.node_count(), region.node_radius.len())?;
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if region.node_radius.iter().any(|r| !(*r >= 0.0)) || !(region.mu_max >= 0.0) {
        return Err(Error::InvalidParameter("sample box extents must be nonnegative".into()));
    }
    let n = p.n();
    let dim = p.dim_x() + p.m();
    let half_width = |k: usize| -> f64 {
        if k < p.dim_x() {
            region.node_radius[k / n]
        } else {
            0.5 * region.mu_max
        }
    };
    let mid = |k: usize| -> f64 {
        if k < p.dim_x() {
            region.center[k]
        } else {
            0.5 * region.mu_max
        }
    };
    let split = |v: Vec<f64>| {
        let mu = v[p.dim_x()..].to_vec();
        let mut x = v;
        x.truncate(p.dim_x());
        StackedPoint::new(x, mu)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for s in 0..samples {
        let a: Vec<f64> = (0..dim)
            .map(|k| mid(k) + half_width(k) * rng.gen_range(-1.0..=1.0))
            .collect();
        let scale = 1e-3 * (1.0 + (0..dim).map(half_width).fold(0.0, f64::max));
        let mut dir = vec![0.0; dim];
        if s % 2 == 0 {
            dir[rng.gen_range(0..dim)] = 1.0;
        } else {
            for d in dir.iter_mut() {
                *d = rng.sample(StandardNormal);
            }
            let len = norm(&dir);
            if len == 0.0 {
                continue;
            }
            dir.iter_mut().for_each(|d| *d /= len);
        }
        let b: Vec<f64> = a.iter().zip(&dir).map(|(v, d)| v + scale * d).collect();
        let step = norm(&a.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>());
        if step == 0.0 {
            continue;
        }
        let (za, zb) = (split(a), split(b));
        let fa = saddle_operator(p, &za)?;
        let fb = saddle_operator(p, &zb)?;
        let diff = norm(&fa.iter().zip(&fb).map(|(u, v)| u - v).collect::<Vec<_>>());
        best = best.max(diff / step);
    }
    Ok(LipschitzEstimate {
        value: 1.5 * best,
        source: LipschitzSource::Estimated,
    })
}
