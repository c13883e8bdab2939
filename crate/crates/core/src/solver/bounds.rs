//! A-priori bounds on the price of regularization.
//!
//! For the regularized saddle point `(x*, μ*)`:
//!
//! ```text
//! max(0, g_i(x*))  ≤  M_d,i · M_μ · √(ε / 2ν)
//! |f(x*) − f_opt|  ≤  M_f · M_μ · √(ε / 2ν) + (ν/2) D²
//! ```
//!
//! where `M_d,i` bounds `||∇g_i||`, `M_μ` bounds the optimal duals, `M_f` bounds `||∇f||`
//! and `D` bounds `||x||` over the region of interest.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{norm, ProblemInstance, StackedPoint};

/// Per-constraint violation bounds `M_d,i · M_μ · √(ε/2ν)`.
pub fn violation_bound(m_d: &[f64], m_mu: f64, nu: f64, epsilon: f64) -> Vec<f64> {
    let s = (epsilon / (2.0 * nu)).sqrt();
    m_d.iter().map(|md| md * m_mu * s).collect()
}

/// `M_f · M_μ · √(ε/2ν) + (ν/2) D²`.
pub fn suboptimality_bound(m_f: f64, m_mu: f64, d: f64, nu: f64, epsilon: f64) -> f64 {
    m_f * m_mu * (epsilon / (2.0 * nu)).sqrt() + 0.5 * nu * d * d
}

/// Constants measured over a cloud of points and inflated by 10 %.
///
/// These are empirical stand-ins, not guaranteed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConstants {
    /// `max ||∇g_q(x)||` per stacked constraint.
    pub m_d: Vec<f64>,
    /// `max ||μ||`.
    pub m_mu: f64,
    pub m_f: f64,
    pub d: f64,
}

impl EmpiricalConstants {
    pub const INFLATION: f64 = 1.1;

    /// Measures the constants over `cloud`, e.g. iterates of a run plus the reference
    /// solutions.
    pub fn from_cloud(p: &ProblemInstance, cloud: &[StackedPoint]) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::InvalidParameter("empty point cloud".into()));
        }
        let mut m_d = vec![0.0f64; p.m()];
        let (mut m_mu, mut m_f, mut d) = (0.0f64, 0.0f64, 0.0f64);
        for z in cloud {
            p.check_point(z)?;
            for (q, md) in m_d.iter_mut().enumerate() {
                *md = md.max(norm(&p.constraint_gradient(q, &z.x)?));
            }
            m_mu = m_mu.max(norm(&z.mu));
            m_f = m_f.max(norm(&p.cost_gradient(&z.x)?));
            d = d.max(norm(&z.x));
        }
        check_dim("constraint constants", p.m(), m_d.len())?;
        let k = Self::INFLATION;
        Ok(EmpiricalConstants {
            m_d: m_d.into_iter().map(|v| k * v).collect(),
            m_mu: k * m_mu,
            m_f: k * m_f,
            d: k * d,
        })
    }

    pub fn violation_bound(&self, nu: f64, epsilon: f64) -> Vec<f64> {
        violation_bound(&self.m_d, self.m_mu, nu, epsilon)
    }

    pub fn suboptimality_bound(&self, nu: f64, epsilon: f64) -> f64 {
        suboptimality_bound(self.m_f, self.m_mu, self.d, nu, epsilon)
    }
}
