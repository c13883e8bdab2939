//! Information-exchange weight matrices.
//!
//! A weight matrix `W` is admissible for the feasibility-preserving iteration when
//!
//! * (a) `1ᵀW = 0` and `W1 = 0`,
//! * (b) `W + Wᵀ + (1/N)11ᵀ` is positive definite (the zero eigenvalue is simple),
//! * (c) off-diagonal entries are nonzero only on graph edges.
//!
//! All numerical checks are relative to the largest entry magnitude of `W`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default relative tolerance for the admissibility checks.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Second-smallest eigenvalue of `(W + Wᵀ)/2`.
    pub lambda2: f64,
    /// Largest eigenvalue of `(W + Wᵀ)/2`.
    pub lambda_max: f64,
    /// Largest singular value of `W`.
    pub sigma_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub max_abs_row_sum: f64,
    pub max_abs_col_sum: f64,
    /// Minimum eigenvalue of `W + Wᵀ + (1/N)11ᵀ`.
    pub min_eig_shifted: f64,
    /// Off-diagonal entries (0-based `(row, col)`) that are nonzero but not on an edge.
    pub sparsity_mismatches: Vec<(usize, usize)>,
    /// Absolute threshold the residuals were compared against.
    pub threshold: f64,
    pub zero_sums: bool,
    pub simple_zero_eigenvalue: bool,
    pub sparsity: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.zero_sums && self.simple_zero_eigenvalue && self.sparsity
    }

    fn failures(&self) -> String {
        let mut reasons = Vec::new();
        if !self.zero_sums {
            reasons.push(format!(
                "(a) row/column sums not zero (row {:e}, col {:e})",
                self.max_abs_row_sum, self.max_abs_col_sum
            ));
        }
        if !self.simple_zero_eigenvalue {
            reasons.push(format!(
                "(b) W + Wᵀ + 11ᵀ/N not positive definite (min eig {:e})",
                self.min_eig_shifted
            ));
        }
        if !self.sparsity {
            reasons.push(format!(
                "(c) {} entries off the graph sparsity pattern",
                self.sparsity_mismatches.len()
            ));
        }
        reasons.join("; ")
    }
}

/// Checks properties (a)–(c) of `w` against `graph` with relative tolerance `tol`.
pub fn validate_weight_matrix(w: &DMatrix<f64>, graph: &Graph, tol: f64) -> Result<ValidationReport> {
    let n = graph.node_count();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "weight matrix size",
            expected: n,
            got: if w.nrows() != n { w.nrows() } else { w.ncols() },
        });
    }
    let scale = w.amax();
    let threshold = tol * scale;

    let max_abs_row_sum = (0..n).map(|i| w.row(i).sum().abs()).fold(0.0, f64::max);
    let max_abs_col_sum = (0..n).map(|j| w.column(j).sum().abs()).fold(0.0, f64::max);

    let shifted = w + w.transpose() + DMatrix::from_element(n, n, 1.0 / n as f64);
    let min_eig_shifted = SymmetricEigen::new(shifted).eigenvalues.min();

    let mut sparsity_mismatches = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && w[(i, j)].abs() > threshold && !graph.has_edge(i, j) {
                sparsity_mismatches.push((i, j));
            }
        }
    }

    Ok(ValidationReport {
        zero_sums: max_abs_row_sum <= threshold && max_abs_col_sum <= threshold,
        simple_zero_eigenvalue: min_eig_shifted > threshold,
        sparsity: sparsity_mismatches.is_empty(),
        max_abs_row_sum,
        max_abs_col_sum,
        min_eig_shifted,
        sparsity_mismatches,
        threshold,
    })
}

pub fn spectral_summary(w: &DMatrix<f64>) -> SpectralSummary {
    let sym = (w + w.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let lambda_max = *eig.last().unwrap_or(&0.0);
    let lambda2 = eig.get(1).copied().unwrap_or(lambda_max);
    let sigma_max = largest_singular_value(w);
    SpectralSummary {
        lambda2,
        lambda_max,
        sigma_max,
    }
}

pub(crate) fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// A validated weight matrix together with its spectral summary.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    symmetric: bool,
    spectral: SpectralSummary,
}

impl WeightMatrix {
    /// Validates `entries` against `graph` and computes the spectral summary.
    pub fn new(entries: DMatrix<f64>, graph: &Graph) -> Result<Self> {
        let report = validate_weight_matrix(&entries, graph, DEFAULT_TOL)?;
        if !report.passed() {
            return Err(Error::InvalidWeights(report.failures()));
        }
        let threshold = DEFAULT_TOL * entries.amax();
        let symmetric = (&entries - entries.transpose()).amax() <= threshold;
        let spectral = spectral_summary(&entries);
        Ok(WeightMatrix {
            entries,
            symmetric,
            spectral,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn spectral(&self) -> SpectralSummary {
        self.spectral
    }

    pub fn node_count(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

/// Graph Laplacian: node degree on the diagonal, −1 on edges.
pub fn laplacian(graph: &Graph) -> WeightMatrix {
    WeightMatrix::new(laplacian_entries(graph), graph).expect("Laplacian of a connected graph is admissible")
}

pub fn laplacian_entries(graph: &Graph) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in graph.edges() {
        l[(i, j)] = -1.0;
        l[(j, i)] = -1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightStrategy {
    #[default]
    Laplacian,
    /// `L / λ_max(L)`, so that `λ_max = 1` and the simple step-size bound reads `β < 1`.
    ScaledLaplacian,
}

pub fn design_weights(graph: &Graph, strategy: WeightStrategy) -> WeightMatrix {
    let l = laplacian(graph);
    match strategy {
        WeightStrategy::Laplacian => l,
        WeightStrategy::ScaledLaplacian => {
            let lambda_max = l.spectral.lambda_max;
            if lambda_max == 0.0 {
                // single node: nothing to scale
                return l;
            }
            WeightMatrix::new(l.entries / lambda_max, graph).expect("scaled Laplacian is admissible")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn ring_laplacian_matches_printed_matrix() {
        let l = laplacian(&Graph::seven_robot_ring());
        let expected = dmatrix![
            3.0, -1.0, 0.0, -1.0, 0.0, 0.0, -1.0;
            -1.0, 2.0, -1.0, 0.0, 0.0, 0.0, 0.0;
            0.0, -1.0, 2.0, -1.0, 0.0, 0.0, 0.0;
            -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, 0.0;
            0.0, 0.0, 0.0, -1.0, 2.0, -1.0, 0.0;
            0.0, 0.0, 0.0, 0.0, -1.0, 2.0, -1.0;
            -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 2.0
        ];
        assert_eq!(l.entries(), &expected);
        assert!(l.is_symmetric());
    }

    #[test]
    fn two_node_laplacian() {
        let g = Graph::path(2).unwrap();
        let l = laplacian(&g);
        assert_eq!(l.entries(), &dmatrix![1.0, -1.0; -1.0, 1.0]);
        let s = l.spectral();
        assert_relative_eq!(s.lambda2, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.lambda_max, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.sigma_max, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix_fails_simple_zero_eigenvalue() {
        let g = Graph::seven_robot_ring();
        let report = validate_weight_matrix(&DMatrix::zeros(7, 7), &g, DEFAULT_TOL).unwrap();
        assert!(report.zero_sums);
        assert!(!report.simple_zero_eigenvalue);
        assert!(report.sparsity);
        assert!(!report.passed());
    }

    #[test]
    fn off_pattern_entry_is_reported() {
        let g = Graph::seven_robot_ring();
        let mut w = laplacian_entries(&g);
        w[(0, 2)] = -1.0;
        let report = validate_weight_matrix(&w, &g, DEFAULT_TOL).unwrap();
        assert!(!report.sparsity);
        assert_eq!(report.sparsity_mismatches, vec![(0, 2)]);
        assert!(matches!(WeightMatrix::new(w, &g), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn wrong_size_is_dimension_mismatch() {
        let g = Graph::path(3).unwrap();
        assert!(matches!(
            validate_weight_matrix(&DMatrix::zeros(2, 2), &g, DEFAULT_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scaled_laplacian_of_two_node_path() {
        let g = Graph::path(2).unwrap();
        let w = design_weights(&g, WeightStrategy::ScaledLaplacian);
        assert_relative_eq!(w.entries(), &dmatrix![0.5, -0.5; -0.5, 0.5], epsilon = 1e-15);
    }

    #[test]
    fn nonsymmetric_circulation_is_admissible() {
        let cycle = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut w = laplacian_entries(&cycle);
        for i in 0..3 {
            let j = (i + 1) % 3;
            w[(i, j)] += 0.3;
            w[(j, i)] -= 0.3;
        }
        let wm = WeightMatrix::new(w, &cycle).unwrap();
        assert!(!wm.is_symmetric());
        assert!(wm.spectral().sigma_max > wm.spectral().lambda_max);
    }
}
