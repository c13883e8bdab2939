//! Feasibility-preserving regularized saddle-point solver for separable convex problems
//! with a resource-allocation coupling constraint over a communication network.
//!
//! The primal step multiplies the Lagrangian gradient by a graph-sparse weight matrix
//! `W` with `1ᵀW = 0`, so every iterate keeps `Σ_i x_i = x_tot` while each node only
//! talks to its neighbors. The crate provides
//!
//! * [`graph`] and [`weights`]: topologies, Laplacians and admissibility checks for `W`,
//! * [`problem`] and [`functions`]: problem instances and the regularized Lagrangian,
//! * [`solver`]: the iteration, step-size certificates and approximation bounds,
//! * [`dist`]: the same iteration as message-passing node programs,
//! * [`oracle`]: independent centralized reference solutions and KKT checks,
//! * [`tracker`]: the multi-robot barycenter tracking application.
//!
//! ```
//! use std::sync::Arc;
//! use saddle_alloc::functions::{ShiftedSquare, SquaredDistance};
//! use saddle_alloc::weights::laplacian;
//! use saddle_alloc::{Graph, ProblemInstance, RunOptions, SaddleSolver, StepSizes};
//!
//! # fn main() -> saddle_alloc::Result<()> {
//! let p = ProblemInstance::builder(Graph::path(3)?, 1)
//!     .cost(0, Arc::new(ShiftedSquare::new(1.0, vec![1.0], 0.0)))
//!     .cost(1, Arc::new(ShiftedSquare::new(1.0, vec![-2.0], 0.0)))
//!     .cost(2, Arc::new(ShiftedSquare::new(1.0, vec![0.5], 0.0)))
//!     .all_edges(Arc::new(SquaredDistance::new(1.0)))
//!     .x_tot(vec![1.5])
//!     .regularization(0.5, 0.1)
//!     .build()?;
//! let w = laplacian(p.graph());
//! let trace = SaddleSolver::new(&p, &w, StepSizes::new(0.05, 0.3)?)?.run(&RunOptions::default())?;
//! let total: f64 = trace.final_state.x.iter().sum();
//! assert!((total - 1.5).abs() < 1e-12);
//! # Ok(())
//! # }
//! ```

// `!(x > 0.0)` deliberately rejects NaN together with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod functions;
pub mod graph;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod tracker;
pub mod weights;

pub use error::{Error, Result};
pub use graph::Graph;
pub use problem::{BarrierConfig, ProblemInstance, StackedPoint};
pub use solver::{Certificate, RunOptions, SaddleSolver, StepSizes, Trace};
pub use weights::{WeightMatrix, WeightStrategy};
