use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: {components} components")]
    DisconnectedGraph { components: usize },

    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(usize, usize, &'static str),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("weight matrix violates required properties: {0}")]
    InvalidWeights(String),

    #[error("node {node} lies outside its ball: |x| = {norm} >= {radius}")]
    OutsideBall { node: usize, norm: f64, radius: f64 },

    #[error("initial point violates the resource constraint (residual {residual:e})")]
    InfeasibleStart { residual: f64 },

    #[error("barrier backtracking collapsed at iteration {tau} (factor {gamma:e})")]
    BarrierBreakdown { tau: usize, gamma: f64 },

    #[error("non-symmetric certification requires the weight matrix")]
    MissingMatrix,

    #[error("no step size beta satisfies sigma_max(beta W - I) < {threshold}")]
    NoFeasibleBeta { threshold: f64, best_sigma: f64 },

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iterate became non-finite at iteration {tau}; the step sizes are too large")]
    Diverged { tau: usize },

    #[error("instance too large for the reference solver: nN = {size} > {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("node {node} missing message from {from} in phase {phase}")]
    MissingMessage { node: usize, from: usize, phase: u8 },

    #[error("snapshot schedules differ: {0}")]
    ScheduleMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tracking step {k} failed: {source}")]
    Step {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}
