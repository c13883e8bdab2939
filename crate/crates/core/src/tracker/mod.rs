//! Multi-robot barycenter tracking built on the saddle-point solver.

mod export;
mod run;
mod scenario;

pub use export::{format_number, write_csv, write_json, ExportFormat};
pub use run::{run_tracking, Mode, StepRecord, TrackingSummary, TrajectoryLog};
pub use scenario::{
    step_problem, synthetic_target, warm_start, GraphSpec, InitialMode, InitialPositions, LipschitzSettings, Scenario,
    ScenarioFile, SolverSettings, SyntheticPath, TargetPath, DEFAULT_STEPS, DIM,
};
