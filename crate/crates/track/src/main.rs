//! `track`: barycenter tracking, step-size certification and weight validation.
//!
//! Exit codes: 0 success, 1 bad input or usage, 2 certification or validation failure,
//! 3 solver error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use saddle_alloc::solver::{certify_weights, estimate_lipschitz, SampleBox, StepSizes};
use saddle_alloc::tracker::{run_tracking, step_problem, warm_start, write_csv, write_json, Mode, Scenario};
use saddle_alloc::weights::{design_weights, validate_weight_matrix, DEFAULT_TOL};
use saddle_alloc::{Error, Graph};

#[derive(Parser, Debug)]
#[command(
    name = "track",
    version,
    about = "Distributed barycenter tracking with a feasibility-preserving saddle-point solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a tracking scenario and export the trajectory.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Centralized)]
        mode: ModeArg,
        /// Also solve every step with the reference solvers and log the deviations.
        #[arg(long)]
        oracle_check: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Print the step-size certificate for the first step of a scenario.
    Certify {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Check a weight matrix against a graph (the Laplacian unless --matrix is given).
    ValidateWeights {
        #[arg(long)]
        graph: PathBuf,
        /// JSON array of rows.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Centralized,
    Distributed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

const EXIT_INPUT: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_SOLVER: u8 = 3;

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Step { .. }
            | Error::BarrierBreakdown { .. }
            | Error::NoConvergence { .. }
            | Error::Diverged { .. }
            | Error::InfeasibleStart { .. }
            | Error::OutsideBall { .. }
            | Error::MissingMessage { .. }
            | Error::ScheduleMismatch(_) => EXIT_SOLVER,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Ok(Scenario::from_json_str(&read(path)?)?)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            scenario,
            mode,
            oracle_check,
            out,
            format,
        } => {
            let s = load_scenario(&scenario)?;
            let mode = match mode {
                ModeArg::Centralized => Mode::Centralized,
                ModeArg::Distributed => Mode::Distributed,
            };
            let log = run_tracking(&s, mode, oracle_check)?;
            let files = match format {
                FormatArg::Csv => write_csv(&log, &out)?,
                FormatArg::Json => vec![write_json(&log, &out)?],
            };
            emit(&serde_json::to_string(&log.summary).expect("summary serializes"));
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Certify { scenario } => {
            let s = load_scenario(&scenario)?;
            let p = step_problem(&s, 1, &s.initial)?;
            let center = warm_start(&s, 1, &s.initial)?;
            let region = SampleBox {
                center,
                node_radius: vec![s.lipschitz_radius(); s.node_count()],
                mu_max: s.lipschitz.mu_max,
            };
            let f_phi = estimate_lipschitz(&p, &region, s.lipschitz.samples, s.lipschitz.seed)?;
            let w = design_weights(&s.graph, s.weight_strategy);
            let steps = StepSizes::new(s.solver.alpha, s.solver.beta)?;
            let cert = certify_weights(&w, p.phi(), f_phi, steps)?;
            emit(&cert.to_json_string());
            if cert.is_certified() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_REJECTED,
                    message: format!("step sizes not certified: {}", cert.reasons.join("; ")),
                })
            }
        }
        Command::ValidateWeights { graph, matrix } => {
            let g = Graph::from_json_str(&read(&graph)?)?;
            let w = match matrix {
                None => design_weights(&g, Default::default()).entries().clone(),
                Some(path) => {
                    let rows: Vec<Vec<f64>> = serde_json::from_str(&read(&path)?).map_err(Error::from)?;
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Failure {
                            code: EXIT_INPUT,
                            message: "weight matrix must be square".into(),
                        });
                    }
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
            };
            let report = validate_weight_matrix(&w, &g, DEFAULT_TOL)?;
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            if report.passed() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_REJECTED,
                    message: "weight matrix rejected".into(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
