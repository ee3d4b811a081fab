//! `noma-vlc` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 solver failure,
//! 3 oracle validation failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::experiment::{
    compare_with_oracle, gen_scenario, parse_solver_config, run_sweep, sweep_csv, threads_from_env, LinkDefaults,
    RoomConfig, SweepSpec,
};
use crate::noma::{rate_report, Scenario, ScenarioFile};
use crate::oracle::GridSpec;
use crate::solver::{solve, SolveStatus, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "noma-vlc", version, about = "Harmonic-utility NOMA power control for VLC cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drop users uniformly in the default room and write a scenario file.
    GenScenario {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long)]
        out: PathBuf,
        /// Total power budget in mW.
        #[arg(long, default_value_t = 20.0)]
        p_max: f64,
        /// PAM coefficient; defaults to 1 with a warning.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Solve one scenario and write the result as JSON.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve the scenario for each P_max and write a CSV.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "8,10,12,14,16,18,20")]
        pmax_list: Vec<f64>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare the solver against the brute-force grid oracle (at most 4 users).
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Grid cells per power axis; defaults by user count.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

#[derive(Serialize)]
struct SolveOutput {
    status: SolveStatus,
    allocation_mw: Vec<f64>,
    rates_nats: Vec<f64>,
    sum_rate_nats: f64,
    harmonic_objective: f64,
    transformed_objective: f64,
    kkt_residual: f64,
    rate_binding_gaps: Vec<f64>,
    outer_iterations: usize,
    newton_iterations: usize,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario<f64>, Failure> {
    let file = ScenarioFile::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    file.to_scenario().map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig<f64>, Failure> {
    match path {
        None => Ok(SolverConfig::default()),
        Some(p) => parse_solver_config(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display()))),
    }
}

fn solver_failure(e: crate::Error) -> Failure {
    Failure { code: EXIT_SOLVER, message: e.to_string() }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenScenario { seed, users, out, p_max, delta } => {
            let pam_coefficient = delta.unwrap_or_else(|| {
                eprintln!("warning: --delta not given, using pam_coefficient = 1");
                1.0
            });
            let link = LinkDefaults { p_max_mw: p_max, pam_coefficient, ..LinkDefaults::default() };
            let room = RoomConfig { num_users: users, seed, ..RoomConfig::default() };
            let (scenario, provenance) = gen_scenario(&room, &link).map_err(|e| usage(e.to_string()))?;
            write(&out, &ScenarioFile::from_scenario(&scenario, Some(provenance)).to_json())
        }
        Command::Solve { scenario, out, config } => {
            let s = load_scenario(&scenario)?;
            let cfg = load_config(config.as_deref())?;
            let r = solve(&s, &cfg).map_err(solver_failure)?;
            let report = rate_report(&s, &r.sic_allocation).map_err(solver_failure)?;
            let output = SolveOutput {
                status: r.status,
                allocation_mw: r.allocation.as_slice().to_vec(),
                rates_nats: s.to_original_order(&report.rates),
                sum_rate_nats: report.sum_rate,
                harmonic_objective: report.harmonic_objective,
                transformed_objective: r.transformed_objective,
                kkt_residual: r.kkt_residual,
                rate_binding_gaps: r.rate_binding_gaps.clone(),
                outer_iterations: r.outer_iterations,
                newton_iterations: r.newton_iterations,
            };
            let mut json = serde_json::to_string_pretty(&output).expect("result serializes");
            json.push('\n');
            write(&out, &json)?;
            if r.status != SolveStatus::Optimal {
                return Err(Failure { code: EXIT_SOLVER, message: format!("solver finished with status {}", r.status) });
            }
            Ok(())
        }
        Command::Sweep { scenario, pmax_list, csv, config } => {
            let s = load_scenario(&scenario)?;
            let cfg = load_config(config.as_deref())?;
            let spec = SweepSpec::new(pmax_list).map_err(|e| usage(format!("--pmax-list: {e}")))?;
            let rows = run_sweep(&s, &spec, &cfg, threads_from_env()).map_err(solver_failure)?;
            write(&csv, &sweep_csv(&rows))?;
            if let Some(bad) = rows.iter().find(|r| r.status != SolveStatus::Optimal) {
                return Err(Failure {
                    code: EXIT_SOLVER,
                    message: format!("P_max = {} finished with status {}", bad.p_max_mw, bad.status),
                });
            }
            Ok(())
        }
        Command::Validate { scenario, resolution, config } => {
            let s = load_scenario(&scenario)?;
            let cfg = load_config(config.as_deref())?;
            let grid = match resolution {
                Some(n) => GridSpec::new(n),
                None => GridSpec::default_for(s.num_users()),
            };
            let cmp = compare_with_oracle(&s, &cfg, &grid).map_err(|e| match e {
                crate::Error::Oracle(_) => usage(e.to_string()),
                other => solver_failure(other),
            })?;
            println!(
                "solver={} oracle={} bound={} relative_gap={:e} tolerance={:e} status={}",
                cmp.solver_objective,
                cmp.oracle_objective,
                cmp.oracle_error_bound,
                cmp.relative_gap,
                cmp.tolerance,
                cmp.solver_status
            );
            if cmp.solver_status != SolveStatus::Optimal {
                return Err(Failure { code: EXIT_SOLVER, message: format!("solver finished with status {}", cmp.solver_status) });
            }
            if !cmp.passed {
                return Err(Failure {
                    code: EXIT_VALIDATION,
                    message: format!("oracle mismatch: relative gap {:e} > tolerance {:e}", cmp.relative_gap, cmp.tolerance),
                });
            }
            Ok(())
        }
    }
}
