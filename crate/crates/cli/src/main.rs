use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use udisc_cli::{
    cmd_cgu, cmd_epm, cmd_group_verify, cmd_gu, cmd_simulate, cmd_solve, CliError, Flags, Output, Pipeline,
};
use udisc_core::SolverOptions;

/// Optimal unambiguous discrimination of linearly independent pure states.
#[derive(Parser)]
#[command(name = "udisc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Print the full report as JSON.
    #[arg(long, global = true)]
    json: bool,

    #[command(flatten)]
    solver: SolverArgs,

    /// Seed for the simulator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Simulate this many trials after solving (`simulate` defaults to 10^6).
    #[arg(long, global = true)]
    trials: Option<u64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative duality-gap tolerance.
    #[arg(long, global = true, default_value_t = SolverOptions::default().tol_gap)]
    tol_gap: f64,

    /// Primal and dual feasibility tolerance.
    #[arg(long, global = true, default_value_t = SolverOptions::default().tol_feas)]
    tol_feas: f64,

    /// Complementary slackness target.
    #[arg(long, global = true, default_value_t = SolverOptions::default().tol_slack)]
    tol_slack: f64,

    /// Interior-point iteration limit.
    #[arg(long, global = true, default_value_t = SolverOptions::default().max_iters)]
    max_iters: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discrimination problem for an ensemble file.
    Solve { path: PathBuf },
    /// Analyze the equal-probability measurement of an ensemble file.
    Epm {
        path: PathBuf,
        /// Treat the file as a GU symmetry description.
        #[arg(long)]
        gu: bool,
        /// Replace the priors by those making the EPM optimal with these coefficients.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        make_priors: Option<Vec<f64>>,
    },
    /// Closed-form solution of a geometrically uniform set.
    Gu { path: PathBuf },
    /// Solution of a compound geometrically uniform set.
    Cgu { path: PathBuf },
    /// Check the group axioms and phase table of a symmetry file.
    GroupVerify { path: PathBuf },
    /// Solve and then sample measurement outcomes.
    Simulate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Pipeline::Sdp)]
        pipeline: Pipeline,
    },
}

fn emit<T: Output>(report: &T, json: bool) -> i32 {
    if json {
        println!("{}", report.json());
    } else {
        print!("{}", report.table());
    }
    report.exit_code()
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let flags = Flags {
        solver: SolverOptions {
            tol_gap: cli.solver.tol_gap,
            tol_feas: cli.solver.tol_feas,
            tol_slack: cli.solver.tol_slack,
            max_iters: cli.solver.max_iters,
        },
        seed: cli.seed,
        trials: cli.trials,
    };
    let json = cli.json;
    Ok(match cli.command {
        Command::Solve { path } => emit(&cmd_solve(&path, &flags)?, json),
        Command::Epm { path, gu: true, make_priors: None } => emit(&cmd_gu(&path, &flags)?, json),
        Command::Epm { gu: true, .. } => {
            return Err(CliError { code: udisc_cli::EXIT_VALIDATION, message: "--make-priors does not apply to --gu".into() })
        }
        Command::Epm { path, make_priors, .. } => emit(&cmd_epm(&path, make_priors.as_deref(), &flags)?, json),
        Command::Gu { path } => emit(&cmd_gu(&path, &flags)?, json),
        Command::Cgu { path } => emit(&cmd_cgu(&path, &flags)?, json),
        Command::GroupVerify { path } => emit(&cmd_group_verify(&path)?, json),
        Command::Simulate { path, pipeline } => emit(&cmd_simulate(&path, pipeline, &flags)?, json),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code as u8)
        }
    }
}
