//! Command-line front end: decide which side of a conic feasibility pair is
//! strictly feasible, generate instances with known answers, verify
//! certificates, and run batch scaling experiments.

use clap::{Parser, Subcommand, ValueEnum};
use socfeas_cli::commands::{self, SolveArgs};
use socfeas_cli::format::Side;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Primal,
    Dual,
}

impl From<KindArg> for Side {
    fn from(k: KindArg) -> Side {
        match k {
            KindArg::Primal => Side::Primal,
            KindArg::Dual => Side::Dual,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "socfeas",
    version,
    about = "Decides strict feasibility of primal/dual second-order cone systems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an instance file; prints a JSON report on stdout.
    /// Exit code: 0 primal feasible, 1 dual feasible, 2 precision exhausted.
    Solve {
        instance: PathBuf,
        /// Forward-accuracy parameter of the primal certificate, in (0, 1].
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        /// Universal constant of the precision schedule.
        #[arg(long, default_value_t = socfeas::ipm::DEFAULT_SCHEDULE_CONSTANT)]
        schedule_constant: f64,
        /// Run at one fixed precision instead of the schedule.
        #[arg(long)]
        fixed_precision_bits: Option<u32>,
        #[arg(long, default_value_t = socfeas::ipm::DEFAULT_MAX_ITERATIONS)]
        max_iters: usize,
        /// Estimate the distances to infeasibility and attach them to the report.
        #[arg(long)]
        condition_estimate: bool,
        /// Record per-iteration invariant measurements (slow).
        #[arg(long)]
        monitors: bool,
        /// Include wall-clock time in the report (breaks byte-determinism).
        #[arg(long)]
        timing: bool,
        /// Also write the winning certificate to this file.
        #[arg(long)]
        emit_certificate: Option<PathBuf>,
        /// Also write the JSON report to this file.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Generate an instance with a known strictly feasible side.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Number of rows of A.
        #[arg(long)]
        rows: usize,
        /// Cone block tail dimensions, comma separated (block i has size n_i + 1).
        #[arg(long, value_delimiter = ',')]
        blocks: Vec<usize>,
        /// Relative interior margin of the planted witness, in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        out: PathBuf,
    },
    /// Verify a certificate against an instance. Exit 0 pass, 1 fail.
    Check {
        instance: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Override the forward-accuracy parameter recorded in the certificate.
        #[arg(long)]
        gamma: Option<f64>,
        /// Relative residual tolerance for the projected primal solution.
        #[arg(long, default_value_t = 1e-10)]
        residual_tol: f64,
    },
    /// Run a suite of generated instances; writes per-instance reports and a
    /// summary CSV into the output directory.
    Experiment {
        suite: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run() -> Result<i32, commands::CliError> {
    match Cli::parse().cmd {
        Cmd::Solve {
            instance,
            gamma,
            schedule_constant,
            fixed_precision_bits,
            max_iters,
            condition_estimate,
            monitors,
            timing,
            emit_certificate,
            output,
        } => commands::cmd_solve(&SolveArgs {
            instance,
            gamma,
            schedule_constant,
            fixed_precision_bits,
            max_iters,
            condition_estimate,
            monitors,
            timing,
            emit_certificate,
            output,
        }),
        Cmd::Generate { kind, rows, blocks, margin, seed, out } => {
            commands::cmd_generate(kind.into(), rows, &blocks, margin, seed, &out)
        }
        Cmd::Check { instance, certificate, gamma, residual_tol } => {
            commands::cmd_check(&instance, &certificate, gamma, residual_tol)
        }
        Cmd::Experiment { suite, out_dir } => commands::cmd_experiment(&suite, &out_dir),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
