//! The four subcommands. Each returns the process exit code: 0 primal
//! feasible / check passed, 1 dual feasible / check failed, 2 precision
//! exhausted, 3 any error (parse, I/O, solver failure, iteration limit).

use crate::format::{
    CertificateFile, ConditionSummary, FormatError, InstanceFile, RunReport, Side, SuiteSpec,
    FORMAT_VERSION,
};
use rayon::prelude::*;
use socfeas::conditioning::{self, RhoOptions};
use socfeas::dense::{self, Mat};
use socfeas::embed;
use socfeas::ipm::{self, Outcome, SolveError, SolverConfig};
use socfeas::ipm::schedule::PrecisionMode;
use socfeas::lorentz::{self, ConeStructure, StructureError};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("certificate: {0}")]
    Certificate(String),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn parse_instance(path: &Path) -> Result<InstanceFile, CliError> {
    InstanceFile::parse(&read(path)?)
        .map_err(|source| CliError::Format { path: path.display().to_string(), source })
}

#[derive(Debug, Clone)]
pub struct SolveArgs {
    pub instance: PathBuf,
    pub gamma: f64,
    pub schedule_constant: f64,
    pub fixed_precision_bits: Option<u32>,
    pub max_iters: usize,
    pub condition_estimate: bool,
    pub monitors: bool,
    pub timing: bool,
    pub emit_certificate: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

fn solver_config(args: &SolveArgs) -> SolverConfig {
    SolverConfig {
        margin_gamma: args.gamma,
        schedule_constant: args.schedule_constant,
        max_iterations: args.max_iters,
        precision: match args.fixed_precision_bits {
            Some(bits) => PrecisionMode::Fixed(0.5f64.powi(bits as i32)),
            None => PrecisionMode::Scheduled,
        },
        collect_monitors: args.monitors,
    }
}

fn condition_summary(a: &Mat, cone: &ConeStructure) -> Option<ConditionSummary> {
    match conditioning::estimate_condition(a, cone, &RhoOptions::default()) {
        Ok(est) => Some(ConditionSummary {
            rho_primal: est.rho_primal,
            rho_dual: est.rho_dual,
            matrix_norm: est.matrix_norm,
            condition: est.condition,
        }),
        Err(_) => {
            eprintln!("warning: condition estimate unbounded; omitted from report");
            None
        }
    }
}

fn certificate_of(outcome: &Outcome, gamma: f64) -> Option<CertificateFile> {
    match outcome {
        Outcome::PrimalFeasible { x_hat, .. } => Some(CertificateFile {
            kind: Side::Primal,
            gamma: Some(gamma),
            values: x_hat.clone(),
        }),
        Outcome::DualFeasible { y } => {
            Some(CertificateFile { kind: Side::Dual, gamma: None, values: y.clone() })
        }
        _ => None,
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let inst = parse_instance(&args.instance)?;
    let cone = inst.cone()?;
    let cfg = solver_config(args);
    let condition =
        if args.condition_estimate { condition_summary(&inst.a, &cone) } else { None };
    let started = Instant::now();
    let solve = ipm::solve(&inst.a, &cone, &cfg)?;
    let wall_clock_seconds = args.timing.then(|| started.elapsed().as_secs_f64());

    let report = RunReport {
        version: FORMAT_VERSION,
        instance: args.instance.display().to_string(),
        gamma: args.gamma,
        schedule_constant: args.schedule_constant,
        max_iterations: args.max_iters,
        fixed_precision_bits: args.fixed_precision_bits,
        condition,
        wall_clock_seconds,
        solve,
    };
    let json = report.to_json();
    print!("{json}");
    if let Some(path) = &args.output {
        write(path, &json)?;
    }
    if let Some(path) = &args.emit_certificate {
        match certificate_of(&report.solve.outcome, args.gamma) {
            Some(cert) => write(path, &cert.emit())?,
            None => eprintln!("note: no certificate to emit for this outcome"),
        }
    }
    Ok(match report.solve.outcome {
        Outcome::PrimalFeasible { .. } => 0,
        Outcome::DualFeasible { .. } => 1,
        Outcome::PrecisionExceeded { .. } => 2,
        Outcome::IterationLimit => {
            eprintln!("error: iteration limit {} reached without a decision", args.max_iters);
            3
        }
    })
}

pub fn cmd_generate(
    kind: Side,
    m: usize,
    tail_dims: &[usize],
    margin: f64,
    seed: u64,
    out: &Path,
) -> Result<i32, CliError> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(CliError::Invalid(format!("margin must lie in (0, 1), got {margin}")));
    }
    let cone = ConeStructure::new(tail_dims.to_vec())?;
    if kind == Side::Primal && m >= cone.ambient_dim() {
        return Err(CliError::Invalid(format!(
            "primal generator needs m < N = {}, got m = {m}",
            cone.ambient_dim()
        )));
    }
    let gen = match kind {
        Side::Primal => conditioning::gen_primal_instance(m, tail_dims, margin, seed),
        Side::Dual => conditioning::gen_dual_instance(m, tail_dims, margin, seed),
    };
    let inst = InstanceFile {
        tail_dims: tail_dims.to_vec(),
        a: gen.a,
        kind: Some(kind),
        margin: Some(margin),
        seed: Some(seed),
        certificate: Some(gen.witness),
    };
    write(out, &inst.emit())?;
    Ok(0)
}

/// Outcome of verifying one certificate against one instance.
struct CheckReport {
    pass: bool,
    detail: String,
}

fn check_dual(a: &Mat, cone: &ConeStructure, y: &[f64]) -> Result<CheckReport, CliError> {
    if y.len() != a.rows() {
        return Err(CliError::Certificate(format!(
            "dual certificate has {} entries, expected m = {}",
            y.len(),
            a.rows()
        )));
    }
    let s: Vec<f64> = a.t_matvec(y).iter().map(|v| -v).collect();
    let min_margin = cone
        .block_ranges()
        .map(|r| lorentz::block_margin(&s[r]))
        .fold(f64::INFINITY, f64::min);
    Ok(CheckReport {
        pass: min_margin > 0.0,
        detail: format!("dual slack -A'y min block margin = {min_margin}"),
    })
}

/// The forward-accuracy property is what the solver guarantees in the
/// block-normalized coordinates it works in, so the check reproduces that
/// (deterministic) normalization before measuring.
fn check_primal(
    a: &Mat,
    cone: &ConeStructure,
    x_hat: &[f64],
    gamma: f64,
    residual_tol: f64,
) -> Result<CheckReport, CliError> {
    if x_hat.len() != cone.ambient_dim() {
        return Err(CliError::Certificate(format!(
            "primal certificate has {} entries, expected N = {}",
            x_hat.len(),
            cone.ambient_dim()
        )));
    }
    if !cone.is_strictly_interior(x_hat) {
        return Ok(CheckReport { pass: false, detail: "x_hat is not strictly interior".into() });
    }
    let (a_scaled, scales) =
        embed::normalize_blocks(a, cone).map_err(|e| CliError::Certificate(e.to_string()))?;
    let mut x_tilde = x_hat.to_vec();
    for (range, k) in cone.block_ranges().zip(&scales) {
        for i in range {
            x_tilde[i] /= k;
        }
    }
    let x_breve = match embed::associated_solution(&a_scaled, cone, &x_tilde) {
        Ok(v) => v,
        Err(e) => return Ok(CheckReport { pass: false, detail: e.to_string() }),
    };
    if !cone.is_strictly_interior(&x_breve) {
        return Ok(CheckReport {
            pass: false,
            detail: "associated solution left the cone interior".into(),
        });
    }
    // ||A_scaled||_F = 1 by construction, so this residual is already relative
    // to the matrix scale.
    let residual = dense::norm2(&a_scaled.matvec(&x_breve)) / dense::norm2(&x_breve);
    let drift = dense::norm2(&dense::sub(&x_tilde, &x_breve)) / dense::norm2(&x_tilde);
    let pass = residual <= residual_tol && drift <= gamma;
    Ok(CheckReport {
        pass,
        detail: format!(
            "relative residual = {residual} (tol {residual_tol}), drift = {drift} (gamma {gamma})"
        ),
    })
}

pub fn cmd_check(
    instance_path: &Path,
    certificate_path: &Path,
    gamma_flag: Option<f64>,
    residual_tol: f64,
) -> Result<i32, CliError> {
    let inst = parse_instance(instance_path)?;
    let cone = inst.cone()?;
    let cert = CertificateFile::parse(&read(certificate_path)?)
        .map_err(|source| CliError::Format { path: certificate_path.display().to_string(), source })?;
    let report = match cert.kind {
        Side::Dual => check_dual(&inst.a, &cone, &cert.values)?,
        Side::Primal => {
            let gamma = gamma_flag.or(cert.gamma).unwrap_or(0.1);
            check_primal(&inst.a, &cone, &cert.values, gamma, residual_tol)?
        }
    };
    println!(
        "check: {} ({}; {})",
        if report.pass { "PASS" } else { "FAIL" },
        cert.kind.as_str(),
        report.detail
    );
    Ok(if report.pass { 0 } else { 1 })
}

struct ExperimentRow {
    id: String,
    kind: Side,
    m: usize,
    r_full: usize,
    n: usize,
    margin: f64,
    seed: u64,
    outcome: String,
    matches_declared: bool,
    iterations: usize,
    max_bits: u32,
    rho_primal: f64,
    rho_dual: f64,
    condition: f64,
    scale: f64,
    ratio: f64,
}

const CSV_HEADER: &str = "id,kind,m,r,n,margin,seed,outcome,matches_declared,iterations,\
max_bits,rho_primal,rho_dual,condition,scale,iterations_over_scale";

fn csv_row(row: &ExperimentRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.id,
        row.kind.as_str(),
        row.m,
        row.r_full,
        row.n,
        row.margin,
        row.seed,
        row.outcome,
        row.matches_declared,
        row.iterations,
        row.max_bits,
        row.rho_primal,
        row.rho_dual,
        row.condition,
        row.scale,
        row.ratio
    )
}

fn run_experiment_job(
    id: &str,
    kind: Side,
    m: usize,
    tail_dims: &[usize],
    margin: f64,
    seed: u64,
    gamma: f64,
    out_dir: &Path,
) -> Result<ExperimentRow, CliError> {
    let gen = match kind {
        Side::Primal => conditioning::gen_primal_instance(m, tail_dims, margin, seed),
        Side::Dual => conditioning::gen_dual_instance(m, tail_dims, margin, seed),
    };
    let inst = InstanceFile {
        tail_dims: tail_dims.to_vec(),
        a: gen.a.clone(),
        kind: Some(kind),
        margin: Some(margin),
        seed: Some(seed),
        certificate: Some(gen.witness),
    };
    let instance_path = out_dir.join(format!("{id}.instance"));
    write(&instance_path, &inst.emit())?;

    let cone = ConeStructure::new(tail_dims.to_vec())?;
    let cfg = SolverConfig { margin_gamma: gamma, ..SolverConfig::default() };
    let solve = ipm::solve(&gen.a, &cone, &cfg)?;
    let condition = condition_summary(&gen.a, &cone);

    let (outcome, matches_declared) = match &solve.outcome {
        Outcome::PrimalFeasible { .. } => ("primal", kind == Side::Primal),
        Outcome::DualFeasible { .. } => ("dual", kind == Side::Dual),
        Outcome::PrecisionExceeded { .. } => ("precision_exceeded", false),
        Outcome::IterationLimit => ("iteration_limit", false),
    };
    let iterations = solve.iterations;
    let max_bits = solve.trace.iter().map(|t| t.bits).max().unwrap_or(0);
    let r_full = cone.block_count() + 2;
    let cond = condition.as_ref().map_or(f64::NAN, |c| c.condition.max(1.0));
    let rf = r_full as f64;
    let scale = rf.sqrt() * (rf.ln() + cond.ln() + gamma.ln().abs());
    let ratio = iterations as f64 / scale;

    let report = RunReport {
        version: FORMAT_VERSION,
        instance: instance_path.display().to_string(),
        gamma,
        schedule_constant: cfg.schedule_constant,
        max_iterations: cfg.max_iterations,
        fixed_precision_bits: None,
        condition,
        wall_clock_seconds: None,
        solve,
    };
    write(&out_dir.join(format!("{id}.report.json")), &report.to_json())?;

    Ok(ExperimentRow {
        id: id.to_string(),
        kind,
        m,
        r_full,
        n: cone.ambient_dim(),
        margin,
        seed,
        outcome: outcome.to_string(),
        matches_declared,
        iterations,
        max_bits,
        rho_primal: report.condition.as_ref().map_or(f64::NAN, |c| c.rho_primal),
        rho_dual: report.condition.as_ref().map_or(f64::NAN, |c| c.rho_dual),
        condition: cond,
        scale,
        ratio,
    })
}

pub fn cmd_experiment(suite_path: &Path, out_dir: &Path) -> Result<i32, CliError> {
    let suite = SuiteSpec::parse(&read(suite_path)?)
        .map_err(|source| CliError::Format { path: suite_path.display().to_string(), source })?;
    std::fs::create_dir_all(out_dir)
        .map_err(|source| CliError::Io { path: out_dir.display().to_string(), source })?;

    // Expand entries x seeds; the zero-padded index makes generation order the
    // canonical (sorted) order.
    let mut jobs = Vec::new();
    for entry in &suite.entries {
        for &seed in &entry.seeds {
            let idx = jobs.len();
            let id = format!(
                "{idx:04}_{}_m{}_b{}_s{seed}",
                entry.kind.as_str(),
                entry.m,
                entry.tail_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("-"),
            );
            jobs.push((id, entry.clone(), seed));
        }
    }

    let results: Vec<Result<ExperimentRow, CliError>> = jobs
        .par_iter()
        .map(|(id, entry, seed)| {
            run_experiment_job(
                id,
                entry.kind,
                entry.m,
                &entry.tail_dims,
                entry.margin,
                *seed,
                suite.gamma,
                out_dir,
            )
        })
        .collect();

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut failures = 0usize;
    let mut fitted_k0: f64 = 0.0;
    let mut table = String::new();
    for (job, result) in jobs.iter().zip(&results) {
        match result {
            Ok(row) => {
                csv.push_str(&csv_row(row));
                csv.push('\n');
                if !row.matches_declared {
                    failures += 1;
                }
                if row.ratio.is_finite() {
                    fitted_k0 = fitted_k0.max(row.ratio);
                }
                writeln!(
                    table,
                    "{}  outcome={} iters={} cond={:.3} k/scale={:.3}",
                    row.id, row.outcome, row.iterations, row.condition, row.ratio
                )
                .unwrap();
            }
            Err(e) => {
                failures += 1;
                csv.push_str(&format!("{},error: {e},,,,,,,,,,,,,,\n", job.0));
                writeln!(table, "{}  error: {e}", job.0).unwrap();
            }
        }
    }
    write(&out_dir.join("summary.csv"), &csv)?;
    print!("{table}");
    println!("instances: {}, failures: {}, fitted K0 = {}", jobs.len(), failures, fitted_k0);
    Ok(if failures == 0 { 0 } else { 3 })
}
