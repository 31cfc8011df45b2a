//! Command-line front end: derive equal-time bracket tables for singular
//! Lagrangian systems, verify them, cross-check them against the classical
//! constraint algorithm, and emit lattice fixtures.
//!
//! Exit codes: 0 success, 1 parse/usage errors, 2 gauge freedom,
//! 3 identification failure, 4 verification failure.

use clap::{Args, Parser, Subcommand};
use dbrack_core::covariance_verify::{CheckStatus, Residual};
use dbrack_core::error::Error;
use dbrack_core::jsonout::{self, ConfigDoc};
use dbrack_core::lattice_fixtures::{generate, LatticeConfig, LatticeModel};
use dbrack_core::pipeline::{self, Check, RunConfig, VerifyOptions};
use dbrack_core::symexpr::Rat;
use dbrack_core::sysparse::{emit_system, parse_system, SystemSpec};
use num_bigint::BigInt;
use num_traits::Zero;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "dbrack",
    version,
    about = "Equal-time Dirac brackets from a Taylor expansion at the initial instant"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the bracket table of a system
    Derive(RunArgs),
    /// Derive, then run the verification checks
    Verify(VerifyArgs),
    /// Derive, then cross-check against the constraint-algorithm oracle
    Oracle(RunArgs),
    /// Print a generated lattice system document
    Lattice(LatticeArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Path to a `.lag` system file
    file: Option<PathBuf>,
    /// Generate a lattice system instead of reading a file
    #[arg(long, value_parser = parse_model)]
    lattice: Option<LatticeModel>,
    /// Lattice sites per dimension
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Lattice spacing (rational: 1, 1/2, or 0.5)
    #[arg(long, default_value = "1", value_parser = parse_rational)]
    a: Rat,
    /// Mass parameter (rational)
    #[arg(long, default_value = "1", value_parser = parse_rational)]
    m: Rat,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Taylor expansion order
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Maximum basis degree for the identification
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Collocation sample count
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Random seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Residual tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Write the JSON document to this path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON document to standard output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated subset of checks
    /// (jacobi,covariance,hamilton,trajectory)
    #[arg(long, value_delimiter = ',')]
    checks: Vec<String>,
    /// Test hook: corrupt one table entry before checking
    #[arg(long)]
    inject_test_corruption: bool,
}

#[derive(Args)]
struct LatticeArgs {
    /// Lattice model (sd | dirac)
    #[arg(value_parser = parse_model)]
    model: LatticeModel,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value = "1", value_parser = parse_rational)]
    a: Rat,
    #[arg(long, default_value = "1", value_parser = parse_rational)]
    m: Rat,
}

fn parse_model(s: &str) -> Result<LatticeModel, String> {
    match s {
        "sd" => Ok(LatticeModel::SelfDual),
        "dirac" => Ok(LatticeModel::Dirac),
        other => Err(format!("unknown lattice model `{other}` (expected sd or dirac)")),
    }
}

fn parse_rational(s: &str) -> Result<Rat, String> {
    let msg = || format!("`{s}` is not a rational number");
    let r = if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| msg())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| msg())?;
        if d.is_zero() {
            return Err(format!("`{s}` divides by zero"));
        }
        Rat::new(n, d)
    } else if let Some((int, frac)) = s.split_once('.') {
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let int_part = BigInt::from_str(if int.is_empty() { "0" } else { int }).map_err(|_| msg())?;
        let frac_part = BigInt::from_str(frac).map_err(|_| msg())?;
        let neg = int.starts_with('-');
        let num = &int_part * &scale + if neg { -frac_part } else { frac_part };
        Rat::new(num, scale)
    } else {
        Rat::from_str(s.trim()).map_err(|_| msg())?
    };
    Ok(r)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::GaugeFreedom(_) => 2,
        Error::BasisInsufficient { .. } | Error::NonUniqueBrackets { .. } => 3,
        _ => 1,
    }
}

fn load_system(input: &InputArgs) -> Result<(SystemSpec, String), Error> {
    match (&input.file, input.lattice) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let spec = parse_system(&text)?;
            Ok((spec, path.display().to_string()))
        }
        (None, Some(model)) => {
            let cfg = LatticeConfig::new(model, input.n, input.a.clone(), input.m.clone())?;
            let spec = generate(&cfg)?;
            let label =
                format!("lattice:{}:n={}:a={}:m={}", model.name(), input.n, input.a, input.m);
            Ok((spec, label))
        }
        (Some(_), Some(_)) => {
            Err(Error::Invalid("pass either a file or --lattice, not both".into()))
        }
        (None, None) => Err(Error::Invalid("pass a `.lag` file or --lattice flags".into())),
    }
}

fn run_config(s: &SolverArgs) -> RunConfig {
    RunConfig { order: s.order, degree: s.degree, samples: s.samples, seed: s.seed, tol: s.tol }
}

fn emit_json(doc: &str, solver: &SolverArgs) -> Result<(), Error> {
    if let Some(path) = &solver.out {
        std::fs::write(path, doc)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    if solver.json {
        print!("{doc}");
    }
    Ok(())
}

fn cmd_derive(args: &RunArgs) -> Result<u8, Error> {
    let (spec, label) = load_system(&args.input)?;
    let cfg = run_config(&args.solver);
    let deriv = pipeline::derive(&spec, &cfg)?;
    let doc = jsonout::derive_doc(ConfigDoc::new("derive", &label, &cfg), &deriv);
    emit_json(&jsonout::to_pretty(&doc), &args.solver)?;
    if !args.solver.json {
        println!(
            "system {}: {} phase variables, {} independent initial conditions",
            spec.name,
            spec.phase_vars().len(),
            deriv.ics.independent.len()
        );
        for (s, e) in &deriv.ics.eliminated {
            println!("  constraint: {} = {}", s.name(), e);
        }
        let nonzero: Vec<String> = deriv
            .table
            .iter_entries()
            .filter(|(_, _, v, _)| !v.is_zero())
            .map(|(a, b, v, _)| format!("  {{{},{}}} = {}", a.name(), b.name(), v))
            .collect();
        println!("nonzero brackets ({}):", nonzero.len());
        for line in nonzero {
            println!("{line}");
        }
        println!(
            "residual {:e}, nullspace {}, basis degree {}",
            deriv.residual, deriv.nullspace_dim, deriv.degree_used
        );
        for w in &deriv.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let (spec, label) = load_system(&args.input)?;
    let cfg = run_config(&args.solver);
    let deriv = pipeline::derive(&spec, &cfg)?;
    let checks = if args.checks.is_empty() {
        Check::ALL.to_vec()
    } else {
        args.checks
            .iter()
            .map(|s| Check::from_str(s))
            .collect::<Result<Vec<_>, _>>()?
    };
    let opts = VerifyOptions {
        checks,
        inject_corruption: args.inject_test_corruption,
        ..VerifyOptions::default()
    };
    let report = pipeline::verify(&deriv, &cfg, &opts);
    let doc = jsonout::verify_doc(ConfigDoc::new("verify", &label, &cfg), &spec.name, &report);
    emit_json(&jsonout::to_pretty(&doc), &args.solver)?;
    if !args.solver.json {
        for c in &report.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "skipped",
            };
            let residual = match &c.residual {
                Residual::SymbolicZero => "symbolic zero".to_string(),
                Residual::Numeric(x) => format!("{x:e}"),
                Residual::SymbolicNonZero(s) => s.clone(),
            };
            println!("{:<22} {:<8} {}", c.name, status, residual);
        }
    }
    Ok(if report.passed() { 0 } else { 4 })
}

fn cmd_oracle(args: &RunArgs) -> Result<u8, Error> {
    let (spec, label) = load_system(&args.input)?;
    let cfg = run_config(&args.solver);
    let deriv = pipeline::derive(&spec, &cfg)?;
    let outcome = pipeline::oracle_compare(&spec, &deriv.table, &cfg)?;
    let doc = jsonout::oracle_doc(ConfigDoc::new("oracle", &label, &cfg), &spec.name, &outcome);
    emit_json(&jsonout::to_pretty(&doc), &args.solver)?;
    if !args.solver.json {
        println!(
            "{} constraints ({} multipliers fixed), max |CI - Dirac| = {:e}",
            outcome.constraints.len(),
            outcome.multipliers_fixed,
            outcome.max_deviation
        );
    }
    Ok(if outcome.max_deviation < cfg.tol { 0 } else { 4 })
}

fn cmd_lattice(args: &LatticeArgs) -> Result<u8, Error> {
    let cfg = LatticeConfig::new(args.model, args.n, args.a.clone(), args.m.clone())?;
    let spec = generate(&cfg)?;
    print!("{}", emit_system(&spec));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Derive(args) => cmd_derive(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Lattice(args) => cmd_lattice(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
