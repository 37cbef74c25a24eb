//! Command-line front end: convergence studies, viscosity sweeps,
//! quadrature sweeps, and the property suite, each writing one CSV table.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use axisym::experiments::{
    decades, run_convergence, run_nu_sweep, run_property_suite, run_quadrature_sweep,
    suite_passed, RunConfig, Table,
};
use axisym::hdiv_recon::ReconVariant;

#[derive(Parser)]
#[command(
    name = "axisym",
    version,
    about = "Pressure-robust Bernardi-Raugel solver for the axisymmetric Stokes problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine the mesh over a list of levels and tabulate errors and orders
    Converge(ConvergeArgs),
    /// Sweep the viscosity on a mesh sized to a target unknown count
    Nusweep(NusweepArgs),
    /// Repeat a viscosity sweep for several load-quadrature orders
    Quadsweep(QuadsweepArgs),
    /// Run the invariant suite and print one PASS/FAIL line per check
    Proptest,
}

#[derive(Args)]
struct CommonArgs {
    /// Manufactured case: ex1, ex2, or ex3
    #[arg(long, default_value = "ex1")]
    case: String,
    /// Reconstruction operator: identity, rt0, bdm1, rt0_axi, bdm1_axi,
    /// a comma-separated list, or "all"
    #[arg(long, default_value = "all")]
    pi: String,
    /// Relative interior-vertex perturbation in [0, 0.3]
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Seed for the mesh perturbation
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Quadrature order for the bilinear forms
    #[arg(long, default_value_t = 4)]
    qorder_a: usize,
    /// Quadrature order for load functionals and boundary data
    #[arg(long, default_value_t = 10)]
    qorder_rhs: usize,
    /// Quadrature order for error norms
    #[arg(long, default_value_t = 10)]
    qorder_err: usize,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Viscosity
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Comma-separated subdivision levels
    #[arg(long, default_value = "4,8,16,32")]
    levels: String,
}

#[derive(Args)]
struct NusweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Viscosities: a decade range like 1e0..1e-8 or a comma-separated list
    #[arg(long, default_value = "1e0..1e-8")]
    nus: String,
    /// Target number of solver unknowns
    #[arg(long, default_value_t = 22_000)]
    dofs: usize,
}

#[derive(Args)]
struct QuadsweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Viscosities: a decade range like 1e0..1e-8 or a comma-separated list
    #[arg(long, default_value = "1e0..1e-8")]
    nus: String,
    /// Target number of solver unknowns
    #[arg(long, default_value_t = 22_000)]
    dofs: usize,
    /// Comma-separated load-quadrature orders
    #[arg(long, default_value = "10,20,50")]
    qorders: String,
}

fn parse_variants(s: &str) -> Result<Vec<ReconVariant>> {
    if s == "all" {
        return Ok(ReconVariant::ALL.to_vec());
    }
    s.split(',')
        .map(|name| {
            ReconVariant::parse(name.trim()).ok_or_else(|| {
                anyhow!(
                    "unknown operator '{name}' (expected identity, rt0, bdm1, rt0_axi, \
                     bdm1_axi, or all)"
                )
            })
        })
        .collect()
}

fn parse_levels(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid level '{part}'"))
        })
        .collect()
}

/// Either `1e0..1e-8` (every power of ten from the first to the second) or
/// an explicit comma-separated list.
fn parse_nus(s: &str) -> Result<Vec<f64>> {
    if let Some((hi, lo)) = s.split_once("..") {
        let exponent = |part: &str| -> Result<i32> {
            let value: f64 = part
                .parse()
                .with_context(|| format!("invalid viscosity '{part}'"))?;
            if value <= 0.0 {
                bail!("viscosity bound '{part}' must be positive");
            }
            let e = value.log10();
            if (e - e.round()).abs() > 1e-9 {
                bail!("viscosity bound '{part}' is not a power of ten");
            }
            Ok(e.round() as i32)
        };
        let (hi, lo) = (exponent(hi)?, exponent(lo)?);
        if hi < lo {
            bail!("viscosity range must run from the larger bound down");
        }
        return Ok(decades(hi, lo));
    }
    let nus = s
        .split(',')
        .map(|part| {
            let value: f64 = part
                .trim()
                .parse()
                .with_context(|| format!("invalid viscosity '{part}'"))?;
            if value <= 0.0 {
                bail!("viscosity '{part}' must be positive");
            }
            Ok(value)
        })
        .collect::<Result<Vec<f64>>>()?;
    if nus.is_empty() {
        bail!("empty viscosity list");
    }
    Ok(nus)
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    Ok(RunConfig {
        variants: parse_variants(&common.pi)?,
        jitter: common.jitter,
        seed: common.seed,
        qorder_a: common.qorder_a,
        qorder_rhs: common.qorder_rhs,
        qorder_err: common.qorder_err,
        ..RunConfig::new(&common.case)
    })
}

fn emit(table: &Table, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            table
                .write_csv(path)
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Converge(args) => {
            let config = RunConfig {
                nu: args.nu,
                levels: parse_levels(&args.levels)?,
                ..base_config(&args.common)?
            };
            emit(&run_convergence(&config)?, args.common.out.as_ref())?;
        }
        Command::Nusweep(args) => {
            let config = RunConfig {
                nus: parse_nus(&args.nus)?,
                dofs_target: args.dofs,
                ..base_config(&args.common)?
            };
            emit(&run_nu_sweep(&config)?, args.common.out.as_ref())?;
        }
        Command::Quadsweep(args) => {
            let config = RunConfig {
                nus: parse_nus(&args.nus)?,
                dofs_target: args.dofs,
                qorders_rhs: parse_levels(&args.qorders)?,
                ..base_config(&args.common)?
            };
            emit(&run_quadrature_sweep(&config)?, args.common.out.as_ref())?;
        }
        Command::Proptest => {
            let outcomes = run_property_suite();
            for outcome in &outcomes {
                match &outcome.failure {
                    None => println!("PASS {}", outcome.name),
                    Some(msg) => println!("FAIL {}: {msg}", outcome.name),
                }
            }
            let failed = outcomes.iter().filter(|o| o.failure.is_some()).count();
            println!("{} checks, {} failed", outcomes.len(), failed);
            if !suite_passed(&outcomes) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
