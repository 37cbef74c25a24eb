//! Batch drivers for the three experiment families — mesh-refinement
//! convergence, viscosity sweeps on a fixed mesh, and load-quadrature
//! sweeps — plus the machine-readable property suite behind `proptest`.
//!
//! Every driver gates its manufactured case through the finite-difference
//! verification before touching a mesh, reuses one matrix factorization per
//! `(mesh, ν)` across all reconstruction variants and load quadrature
//! orders (the saddle matrix depends on neither), and emits rows in a fixed
//! sorted order so identical configs produce bit-identical CSV bytes.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{eoc, error_norms, AnalysisError, ErrorReport};
use crate::assembly::{
    assemble_a, assemble_b, assemble_rhs, eliminate_constraints, AssemblyError, SparseSystem,
    Triplet,
};
use crate::cases::{find_case, verify_case, CaseError, ManufacturedCase};
use crate::checks;
use crate::fe_spaces::{
    apply_dirichlet, build_spaces, DirichletError, PressureSpace, VelocitySpace,
};
use crate::hdiv_recon::{build_recon_operator, ReconError, ReconOperator, ReconVariant};
use crate::mesh::{
    classify, generate_unit_square_mesh, AxisTopology, ClassifyError, GenerateError, Mesh,
};
use crate::solver::{SolverError, StokesFactorization, StokesSolution};

pub const DEFAULT_QORDER_A: usize = 4;
pub const DEFAULT_QORDER_RHS: usize = 10;
pub const DEFAULT_QORDER_ERR: usize = 10;
pub const DEFAULT_DOFS_TARGET: usize = 22_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown case '{0}' (expected ex1, ex2, or ex3)")]
    UnknownCase(String),
    #[error("manufactured-case gate failed: {0}")]
    Gate(#[from] CaseError),
    #[error(transparent)]
    Mesh(#[from] GenerateError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Dirichlet(#[from] DirichletError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("solve failed (case {case}, variant {variant}, nu {nu:.3e}, n = {level}): {source}")]
    Solve {
        case: String,
        variant: &'static str,
        nu: f64,
        level: usize,
        source: SolverError,
    },
}

/// Shared run configuration; each driver reads the fields it needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: String,
    /// Variants to run, in output order.
    pub variants: Vec<ReconVariant>,
    /// Viscosity for convergence runs.
    pub nu: f64,
    /// Viscosity grid for sweeps, in output order.
    pub nus: Vec<f64>,
    /// Subdivision levels for convergence runs.
    pub levels: Vec<usize>,
    /// Total-unknown target that picks the sweep mesh level.
    pub dofs_target: usize,
    /// Load quadrature orders for the quadrature sweep.
    pub qorders_rhs: Vec<usize>,
    pub jitter: f64,
    pub seed: u64,
    pub qorder_a: usize,
    pub qorder_rhs: usize,
    pub qorder_err: usize,
}

impl RunConfig {
    pub fn new(case: &str) -> RunConfig {
        RunConfig {
            case: case.to_string(),
            variants: ReconVariant::ALL.to_vec(),
            nu: 1.0,
            nus: decades(0, -8),
            levels: vec![4, 8, 16, 32],
            dofs_target: DEFAULT_DOFS_TARGET,
            qorders_rhs: vec![10, 20, 50],
            jitter: 0.0,
            seed: 1,
            qorder_a: DEFAULT_QORDER_A,
            qorder_rhs: DEFAULT_QORDER_RHS,
            qorder_err: DEFAULT_QORDER_ERR,
        }
    }
}

/// `10^hi, 10^{hi−1}, …, 10^lo`.
pub fn decades(hi: i32, lo: i32) -> Vec<f64> {
    assert!(hi >= lo);
    (lo..=hi).rev().map(|e| 10f64.powi(e)).collect()
}

/// Unit-square generator level whose solver-unknown count
/// `7n² − 5n + 2` comes closest to `target`.
pub fn level_for_dofs(target: usize) -> usize {
    (2usize..=96)
        .min_by_key(|&n| (7 * n * n + 2).abs_diff(5 * n + target))
        .unwrap()
}

// ---------------------------------------------------------------------------
// CSV tables

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Float(f64),
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Table {
        Table { columns, rows: Vec::new() }
    }

    fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row/column mismatch");
        self.rows.push(row);
    }

    /// Comma-separated text: header row, LF endings, floats in scientific
    /// notation with 16 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Text(s) => out.push_str(s),
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Float(v) => out.push_str(&format_float(*v)),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.15e}")
    }
}

// ---------------------------------------------------------------------------
// Shared per-mesh machinery

struct Level {
    n: usize,
    mesh: Mesh,
    topo: AxisTopology,
    /// Raw space (axis constraints only, no boundary data).
    vel_raw: VelocitySpace,
    pres: PressureSpace,
    a: Vec<Triplet>,
    b: Vec<Triplet>,
    /// One operator per configured variant (`None` = identity).
    ops: Vec<Option<ReconOperator>>,
}

fn build_level(config: &RunConfig, n: usize) -> Result<Level, ExperimentError> {
    let mesh = generate_unit_square_mesh(n, config.jitter, config.seed)?;
    let topo = classify(&mesh)?;
    let (vel_raw, pres) = build_spaces(&mesh, &topo);
    let a = assemble_a(&mesh, &vel_raw, config.qorder_a)?;
    let b = assemble_b(&mesh, &vel_raw, &pres, config.qorder_a)?;
    let ops = config
        .variants
        .iter()
        .map(|&variant| match variant {
            ReconVariant::Identity => Ok(None),
            v => build_recon_operator(&mesh, &topo, &vel_raw, v).map(Some),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Level { n, mesh, topo, vel_raw, pres, a, b, ops })
}

impl Level {
    /// Copy of the raw space with the case's boundary data applied, using
    /// the given edge-quadrature order for the bubble moments.
    fn constrained_space(
        &self,
        case: &ManufacturedCase,
        qorder: usize,
    ) -> Result<VelocitySpace, ExperimentError> {
        let mut vel = self.vel_raw.clone();
        apply_dirichlet(&mut vel, &self.mesh, &self.topo, &|p| (case.u)(p), qorder)?;
        Ok(vel)
    }

    fn system(&self, vel: &VelocitySpace, nu: f64) -> SparseSystem {
        let zero = vec![0.0; vel.n_dofs()];
        eliminate_constraints(vel, &self.pres, &self.a, &self.b, zero, nu)
    }
}

fn solve_err(
    config: &RunConfig,
    variant: ReconVariant,
    nu: f64,
    level: usize,
) -> impl Fn(SolverError) -> ExperimentError + '_ {
    move |source| ExperimentError::Solve {
        case: config.case.clone(),
        variant: variant.name(),
        nu,
        level,
        source,
    }
}

fn lookup(config: &RunConfig) -> Result<ManufacturedCase, ExperimentError> {
    find_case(&config.case).ok_or_else(|| ExperimentError::UnknownCase(config.case.clone()))
}

struct VariantRun {
    report: ErrorReport,
    residual: f64,
    multiplier: f64,
}

fn run_variant(
    level: &Level,
    vel: &VelocitySpace,
    case: &ManufacturedCase,
    op: Option<&ReconOperator>,
    fact: &StokesFactorization,
    sys: &SparseSystem,
    load: Vec<f64>,
    qorder_err: usize,
) -> Result<(StokesSolution, VariantRun), ExperimentError> {
    let sys = sys.with_load(load);
    let sol = fact.solve_with(&sys).map_err(|source| ExperimentError::Solve {
        case: case.name.to_string(),
        variant: op.map_or("identity", |o| o.variant().name()),
        nu: sys.nu,
        level: level.n,
        source,
    })?;
    let report = error_norms(
        &level.mesh,
        &level.topo,
        vel,
        &sol.u,
        &sol.p,
        case,
        op,
        qorder_err,
    )?;
    let run = VariantRun { report, residual: sol.residual, multiplier: sol.multiplier };
    Ok((sol, run))
}

fn report_cells(run: &VariantRun) -> Vec<Cell> {
    let r = &run.report;
    vec![
        Cell::Float(r.h_max),
        Cell::Int(r.n_free_velocity as u64),
        Cell::Int(r.n_pressure as u64),
        Cell::Int(r.n_dofs as u64),
        Cell::Float(r.err_energy),
        Cell::Float(r.err_u_l21),
        Cell::Float(r.err_recon_l2m1),
        Cell::Float(r.err_p_l21),
        Cell::Float(r.recon_l2),
        Cell::Float(r.axis_trace),
        Cell::Float(r.div_inf),
        Cell::Float(run.residual),
        Cell::Float(run.multiplier),
    ]
}

const REPORT_COLUMNS: [&str; 13] = [
    "h_max",
    "n_free_velocity",
    "n_pressure",
    "n_dofs",
    "err_energy",
    "err_u_l21",
    "err_recon_l2m1",
    "err_p_l21",
    "recon_l2",
    "axis_trace",
    "div_inf",
    "solver_residual",
    "mean_multiplier",
];

// ---------------------------------------------------------------------------
// Convergence study

/// One row per (variant, level), with orders of convergence between
/// consecutive levels of the same variant.
pub fn run_convergence(config: &RunConfig) -> Result<Table, ExperimentError> {
    let case = lookup(config)?;
    verify_case(&case, config.nu)?;

    let per_level: Vec<Vec<VariantRun>> = config
        .levels
        .par_iter()
        .map(|&n| -> Result<Vec<VariantRun>, ExperimentError> {
            let level = build_level(config, n)?;
            let vel = level.constrained_space(&case, config.qorder_rhs)?;
            let sys = level.system(&vel, config.nu);
            let fact = StokesFactorization::new(&sys)
                .map_err(solve_err(config, config.variants[0], config.nu, n))?;
            level
                .ops
                .iter()
                .map(|op| {
                    let load = assemble_rhs(
                        &level.mesh,
                        &vel,
                        op.as_ref(),
                        &|p| (case.f)(config.nu, p),
                        config.qorder_rhs,
                    )?;
                    let (_, run) = run_variant(
                        &level,
                        &vel,
                        &case,
                        op.as_ref(),
                        &fact,
                        &sys,
                        load,
                        config.qorder_err,
                    )?;
                    Ok(run)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut columns = vec![
        "case", "variant", "nu", "level", "jitter", "seed", "qorder_a", "qorder_rhs",
        "qorder_err",
    ];
    columns.extend(REPORT_COLUMNS);
    columns.extend(["eoc_energy", "eoc_u_l21", "eoc_recon_l2m1", "eoc_p_l21"]);
    let mut table = Table::new(columns);

    for (vi, &variant) in config.variants.iter().enumerate() {
        let h: Vec<f64> = per_level.iter().map(|runs| runs[vi].report.h_max).collect();
        let rate = |pick: &dyn Fn(&ErrorReport) -> f64| -> Vec<f64> {
            let errs: Vec<f64> = per_level.iter().map(|runs| pick(&runs[vi].report)).collect();
            let mut rates = vec![f64::NAN];
            rates.extend(eoc(&errs, &h));
            rates
        };
        let eoc_energy = rate(&|r| r.err_energy);
        let eoc_u = rate(&|r| r.err_u_l21);
        let eoc_recon = rate(&|r| r.err_recon_l2m1);
        let eoc_p = rate(&|r| r.err_p_l21);
        for (li, &n) in config.levels.iter().enumerate() {
            let mut row = vec![
                Cell::Text(config.case.clone()),
                Cell::Text(variant.name().to_string()),
                Cell::Float(config.nu),
                Cell::Int(n as u64),
                Cell::Float(config.jitter),
                Cell::Int(config.seed),
                Cell::Int(config.qorder_a as u64),
                Cell::Int(config.qorder_rhs as u64),
                Cell::Int(config.qorder_err as u64),
            ];
            row.extend(report_cells(&per_level[li][vi]));
            row.extend([
                Cell::Float(eoc_energy[li]),
                Cell::Float(eoc_u[li]),
                Cell::Float(eoc_recon[li]),
                Cell::Float(eoc_p[li]),
            ]);
            table.push_row(row);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Viscosity sweep

/// One row per (variant, ν) on the mesh sized to `dofs_target`. With more
/// than one ν, a `slope_energy` column carries the local log-log slope of
/// the energy error against ν.
pub fn run_nu_sweep(config: &RunConfig) -> Result<Table, ExperimentError> {
    let case = lookup(config)?;
    for &nu in &config.nus {
        verify_case(&case, nu)?;
    }
    let n = level_for_dofs(config.dofs_target);
    let level = build_level(config, n)?;
    let vel = level.constrained_space(&case, config.qorder_rhs)?;

    // f(ν,·) is affine in ν, so two assemblies per variant serve every ν.
    let loads: Vec<(Vec<f64>, Vec<f64>)> = level
        .ops
        .iter()
        .map(|op| -> Result<_, ExperimentError> {
            let press = assemble_rhs(
                &level.mesh,
                &vel,
                op.as_ref(),
                &|p| (case.f)(0.0, p),
                config.qorder_rhs,
            )?;
            let full = assemble_rhs(
                &level.mesh,
                &vel,
                op.as_ref(),
                &|p| (case.f)(1.0, p),
                config.qorder_rhs,
            )?;
            let visc = full.iter().zip(&press).map(|(f, p)| f - p).collect();
            Ok((visc, press))
        })
        .collect::<Result<_, _>>()?;

    let per_nu: Vec<Vec<VariantRun>> = config
        .nus
        .par_iter()
        .map(|&nu| -> Result<Vec<VariantRun>, ExperimentError> {
            let sys = level.system(&vel, nu);
            let fact = StokesFactorization::new(&sys)
                .map_err(solve_err(config, config.variants[0], nu, n))?;
            level
                .ops
                .iter()
                .zip(&loads)
                .map(|(op, (visc, press))| {
                    let load = visc.iter().zip(press).map(|(v, p)| nu * v + p).collect();
                    let (_, run) = run_variant(
                        &level,
                        &vel,
                        &case,
                        op.as_ref(),
                        &fact,
                        &sys,
                        load,
                        config.qorder_err,
                    )?;
                    Ok(run)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let with_slope = config.nus.len() > 1;
    let mut columns = vec![
        "case", "variant", "nu", "level", "dofs_target", "jitter", "seed", "qorder_a",
        "qorder_rhs", "qorder_err",
    ];
    columns.extend(REPORT_COLUMNS);
    if with_slope {
        columns.push("slope_energy");
    }
    let mut table = Table::new(columns);

    for (vi, &variant) in config.variants.iter().enumerate() {
        for (ni, &nu) in config.nus.iter().enumerate() {
            let mut row = vec![
                Cell::Text(config.case.clone()),
                Cell::Text(variant.name().to_string()),
                Cell::Float(nu),
                Cell::Int(n as u64),
                Cell::Int(config.dofs_target as u64),
                Cell::Float(config.jitter),
                Cell::Int(config.seed),
                Cell::Int(config.qorder_a as u64),
                Cell::Int(config.qorder_rhs as u64),
                Cell::Int(config.qorder_err as u64),
            ];
            row.extend(report_cells(&per_nu[ni][vi]));
            if with_slope {
                let slope = if ni == 0 {
                    f64::NAN
                } else {
                    let (e0, e1) = (
                        per_nu[ni - 1][vi].report.err_energy,
                        per_nu[ni][vi].report.err_energy,
                    );
                    if e0 > 0.0 && e1 > 0.0 {
                        (e1 / e0).ln() / (nu / config.nus[ni - 1]).ln()
                    } else {
                        f64::NAN
                    }
                };
                row.push(Cell::Float(slope));
            }
            table.push_row(row);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Quadrature-order sweep

/// The ν sweep repeated for each load-quadrature order; rows are ordered by
/// (qorder_rhs, variant, ν). Boundary-bubble moments follow the same order
/// as the load so each order stands for a complete data-quadrature choice;
/// the saddle matrix is order-independent, so one factorization per ν
/// serves all orders and variants.
pub fn run_quadrature_sweep(config: &RunConfig) -> Result<Table, ExperimentError> {
    let case = lookup(config)?;
    for &nu in &config.nus {
        verify_case(&case, nu)?;
    }
    let n = level_for_dofs(config.dofs_target);
    let level = build_level(config, n)?;

    struct PerOrder {
        qorder: usize,
        vel: VelocitySpace,
        loads: Vec<(Vec<f64>, Vec<f64>)>,
    }
    let per_order: Vec<PerOrder> = config
        .qorders_rhs
        .iter()
        .map(|&qorder| -> Result<PerOrder, ExperimentError> {
            let vel = level.constrained_space(&case, qorder)?;
            let loads = level
                .ops
                .iter()
                .map(|op| -> Result<_, ExperimentError> {
                    let press = assemble_rhs(
                        &level.mesh,
                        &vel,
                        op.as_ref(),
                        &|p| (case.f)(0.0, p),
                        qorder,
                    )?;
                    let full = assemble_rhs(
                        &level.mesh,
                        &vel,
                        op.as_ref(),
                        &|p| (case.f)(1.0, p),
                        qorder,
                    )?;
                    let visc = full.iter().zip(&press).map(|(f, p)| f - p).collect();
                    Ok((visc, press))
                })
                .collect::<Result<_, _>>()?;
            Ok(PerOrder { qorder, vel, loads })
        })
        .collect::<Result<_, _>>()?;

    // results[ni][qi][vi]
    let results: Vec<Vec<Vec<VariantRun>>> = config
        .nus
        .par_iter()
        .map(|&nu| -> Result<Vec<Vec<VariantRun>>, ExperimentError> {
            let sys0 = level.system(&per_order[0].vel, nu);
            let fact = StokesFactorization::new(&sys0)
                .map_err(solve_err(config, config.variants[0], nu, n))?;
            per_order
                .iter()
                .map(|po| {
                    let sys = level.system(&po.vel, nu);
                    level
                        .ops
                        .iter()
                        .zip(&po.loads)
                        .map(|(op, (visc, press))| {
                            let load =
                                visc.iter().zip(press).map(|(v, p)| nu * v + p).collect();
                            let (_, run) = run_variant(
                                &level,
                                &po.vel,
                                &case,
                                op.as_ref(),
                                &fact,
                                &sys,
                                load,
                                config.qorder_err,
                            )?;
                            Ok(run)
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut columns = vec![
        "case", "variant", "nu", "qorder_rhs", "level", "dofs_target", "jitter", "seed",
        "qorder_a", "qorder_err",
    ];
    columns.extend(REPORT_COLUMNS);
    let mut table = Table::new(columns);
    for (qi, po) in per_order.iter().enumerate() {
        for (vi, &variant) in config.variants.iter().enumerate() {
            for (ni, &nu) in config.nus.iter().enumerate() {
                let mut row = vec![
                    Cell::Text(config.case.clone()),
                    Cell::Text(variant.name().to_string()),
                    Cell::Float(nu),
                    Cell::Int(po.qorder as u64),
                    Cell::Int(n as u64),
                    Cell::Int(config.dofs_target as u64),
                    Cell::Float(config.jitter),
                    Cell::Int(config.seed),
                    Cell::Int(config.qorder_a as u64),
                    Cell::Int(config.qorder_err as u64),
                ];
                row.extend(report_cells(&results[ni][qi][vi]));
                table.push_row(row);
            }
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Property suite

#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub name: String,
    /// `None` = pass; otherwise the failure message.
    pub failure: Option<String>,
}

pub fn suite_passed(outcomes: &[PropertyOutcome]) -> bool {
    outcomes.iter().all(|o| o.failure.is_none())
}

/// Runs every module-level invariant on a fixed mesh family and returns one
/// outcome per (check, configuration).
pub fn run_property_suite() -> Vec<PropertyOutcome> {
    let mut out: Vec<PropertyOutcome> = Vec::new();
    let mut push = |name: String, result: Result<(), String>| {
        out.push(PropertyOutcome { name, failure: result.err() });
    };

    let family: Vec<(usize, f64, u64)> = vec![
        (2, 0.0, 0),
        (4, 0.0, 0),
        (8, 0.0, 0),
        (2, 0.2, 1),
        (4, 0.2, 2),
        (8, 0.2, 3),
    ];
    for &(n, jitter, seed) in &family {
        let tag = format!("n={n} jitter={jitter} seed={seed}");
        let (mesh, topo) = match generate_unit_square_mesh(n, jitter, seed)
            .map_err(|e| e.to_string())
            .and_then(|mesh| {
                let topo = classify(&mesh).map_err(|e| e.to_string())?;
                Ok((mesh, topo))
            }) {
            Ok(pair) => pair,
            Err(e) => {
                push(format!("mesh-family {tag}"), Err(e));
                continue;
            }
        };
        push(
            format!("modified-basis-properties {tag}"),
            checks::check_er_basis(&mesh, &topo),
        );
        for variant in [
            ReconVariant::Rt0,
            ReconVariant::Bdm1,
            ReconVariant::Rt0Axi,
            ReconVariant::Bdm1Axi,
        ] {
            push(
                format!("trace-continuity {} {tag}", variant.name()),
                checks::check_trace_continuity(&mesh, &topo, variant),
            );
            push(
                format!("commuting-property {} {tag}", variant.name()),
                checks::check_commuting(&mesh, &topo, variant, 10, 0xC0FFEE),
            );
        }
        for variant in [ReconVariant::Rt0Axi, ReconVariant::Bdm1Axi] {
            push(
                format!("axis-vanishing {} {tag}", variant.name()),
                checks::check_axis_vanishing(&mesh, &topo, variant, 0xA715),
            );
        }
    }

    push("scaled-basis-norms n=4..32".to_string(), scaled_norm_drift());
    push(
        "quadrature-exactness order<=50".to_string(),
        checks::check_quadrature_exactness(50),
    );
    for name in ["ex1", "ex2", "ex3"] {
        let case = find_case(name).unwrap();
        for nu in [1.0, 1e-3, 1e-6] {
            push(
                format!("case-gate {name} nu={nu:e}"),
                verify_case(&case, nu).map_err(|e| e.to_string()),
            );
        }
    }
    push("solved-divergence ex2 bdm1_axi n=4".to_string(), solved_divergence());
    out
}

fn scaled_norm_drift() -> Result<(), String> {
    let mut norms = Vec::new();
    for n in [4, 8, 16, 32] {
        let mesh = generate_unit_square_mesh(n, 0.0, 0).map_err(|e| e.to_string())?;
        let topo = classify(&mesh).map_err(|e| e.to_string())?;
        norms.push((n, checks::scaled_basis_norms(&mesh, &topo, 10)?));
    }
    for pick in [
        |s: &checks::ScaledBasisNorms| s.modified,
        |s: &checks::ScaledBasisNorms| s.away_mean_flux,
        |s: &checks::ScaledBasisNorms| s.away_moment,
    ] {
        let values: Vec<f64> = norms.iter().map(|(_, s)| pick(s)).collect();
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(min > 0.0) || max / min > 4.0 {
            return Err(format!(
                "scaled weighted basis norms drift across levels: {values:?}"
            ));
        }
    }
    Ok(())
}

/// One converged reconstruction solve: elementwise divergence of the
/// reconstructed velocity and the load-compatibility sum both vanish at
/// solver precision.
fn solved_divergence() -> Result<(), String> {
    let config = RunConfig {
        variants: vec![ReconVariant::Bdm1Axi],
        ..RunConfig::new("ex2")
    };
    let case = find_case("ex2").unwrap();
    let level = build_level(&config, 4).map_err(|e| e.to_string())?;
    let vel = level
        .constrained_space(&case, config.qorder_rhs)
        .map_err(|e| e.to_string())?;
    let sys = level.system(&vel, 1.0);

    let compat: f64 = {
        let u = vel.constrained_values();
        let mut sum = 0.0;
        for &(_, j, v) in &level.b {
            sum += v * u[j];
        }
        sum
    };
    let g_scale = vel
        .constrained_values()
        .iter()
        .map(|v| v.abs())
        .fold(1.0, f64::max);
    if compat.abs() > 1e-10 * g_scale {
        return Err(format!(
            "boundary-data compatibility defect {compat:.3e} exceeds 1e-10·{g_scale:.3e}"
        ));
    }

    let op = level.ops[0].as_ref().unwrap();
    let load = assemble_rhs(
        &level.mesh,
        &vel,
        Some(op),
        &|p| (case.f)(1.0, p),
        config.qorder_rhs,
    )
    .map_err(|e| e.to_string())?;
    let fact = StokesFactorization::new(&sys).map_err(|e| e.to_string())?;
    let (sol, run) = run_variant(
        &level,
        &vel,
        &case,
        Some(op),
        &fact,
        &sys,
        load,
        config.qorder_err,
    )
    .map_err(|e| e.to_string())?;
    let scale = sol.u.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if run.report.div_inf > 1e-10 * scale {
        return Err(format!(
            "div of reconstructed solved velocity {:.3e} exceeds 1e-10·{scale:.3e}",
            run.report.div_inf
        ));
    }
    Ok(())
}
