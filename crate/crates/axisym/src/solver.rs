//! Direct solution of the constrained saddle-point system.
//!
//! The weighted zero-mean pressure condition is enforced by a single
//! Lagrange multiplier row, giving the symmetric indefinite system
//!
//! ```text
//! ┌ νA   Bᵀ  0 ┐ ┌ u ┐   ┌ F − νA_fc g ┐
//! │ B    0   m │ │ p̃ │ = │ −B_c g      │
//! └ 0    mᵀ  0 ┘ └ μ ┘   └ 0           ┘
//! ```
//!
//! solved by sparse LU with one iterative-refinement pass. The multiplier
//! absorbs any incompatibility of the boundary data (nonzero net flux of
//! r·g shows up as μ ≠ 0 and, equivalently, as a uniform divergence
//! residual), so the factorization never sees a singular matrix for a
//! well-posed mesh. The raw pressure solves the transposed-sign convention
//! of the weak form; [`solve_with`] negates it once so the returned `p`
//! approximates the physical pressure.

use std::collections::BTreeMap;
use std::sync::Once;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

use crate::assembly::SparseSystem;

/// Relative algebraic residual every returned solution satisfies.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("saddle-point system is structurally singular: {0}")]
    Singular(String),
    #[error(
        "solve stalled at relative residual {residual:.3e} (tolerance {tol:.1e}); \
         condition estimate ~{condition:.3e}"
    )]
    IllConditioned { residual: f64, tol: f64, condition: f64 },
    #[error("invalid sparse structure: {0}")]
    Structure(String),
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    /// Full velocity coefficient vector, fixed dofs holding their values.
    pub u: Vec<f64>,
    /// Pressure with weighted zero mean, physical sign.
    pub p: Vec<f64>,
    /// Mean-constraint multiplier; ≈ 0 for compatible data.
    pub multiplier: f64,
    /// Relative algebraic residual of the full KKT system.
    pub residual: f64,
    pub nu: f64,
    pub n_free: usize,
    pub n_pressure: usize,
}

fn set_sequential_once() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Sparse LU of the KKT matrix for one `(mesh, ν)` pair; the factorization
/// is reused across load vectors (reconstruction variants, quadrature
/// orders).
pub struct StokesFactorization {
    kkt: SparseColMat<usize, f64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    norm_kkt: f64,
    nu: f64,
    n_free: usize,
    n_pressure: usize,
}

impl StokesFactorization {
    pub fn new(system: &SparseSystem) -> Result<Self, SolverError> {
        set_sequential_once();
        let nf = system.n_free();
        let np = system.n_pressure();
        let dim = nf + np + 1;

        let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in &system.a_ff {
            *entries.entry((i, j)).or_insert(0.0) += system.nu * v;
        }
        for &(t, j, v) in &system.b_f {
            *entries.entry((nf + t, j)).or_insert(0.0) += v;
            *entries.entry((j, nf + t)).or_insert(0.0) += v;
        }
        for (t, &m) in system.masses.iter().enumerate() {
            entries.insert((nf + t, nf + np), m);
            entries.insert((nf + np, nf + t), m);
        }

        let norm_kkt = entries.values().map(|v| v * v).sum::<f64>().sqrt();
        let triplets: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|(&(i, j), &v)| Triplet::new(i, j, v))
            .collect();
        let kkt = SparseColMat::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| SolverError::Structure(format!("{e:?}")))?;
        let lu = kkt
            .sp_lu()
            .map_err(|e| SolverError::Singular(format!("{e:?}")))?;
        Ok(StokesFactorization {
            kkt,
            lu,
            norm_kkt,
            nu: system.nu,
            n_free: nf,
            n_pressure: np,
        })
    }

    /// Solves for the loads currently stored in `system`, which must carry
    /// the matrices this factorization was built from.
    pub fn solve_with(&self, system: &SparseSystem) -> Result<StokesSolution, SolverError> {
        assert_eq!(system.n_free(), self.n_free);
        assert_eq!(system.n_pressure(), self.n_pressure);
        assert_eq!(system.nu, self.nu);
        let dim = self.n_free + self.n_pressure + 1;

        let load = system.reduced_load();
        let prhs = system.pressure_rhs();
        let rhs = Mat::<f64>::from_fn(dim, 1, |i, _| {
            if i < self.n_free {
                load[i]
            } else if i < self.n_free + self.n_pressure {
                prhs[i - self.n_free]
            } else {
                0.0
            }
        });

        let mut x = self.lu.solve(&rhs);
        let mut residual = f64::INFINITY;
        let mut condition = 0.0;
        for _ in 0..2 {
            let r = &rhs - &self.kkt * &x;
            let norm_r = r.norm_l2();
            let denom = rhs.norm_l2() + self.norm_kkt * x.norm_l2();
            residual = if denom == 0.0 { 0.0 } else { norm_r / denom };
            if residual <= RESIDUAL_TOL {
                break;
            }
            let dx = self.lu.solve(&r);
            condition = if norm_r == 0.0 {
                0.0
            } else {
                self.norm_kkt * dx.norm_l2() / norm_r
            };
            x += &dx;
        }
        if !residual.is_finite() || x.col(0).iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Singular(
                "factorization produced non-finite values (zero pivot)".into(),
            ));
        }
        if residual > RESIDUAL_TOL {
            return Err(SolverError::IllConditioned {
                residual,
                tol: RESIDUAL_TOL,
                condition,
            });
        }

        let u_free: Vec<f64> = (0..self.n_free).map(|i| x[(i, 0)]).collect();
        let p: Vec<f64> = (0..self.n_pressure)
            .map(|t| -x[(self.n_free + t, 0)])
            .collect();
        Ok(StokesSolution {
            u: system.expand_velocity(&u_free),
            p,
            multiplier: x[(dim - 1, 0)],
            residual,
            nu: self.nu,
            n_free: self.n_free,
            n_pressure: self.n_pressure,
        })
    }
}

/// Factor-and-solve convenience for a single load.
pub fn solve_stokes(system: &SparseSystem) -> Result<StokesSolution, SolverError> {
    StokesFactorization::new(system)?.solve_with(system)
}

/// `max_T |(B u)_T| / m_T`: the scaled elementwise divergence-constraint
/// residual of a full velocity vector.
pub fn discrete_divergence_residual(system: &SparseSystem, u_full: &[f64]) -> f64 {
    let mut rows = system.b_c_g.clone();
    for &(t, j, v) in &system.b_f {
        rows[t] += v * u_full[system.free_dofs[j]];
    }
    rows.iter()
        .zip(&system.masses)
        .map(|(r, m)| (r / m).abs())
        .fold(0.0, f64::max)
}
