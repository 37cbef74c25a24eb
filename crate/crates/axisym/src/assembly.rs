//! Assembly of the weighted Stokes forms and the (reconstructed) load.
//!
//! The bilinear forms are
//!
//! ```text
//! a(u, v) = ∫_Ω r ∇u : ∇v + ∫_Ω r⁻¹ u_r v_r
//! b(q, v) = ∫_Ω div(r v) q,   div(r v) = r div v + v_r
//! ```
//!
//! `a` is integrated with a fixed-order rule whose nodes are strictly
//! interior, so the `1/r` term stays finite on axis-touching triangles (the
//! huge but finite entries this produces couple only radial dofs of axis
//! vertices, which are always constrained to zero). `b`-integrands are
//! polynomials of degree ≤ 2 via the product-rule expansion and integrate
//! exactly at order 4. Loads are `F_i = ∫ f·(r φ_i)` for the plain method,
//! or per-H(div)-dof integrals `∫ f·ψ_d` pushed through the transposed
//! reconstruction matrix otherwise — switching the reconstruction never
//! touches the element loops.
//!
//! [`eliminate_constraints`] reduces everything to free dofs, moving the
//! couplings of fixed dofs to the right-hand sides, and the result carries
//! the viscosity separately so one assembly serves a whole ν-sweep.

use nalgebra::{Point2, Vector2};
use thiserror::Error;

use crate::fe_spaces::{DofConstraint, ElementBasis, PressureSpace, VelocitySpace};
use crate::hdiv_recon::{HdivElement, ReconOperator};
use crate::mesh::Mesh;
use crate::quadrature::{triangle_rule, QuadratureError};

pub type Triplet = (usize, usize, f64);

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("triangle {tri} is degenerate")]
    DegenerateTriangle { tri: usize },
    #[error("load is not finite at quadrature node ({r}, {z})")]
    NonFiniteLoad { r: f64, z: f64 },
}

fn element_basis(mesh: &Mesh, space: &VelocitySpace, t: usize) -> Result<ElementBasis, AssemblyError> {
    ElementBasis::new(mesh, space, t).map_err(|e| AssemblyError::DegenerateTriangle { tri: e.tri })
}

/// Assembles `a(·,·)` over all raw velocity dofs as symmetric triplets.
pub fn assemble_a(
    mesh: &Mesh,
    space: &VelocitySpace,
    qorder: usize,
) -> Result<Vec<Triplet>, AssemblyError> {
    let rule = triangle_rule(qorder)?;
    let mut triplets = Vec::new();
    for t in 0..mesh.n_triangles() {
        let eb = element_basis(mesh, space, t)?;
        let area = mesh.signed_area(t);
        let mut local = [[0.0f64; 9]; 9];
        for (xy, &w) in rule.points.iter().zip(&rule.weights) {
            let lambda = ElementBasis::lambda_of_reference(*xy);
            let p = eb.point_at(lambda);
            let r = p.x;
            assert!(r > 0.0, "quadrature node on or beyond the axis");
            let basis = eb.eval(lambda);
            let wq = 2.0 * area * w;
            for i in 0..9 {
                for j in i..9 {
                    let grads = basis[i].grad.component_mul(&basis[j].grad).sum();
                    let radial = basis[i].value.x * basis[j].value.x;
                    local[i][j] += wq * (r * grads + radial / r);
                }
            }
        }
        for i in 0..9 {
            for j in i..9 {
                let v = local[i][j];
                if v != 0.0 {
                    let (gi, gj) = (eb.global_dofs[i], eb.global_dofs[j]);
                    triplets.push((gi, gj, v));
                    if gi != gj {
                        triplets.push((gj, gi, v));
                    }
                }
            }
        }
    }
    Ok(triplets)
}

/// Assembles `b(·,·)` with pressure rows and raw velocity columns.
pub fn assemble_b(
    mesh: &Mesh,
    space: &VelocitySpace,
    pressure: &PressureSpace,
    qorder: usize,
) -> Result<Vec<Triplet>, AssemblyError> {
    assert_eq!(pressure.n_dofs(), mesh.n_triangles());
    let rule = triangle_rule(qorder)?;
    let mut triplets = Vec::new();
    for t in 0..mesh.n_triangles() {
        let eb = element_basis(mesh, space, t)?;
        let area = mesh.signed_area(t);
        let mut local = [0.0f64; 9];
        for (xy, &w) in rule.points.iter().zip(&rule.weights) {
            let lambda = ElementBasis::lambda_of_reference(*xy);
            let r = eb.point_at(lambda).x;
            let basis = eb.eval(lambda);
            let wq = 2.0 * area * w;
            for i in 0..9 {
                let div = basis[i].grad[(0, 0)] + basis[i].grad[(1, 1)];
                local[i] += wq * (r * div + basis[i].value.x);
            }
        }
        for i in 0..9 {
            if local[i] != 0.0 {
                triplets.push((t, eb.global_dofs[i], local[i]));
            }
        }
    }
    Ok(triplets)
}

/// Assembles the load vector over raw velocity dofs.
///
/// Without a reconstruction operator this is `F_i = ∫ f·(r φ_i)`; with one,
/// the integrals `∫ f·ψ_d` against the H(div) basis are computed first and
/// `Rᵀ` maps them onto velocity dofs.
pub fn assemble_rhs(
    mesh: &Mesh,
    space: &VelocitySpace,
    recon: Option<&ReconOperator>,
    f: &dyn Fn(Point2<f64>) -> Vector2<f64>,
    qorder: usize,
) -> Result<Vec<f64>, AssemblyError> {
    let rule = triangle_rule(qorder)?;
    let eval_f = |p: Point2<f64>| -> Result<Vector2<f64>, AssemblyError> {
        let v = f(p);
        if v.x.is_finite() && v.y.is_finite() {
            Ok(v)
        } else {
            Err(AssemblyError::NonFiniteLoad { r: p.x, z: p.y })
        }
    };

    match recon {
        None => {
            let mut out = vec![0.0; space.n_dofs()];
            for t in 0..mesh.n_triangles() {
                let eb = element_basis(mesh, space, t)?;
                let area = mesh.signed_area(t);
                for (xy, &w) in rule.points.iter().zip(&rule.weights) {
                    let lambda = ElementBasis::lambda_of_reference(*xy);
                    let p = eb.point_at(lambda);
                    let fv = eval_f(p)?;
                    let wq = 2.0 * area * w;
                    for (slot, b) in eb.eval(lambda).iter().enumerate() {
                        out[eb.global_dofs[slot]] += wq * p.x * fv.dot(&b.value);
                    }
                }
            }
            Ok(out)
        }
        Some(op) => {
            let mut loads = vec![0.0; op.space.n_dofs()];
            for t in 0..mesh.n_triangles() {
                let he = HdivElement::new(mesh, &op.space, t);
                let eb = element_basis(mesh, space, t)?;
                let area = mesh.signed_area(t);
                for (xy, &w) in rule.points.iter().zip(&rule.weights) {
                    let lambda = ElementBasis::lambda_of_reference(*xy);
                    let p = eb.point_at(lambda);
                    let fv = eval_f(p)?;
                    let wq = 2.0 * area * w;
                    for b in he.eval(lambda) {
                        loads[b.dof] += wq * fv.dot(&b.value);
                    }
                }
            }
            Ok(op.apply_transpose(&loads))
        }
    }
}

/// Constrained saddle-point system reduced to free velocity dofs.
///
/// The stiffness block is stored unscaled; [`SparseSystem::reduced_load`]
/// folds the viscosity into the Dirichlet coupling, so the same assembly
/// serves every ν and every load vector.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub nu: f64,
    pub free_dofs: Vec<usize>,
    /// Raw dof → position in `free_dofs`.
    pub free_index: Vec<Option<usize>>,
    /// Raw-length vector of constraint values (zero at free dofs).
    pub fixed_values: Vec<f64>,
    /// `a(·,·)` on free × free dofs (viscosity not applied).
    pub a_ff: Vec<Triplet>,
    /// `A_fc · g`: stiffness coupling of fixed values into free rows.
    pub a_fc_g: Vec<f64>,
    /// `b(·,·)` with pressure rows and free velocity columns.
    pub b_f: Vec<Triplet>,
    /// `B_c · g`: divergence contribution of the fixed values.
    pub b_c_g: Vec<f64>,
    /// Raw load vector (all dofs).
    pub f_raw: Vec<f64>,
    /// Weighted pressure masses `m_T` (the mean-constraint vector).
    pub masses: Vec<f64>,
}

impl SparseSystem {
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.masses.len()
    }

    /// `F_free − ν A_fc g`: the velocity right-hand side.
    pub fn reduced_load(&self) -> Vec<f64> {
        self.free_dofs
            .iter()
            .zip(&self.a_fc_g)
            .map(|(&dof, ag)| self.f_raw[dof] - self.nu * ag)
            .collect()
    }

    /// `−B_c g`: the pressure right-hand side.
    pub fn pressure_rhs(&self) -> Vec<f64> {
        self.b_c_g.iter().map(|v| -v).collect()
    }

    /// Replaces the raw load, keeping matrices and constraints.
    pub fn with_load(&self, f_raw: Vec<f64>) -> SparseSystem {
        assert_eq!(f_raw.len(), self.fixed_values.len());
        SparseSystem { f_raw, ..self.clone() }
    }

    /// Full velocity vector from free values plus the constraint table.
    pub fn expand_velocity(&self, u_free: &[f64]) -> Vec<f64> {
        assert_eq!(u_free.len(), self.n_free());
        let mut full = self.fixed_values.clone();
        for (&dof, &v) in self.free_dofs.iter().zip(u_free) {
            full[dof] = v;
        }
        full
    }
}

/// Splits the assembled forms along the constraint table.
pub fn eliminate_constraints(
    space: &VelocitySpace,
    pressure: &PressureSpace,
    a: &[Triplet],
    b: &[Triplet],
    f_raw: Vec<f64>,
    nu: f64,
) -> SparseSystem {
    let n = space.n_dofs();
    assert_eq!(f_raw.len(), n);
    let mut free_index = vec![None; n];
    let mut free_dofs = Vec::new();
    let mut fixed_values = vec![0.0; n];
    for dof in 0..n {
        match space.constraints[dof] {
            DofConstraint::Free => {
                free_index[dof] = Some(free_dofs.len());
                free_dofs.push(dof);
            }
            DofConstraint::Fixed(g) => fixed_values[dof] = g,
        }
    }

    let mut a_ff = Vec::new();
    let mut a_fc_g = vec![0.0; free_dofs.len()];
    for &(i, j, v) in a {
        match (free_index[i], free_index[j]) {
            (Some(fi), Some(fj)) => a_ff.push((fi, fj, v)),
            (Some(fi), None) => a_fc_g[fi] += v * fixed_values[j],
            _ => {}
        }
    }

    let mut b_f = Vec::new();
    let mut b_c_g = vec![0.0; pressure.n_dofs()];
    for &(t, j, v) in b {
        match free_index[j] {
            Some(fj) => b_f.push((t, fj, v)),
            None => b_c_g[t] += v * fixed_values[j],
        }
    }

    SparseSystem {
        nu,
        free_dofs,
        free_index,
        fixed_values,
        a_ff,
        a_fc_g,
        b_f,
        b_c_g,
        f_raw,
        masses: pressure.masses.clone(),
    }
}
