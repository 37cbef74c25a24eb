//! Error norms, diagnostics, and convergence-rate extraction.
//!
//! All integrals run per triangle with strictly interior quadrature nodes,
//! so `1/r`-weighted integrands stay finite even when the true integral
//! diverges (unmodified reconstructions on axis triangles); the reported
//! value is then the quadrature value at the recorded order, which is the
//! quantity the quadrature-sweep experiment studies.

use nalgebra::Point2;
use thiserror::Error;

use crate::cases::{weighted_mean_shift, ManufacturedCase};
use crate::fe_spaces::{ElementBasis, VelocitySpace};
use crate::hdiv_recon::ReconOperator;
use crate::mesh::{AxisTopology, Mesh};
use crate::quadrature::{edge_rule, triangle_rule, QuadratureError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("triangle {tri} is degenerate")]
    DegenerateTriangle { tri: usize },
}

/// Everything one mesh level contributes to a convergence or sweep table.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    /// `‖u − u_h‖_V`, the energy norm `(r|∇e|² + r⁻¹e_r²)^{1/2}`.
    pub err_energy: f64,
    /// `‖u − u_h‖_{L²₁}`.
    pub err_u_l21: f64,
    /// `‖r u − Π(r u_h)‖_{L²₋₁}` (for the plain method Π is the identity).
    pub err_recon_l2m1: f64,
    /// `‖p − p_h‖_{L²₁}` with both pressures shifted to weighted zero mean.
    pub err_p_l21: f64,
    /// `‖Π(r u_h)‖_{L²(Ω)}`, the reference scale for the axis trace.
    pub recon_l2: f64,
    /// `‖Π(r u_h)‖_{L²(Γ_rot)}`.
    pub axis_trace: f64,
    /// `max |div Π(r u_h)|` over triangles (quadrature nodes for the
    /// plain method, whose divergence is not elementwise constant).
    pub div_inf: f64,
    pub h_max: f64,
    pub n_free_velocity: usize,
    pub n_pressure: usize,
    /// Solver unknowns: free velocity + pressure + mean multiplier.
    pub n_dofs: usize,
}

/// Integrates all report entries for one discrete solution.
pub fn error_norms(
    mesh: &Mesh,
    topo: &AxisTopology,
    vel: &VelocitySpace,
    u_full: &[f64],
    p_h: &[f64],
    case: &ManufacturedCase,
    recon: Option<&ReconOperator>,
    qorder_err: usize,
) -> Result<ErrorReport, AnalysisError> {
    assert_eq!(u_full.len(), vel.n_dofs());
    assert_eq!(p_h.len(), mesh.n_triangles());
    let rule = triangle_rule(qorder_err)?;
    let p_shift = weighted_mean_shift(mesh, &|x| (case.p)(x), 20)?;
    let hdiv_coeffs = recon.map(|op| op.apply(u_full));

    let mut energy2 = 0.0;
    let mut u_l21_2 = 0.0;
    let mut recon_2m1 = 0.0;
    let mut p_l21_2 = 0.0;
    let mut recon_l2_2 = 0.0;
    let mut div_inf = 0.0f64;
    for t in 0..mesh.n_triangles() {
        let eb = ElementBasis::new(mesh, vel, t)
            .map_err(|e| AnalysisError::DegenerateTriangle { tri: e.tri })?;
        let he = recon.map(|op| crate::hdiv_recon::HdivElement::new(mesh, &op.space, t));
        let area = mesh.signed_area(t);
        for (xy, &w) in rule.points.iter().zip(&rule.weights) {
            let lambda = ElementBasis::lambda_of_reference(*xy);
            let p = eb.point_at(lambda);
            let r = p.x;
            let wq = 2.0 * area * w;

            let uh = eb.eval_field(u_full, lambda);
            let gh = eb.eval_field_grad(u_full, lambda);
            let e = (case.u)(p) - uh;
            let ge = (case.grad_u)(p) - gh;
            energy2 += wq * (r * ge.component_mul(&ge).sum() + e.x * e.x / r);
            u_l21_2 += wq * r * e.norm_squared();

            let dp = (case.p)(p) - p_shift - p_h[t];
            p_l21_2 += wq * r * dp * dp;

            let (pi_ruh, div) = match (&he, &hdiv_coeffs) {
                (Some(he), Some(coeffs)) => he.eval_field(coeffs, lambda),
                _ => (r * uh, r * (gh[(0, 0)] + gh[(1, 1)]) + uh.x),
            };
            let d = r * (case.u)(p) - pi_ruh;
            recon_2m1 += wq * d.norm_squared() / r;
            recon_l2_2 += wq * pi_ruh.norm_squared();
            div_inf = div_inf.max(div.abs());
        }
    }

    let axis_trace = axis_trace_norm(mesh, topo, vel, u_full, recon, hdiv_coeffs.as_deref(), qorder_err)?;
    let n_free_velocity = vel.free_dofs().len();
    let n_pressure = mesh.n_triangles();
    Ok(ErrorReport {
        err_energy: energy2.sqrt(),
        err_u_l21: u_l21_2.sqrt(),
        err_recon_l2m1: recon_2m1.sqrt(),
        err_p_l21: p_l21_2.sqrt(),
        recon_l2: recon_l2_2.sqrt(),
        axis_trace,
        div_inf,
        h_max: mesh.h_max(),
        n_free_velocity,
        n_pressure,
        n_dofs: n_free_velocity + n_pressure + 1,
    })
}

/// `‖Π(r u_h)‖_{L²(Γ_rot)}` by edge quadrature on the axis edges.
fn axis_trace_norm(
    mesh: &Mesh,
    topo: &AxisTopology,
    vel: &VelocitySpace,
    u_full: &[f64],
    recon: Option<&ReconOperator>,
    hdiv_coeffs: Option<&[f64]>,
    qorder: usize,
) -> Result<f64, AnalysisError> {
    let rule = edge_rule(qorder)?;
    let mut trace2 = 0.0;
    for &e in &topo.axis_edges {
        let t = mesh.edge_triangles[e].0;
        let eb = ElementBasis::new(mesh, vel, t)
            .map_err(|err| AnalysisError::DegenerateTriangle { tri: err.tri })?;
        let he = recon.map(|op| crate::hdiv_recon::HdivElement::new(mesh, &op.space, t));
        let [a, b] = mesh.edges[e];
        let (la, lb) = (
            mesh.local_vertex_index(t, a).expect("edge vertex in triangle"),
            mesh.local_vertex_index(t, b).expect("edge vertex in triangle"),
        );
        let len = mesh.edge_length(e);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let mut lambda = [0.0; 3];
            lambda[la] = 1.0 - s;
            lambda[lb] = s;
            let value = match (&he, hdiv_coeffs) {
                (Some(he), Some(coeffs)) => he.eval_field(coeffs, lambda).0,
                _ => eb.point_at(lambda).x * eb.eval_field(u_full, lambda),
            };
            trace2 += w * len * value.norm_squared();
        }
    }
    Ok(trace2.sqrt())
}

/// Experimental orders of convergence; entry `k` compares levels `k` and
/// `k+1`. Non-positive errors yield NaN sentinels.
pub fn eoc(errors: &[f64], h: &[f64]) -> Vec<f64> {
    assert_eq!(errors.len(), h.len());
    errors
        .windows(2)
        .zip(h.windows(2))
        .map(|(e, h)| {
            if e[0] > 0.0 && e[1] > 0.0 && h[0] > 0.0 && h[1] > 0.0 && h[0] != h[1] {
                (e[0] / e[1]).ln() / (h[0] / h[1]).ln()
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// `‖p − π₀ p‖_{L²₁}` for the elementwise weighted-mean projection
/// `(π₀ p)_T = ∫_T r p / ∫_T r`.
pub fn pressure_best_approx(
    mesh: &Mesh,
    p: &dyn Fn(Point2<f64>) -> f64,
    qorder: usize,
) -> Result<f64, QuadratureError> {
    let rule = triangle_rule(qorder)?;
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let [p0, p1, p2] = mesh.triangle_points(t);
        let (points, weights) = rule.map_to_triangle(p0, p1, p2)?;
        let mut weighted = 0.0;
        let mut mass = 0.0;
        for (x, w) in points.iter().zip(&weights) {
            weighted += w * x.x * p(*x);
            mass += w * x.x;
        }
        let mean = weighted / mass;
        for (x, w) in points.iter().zip(&weights) {
            let d = p(*x) - mean;
            total += w * x.x * d * d;
        }
    }
    Ok(total.sqrt())
}
