//! H(div)-conforming reconstruction of radially weighted velocity fields.
//!
//! The discrete load `(f, Π(r v_h))` replaces the plain test function by an
//! H(div) interpolation of `r v_h`, chosen so that `div Π(r v_h)` equals the
//! elementwise mean of `div(r v_h)`. Four target spaces are supported:
//! lowest-order Raviart–Thomas (`Rt0`), full linear H(div) (`Bdm1`), and
//! axis-aware modifications of both (`Rt0Axi`, `Bdm1Axi`) in which every
//! basis function vanishes pointwise on the rotation axis — the property
//! that keeps the weighted `L²₋₁` interpolation error finite.
//!
//! All basis functions are expressed through `curl φ = (∂_z φ, −∂_r φ)`:
//!
//! * `ψ_E = λ_a curl λ_b − λ_b curl λ_a` — unit mean flux through its own
//!   edge `E = [a, b]` (ascending vertex order), zero flux elsewhere;
//! * `ψ_E = curl(λ_a λ_b)` — divergence-free, zero mean flux, unit odd
//!   moment against `3(λ_a − λ_b)`;
//! * `ψ_E = ±2 λ_i curl λ_j` for an edge with exactly one endpoint `N_j` on
//!   the axis — vanishes at `N_j` and on the whole axis, sign chosen so the
//!   mean flux through `E` is `+1`.
//!
//! Because every function has pointwise zero normal trace on all non-own
//! edges of its support, the interpolation decouples edge by edge and the
//! operator is a precomputed sparse matrix acting on velocity coefficients.
//! Edges contained in the axis carry no dofs at all: the flux of `r v_h`
//! through `r = 0` always vanishes, so pinning them to zero changes nothing
//! about the interpolated field and enforces the axis condition exactly.

use nalgebra::{Point2, Vector2};
use thiserror::Error;

use crate::fe_spaces::VelocitySpace;
use crate::mesh::{AxisTopology, Mesh};
use crate::quadrature::{edge_rule, triangle_rule, QuadratureError};

/// Quadrature order for the edge moments defining the interpolation; the
/// integrands `r v_h·n·q` have degree ≤ 4 on each edge, so this is exact.
pub const EDGE_MOMENT_QORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconVariant {
    Identity,
    Rt0,
    Bdm1,
    Rt0Axi,
    Bdm1Axi,
}

impl ReconVariant {
    pub const ALL: [ReconVariant; 5] = [
        ReconVariant::Identity,
        ReconVariant::Rt0,
        ReconVariant::Bdm1,
        ReconVariant::Rt0Axi,
        ReconVariant::Bdm1Axi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReconVariant::Identity => "identity",
            ReconVariant::Rt0 => "rt0",
            ReconVariant::Bdm1 => "bdm1",
            ReconVariant::Rt0Axi => "rt0_axi",
            ReconVariant::Bdm1Axi => "bdm1_axi",
        }
    }

    pub fn parse(s: &str) -> Option<ReconVariant> {
        ReconVariant::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Whether the reconstructed field vanishes on the rotation axis by
    /// construction.
    pub fn is_axis_aware(self) -> bool {
        matches!(self, ReconVariant::Rt0Axi | ReconVariant::Bdm1Axi)
    }
}

/// Dof content of one edge in an H(div) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeDofKind {
    /// Edge contained in the axis: no dof.
    Zero,
    /// One mean-flux dof with the standard unit-flux basis function.
    MeanFlux,
    /// Mean-flux dof plus the odd first-moment dof (divergence-free basis).
    MeanFluxAndMoment,
    /// One mean-flux dof with the modified axis-vanishing basis function.
    ModifiedMeanFlux {
        axis_vertex: usize,
        off_axis_vertex: usize,
        /// `+1` if the axis vertex is the larger-index endpoint (the raw
        /// function `2 λ_i curl λ_j` then already has flux `+1`), else `-1`.
        sign: f64,
    },
}

impl EdgeDofKind {
    pub fn n_dofs(self) -> usize {
        match self {
            EdgeDofKind::Zero => 0,
            EdgeDofKind::MeanFlux | EdgeDofKind::ModifiedMeanFlux { .. } => 1,
            EdgeDofKind::MeanFluxAndMoment => 2,
        }
    }
}

/// Edge-based H(div) space for one reconstruction variant.
#[derive(Debug, Clone)]
pub struct HdivSpace {
    pub variant: ReconVariant,
    pub edge_kinds: Vec<EdgeDofKind>,
    /// Prefix sums: edge `e` owns dofs `edge_offset[e]..edge_offset[e+1]`.
    pub edge_offset: Vec<usize>,
}

impl HdivSpace {
    pub fn n_dofs(&self) -> usize {
        *self.edge_offset.last().unwrap()
    }
}

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("the identity variant has no reconstruction space")]
    IdentityHasNoSpace,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Builds the edge dof layout for `variant` on a classified mesh.
pub fn build_hdiv_space(
    mesh: &Mesh,
    topo: &AxisTopology,
    variant: ReconVariant,
) -> Result<HdivSpace, ReconError> {
    let moments = match variant {
        ReconVariant::Identity => return Err(ReconError::IdentityHasNoSpace),
        ReconVariant::Rt0 | ReconVariant::Rt0Axi => false,
        ReconVariant::Bdm1 | ReconVariant::Bdm1Axi => true,
    };
    let modified = variant.is_axis_aware();

    let mut edge_kinds = Vec::with_capacity(mesh.n_edges());
    for e in 0..mesh.n_edges() {
        let kind = if topo.is_axis_edge[e] {
            EdgeDofKind::Zero
        } else if modified && topo.er_index[e].is_some() {
            let er = topo.er_edges[topo.er_index[e].unwrap()];
            EdgeDofKind::ModifiedMeanFlux {
                axis_vertex: er.axis_vertex,
                off_axis_vertex: er.off_axis_vertex,
                sign: if er.axis_vertex == mesh.edges[e][1] { 1.0 } else { -1.0 },
            }
        } else if moments {
            EdgeDofKind::MeanFluxAndMoment
        } else {
            EdgeDofKind::MeanFlux
        };
        edge_kinds.push(kind);
    }

    let mut edge_offset = Vec::with_capacity(mesh.n_edges() + 1);
    let mut total = 0;
    edge_offset.push(0);
    for kind in &edge_kinds {
        total += kind.n_dofs();
        edge_offset.push(total);
    }

    Ok(HdivSpace { variant, edge_kinds, edge_offset })
}

/// One local basis function: its global dof, value, and (constant)
/// divergence contribution at the evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct HdivBasisValue {
    pub dof: usize,
    pub value: Vector2<f64>,
    pub div: f64,
}

#[derive(Debug, Clone, Copy)]
enum LocalKind {
    /// `λ_a curl λ_b − λ_b curl λ_a` with local endpoint indices `(a, b)`.
    UnitFlux { a: usize, b: usize },
    /// `curl(λ_a λ_b)`.
    OddMoment { a: usize, b: usize },
    /// `sign · 2 λ_i curl λ_j` with `N_j` on the axis.
    AxisVanishing { i: usize, j: usize, sign: f64 },
}

/// Evaluator for the H(div) basis functions supported on one triangle.
#[derive(Debug, Clone)]
pub struct HdivElement {
    pub tri: usize,
    len: usize,
    dofs: [usize; 6],
    kinds: [LocalKind; 6],
    /// Per-vertex `curl λ_k = (∂_z λ_k, −∂_r λ_k)`.
    curls: [Vector2<f64>; 3],
    /// Per-vertex `∇λ_k`.
    grads: [Vector2<f64>; 3],
}

impl HdivElement {
    pub fn new(mesh: &Mesh, space: &HdivSpace, tri: usize) -> Self {
        let grads = mesh.barycentric_gradients(tri);
        let curls = std::array::from_fn(|k| {
            let g: Vector2<f64> = grads[k];
            Vector2::new(g.y, -g.x)
        });
        let verts = mesh.triangles[tri];
        let local_of = |v: usize| verts.iter().position(|&w| w == v).unwrap();

        let mut len = 0;
        let mut dofs = [0usize; 6];
        let mut kinds = [LocalKind::UnitFlux { a: 0, b: 0 }; 6];
        for l in 0..3 {
            let e = mesh.triangle_edges[tri][l].edge;
            let [ga, gb] = mesh.edges[e];
            let offset = space.edge_offset[e];
            match space.edge_kinds[e] {
                EdgeDofKind::Zero => {}
                EdgeDofKind::MeanFlux => {
                    dofs[len] = offset;
                    kinds[len] = LocalKind::UnitFlux { a: local_of(ga), b: local_of(gb) };
                    len += 1;
                }
                EdgeDofKind::MeanFluxAndMoment => {
                    dofs[len] = offset;
                    kinds[len] = LocalKind::UnitFlux { a: local_of(ga), b: local_of(gb) };
                    len += 1;
                    dofs[len] = offset + 1;
                    kinds[len] = LocalKind::OddMoment { a: local_of(ga), b: local_of(gb) };
                    len += 1;
                }
                EdgeDofKind::ModifiedMeanFlux { axis_vertex, off_axis_vertex, sign } => {
                    dofs[len] = offset;
                    kinds[len] = LocalKind::AxisVanishing {
                        i: local_of(off_axis_vertex),
                        j: local_of(axis_vertex),
                        sign,
                    };
                    len += 1;
                }
            }
        }
        HdivElement { tri, len, dofs, kinds, curls, grads }
    }

    pub fn n_local(&self) -> usize {
        self.len
    }

    fn cross(u: Vector2<f64>, v: Vector2<f64>) -> f64 {
        u.x * v.y - u.y * v.x
    }

    /// Values of all local basis functions at barycentric point `lambda`.
    pub fn eval(&self, lambda: [f64; 3]) -> impl Iterator<Item = HdivBasisValue> + '_ {
        (0..self.len).map(move |k| {
            let (value, div) = match self.kinds[k] {
                LocalKind::UnitFlux { a, b } => (
                    self.curls[b] * lambda[a] - self.curls[a] * lambda[b],
                    2.0 * Self::cross(self.grads[a], self.grads[b]),
                ),
                LocalKind::OddMoment { a, b } => {
                    (self.curls[b] * lambda[a] + self.curls[a] * lambda[b], 0.0)
                }
                LocalKind::AxisVanishing { i, j, sign } => (
                    self.curls[j] * (sign * 2.0 * lambda[i]),
                    sign * 2.0 * Self::cross(self.grads[i], self.grads[j]),
                ),
            };
            HdivBasisValue { dof: self.dofs[k], value, div }
        })
    }

    /// Field value and divergence of the coefficient vector at `lambda`.
    pub fn eval_field(&self, coeffs: &[f64], lambda: [f64; 3]) -> (Vector2<f64>, f64) {
        let mut value = Vector2::zeros();
        let mut div = 0.0;
        for b in self.eval(lambda) {
            value += b.value * coeffs[b.dof];
            div += b.div * coeffs[b.dof];
        }
        (value, div)
    }
}

/// Sparse interpolation operator: velocity coefficients → H(div)
/// coefficients of the interpolated weighted field `Π(r v_h)`.
#[derive(Debug, Clone)]
pub struct ReconOperator {
    pub space: HdivSpace,
    pub n_velocity_dofs: usize,
    /// One row per H(div) dof: `(velocity dof, weight)` pairs.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl ReconOperator {
    pub fn variant(&self) -> ReconVariant {
        self.space.variant
    }

    pub fn apply(&self, velocity: &[f64]) -> Vec<f64> {
        assert_eq!(velocity.len(), self.n_velocity_dofs);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(col, w)| w * velocity[col]).sum())
            .collect()
    }

    /// `F += Rᵀ l`: pushes per-H(div)-dof load integrals onto velocity dofs.
    pub fn apply_transpose(&self, loads: &[f64]) -> Vec<f64> {
        assert_eq!(loads.len(), self.rows.len());
        let mut out = vec![0.0; self.n_velocity_dofs];
        for (row, &l) in self.rows.iter().zip(loads) {
            for &(col, w) in row {
                out[col] += w * l;
            }
        }
        out
    }
}

/// Builds the sparse interpolation matrix for `variant`.
///
/// Every dof is an edge moment of `r v_h`, and only the five velocity dofs
/// whose basis restricts nontrivially to the edge contribute: the four
/// endpoint component dofs and the edge's own bubble (every other bubble's
/// scalar factor vanishes identically on the edge). The unit-flux and
/// axis-vanishing dofs take the mean flux `m₀` directly; the odd-moment dof
/// takes `3 m₁` (the basis pair has the diagonal moment matrix
/// `diag(1, 1/3)`).
pub fn build_recon_operator(
    mesh: &Mesh,
    topo: &AxisTopology,
    velocity: &VelocitySpace,
    variant: ReconVariant,
) -> Result<ReconOperator, ReconError> {
    let space = build_hdiv_space(mesh, topo, variant)?;
    let rule = edge_rule(EDGE_MOMENT_QORDER)?;

    let mut rows = vec![Vec::new(); space.n_dofs()];
    for e in 0..mesh.n_edges() {
        let kind = space.edge_kinds[e];
        if kind == EdgeDofKind::Zero {
            continue;
        }
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);

        // ∫_E r·(basis restriction)·q ds for the three scalar edge profiles
        // (endpoint hats and the bubble), with q = 1 and the odd mode 1−2s.
        let mut i0 = [0.0; 3];
        let mut i1 = [0.0; 3];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let r = pa.x * (1.0 - s) + pb.x * s;
            let profiles = [1.0 - s, s, s * (1.0 - s)];
            let odd = 1.0 - 2.0 * s;
            for (k, &profile) in profiles.iter().enumerate() {
                i0[k] += w * len * r * profile;
                i1[k] += w * len * r * profile * odd;
            }
        }

        let cols = [
            VelocitySpace::vertex_dof_r(a),
            VelocitySpace::vertex_dof_z(a),
            VelocitySpace::vertex_dof_r(b),
            VelocitySpace::vertex_dof_z(b),
            velocity.bubble_dof(e),
        ];
        let weights = |i: [f64; 3]| [n.x * i[0], n.y * i[0], n.x * i[1], n.y * i[1], i[2]];

        let offset = space.edge_offset[e];
        let m0 = weights(i0);
        rows[offset] = cols.iter().copied().zip(m0).filter(|&(_, w)| w != 0.0).collect();
        if kind == EdgeDofKind::MeanFluxAndMoment {
            let m1 = weights(i1);
            rows[offset + 1] = cols
                .iter()
                .copied()
                .zip(m1.map(|w| 3.0 * w))
                .filter(|&(_, w)| w != 0.0)
                .collect();
        }
    }

    Ok(ReconOperator { space, n_velocity_dofs: velocity.n_dofs(), rows })
}

/// Mean flux and odd first moment of `r·field` through edge `e`:
/// `m₀ = ∫_E (r field)·n_E ds`, `m₁ = ∫_E (r field)·n_E (1−2s) ds` with `s`
/// the arclength parameter ascending with vertex index.
pub fn weighted_edge_moments(
    mesh: &Mesh,
    e: usize,
    field: &dyn Fn(Point2<f64>) -> Vector2<f64>,
    qorder: usize,
) -> Result<(f64, f64), QuadratureError> {
    let rule = edge_rule(qorder)?;
    let [a, b] = mesh.edges[e];
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    let n = mesh.edge_normal(e);
    let len = mesh.edge_length(e);
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
        let p = pa + (pb - pa) * s;
        let flux = p.x * field(p).dot(&n);
        m0 += w * len * flux;
        m1 += w * len * flux * (1.0 - 2.0 * s);
    }
    Ok((m0, m1))
}

/// Per-triangle `div Π(r v_h)` (constant) and the elementwise mean
/// `π₀ div(r v_h)`, for checking that the two agree.
pub fn divergence_check(
    mesh: &Mesh,
    velocity: &VelocitySpace,
    op: &ReconOperator,
    coeffs: &[f64],
) -> Result<Vec<(f64, f64)>, QuadratureError> {
    use crate::fe_spaces::ElementBasis;

    let hdiv_coeffs = op.apply(coeffs);
    let rule = triangle_rule(4)?;
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let he = HdivElement::new(mesh, &op.space, t);
        let (_, div_recon) = he.eval_field(&hdiv_coeffs, [1.0 / 3.0; 3]);

        let eb = ElementBasis::new(mesh, velocity, t).expect("valid triangle");
        let area = mesh.signed_area(t);
        let mut mean = 0.0;
        for (xy, &w) in rule.points.iter().zip(&rule.weights) {
            let lambda = ElementBasis::lambda_of_reference(*xy);
            let p = eb.point_at(lambda);
            let v = eb.eval_field(coeffs, lambda);
            let g = eb.eval_field_grad(coeffs, lambda);
            // div(r v) = r div v + v_r; the physical weight is 2·area·w.
            mean += 2.0 * area * w * (p.x * (g[(0, 0)] + g[(1, 1)]) + v.x);
        }
        out.push((div_recon, mean / area));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_spaces::{build_spaces, interpolate_field};
    use crate::mesh::{classify, generate_unit_square_mesh, TriangleClass};
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn setup(
        n: usize,
        jitter: f64,
        seed: u64,
    ) -> (Mesh, AxisTopology, VelocitySpace) {
        let mesh = generate_unit_square_mesh(n, jitter, seed).unwrap();
        let topo = classify(&mesh).unwrap();
        let (vel, _) = build_spaces(&mesh, &topo);
        (mesh, topo, vel)
    }

    /// Normal trace of the field described by `coeffs` on edge `e`, seen
    /// from triangle `t`, at arclength fraction `s`.
    fn normal_trace(
        mesh: &Mesh,
        space: &HdivSpace,
        coeffs: &[f64],
        e: usize,
        t: usize,
        s: f64,
    ) -> f64 {
        let [a, b] = mesh.edges[e];
        let p = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * s;
        let he = HdivElement::new(mesh, space, t);
        let (v, _) = he.eval_field(coeffs, mesh.barycentric_coords(t, p));
        v.dot(&mesh.edge_normal(e))
    }

    /// Mean flux of the basis-coefficient field through edge `e` from
    /// triangle `t`, by edge quadrature.
    fn edge_flux(mesh: &Mesh, space: &HdivSpace, coeffs: &[f64], e: usize, t: usize) -> f64 {
        let rule = edge_rule(6).unwrap();
        let len = mesh.edge_length(e);
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&s, &w)| w * len * normal_trace(mesh, space, coeffs, e, t, s))
            .sum()
    }

    #[test]
    fn dof_layout_on_coarsest_mesh() {
        let (mesh, topo, _) = setup(1, 0.0, 0);
        let space = build_hdiv_space(&mesh, &topo, ReconVariant::Rt0Axi).unwrap();
        assert_eq!(mesh.n_edges(), 5);
        let zeros = space.edge_kinds.iter().filter(|k| **k == EdgeDofKind::Zero).count();
        let modified = space
            .edge_kinds
            .iter()
            .filter(|k| matches!(k, EdgeDofKind::ModifiedMeanFlux { .. }))
            .count();
        assert_eq!(zeros, 1);
        assert_eq!(modified, 3);
        assert_eq!(space.n_dofs(), 4);
    }

    #[test]
    fn dof_counts_per_kind() {
        let (mesh, topo, _) = setup(2, 0.0, 0);
        let bdm = build_hdiv_space(&mesh, &topo, ReconVariant::Bdm1).unwrap();
        let bdm_axi = build_hdiv_space(&mesh, &topo, ReconVariant::Bdm1Axi).unwrap();
        for e in 0..mesh.n_edges() {
            if topo.is_axis_edge[e] {
                assert_eq!(bdm.edge_kinds[e].n_dofs(), 0);
                assert_eq!(bdm_axi.edge_kinds[e].n_dofs(), 0);
            } else if topo.er_index[e].is_some() {
                assert_eq!(bdm.edge_kinds[e].n_dofs(), 2);
                assert_eq!(bdm_axi.edge_kinds[e].n_dofs(), 1);
            } else {
                assert_eq!(bdm.edge_kinds[e].n_dofs(), 2);
                assert_eq!(bdm_axi.edge_kinds[e].n_dofs(), 2);
            }
        }
    }

    #[test]
    fn identity_variant_has_no_space() {
        let (mesh, topo, _) = setup(1, 0.0, 0);
        assert!(matches!(
            build_hdiv_space(&mesh, &topo, ReconVariant::Identity),
            Err(ReconError::IdentityHasNoSpace)
        ));
    }

    #[test]
    fn unit_fluxes_through_own_edges() {
        let (mesh, topo, _) = setup(3, 0.2, 5);
        for variant in [
            ReconVariant::Rt0,
            ReconVariant::Bdm1,
            ReconVariant::Rt0Axi,
            ReconVariant::Bdm1Axi,
        ] {
            let space = build_hdiv_space(&mesh, &topo, variant).unwrap();
            for e in 0..mesh.n_edges() {
                if space.edge_kinds[e] == EdgeDofKind::Zero {
                    continue;
                }
                let mut coeffs = vec![0.0; space.n_dofs()];
                coeffs[space.edge_offset[e]] = 1.0;
                let (t0, _) = mesh.edge_triangles[e];
                let flux = edge_flux(&mesh, &space, &coeffs, e, t0);
                assert_relative_eq!(flux, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn basis_fluxes_vanish_on_foreign_edges() {
        let (mesh, topo, _) = setup(3, 0.2, 5);
        for variant in [ReconVariant::Rt0Axi, ReconVariant::Bdm1Axi, ReconVariant::Bdm1] {
            let space = build_hdiv_space(&mesh, &topo, variant).unwrap();
            for d in 0..space.n_dofs() {
                let mut coeffs = vec![0.0; space.n_dofs()];
                coeffs[d] = 1.0;
                let own = (0..mesh.n_edges())
                    .find(|&e| space.edge_offset[e] <= d && d < space.edge_offset[e + 1])
                    .unwrap();
                for t in 0..mesh.n_triangles() {
                    for eu in &mesh.triangle_edges[t] {
                        if eu.edge == own {
                            continue;
                        }
                        for k in 0..5 {
                            let s = (k as f64 + 0.5) / 5.0;
                            let trace = normal_trace(&mesh, &space, &coeffs, eu.edge, t, s);
                            assert!(
                                trace.abs() <= 1e-13,
                                "{} dof {d} leaks through edge {} ({trace:e})",
                                variant.name(),
                                eu.edge
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn normal_traces_agree_across_own_edge() {
        let (mesh, topo, _) = setup(3, 0.2, 7);
        for variant in [ReconVariant::Rt0, ReconVariant::Bdm1, ReconVariant::Bdm1Axi] {
            let space = build_hdiv_space(&mesh, &topo, variant).unwrap();
            for (e, &(t0, t1)) in mesh.edge_triangles.iter().enumerate() {
                let Some(t1) = t1 else { continue };
                for d in space.edge_offset[e]..space.edge_offset[e + 1] {
                    let mut coeffs = vec![0.0; space.n_dofs()];
                    coeffs[d] = 1.0;
                    for k in 0..5 {
                        let s = (k as f64 + 0.5) / 5.0;
                        let a = normal_trace(&mesh, &space, &coeffs, e, t0, s);
                        let b = normal_trace(&mesh, &space, &coeffs, e, t1, s);
                        assert!(
                            (a - b).abs() <= 1e-13,
                            "edge {e} dof {d}: {a:e} vs {b:e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn modified_basis_vanishes_at_axis_vertex_with_linear_trace() {
        let (mesh, topo, _) = setup(2, 0.0, 0);
        let space = build_hdiv_space(&mesh, &topo, ReconVariant::Rt0Axi).unwrap();
        for er in &topo.er_edges {
            let e = er.edge;
            let mut coeffs = vec![0.0; space.n_dofs()];
            coeffs[space.edge_offset[e]] = 1.0;
            let (t0, _) = mesh.edge_triangles[e];
            let he = HdivElement::new(&mesh, &space, t0);
            let lam_j = mesh.barycentric_coords(t0, mesh.vertices[er.axis_vertex]);
            let (at_j, _) = he.eval_field(&coeffs, lam_j);
            assert_relative_eq!(at_j.norm(), 0.0, epsilon = 1e-13);

            // Trace along the edge: 0 at the axis end, ±2/|E| at the other,
            // linear in between.
            let [a, _] = mesh.edges[e];
            let (s_axis, s_off) = if a == er.axis_vertex { (0.0, 1.0) } else { (1.0, 0.0) };
            let len = mesh.edge_length(e);
            let trace_axis = normal_trace(&mesh, &space, &coeffs, e, t0, s_axis);
            let trace_off = normal_trace(&mesh, &space, &coeffs, e, t0, s_off);
            let trace_mid = normal_trace(&mesh, &space, &coeffs, e, t0, 0.5);
            assert_relative_eq!(trace_axis, 0.0, epsilon = 1e-13);
            assert_relative_eq!(trace_off.abs(), 2.0 / len, epsilon = 1e-12);
            assert_relative_eq!(trace_mid, trace_off / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn axis_aware_bases_vanish_on_the_axis() {
        let (mesh, topo, _) = setup(3, 0.2, 9);
        for variant in [ReconVariant::Rt0Axi, ReconVariant::Bdm1Axi] {
            let space = build_hdiv_space(&mesh, &topo, variant).unwrap();
            for d in 0..space.n_dofs() {
                let mut coeffs = vec![0.0; space.n_dofs()];
                coeffs[d] = 1.0;
                for &e in &topo.axis_edges {
                    let (t0, _) = mesh.edge_triangles[e];
                    let he = HdivElement::new(&mesh, &space, t0);
                    let [a, b] = mesh.edges[e];
                    for k in 0..=5 {
                        let s = k as f64 / 5.0;
                        let p = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * s;
                        let (v, _) = he.eval_field(&coeffs, mesh.barycentric_coords(t0, p));
                        assert!(v.norm() <= 1e-13, "{} dof {d} on axis: {v:?}", variant.name());
                    }
                }
            }
        }
    }

    #[test]
    fn weighted_moments_of_reference_fields() {
        let (mesh, topo, _) = setup(1, 0.0, 0);
        let w = |p: Point2<f64>| Vector2::new(p.x, -2.0 * p.y);
        // Bottom edge (0,0)–(1,0): z = 0 kills the flux.
        let bottom = (0..mesh.n_edges())
            .find(|&e| {
                let [a, b] = mesh.edges[e];
                mesh.vertices[a].y == 0.0 && mesh.vertices[b].y == 0.0
            })
            .unwrap();
        let (m0, _) = weighted_edge_moments(&mesh, bottom, &w, 10).unwrap();
        assert_relative_eq!(m0, 0.0, epsilon = 1e-14);
        // Right edge r = 1: flux of (r·r) through n = (1,0) is 1 per unit z.
        let right = (0..mesh.n_edges())
            .find(|&e| {
                let [a, b] = mesh.edges[e];
                mesh.vertices[a].x == 1.0 && mesh.vertices[b].x == 1.0
            })
            .unwrap();
        let (m0, _) = weighted_edge_moments(&mesh, right, &w, 10).unwrap();
        assert_relative_eq!(m0, 1.0, epsilon = 1e-14);
        // Axis edge: r = 0 kills both moments.
        for &e in &topo.axis_edges {
            let (m0, m1) = weighted_edge_moments(&mesh, e, &w, 10).unwrap();
            assert_eq!((m0, m1), (0.0, 0.0));
        }
    }

    #[test]
    fn interpolation_matches_all_edge_fluxes() {
        let (mesh, topo, vel) = setup(3, 0.2, 13);
        let field = |p: Point2<f64>| {
            Vector2::new(p.x * p.x - 0.3 * p.y, 0.7 * p.x * p.y + p.y * p.y)
        };
        let coeffs = interpolate_field(&mesh, &vel, &field, 10).unwrap();
        for variant in [
            ReconVariant::Rt0,
            ReconVariant::Bdm1,
            ReconVariant::Rt0Axi,
            ReconVariant::Bdm1Axi,
        ] {
            let op = build_recon_operator(&mesh, &topo, &vel, variant).unwrap();
            let hdiv = op.apply(&coeffs);
            for e in 0..mesh.n_edges() {
                let (t0, _) = mesh.edge_triangles[e];
                let flux = edge_flux(&mesh, &op.space, &hdiv, e, t0);
                // Expected: the mean flux of r·v_h through the edge. The
                // P1+bubble restriction integrates exactly at order 6.
                let eb = crate::fe_spaces::ElementBasis::new(&mesh, &vel, t0).unwrap();
                let rule = edge_rule(6).unwrap();
                let [a, b] = mesh.edges[e];
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let n = mesh.edge_normal(e);
                let len = mesh.edge_length(e);
                let expected: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| {
                        let p = pa + (pb - pa) * s;
                        let v = eb.eval_field(&coeffs, mesh.barycentric_coords(t0, p));
                        w * len * p.x * v.dot(&n)
                    })
                    .sum();
                assert_relative_eq!(flux, expected, epsilon = 1e-12, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn divergence_free_input_gives_constant_reconstruction() {
        let (mesh, topo, vel) = setup(2, 0.0, 0);
        let w = |p: Point2<f64>| Vector2::new(p.x, -2.0 * p.y);
        let coeffs = interpolate_field(&mesh, &vel, &w, 10).unwrap();
        let op = build_recon_operator(&mesh, &topo, &vel, ReconVariant::Rt0).unwrap();
        let hdiv = op.apply(&coeffs);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for t in 0..mesh.n_triangles() {
            let he = HdivElement::new(&mesh, &op.space, t);
            let (v_ref, div) = he.eval_field(&hdiv, [1.0 / 3.0; 3]);
            assert_relative_eq!(div, 0.0, epsilon = 1e-12);
            for _ in 0..3 {
                let (a, b) = (unit(&mut rng), unit(&mut rng));
                let (x, y) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
                let lam = [1.0 - x - y, x, y];
                let (v, _) = he.eval_field(&hdiv, lam);
                assert_relative_eq!((v - v_ref).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn axis_aware_reconstruction_vanishes_on_axis_for_any_input() {
        let (mesh, topo, vel) = setup(4, 0.2, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let coeffs: Vec<f64> = (0..vel.n_dofs()).map(|_| 2.0 * unit(&mut rng) - 1.0).collect();
        let scale = 1.0 + coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for variant in [ReconVariant::Rt0Axi, ReconVariant::Bdm1Axi] {
            let op = build_recon_operator(&mesh, &topo, &vel, variant).unwrap();
            let hdiv = op.apply(&coeffs);
            for &e in &topo.axis_edges {
                let (t0, _) = mesh.edge_triangles[e];
                let he = HdivElement::new(&mesh, &op.space, t0);
                let [a, b] = mesh.edges[e];
                for k in 0..=5 {
                    let s = k as f64 / 5.0;
                    let p = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * s;
                    let (v, _) = he.eval_field(&hdiv, mesh.barycentric_coords(t0, p));
                    assert!(v.norm() <= 1e-12 * scale);
                }
            }
        }
        // The unmodified operator does not vanish there: witness (r, −2z).
        let w = |p: Point2<f64>| Vector2::new(p.x, -2.0 * p.y);
        let wc = interpolate_field(&mesh, &vel, &w, 10).unwrap();
        let op = build_recon_operator(&mesh, &topo, &vel, ReconVariant::Rt0).unwrap();
        let hdiv = op.apply(&wc);
        let mut max_on_axis = 0.0f64;
        for &e in &topo.axis_edges {
            let (t0, _) = mesh.edge_triangles[e];
            let he = HdivElement::new(&mesh, &op.space, t0);
            let [a, b] = mesh.edges[e];
            for k in 0..=5 {
                let s = k as f64 / 5.0;
                let p = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * s;
                let (v, _) = he.eval_field(&hdiv, mesh.barycentric_coords(t0, p));
                max_on_axis = max_on_axis.max(v.norm());
            }
        }
        assert!(max_on_axis > 1e-3, "expected a visible axis trace, got {max_on_axis:e}");
    }

    #[test]
    fn reconstruction_commutes_with_elementwise_mean_divergence() {
        let (mesh, topo, vel) = setup(4, 0.2, 19);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for variant in [
            ReconVariant::Rt0,
            ReconVariant::Bdm1,
            ReconVariant::Rt0Axi,
            ReconVariant::Bdm1Axi,
        ] {
            let op = build_recon_operator(&mesh, &topo, &vel, variant).unwrap();
            for _ in 0..25 {
                let coeffs: Vec<f64> =
                    (0..vel.n_dofs()).map(|_| 2.0 * unit(&mut rng) - 1.0).collect();
                for (div_recon, mean) in divergence_check(&mesh, &vel, &op, &coeffs).unwrap() {
                    let scale = 1.0 + div_recon.abs().max(mean.abs());
                    assert!(
                        (div_recon - mean).abs() <= 1e-11 * scale,
                        "{}: {div_recon:e} vs {mean:e}",
                        variant.name()
                    );
                }
            }
        }
    }

    #[test]
    fn operator_is_linear() {
        let (mesh, topo, vel) = setup(2, 0.2, 3);
        let op = build_recon_operator(&mesh, &topo, &vel, ReconVariant::Bdm1Axi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let v: Vec<f64> = (0..vel.n_dofs()).map(|_| unit(&mut rng)).collect();
        let w: Vec<f64> = (0..vel.n_dofs()).map(|_| unit(&mut rng)).collect();
        let (alpha, beta) = (2.5, -0.75);
        let mixed: Vec<f64> = v.iter().zip(&w).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = op.apply(&mixed);
        let rv = op.apply(&v);
        let rw = op.apply(&w);
        for ((l, a), b) in lhs.iter().zip(&rv).zip(&rw) {
            assert_relative_eq!(*l, alpha * a + beta * b, epsilon = 1e-14, max_relative = 1e-12);
        }
    }

    #[test]
    fn transpose_action_matches_matrix_transpose() {
        let (mesh, topo, vel) = setup(2, 0.2, 41);
        let op = build_recon_operator(&mesh, &topo, &vel, ReconVariant::Bdm1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let v: Vec<f64> = (0..vel.n_dofs()).map(|_| unit(&mut rng)).collect();
        let l: Vec<f64> = (0..op.space.n_dofs()).map(|_| unit(&mut rng)).collect();
        // ⟨R v, l⟩ = ⟨v, Rᵀ l⟩.
        let lhs: f64 = op.apply(&v).iter().zip(&l).map(|(a, b)| a * b).sum();
        let rhs: f64 = op.apply_transpose(&l).iter().zip(&v).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-13, max_relative = 1e-12);
    }

    #[test]
    fn type1_triangles_keep_standard_bases_off_the_axis() {
        let (mesh, topo, _) = setup(3, 0.0, 0);
        let space = build_hdiv_space(&mesh, &topo, ReconVariant::Rt0Axi).unwrap();
        for (t, class) in topo.triangle_class.iter().enumerate() {
            if *class != TriangleClass::Type1 {
                continue;
            }
            // Exactly one edge of a one-axis-vertex triangle has both
            // endpoints off the axis; it keeps the standard basis.
            let standard = mesh.triangle_edges[t]
                .iter()
                .filter(|eu| space.edge_kinds[eu.edge] == EdgeDofKind::MeanFlux)
                .count();
            let modified = mesh.triangle_edges[t]
                .iter()
                .filter(|eu| {
                    matches!(space.edge_kinds[eu.edge], EdgeDofKind::ModifiedMeanFlux { .. })
                })
                .count();
            assert_eq!((standard, modified), (1, 2));
        }
    }
}
