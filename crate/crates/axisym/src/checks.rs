//! Reusable numerical property checks over the H(div) bases and operators.
//!
//! Each check returns `Err` with a message naming the offending edge or
//! triangle so that a broken sign or component convention is localized
//! immediately. The `_with` variants take the basis evaluator as a
//! parameter; tests feed them deliberately broken evaluators to prove the
//! checks would catch such bugs.

use nalgebra::Vector2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fe_spaces::build_spaces;
use crate::hdiv_recon::{
    build_hdiv_space, build_recon_operator, divergence_check, EdgeDofKind, HdivBasisValue,
    HdivElement, HdivSpace, ReconVariant, EDGE_MOMENT_QORDER,
};
use crate::mesh::{AxisTopology, Mesh, TriangleClass};
use crate::quadrature::{edge_rule, oracle, triangle_rule, EdgeQuadRule};

/// Tolerance for unit/zero edge fluxes of the modified basis.
pub const FLUX_TOL: f64 = 1e-12;
/// Tolerance for pointwise basis values that must vanish.
pub const POINT_TOL: f64 = 1e-13;
/// Tolerance for normal-trace continuity samples.
pub const TRACE_TOL: f64 = 1e-13;
/// Relative tolerance for the commuting-property defect.
pub const COMMUTE_TOL: f64 = 1e-11;
/// Relative tolerance for reconstructed fields on the axis.
pub const AXIS_TOL: f64 = 1e-12;
/// Relative tolerance for monomial quadrature exactness.
pub const EXACTNESS_TOL: f64 = 1e-12;

pub type BasisEval<'a> = dyn Fn(usize, [f64; 3]) -> Vec<HdivBasisValue> + 'a;

fn edge_lambda(mesh: &Mesh, t: usize, e: usize, s: f64) -> [f64; 3] {
    let [a, b] = mesh.edges[e];
    let la = mesh.local_vertex_index(t, a).expect("edge endpoint in triangle");
    let lb = mesh.local_vertex_index(t, b).expect("edge endpoint in triangle");
    let mut lambda = [0.0; 3];
    lambda[la] = 1.0 - s;
    lambda[lb] = s;
    lambda
}

fn basis_value(values: &[HdivBasisValue], dof: usize) -> Vector2<f64> {
    values
        .iter()
        .find(|b| b.dof == dof)
        .map(|b| b.value)
        .unwrap_or_else(Vector2::zeros)
}

/// `∫_Ẽ ψ_dof·n ds` evaluated from triangle `t`.
fn edge_flux(
    mesh: &Mesh,
    rule: &EdgeQuadRule,
    e: usize,
    t: usize,
    dof: usize,
    eval: &BasisEval,
) -> f64 {
    let n = mesh.edge_normal(e);
    let len = mesh.edge_length(e);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| {
            let values = eval(t, edge_lambda(mesh, t, e, s));
            w * len * basis_value(&values, dof).dot(&n)
        })
        .sum()
}

/// Unit own-edge flux, zero foreign fluxes, and the axis-vertex zero of
/// every modified basis function `ψ_E^R`.
pub fn check_er_basis(mesh: &Mesh, topo: &AxisTopology) -> Result<(), String> {
    let space = build_hdiv_space(mesh, topo, ReconVariant::Rt0Axi).map_err(|e| e.to_string())?;
    let eval = |t: usize, lambda: [f64; 3]| -> Vec<HdivBasisValue> {
        HdivElement::new(mesh, &space, t).eval(lambda).collect()
    };
    check_er_basis_with(mesh, topo, &space, &eval)
}

pub fn check_er_basis_with(
    mesh: &Mesh,
    topo: &AxisTopology,
    space: &HdivSpace,
    eval: &BasisEval,
) -> Result<(), String> {
    let rule = edge_rule(EDGE_MOMENT_QORDER).map_err(|e| e.to_string())?;
    for er in &topo.er_edges {
        let e = er.edge;
        if !matches!(space.edge_kinds[e], EdgeDofKind::ModifiedMeanFlux { .. }) {
            return Err(format!(
                "edge {e}: expected the modified axis basis, found {:?}",
                space.edge_kinds[e]
            ));
        }
        let dof = space.edge_offset[e];
        let (t0, t1) = mesh.edge_triangles[e];
        for t in std::iter::once(t0).chain(t1) {
            let flux = edge_flux(mesh, &rule, e, t, dof, eval);
            if (flux - 1.0).abs() > FLUX_TOL {
                return Err(format!(
                    "(i) failed at edge {e} seen from triangle {t}: own flux {flux:+.6e} ≠ +1"
                ));
            }
            for eu in &mesh.triangle_edges[t] {
                if eu.edge == e {
                    continue;
                }
                let leak = edge_flux(mesh, &rule, eu.edge, t, dof, eval);
                if leak.abs() > FLUX_TOL {
                    return Err(format!(
                        "(ii) failed at edge {e}: flux {leak:.3e} through edge {} of triangle {t}",
                        eu.edge
                    ));
                }
            }
            let lj = mesh
                .local_vertex_index(t, er.axis_vertex)
                .expect("axis vertex in adjacent triangle");
            let mut lambda = [0.0; 3];
            lambda[lj] = 1.0;
            let at_axis = basis_value(&eval(t, lambda), dof).norm();
            if at_axis > POINT_TOL {
                return Err(format!(
                    "(iii) failed at edge {e}: |ψ(N_j)| = {at_axis:.3e} at axis vertex {}",
                    er.axis_vertex
                ));
            }
        }
    }
    Ok(())
}

/// Pointwise H(div) conformity: zero normal trace on foreign edges and
/// matching traces from both sides of each dof's own edge.
pub fn check_trace_continuity(
    mesh: &Mesh,
    topo: &AxisTopology,
    variant: ReconVariant,
) -> Result<(), String> {
    let space = build_hdiv_space(mesh, topo, variant).map_err(|e| e.to_string())?;
    let eval = |t: usize, lambda: [f64; 3]| -> Vec<HdivBasisValue> {
        HdivElement::new(mesh, &space, t).eval(lambda).collect()
    };
    check_trace_continuity_with(mesh, &space, &eval)
}

pub fn check_trace_continuity_with(
    mesh: &Mesh,
    space: &HdivSpace,
    eval: &BasisEval,
) -> Result<(), String> {
    let mut own_edge = vec![usize::MAX; space.n_dofs()];
    for e in 0..mesh.n_edges() {
        for d in space.edge_offset[e]..space.edge_offset[e + 1] {
            own_edge[d] = e;
        }
    }
    let samples = [1.0 / 6.0, 2.0 / 6.0, 0.5, 4.0 / 6.0, 5.0 / 6.0];
    for e in 0..mesh.n_edges() {
        let n = mesh.edge_normal(e);
        let (t0, t1) = mesh.edge_triangles[e];
        for &s in &samples {
            let left = eval(t0, edge_lambda(mesh, t0, e, s));
            let right = t1.map(|t| eval(t, edge_lambda(mesh, t, e, s)));
            for sides in std::iter::once((t0, &left)).chain(right.iter().map(|v| (t1.unwrap(), v)))
            {
                let (t, values) = sides;
                for b in values.iter() {
                    if own_edge[b.dof] != e {
                        let trace = b.value.dot(&n).abs();
                        if trace > TRACE_TOL * (1.0 + b.value.norm()) {
                            return Err(format!(
                                "foreign normal trace {trace:.3e} of dof {} (edge {}) on edge {e}, triangle {t}",
                                b.dof, own_edge[b.dof]
                            ));
                        }
                    }
                }
            }
            if let (Some(right), Some(t1)) = (&right, t1) {
                for d in space.edge_offset[e]..space.edge_offset[e + 1] {
                    let ta = basis_value(&left, d).dot(&n);
                    let tb = basis_value(right, d).dot(&n);
                    if (ta - tb).abs() > TRACE_TOL * (1.0 + ta.abs().max(tb.abs())) {
                        return Err(format!(
                            "own-edge trace mismatch of dof {d} on edge {e}: {ta:.6e} (triangle {}) vs {tb:.6e} (triangle {t1})",
                            mesh.edge_triangles[e].0
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// `Π(r v_h)` of an axis-aware variant vanishes on `Γ_rot` for arbitrary
/// coefficient vectors.
pub fn check_axis_vanishing(
    mesh: &Mesh,
    topo: &AxisTopology,
    variant: ReconVariant,
    seed: u64,
) -> Result<(), String> {
    assert!(variant.is_axis_aware());
    let (vel, _) = build_spaces(mesh, topo);
    let op = build_recon_operator(mesh, topo, &vel, variant).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..vel.n_dofs()).map(|_| 2.0 * unit(&mut rng) - 1.0).collect();
    let coeffs = op.apply(&v);

    let samples = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut scale = 0.0f64;
    for t in 0..mesh.n_triangles() {
        let he = HdivElement::new(mesh, &op.space, t);
        for eu in &mesh.triangle_edges[t] {
            for &s in &samples {
                let lambda = edge_lambda(mesh, t, eu.edge, s);
                scale = scale.max(he.eval_field(&coeffs, lambda).0.norm());
            }
        }
    }
    for &e in &topo.axis_edges {
        let (t0, t1) = mesh.edge_triangles[e];
        for t in std::iter::once(t0).chain(t1) {
            let he = HdivElement::new(mesh, &op.space, t);
            for &s in &samples {
                let lambda = edge_lambda(mesh, t, e, s);
                let v = he.eval_field(&coeffs, lambda).0.norm();
                if v > AXIS_TOL * scale {
                    return Err(format!(
                        "axis edge {e}: |Π(r v_h)| = {v:.3e} exceeds {AXIS_TOL:.0e}·{scale:.3e}"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Commuting property `div Π(r v_h) = π₀ div(r v_h)` on random inputs.
pub fn check_commuting(
    mesh: &Mesh,
    topo: &AxisTopology,
    variant: ReconVariant,
    n_vectors: usize,
    seed: u64,
) -> Result<(), String> {
    let (vel, _) = build_spaces(mesh, topo);
    let op = build_recon_operator(mesh, topo, &vel, variant).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_vectors {
        let v: Vec<f64> = (0..vel.n_dofs()).map(|_| 2.0 * unit(&mut rng) - 1.0).collect();
        let rows = divergence_check(mesh, &vel, &op, &v).map_err(|e| e.to_string())?;
        let scale = rows
            .iter()
            .map(|&(a, b)| a.abs().max(b.abs()))
            .fold(1.0, f64::max);
        for (t, &(div_recon, div_proj)) in rows.iter().enumerate() {
            let defect = (div_recon - div_proj).abs();
            if defect > COMMUTE_TOL * scale {
                return Err(format!(
                    "commuting defect {defect:.3e} on triangle {t} (vector {k}, scale {scale:.3e})"
                ));
            }
        }
    }
    Ok(())
}

/// Maxima of `‖ψ‖_{L²₋₁(T)}·h_T^{1/2}` for the three basis families whose
/// weighted norms the refinement bound controls: the modified functions on
/// `E_R` edges, and the standard mean-flux / odd-moment functions on the
/// away edge of triangles touching the axis in one vertex.
#[derive(Debug, Clone, Copy)]
pub struct ScaledBasisNorms {
    pub modified: f64,
    pub away_mean_flux: f64,
    pub away_moment: f64,
}

pub fn scaled_basis_norms(
    mesh: &Mesh,
    topo: &AxisTopology,
    qorder: usize,
) -> Result<ScaledBasisNorms, String> {
    let space = build_hdiv_space(mesh, topo, ReconVariant::Bdm1Axi).map_err(|e| e.to_string())?;
    let rule = triangle_rule(qorder).map_err(|e| e.to_string())?;
    let scaled = |t: usize, dof: usize| -> f64 {
        let he = HdivElement::new(mesh, &space, t);
        let pts = mesh.triangle_points(t);
        let area = mesh.signed_area(t);
        let mut acc = 0.0;
        for (xy, &w) in rule.points.iter().zip(&rule.weights) {
            let lambda = [1.0 - xy[0] - xy[1], xy[0], xy[1]];
            let r = lambda[0] * pts[0].x + lambda[1] * pts[1].x + lambda[2] * pts[2].x;
            let value = basis_value(&he.eval(lambda).collect::<Vec<_>>(), dof);
            acc += 2.0 * area * w * value.norm_squared() / r;
        }
        (acc * mesh.triangle_diameter(t)).sqrt()
    };

    let mut norms = ScaledBasisNorms { modified: 0.0, away_mean_flux: 0.0, away_moment: 0.0 };
    for er in &topo.er_edges {
        let dof = space.edge_offset[er.edge];
        let (t0, t1) = mesh.edge_triangles[er.edge];
        for t in std::iter::once(t0).chain(t1) {
            norms.modified = norms.modified.max(scaled(t, dof));
        }
    }
    for t in 0..mesh.n_triangles() {
        if topo.triangle_class[t] != TriangleClass::Type1 {
            continue;
        }
        for eu in &mesh.triangle_edges[t] {
            if let EdgeDofKind::MeanFluxAndMoment = space.edge_kinds[eu.edge] {
                let offset = space.edge_offset[eu.edge];
                norms.away_mean_flux = norms.away_mean_flux.max(scaled(t, offset));
                norms.away_moment = norms.away_moment.max(scaled(t, offset + 1));
            }
        }
    }
    Ok(norms)
}

/// Triangle and edge rules reproduce every monomial integral up to their
/// nominal order against the closed-form reference values.
pub fn check_quadrature_exactness(max_order: usize) -> Result<(), String> {
    for order in 1..=max_order {
        let rule = triangle_rule(order).map_err(|e| e.to_string())?;
        for total in 0..=order {
            for a in 0..=total {
                let b = total - a;
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(xy, &w)| w * xy[0].powi(a as i32) * xy[1].powi(b as i32))
                    .sum();
                let exact = oracle::triangle_monomial_integral(a, b);
                if ((approx - exact) / exact).abs() > EXACTNESS_TOL {
                    return Err(format!(
                        "triangle rule of order {order} misses x^{a} y^{b}: {approx:.15e} vs {exact:.15e}"
                    ));
                }
            }
        }
        let erule = edge_rule(order).map_err(|e| e.to_string())?;
        for a in 0..=order {
            let approx: f64 = erule
                .points
                .iter()
                .zip(&erule.weights)
                .map(|(&s, &w)| w * s.powi(a as i32))
                .sum();
            let exact = oracle::edge_monomial_integral(a);
            if ((approx - exact) / exact).abs() > EXACTNESS_TOL {
                return Err(format!(
                    "edge rule of order {order} misses s^{a}: {approx:.15e} vs {exact:.15e}"
                ));
            }
        }
    }
    Ok(())
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{classify, generate_unit_square_mesh};

    fn family() -> Vec<(Mesh, AxisTopology)> {
        [(2, 0.0, 0), (4, 0.0, 0), (2, 0.2, 3), (4, 0.2, 7)]
            .into_iter()
            .map(|(n, jitter, seed)| {
                let mesh = generate_unit_square_mesh(n, jitter, seed).unwrap();
                let topo = classify(&mesh).unwrap();
                (mesh, topo)
            })
            .collect()
    }

    #[test]
    fn modified_basis_checks_pass_on_the_mesh_family() {
        for (mesh, topo) in family() {
            check_er_basis(&mesh, &topo).unwrap();
        }
    }

    #[test]
    fn trace_continuity_holds_for_all_variants() {
        for (mesh, topo) in family() {
            for variant in [
                ReconVariant::Rt0,
                ReconVariant::Bdm1,
                ReconVariant::Rt0Axi,
                ReconVariant::Bdm1Axi,
            ] {
                check_trace_continuity(&mesh, &topo, variant).unwrap();
            }
        }
    }

    #[test]
    fn axis_vanishing_and_commuting_hold() {
        for (mesh, topo) in family() {
            for variant in [ReconVariant::Rt0Axi, ReconVariant::Bdm1Axi] {
                check_axis_vanishing(&mesh, &topo, variant, 11).unwrap();
            }
            for variant in [
                ReconVariant::Rt0,
                ReconVariant::Bdm1,
                ReconVariant::Rt0Axi,
                ReconVariant::Bdm1Axi,
            ] {
                check_commuting(&mesh, &topo, variant, 10, 13).unwrap();
            }
        }
    }

    #[test]
    fn quadrature_exactness_holds_through_moderate_orders() {
        check_quadrature_exactness(12).unwrap();
    }

    #[test]
    fn scaled_norms_stay_bounded_under_refinement() {
        let coarse = generate_unit_square_mesh(4, 0.0, 0).unwrap();
        let fine = generate_unit_square_mesh(8, 0.0, 0).unwrap();
        let nc = scaled_basis_norms(&coarse, &classify(&coarse).unwrap(), 10).unwrap();
        let nf = scaled_basis_norms(&fine, &classify(&fine).unwrap(), 10).unwrap();
        for (a, b) in [
            (nc.modified, nf.modified),
            (nc.away_mean_flux, nf.away_mean_flux),
            (nc.away_moment, nf.away_moment),
        ] {
            assert!(a > 0.0 && b > 0.0);
            let ratio = (a / b).max(b / a);
            assert!(ratio <= 4.0, "scaled norm drifted: {a:e} vs {b:e}");
        }
    }

    #[test]
    fn sign_flip_in_the_modified_basis_is_caught_by_name() {
        let mesh = generate_unit_square_mesh(2, 0.0, 0).unwrap();
        let topo = classify(&mesh).unwrap();
        let space = build_hdiv_space(&mesh, &topo, ReconVariant::Rt0Axi).unwrap();
        let broken_edge = topo.er_edges[1].edge;
        let broken_dof = space.edge_offset[broken_edge];
        let eval = |t: usize, lambda: [f64; 3]| -> Vec<HdivBasisValue> {
            HdivElement::new(&mesh, &space, t)
                .eval(lambda)
                .map(|mut b| {
                    if b.dof == broken_dof {
                        b.value = -b.value;
                        b.div = -b.div;
                    }
                    b
                })
                .collect()
        };
        let err = check_er_basis_with(&mesh, &topo, &space, &eval).unwrap_err();
        assert!(err.contains("(i)"), "wrong property blamed: {err}");
        assert!(err.contains(&format!("edge {broken_edge}")), "wrong edge named: {err}");
    }

    #[test]
    fn wrong_curl_convention_breaks_trace_continuity() {
        // A curl with the minus sign dropped, (∂_z φ, +∂_r φ), destroys the
        // identity curl λ·n = ∇λ·t that conformity rests on.
        let mesh = generate_unit_square_mesh(2, 0.2, 5).unwrap();
        let topo = classify(&mesh).unwrap();
        let space = build_hdiv_space(&mesh, &topo, ReconVariant::Rt0).unwrap();
        let eval = |t: usize, lambda: [f64; 3]| -> Vec<HdivBasisValue> {
            let grads = mesh.barycentric_gradients(t);
            let bad_curl: Vec<Vector2<f64>> =
                grads.iter().map(|g| Vector2::new(g.y, g.x)).collect();
            let mut out = Vec::new();
            for eu in &mesh.triangle_edges[t] {
                if space.edge_kinds[eu.edge] != EdgeDofKind::MeanFlux {
                    continue;
                }
                let [ga, gb] = mesh.edges[eu.edge];
                let a = mesh.local_vertex_index(t, ga).unwrap();
                let b = mesh.local_vertex_index(t, gb).unwrap();
                out.push(HdivBasisValue {
                    dof: space.edge_offset[eu.edge],
                    value: bad_curl[b] * lambda[a] - bad_curl[a] * lambda[b],
                    div: 0.0,
                });
            }
            out
        };
        let err = check_trace_continuity_with(&mesh, &space, &eval).unwrap_err();
        assert!(err.contains("edge"), "unexpected message: {err}");
    }
}
