//! Triangulations of the meridian domain and their axis-related topology.
//!
//! The computational domain lives in the `(r, z)` half plane with `r ≥ 0`;
//! the boundary splits into the rotation axis `Γ_rot` (the part at `r = 0`)
//! and the remaining Dirichlet boundary `Γ`. Everything downstream — the
//! weighted forms, the modified reconstruction bases, the essential
//! constraints — keys off this classification, so it is computed once here
//! and kept exact: a vertex is on the axis if and only if its `r` coordinate
//! is exactly `0.0`. The mesh generator snaps axis vertices to exact zero and
//! jitter never moves them off the axis, so no tolerance is involved.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Smallest admissible interior angle (degrees) for generated meshes.
pub const MIN_ANGLE_DEG: f64 = 20.0;

/// One edge slot of a triangle: which global edge sits opposite the local
/// vertex, and whether the global edge direction (ascending vertex index)
/// agrees with the triangle's counter-clockwise traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeUse {
    pub edge: usize,
    /// `+1` if the global direction matches the CCW traversal, `-1` otherwise.
    pub sign: i8,
}

/// Conforming triangulation of the meridian domain.
///
/// Invariants (checked by [`validate`]):
/// * every triangle has positive signed area (counter-clockwise vertices);
/// * every interior edge is shared by exactly two triangles, every boundary
///   edge by exactly one;
/// * all vertex `r` coordinates are ≥ 0, with axis vertices at exactly 0;
/// * the two triangles of an interior edge traverse it in opposite
///   directions (their [`EdgeUse::sign`]s differ).
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Vertex coordinates `(r, z)`.
    pub vertices: Vec<Point2<f64>>,
    /// Vertex index triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Vertex index pairs with `edges[e][0] < edges[e][1]`.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle: the edge opposite local vertex `l` in slot `l`.
    pub triangle_edges: Vec<[EdgeUse; 3]>,
    /// Per edge: the one or two incident triangles.
    pub edge_triangles: Vec<(usize, Option<usize>)>,
    /// Per edge: whether it lies on the domain boundary.
    pub boundary_edge: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {tri} references vertex {vertex} but only {n_vertices} vertices exist")]
    DanglingVertex {
        tri: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("triangle {tri} repeats vertex {vertex}")]
    RepeatedVertex { tri: usize, vertex: usize },
    #[error("edge ({a}, {b}) is shared by more than two triangles")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("mesh has no triangles")]
    NoTriangles,
}

/// Mesh defects reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum MeshDefect {
    NonPositiveArea { tri: usize, area: f64 },
    NegativeRadius { vertex: usize, r: f64 },
    NonConformingEdge { edge: usize, incident: usize },
    InconsistentOrientation { edge: usize },
}

impl fmt::Display for MeshDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshDefect::NonPositiveArea { tri, area } => {
                write!(f, "triangle {tri} has non-positive signed area {area:e}")
            }
            MeshDefect::NegativeRadius { vertex, r } => {
                write!(f, "vertex {vertex} has negative radius {r:e}")
            }
            MeshDefect::NonConformingEdge { edge, incident } => {
                write!(f, "edge {edge} is incident to {incident} triangles")
            }
            MeshDefect::InconsistentOrientation { edge } => {
                write!(f, "edge {edge} is traversed in the same direction by both triangles")
            }
        }
    }
}

impl Mesh {
    /// Builds a mesh from vertices and triangles, deriving all edge topology.
    ///
    /// Edge indices are assigned in lexicographic order of the sorted vertex
    /// pairs, so meshes built from the same data are identical. Geometric
    /// soundness (positive areas, radii) is deliberately not enforced here;
    /// [`validate`] reports such defects.
    pub fn new(
        vertices: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Mesh, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::NoTriangles);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::DanglingVertex {
                        tri: t,
                        vertex: v,
                        n_vertices: vertices.len(),
                    });
                }
            }
            for l in 0..3 {
                if tri[l] == tri[(l + 1) % 3] {
                    return Err(MeshError::RepeatedVertex {
                        tri: t,
                        vertex: tri[l],
                    });
                }
            }
        }

        let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for tri in &triangles {
            for l in 0..3 {
                let a = tri[(l + 1) % 3];
                let b = tri[(l + 2) % 3];
                let key = [a.min(b), a.max(b)];
                let next = edge_ids.len();
                edge_ids.entry(key).or_insert(next);
            }
        }
        // Renumber lexicographically: BTreeMap iteration is already sorted.
        let mut edges = Vec::with_capacity(edge_ids.len());
        for (rank, (key, id)) in edge_ids.iter_mut().enumerate() {
            *id = rank;
            edges.push(*key);
        }

        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut incidence: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut uses = [EdgeUse { edge: 0, sign: 0 }; 3];
            for l in 0..3 {
                let a = tri[(l + 1) % 3];
                let b = tri[(l + 2) % 3];
                let edge = edge_ids[&[a.min(b), a.max(b)]];
                let sign = if a < b { 1 } else { -1 };
                uses[l] = EdgeUse { edge, sign };
                incidence[edge].push(t);
            }
            triangle_edges.push(uses);
        }

        let mut edge_triangles = Vec::with_capacity(edges.len());
        let mut boundary_edge = Vec::with_capacity(edges.len());
        for (e, inc) in incidence.iter().enumerate() {
            match inc.as_slice() {
                [t0] => {
                    edge_triangles.push((*t0, None));
                    boundary_edge.push(true);
                }
                [t0, t1] => {
                    edge_triangles.push((*t0, Some(*t1)));
                    boundary_edge.push(false);
                }
                _ => {
                    let [a, b] = edges[e];
                    return Err(MeshError::NonManifoldEdge { a, b });
                }
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_edge,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Corner points of triangle `t`.
    pub fn triangle_points(&self, t: usize) -> [Point2<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise vertices).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x))
    }

    /// Diameter of triangle `t` (its longest edge).
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        (p1 - p0)
            .norm()
            .max((p2 - p1).norm())
            .max((p0 - p2).norm())
    }

    /// Largest triangle diameter in the mesh.
    pub fn h_max(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.triangle_diameter(t))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle of triangle `t`, in degrees.
    pub fn min_angle_deg(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        let mut min = f64::INFINITY;
        for (a, b, c) in [(p0, p1, p2), (p1, p2, p0), (p2, p0, p1)] {
            let u = b - a;
            let v = c - a;
            let angle = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
            min = min.min(angle);
        }
        min.to_degrees()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        (self.vertices[b] - self.vertices[a]).norm()
    }

    /// Unit tangent of edge `e`, oriented from the smaller to the larger
    /// vertex index.
    pub fn edge_tangent(&self, e: usize) -> Vector2<f64> {
        let [a, b] = self.edges[e];
        (self.vertices[b] - self.vertices[a]).normalize()
    }

    /// Fixed global unit normal of edge `e`: the tangent rotated by -90°,
    /// `n_E = (t_z, -t_r)`.
    pub fn edge_normal(&self, e: usize) -> Vector2<f64> {
        let t = self.edge_tangent(e);
        Vector2::new(t.y, -t.x)
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Vector2<f64>; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let det = 2.0 * self.signed_area(t);
        let grad = |a: Point2<f64>, b: Point2<f64>| {
            // ∇λ of the vertex opposite the edge a→b.
            Vector2::new(a.y - b.y, b.x - a.x) / det
        };
        [grad(p1, p2), grad(p2, p0), grad(p0, p1)]
    }

    /// Barycentric coordinates of physical point `p` in triangle `t`.
    pub fn barycentric_coords(&self, t: usize, p: Point2<f64>) -> [f64; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let det = 2.0 * self.signed_area(t);
        let cross =
            |a: Vector2<f64>, b: Vector2<f64>| a.x * b.y - a.y * b.x;
        let l0 = cross(p1 - p, p2 - p) / det;
        let l1 = cross(p2 - p, p0 - p) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Local index (0..3) of global vertex `v` in triangle `t`.
    pub fn local_vertex_index(&self, t: usize, v: usize) -> Option<usize> {
        self.triangles[t].iter().position(|&w| w == v)
    }
}

/// Triangle classification by the number of vertices on the rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangleClass {
    /// No vertex on the axis.
    Interior,
    /// Exactly one vertex on the axis.
    Type1,
    /// Exactly two vertices on the axis (one edge in `Γ_rot`).
    Type2,
}

/// An edge with exactly one endpoint on the rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErEdge {
    pub edge: usize,
    /// The endpoint on the axis.
    pub axis_vertex: usize,
    /// The endpoint off the axis.
    pub off_axis_vertex: usize,
}

/// Axis-related topology of a classified mesh.
#[derive(Debug, Clone)]
pub struct AxisTopology {
    /// Vertices with `r == 0`, ascending.
    pub axis_vertices: Vec<usize>,
    /// Edges contained in `Γ_rot` (both endpoints on the axis).
    pub axis_edges: Vec<usize>,
    /// Boundary edges on `Γ = ∂Ω \ Γ_rot`.
    pub gamma_edges: Vec<usize>,
    /// Edges with exactly one endpoint on the axis.
    pub er_edges: Vec<ErEdge>,
    pub triangle_class: Vec<TriangleClass>,
    pub is_axis_vertex: Vec<bool>,
    pub is_axis_edge: Vec<bool>,
    pub is_gamma_edge: Vec<bool>,
    /// Per edge: position into `er_edges` if the edge has exactly one axis
    /// endpoint.
    pub er_index: Vec<Option<usize>>,
    /// Vertices incident to at least one `Γ` edge.
    pub is_gamma_vertex: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("triangle {tri} has all three vertices on the rotation axis")]
    DegenerateAxisTriangle { tri: usize },
}

/// Classifies vertices, edges and triangles of `mesh` relative to the
/// rotation axis. Membership is the exact comparison `r == 0`.
pub fn classify(mesh: &Mesh) -> Result<AxisTopology, ClassifyError> {
    let is_axis_vertex: Vec<bool> = mesh.vertices.iter().map(|p| p.x == 0.0).collect();
    let axis_vertices: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| is_axis_vertex[v])
        .collect();

    let mut axis_edges = Vec::new();
    let mut gamma_edges = Vec::new();
    let mut er_edges = Vec::new();
    let mut is_axis_edge = vec![false; mesh.n_edges()];
    let mut is_gamma_edge = vec![false; mesh.n_edges()];
    let mut er_index = vec![None; mesh.n_edges()];
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let on_axis = (is_axis_vertex[a], is_axis_vertex[b]);
        match on_axis {
            (true, true) => {
                axis_edges.push(e);
                is_axis_edge[e] = true;
            }
            (true, false) => {
                er_index[e] = Some(er_edges.len());
                er_edges.push(ErEdge {
                    edge: e,
                    axis_vertex: a,
                    off_axis_vertex: b,
                });
            }
            (false, true) => {
                er_index[e] = Some(er_edges.len());
                er_edges.push(ErEdge {
                    edge: e,
                    axis_vertex: b,
                    off_axis_vertex: a,
                });
            }
            (false, false) => {}
        }
        if mesh.boundary_edge[e] && !is_axis_edge[e] {
            gamma_edges.push(e);
            is_gamma_edge[e] = true;
        }
    }

    let mut triangle_class = Vec::with_capacity(mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let count = tri.iter().filter(|&&v| is_axis_vertex[v]).count();
        triangle_class.push(match count {
            0 => TriangleClass::Interior,
            1 => TriangleClass::Type1,
            2 => TriangleClass::Type2,
            _ => return Err(ClassifyError::DegenerateAxisTriangle { tri: t }),
        });
    }

    let mut is_gamma_vertex = vec![false; mesh.n_vertices()];
    for &e in &gamma_edges {
        let [a, b] = mesh.edges[e];
        is_gamma_vertex[a] = true;
        is_gamma_vertex[b] = true;
    }

    Ok(AxisTopology {
        axis_vertices,
        axis_edges,
        gamma_edges,
        er_edges,
        triangle_class,
        is_axis_vertex,
        is_axis_edge,
        is_gamma_edge,
        er_index,
        is_gamma_vertex,
    })
}

/// Reports all violated mesh invariants; an empty list means the mesh is
/// valid.
pub fn validate(mesh: &Mesh) -> Vec<MeshDefect> {
    let mut defects = Vec::new();
    for (v, p) in mesh.vertices.iter().enumerate() {
        if p.x < 0.0 {
            defects.push(MeshDefect::NegativeRadius { vertex: v, r: p.x });
        }
    }
    for t in 0..mesh.n_triangles() {
        let area = mesh.signed_area(t);
        if area <= 0.0 {
            defects.push(MeshDefect::NonPositiveArea { tri: t, area });
        }
    }
    for (e, &(t0, t1)) in mesh.edge_triangles.iter().enumerate() {
        let incident = 1 + t1.is_some() as usize;
        let expected = if mesh.boundary_edge[e] { 1 } else { 2 };
        if incident != expected {
            defects.push(MeshDefect::NonConformingEdge { edge: e, incident });
        }
        if let Some(t1) = t1 {
            let sign = |t: usize| {
                mesh.triangle_edges[t]
                    .iter()
                    .find(|u| u.edge == e)
                    .map(|u| u.sign)
                    .unwrap_or(0)
            };
            if sign(t0) * sign(t1) != -1 {
                defects.push(MeshDefect::InconsistentOrientation { edge: e });
            }
        }
    }
    defects
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("jitter {0} outside admissible range [0, 0.25]")]
    JitterOutOfRange(f64),
}

/// Uniform `[0, 1)` double from a seeded stream.
fn next_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generates a triangulation of the unit square `[0, 1]²` in `(r, z)` with
/// `n` subdivisions per side, each cell split by its lower-left→upper-right
/// diagonal.
///
/// With `jitter > 0`, vertices are displaced by uniform offsets of at most
/// `jitter / n` per coordinate: interior vertices in both coordinates,
/// non-corner boundary vertices only tangentially along their side (axis
/// vertices only in `z`), corners not at all. Displacements that would
/// produce a non-positive triangle area or an interior angle below
/// [`MIN_ANGLE_DEG`] are redrawn, so the mesh family stays shape-regular.
/// The result is deterministic for a fixed `seed`.
pub fn generate_unit_square_mesh(
    n: usize,
    jitter: f64,
    seed: u64,
) -> Result<Mesh, GenerateError> {
    if n == 0 {
        return Err(GenerateError::ZeroSubdivisions);
    }
    if !(0.0..=0.25).contains(&jitter) {
        return Err(GenerateError::JitterOutOfRange(jitter));
    }

    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Exact zero on the axis: 0/n is computed as 0.0.
            vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v01 = idx(i, j + 1);
            let v11 = idx(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    if jitter > 0.0 {
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                incident[v].push(t);
            }
        }
        let ok = |vertices: &[Point2<f64>], t: usize| {
            let [a, b, c] = triangles[t];
            let (p0, p1, p2) = (vertices[a], vertices[b], vertices[c]);
            let area = 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x));
            if area <= 0.0 {
                return false;
            }
            let mut min = f64::INFINITY;
            for (a, b, c) in [(p0, p1, p2), (p1, p2, p0), (p2, p0, p1)] {
                let u = b - a;
                let v = c - a;
                let angle = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                min = min.min(angle);
            }
            min.to_degrees() >= MIN_ANGLE_DEG
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = jitter / n as f64;
        for j in 0..=n {
            for i in 0..=n {
                let v = idx(i, j);
                let corner = (i == 0 || i == n) && (j == 0 || j == n);
                if corner {
                    continue;
                }
                // Tangential moves only: bottom/top sides move in r, the
                // right side and the axis move in z, interior moves in both.
                let (allow_r, allow_z) = if j == 0 || j == n {
                    (true, false)
                } else if i == 0 || i == n {
                    (false, true)
                } else {
                    (true, true)
                };
                let original = vertices[v];
                for _ in 0..64 {
                    let dr = if allow_r { amp * (2.0 * next_unit(&mut rng) - 1.0) } else { 0.0 };
                    let dz = if allow_z { amp * (2.0 * next_unit(&mut rng) - 1.0) } else { 0.0 };
                    vertices[v] = Point2::new(original.x + dr, original.y + dz);
                    if incident[v].iter().all(|&t| ok(&vertices, t)) {
                        break;
                    }
                    vertices[v] = original;
                }
            }
        }
    }

    Ok(Mesh::new(vertices, triangles).expect("generated mesh is well-formed"))
}

/// Serializes a mesh in the plain-text `axisym-mesh v1` format.
///
/// Coordinates are written with shortest round-trip precision, so
/// `load_mesh(save_mesh(m))` reproduces the vertex array bit for bit. Edges
/// and topology are derived on load, never serialized.
pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("axisym-mesh v1\n");
    let _ = writeln!(out, "vertices {}", mesh.n_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
    }
    let _ = writeln!(out, "triangles {}", mesh.n_triangles());
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

/// Parses the plain-text `axisym-mesh v1` format.
pub fn load_mesh(text: &str) -> Result<Mesh, ParseError> {
    let mut lines = text.lines().enumerate();
    let mut next_content = || -> Option<(usize, &str)> {
        for (i, raw) in lines.by_ref() {
            let s = raw.trim();
            if !s.is_empty() {
                return Some((i + 1, s));
            }
        }
        None
    };
    let err = |line: usize, msg: String| ParseError { line, msg };

    let (line, header) = next_content().ok_or_else(|| err(1, "empty file".into()))?;
    if header != "axisym-mesh v1" {
        return Err(err(line, format!("expected header 'axisym-mesh v1', found '{header}'")));
    }

    let (line, decl) = next_content().ok_or_else(|| err(line, "missing vertex section".into()))?;
    let n_vertices: usize = decl
        .strip_prefix("vertices ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(line, format!("expected 'vertices K', found '{decl}'")))?;

    let mut vertices = Vec::with_capacity(n_vertices);
    for k in 0..n_vertices {
        let (line, s) =
            next_content().ok_or_else(|| err(line, format!("expected {n_vertices} vertices, found {k}")))?;
        let mut it = s.split_whitespace();
        let parse = |tok: Option<&str>| tok.and_then(|t| t.parse::<f64>().ok());
        match (parse(it.next()), parse(it.next()), it.next()) {
            (Some(r), Some(z), None) => vertices.push(Point2::new(r, z)),
            _ => return Err(err(line, format!("vertex {k}: expected 'r z', found '{s}'"))),
        }
    }

    let (line, decl) = next_content().ok_or_else(|| err(line, "missing triangle section".into()))?;
    let n_triangles: usize = decl
        .strip_prefix("triangles ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(line, format!("expected 'triangles M', found '{decl}'")))?;
    if n_triangles == 0 {
        return Err(err(line, "no triangles".into()));
    }

    let mut triangles = Vec::with_capacity(n_triangles);
    for m in 0..n_triangles {
        let (line, s) =
            next_content().ok_or_else(|| err(line, format!("expected {n_triangles} triangles, found {m}")))?;
        let mut it = s.split_whitespace();
        let parse = |tok: Option<&str>| tok.and_then(|t| t.parse::<usize>().ok());
        let tri = match (parse(it.next()), parse(it.next()), parse(it.next()), it.next()) {
            (Some(i), Some(j), Some(k), None) => [i, j, k],
            _ => return Err(err(line, format!("triangle {m}: expected 'i j k', found '{s}'"))),
        };
        for &v in &tri {
            if v >= n_vertices {
                return Err(err(
                    line,
                    format!("triangle {m} references vertex {v} but only {n_vertices} vertices exist"),
                ));
            }
        }
        triangles.push(tri);
    }

    if let Some((line, s)) = next_content() {
        return Err(err(line, format!("unexpected trailing content '{s}'")));
    }

    Mesh::new(vertices, triangles).map_err(|e| err(0, e.to_string()))
}
