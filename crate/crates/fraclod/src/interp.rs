//! Fracture-aware quasi-interpolation of Scott-Zhang type.
//!
//! Nodal variables average dual-basis integrals over integration domains:
//! whole coarse triangles away from the fracture, and fracture traces
//! Gamma_T for nodes whose trace domains are well conditioned. A computable
//! indicator (a scaled dual-basis norm) decides, per node and adjacent
//! triangle, whether the trace domain is used; the threshold Sigma tunes
//! how aggressively trace domains are selected.

use crate::linalg::dense::{jacobi_eigen, DenseMatrix};
use crate::linalg::{DenseVector, SparseMatrix};
use crate::mesh::{barycentric, FractureTrace, MeshHierarchy, Point2, TriMesh};
use crate::{Error, Result};

/// One-dimensional integration geometry: straight segment or circular arc.
#[derive(Debug, Clone, Copy)]
pub enum CurvePiece {
    Segment {
        a: Point2,
        b: Point2,
    },
    /// Counterclockwise arc from angle `theta0` to `theta1`.
    Arc {
        center: Point2,
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
}

impl CurvePiece {
    pub fn length(&self) -> f64 {
        match self {
            CurvePiece::Segment { a, b } => a.dist(*b),
            CurvePiece::Arc {
                radius,
                theta0,
                theta1,
                ..
            } => radius * (theta1 - theta0).abs(),
        }
    }

    /// Point at normalized parameter u in [0, 1] (uniform in arclength).
    pub fn point_at(&self, u: f64) -> Point2 {
        match self {
            CurvePiece::Segment { a, b } => a.lerp(*b, u),
            CurvePiece::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let theta = theta0 + u * (theta1 - theta0);
                Point2::new(
                    center.x + radius * theta.cos(),
                    center.y + radius * theta.sin(),
                )
            }
        }
    }
}

/// Integration domain for a dual basis: a coarse triangle or a curve
/// inside it. Carries the triangle vertices for barycentric evaluation.
#[derive(Debug, Clone)]
pub enum IntegrationDomain {
    Triangle {
        verts: [Point2; 3],
    },
    Curve {
        verts: [Point2; 3],
        pieces: Vec<CurvePiece>,
    },
}

impl IntegrationDomain {
    pub fn measure(&self) -> f64 {
        match self {
            IntegrationDomain::Triangle { verts } => {
                0.5 * crate::mesh::signed_area2(verts[0], verts[1], verts[2])
            }
            IntegrationDomain::Curve { pieces, .. } => pieces.iter().map(|p| p.length()).sum(),
        }
    }
}

const QUADRATURE_TOL: f64 = 1e-12;

/// 4-point Gauss-Legendre nodes/weights on [0, 1].
const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.17392742256872692),
    (0.33000947820757187, 0.32607257743127305),
    (0.669_990_521_792_428_1, 0.32607257743127305),
    (0.930_568_155_797_026_2, 0.17392742256872692),
];

/// Adaptive integration of all six products lambda_i lambda_j over a piece
/// to absolute tolerance `tol` per entry.
fn integrate_products(verts: [Point2; 3], piece: &CurvePiece, tol: f64) -> [f64; 6] {
    fn eval(verts: [Point2; 3], piece: &CurvePiece, u0: f64, u1: f64) -> [f64; 6] {
        let mut acc = [0.0; 6];
        let len = piece.length() * (u1 - u0);
        for &(x, w) in &GL4 {
            let p = piece.point_at(u0 + x * (u1 - u0));
            let l = barycentric(p, verts);
            let mut k = 0;
            for i in 0..3 {
                for j in i..3 {
                    acc[k] += w * len * l[i] * l[j];
                    k += 1;
                }
            }
        }
        acc
    }
    fn recurse(
        verts: [Point2; 3],
        piece: &CurvePiece,
        u0: f64,
        u1: f64,
        whole: [f64; 6],
        tol: f64,
        depth: usize,
    ) -> [f64; 6] {
        let mid = 0.5 * (u0 + u1);
        let left = eval(verts, piece, u0, mid);
        let right = eval(verts, piece, mid, u1);
        let mut diff = 0.0f64;
        for k in 0..6 {
            diff = diff.max((left[k] + right[k] - whole[k]).abs());
        }
        if diff <= tol || depth >= 30 {
            let mut out = [0.0; 6];
            for k in 0..6 {
                out[k] = left[k] + right[k];
            }
            return out;
        }
        let l = recurse(verts, piece, u0, mid, left, 0.5 * tol, depth + 1);
        let r = recurse(verts, piece, mid, u1, right, 0.5 * tol, depth + 1);
        let mut out = [0.0; 6];
        for k in 0..6 {
            out[k] = l[k] + r[k];
        }
        out
    }
    let whole = eval(verts, piece, 0.0, 1.0);
    recurse(verts, piece, 0.0, 1.0, whole, tol, 0)
}

/// Mass matrix of the three active coarse hats over the domain: exact for
/// triangles and straight pieces, adaptive Gauss-Legendre (1e-12 absolute)
/// for arcs.
pub fn sigma_mass_matrix(domain: &IntegrationDomain) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(3, 3);
    match domain {
        IntegrationDomain::Triangle { verts } => {
            let area = 0.5 * crate::mesh::signed_area2(verts[0], verts[1], verts[2]);
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
            }
        }
        IntegrationDomain::Curve { verts, pieces } => {
            for piece in pieces {
                let acc = integrate_products(*verts, piece, QUADRATURE_TOL);
                let mut k = 0;
                for i in 0..3 {
                    for j in i..3 {
                        m[(i, j)] += acc[k];
                        if i != j {
                            m[(j, i)] += acc[k];
                        }
                        k += 1;
                    }
                }
            }
        }
    }
    m
}

/// Solvability of the dual-basis system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualBasisStatus {
    Unique,
    /// Rank-deficient but consistent; the minimum-norm solution is
    /// returned (all solutions share the same L2 norm).
    MinNorm,
    NoSolution,
}

/// Dual basis psi_{N, sigma} expanded in the three active coarse hats.
#[derive(Debug, Clone)]
pub struct DualBasis {
    pub coeffs: [f64; 3],
    pub norm: f64,
    pub status: DualBasisStatus,
}

const RANK_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-8;

/// Solves the biorthogonality system M c = e_node over the domain.
///
/// Rank-deficient systems are resolved by the eigenvalue pseudo-inverse
/// (threshold 1e-12 of the largest eigenvalue). The system is
/// inconsistent, and the norm infinite, when e_node has a component in
/// the discarded eigenspace; any two solutions of a consistent deficient
/// system share the same norm, so the minimum-norm one is returned.
pub fn dual_basis(domain: &IntegrationDomain, local_node: usize) -> DualBasis {
    let m = sigma_mass_matrix(domain);
    dual_basis_from_mass(&m, local_node)
}

/// Dual basis from a precomputed 3x3 sigma mass matrix.
pub fn dual_basis_from_mass(m: &DenseMatrix, local_node: usize) -> DualBasis {
    let no_solution = DualBasis {
        coeffs: [0.0; 3],
        norm: f64::INFINITY,
        status: DualBasisStatus::NoSolution,
    };
    let (vals, q) = jacobi_eigen(m);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return no_solution;
    }
    let mut coeffs = [0.0; 3];
    let mut norm_sq = 0.0;
    let mut rank = 0;
    for k in 0..3 {
        let component = q[(local_node, k)];
        if vals[k].abs() > RANK_TOL * scale {
            rank += 1;
            // c += (q_k' e_N / lambda_k) q_k
            let proj = component / vals[k];
            for i in 0..3 {
                coeffs[i] += proj * q[(i, k)];
            }
            norm_sq += component * component / vals[k];
        } else if component.abs() > CONSISTENCY_TOL {
            // e_N leaves the numerical range of M.
            return no_solution;
        }
    }
    DualBasis {
        coeffs,
        norm: norm_sq.max(0.0).sqrt(),
        status: if rank == 3 {
            DualBasisStatus::Unique
        } else {
            DualBasisStatus::MinNorm
        },
    }
}

/// Trace pieces of the closed triangle: the pieces the trace assigns to
/// `tri` plus pieces assigned to vertex-sharing neighbors that lie on the
/// closed triangle (shared-edge pieces are visible from both sides).
pub fn closed_trace_pieces(
    mesh: &TriMesh,
    trace: &FractureTrace,
    tri: usize,
) -> Vec<crate::mesh::TraceSegment> {
    let mut pieces: Vec<crate::mesh::TraceSegment> = trace.segments(tri).to_vec();
    let verts = mesh.tri_vertices(tri);
    let tol = 1e-10 * mesh.tri_diameter(tri);
    let inside = |p: crate::mesh::Point2| {
        let b = crate::mesh::barycentric(p, verts);
        b.iter().all(|&x| x >= -tol)
    };
    let mut neighbors: Vec<usize> = mesh
        .triangle(tri)
        .iter()
        .flat_map(|&v| mesh.tris_of_vertex(v).iter().copied())
        .filter(|&t| t != tri)
        .collect();
    neighbors.sort_unstable();
    neighbors.dedup();
    for t in neighbors {
        for seg in trace.segments(t) {
            if inside(seg.start) && inside(seg.end) && inside(seg.midpoint()) {
                pieces.push(seg.clone());
            }
        }
    }
    pieces
}

/// Trace of a closed coarse triangle as an integration domain, or None
/// when the trace has no measure.
pub fn trace_domain(
    mesh: &TriMesh,
    trace: &FractureTrace,
    tri: usize,
) -> Option<IntegrationDomain> {
    let segs = closed_trace_pieces(mesh, trace, tri);
    if segs.is_empty() {
        return None;
    }
    let pieces: Vec<CurvePiece> = segs
        .iter()
        .map(|s| CurvePiece::Segment {
            a: s.start,
            b: s.end,
        })
        .collect();
    let total: f64 = pieces.iter().map(|p| p.length()).sum();
    if total <= 1e-14 * mesh.tri_diameter(tri) {
        return None;
    }
    Some(IntegrationDomain::Curve {
        verts: mesh.tri_vertices(tri),
        pieces,
    })
}

/// Degeneracy indicator s_{N,T} = diam(T)^(1/2) |psi_{N, Gamma_T}|:
/// +infinity when the trace is empty or the dual-basis system has no
/// solution.
pub fn indicator(mesh: &TriMesh, trace: &FractureTrace, node: usize, tri: usize) -> f64 {
    let Some(domain) = trace_domain(mesh, trace, tri) else {
        return f64::INFINITY;
    };
    let verts = mesh.triangle(tri);
    let Some(local) = verts.iter().position(|&v| v == node) else {
        return f64::INFINITY;
    };
    let basis = dual_basis(&domain, local);
    match basis.status {
        DualBasisStatus::NoSolution => f64::INFINITY,
        _ => mesh.tri_diameter(tri).sqrt() * basis.norm,
    }
}

/// Interpolation variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Trace integration domains near the fracture, chosen by indicator.
    FractureAware,
    /// Standard element-based nodal variables everywhere.
    ElementBased,
}

/// Per-node selected trace triangles T^Gamma(N) plus classification data.
#[derive(Debug, Clone)]
pub struct NodeSets {
    pub variant: Variant,
    pub sigma: f64,
    /// Indexed by vertex; sorted triangle lists, empty for nodes using
    /// triangle domains (and for all nodes in the element-based variant).
    pub t_gamma: Vec<Vec<usize>>,
}

impl NodeSets {
    pub fn is_interface_node(&self, vertex: usize) -> bool {
        !self.t_gamma[vertex].is_empty()
    }

    pub fn interface_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.t_gamma.len()).filter(|&v| !self.t_gamma[v].is_empty())
    }
}

/// Classifies free coarse nodes: fracture-aware selection keeps adjacent
/// triangles with indicator below the threshold; the element-based variant
/// selects none.
pub fn classify(
    mesh: &TriMesh,
    trace: &FractureTrace,
    sigma: f64,
    variant: Variant,
) -> Result<NodeSets> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "classification threshold must be positive, got {sigma}"
        )));
    }
    let mut t_gamma = vec![Vec::new(); mesh.num_vertices()];
    if variant == Variant::FractureAware {
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary_vertex(v) {
                continue;
            }
            for &t in mesh.tris_of_vertex(v) {
                if indicator(mesh, trace, v, t) < sigma {
                    t_gamma[v].push(t);
                }
            }
        }
    }
    Ok(NodeSets {
        variant,
        sigma,
        t_gamma,
    })
}

/// Edge-aligned selection rule: adjacent triangles with a full fracture
/// edge containing the node (both neighbors of an on-edge piece). Only
/// valid when the trace is a union of edges; used to cross-check the
/// indicator classification.
pub fn lemma_edge_sets(mesh: &TriMesh, trace: &FractureTrace) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        for seg in closed_trace_pieces(mesh, trace, t) {
            if let Some((a, b)) = crate::mesh::segment_edge_vertices(mesh, t, &seg) {
                for local in [a, b] {
                    let v = mesh.triangle(t)[local];
                    if !mesh.is_boundary_vertex(v) && !sets[v].contains(&t) {
                        sets[v].push(t);
                    }
                }
            }
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

/// Sparse interpolation from fine free dofs to coarse nodal values, with
/// the prolongation of coarse hats to fine dofs.
#[derive(Debug, Clone)]
pub struct InterpolationOperator {
    /// Rows: free coarse nodes; columns: free fine dofs.
    pub matrix: SparseMatrix,
    /// Rows: free fine dofs; columns: free coarse nodes.
    pub prolongation: SparseMatrix,
    pub coarse_dofs: crate::assembly::DofMap,
    pub fine_dofs: crate::assembly::DofMap,
    pub variant: Variant,
    pub sigma: f64,
}

impl InterpolationOperator {
    /// Nodal values of the interpolant of a fine function.
    pub fn apply(&self, fine: &DenseVector) -> Result<DenseVector> {
        crate::linalg::spmv(&self.matrix, fine)
    }

    /// Fine representation of a coarse function.
    pub fn prolong(&self, coarse: &DenseVector) -> Result<DenseVector> {
        crate::linalg::spmv(&self.prolongation, coarse)
    }
}

/// Assembles the interpolation operator between two hierarchy levels.
///
/// Trace rows integrate the dual basis of the coarse trace against fine
/// hats over the fine trace pieces (grouped by the owning coarse element
/// through arclength); triangle rows use the exact midpoint rule per fine
/// triangle. Fixed coarse nodes carry no row.
pub fn assemble_interpolation(
    hier: &MeshHierarchy,
    coarse_level: usize,
    fine_level: usize,
    nodesets: &NodeSets,
    coarse_trace: Option<&FractureTrace>,
    fine_trace: Option<&FractureTrace>,
) -> Result<InterpolationOperator> {
    let coarse = hier.level(coarse_level);
    let fine = hier.level(fine_level);
    let coarse_dofs = crate::assembly::DofMap::new(coarse);
    let fine_dofs = crate::assembly::DofMap::new(fine);

    // Dual bases over trace domains, per selected (node, triangle) pair:
    // store per coarse triangle the dual coefficients for each local node
    // that selected it.
    let mut trace_dual: std::collections::BTreeMap<(usize, usize), [f64; 3]> =
        std::collections::BTreeMap::new();
    if nodesets.variant == Variant::FractureAware {
        let ct = coarse_trace.ok_or_else(|| {
            Error::InvalidParameter("fracture-aware interpolation needs a coarse trace".into())
        })?;
        for v in 0..coarse.num_vertices() {
            for &t in &nodesets.t_gamma[v] {
                let domain = trace_domain(coarse, ct, t).ok_or(Error::NoDualBasis {
                    node: v,
                    element: t,
                })?;
                let local = coarse.triangle(t).iter().position(|&w| w == v).unwrap();
                let basis = dual_basis(&domain, local);
                if basis.status == DualBasisStatus::NoSolution {
                    return Err(Error::NoDualBasis {
                        node: v,
                        element: t,
                    });
                }
                trace_dual.insert((t, local), basis.coeffs);
            }
        }
    }

    // Triangle-domain dual bases are universal: compute per coarse
    // triangle once (exact closed form through the generic path).
    let mut tri_dual: Vec<[[f64; 3]; 3]> = Vec::with_capacity(coarse.num_triangles());
    for t in 0..coarse.num_triangles() {
        let domain = IntegrationDomain::Triangle {
            verts: coarse.tri_vertices(t),
        };
        let m = sigma_mass_matrix(&domain);
        let mut all = [[0.0; 3]; 3];
        for local in 0..3 {
            let b = dual_basis_from_mass(&m, local);
            all[local] = b.coeffs;
        }
        tri_dual.push(all);
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();

    // Trace rows: per selected (node, coarse element) pair, integrate the
    // dual basis against fine hats over the closed trace of the element.
    // Fine pieces covering each coarse piece are found by arclength, and
    // shared-edge pieces legitimately contribute to both neighbors.
    if nodesets.variant == Variant::FractureAware {
        let (ct, ft) = (
            coarse_trace.unwrap(),
            fine_trace.ok_or_else(|| {
                Error::InvalidParameter("fracture-aware interpolation needs a fine trace".into())
            })?,
        );
        let card: Vec<usize> = (0..coarse.num_vertices())
            .map(|v| nodesets.t_gamma[v].len())
            .collect();
        let gauss = {
            let d = 0.5 / 3.0f64.sqrt();
            [(0.5 - d, 0.5), (0.5 + d, 0.5)]
        };
        for tc in 0..coarse.num_triangles() {
            let selected: Vec<usize> = (0..3)
                .filter(|&local| trace_dual.contains_key(&(tc, local)))
                .collect();
            if selected.is_empty() {
                continue;
            }
            let coarse_verts = coarse.triangle(tc);
            let coarse_tri = coarse.tri_vertices(tc);
            for piece in closed_trace_pieces(coarse, ct, tc) {
                for (tf, si) in ft.pieces_in_range(piece.polyline, piece.arc_start, piece.arc_end) {
                    let seg = &ft.segments(tf)[si];
                    let fine_verts = fine.triangle(tf);
                    let fine_tri = fine.tri_vertices(tf);
                    let len = seg.length();
                    for &local_c in &selected {
                        let psi = trace_dual[&(tc, local_c)];
                        let node = coarse_verts[local_c];
                        let row = coarse_dofs
                            .free_of_vertex(node)
                            .expect("selected nodes are free");
                        let weight = 1.0 / card[node] as f64;
                        for &(x, w) in &gauss {
                            let p = seg.start.lerp(seg.end, x);
                            let lc = barycentric(p, coarse_tri);
                            let psi_val = psi[0] * lc[0] + psi[1] * lc[1] + psi[2] * lc[2];
                            let lf = barycentric(p, fine_tri);
                            for local_f in 0..3 {
                                if let Some(col) = fine_dofs.free_of_vertex(fine_verts[local_f]) {
                                    triplets.push((
                                        row,
                                        col,
                                        weight * w * len * psi_val * lf[local_f],
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // Triangle rows for nodes without trace domains: averaged over all
    // adjacent coarse triangles, integrated exactly per fine triangle by
    // the midpoint rule.
    let delta = fine_level - coarse_level;
    let per_coarse = 1usize << (2 * delta);
    for tc in 0..coarse.num_triangles() {
        let coarse_verts = coarse.triangle(tc);
        let coarse_tri = coarse.tri_vertices(tc);
        for tf in tc * per_coarse..(tc + 1) * per_coarse {
            let fine_verts = fine.triangle(tf);
            let fine_tri = fine.tri_vertices(tf);
            let area = fine.tri_area(tf);
            let mids = [
                fine_tri[0].lerp(fine_tri[1], 0.5),
                fine_tri[1].lerp(fine_tri[2], 0.5),
                fine_tri[2].lerp(fine_tri[0], 0.5),
            ];
            for local_c in 0..3 {
                let node = coarse_verts[local_c];
                if nodesets.is_interface_node(node) {
                    continue;
                }
                let Some(row) = coarse_dofs.free_of_vertex(node) else {
                    continue;
                };
                let card = coarse.tris_of_vertex(node).len() as f64;
                let psi = tri_dual[tc][local_c];
                for (m, mid) in mids.iter().enumerate() {
                    let lc = barycentric(*mid, coarse_tri);
                    let psi_val = psi[0] * lc[0] + psi[1] * lc[1] + psi[2] * lc[2];
                    // Fine hat values at edge midpoints: 1/2 on the two
                    // hats adjacent to the midpoint edge.
                    for local_f in [m, (m + 1) % 3] {
                        if let Some(col) = fine_dofs.free_of_vertex(fine_verts[local_f]) {
                            triplets.push((row, col, (area / 3.0) * psi_val * 0.5 / card));
                        }
                    }
                }
            }
        }
    }

    let matrix =
        SparseMatrix::from_triplets(coarse_dofs.num_free(), fine_dofs.num_free(), &triplets)?;

    // Prolongation: barycentric weights of each fine vertex in its coarse
    // ancestor triangle.
    let mut p_triplets = Vec::new();
    for df in 0..fine_dofs.num_free() {
        let v = fine_dofs.vertex_of_free(df);
        let (tc, bary) = hier.vertex_in_ancestor(fine_level, coarse_level, v);
        let coarse_verts = coarse.triangle(tc);
        for local in 0..3 {
            if bary[local] == 0.0 {
                continue;
            }
            if let Some(dc) = coarse_dofs.free_of_vertex(coarse_verts[local]) {
                p_triplets.push((df, dc, bary[local]));
            }
        }
    }
    let prolongation =
        SparseMatrix::from_triplets(fine_dofs.num_free(), coarse_dofs.num_free(), &p_triplets)?;

    Ok(InterpolationOperator {
        matrix,
        prolongation,
        coarse_dofs,
        fine_dofs,
        variant: nodesets.variant,
        sigma: nodesets.sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{trace_fracture, unit_square_structured, FractureNetwork};

    const REF_TRIANGLE: [Point2; 3] = [
        Point2::new(0.0, 0.0),
        Point2::new(-1.0, 1.0),
        Point2::new(1.0, 1.0),
    ];

    /// Arc of the dual-norm example: circle centered (0, a) through the
    /// two anchor points (+-x0, y0), swept between them.
    fn example_arc(a: f64, x0: f64, y0: f64) -> CurvePiece {
        let radius = (x0 * x0 + (a - y0) * (a - y0)).sqrt();
        let theta_left = (y0 - a).atan2(-x0);
        let theta_right = (y0 - a).atan2(x0);
        CurvePiece::Arc {
            center: Point2::new(0.0, a),
            radius,
            theta0: theta_left,
            theta1: theta_right,
        }
    }

    fn shape_domain(shape: usize, a: f64) -> IntegrationDomain {
        let piece = match shape {
            1 => example_arc(a, 1.0, 1.0),
            2 => example_arc(a, 0.5, 0.5),
            _ => panic!("shape must be 1 or 2"),
        };
        IntegrationDomain::Curve {
            verts: REF_TRIANGLE,
            pieces: vec![piece],
        }
    }

    #[test]
    fn arc_sweeps_between_anchors() {
        let arc = example_arc(3.0, 1.0, 1.0);
        let p0 = arc.point_at(0.0);
        let p1 = arc.point_at(1.0);
        assert!(p0.dist(Point2::new(-1.0, 1.0)) < 1e-12);
        assert!(p1.dist(Point2::new(1.0, 1.0)) < 1e-12);
        // Midpoint dips toward the triangle interior.
        let mid = arc.point_at(0.5);
        assert!(mid.y < 1.0 && mid.y > 0.0 && mid.x.abs() < 1e-12);
    }

    #[test]
    fn triangle_mass_matrix_closed_form() {
        let domain = IntegrationDomain::Triangle {
            verts: [
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
        };
        let m = sigma_mass_matrix(&domain);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 } else { 1.0 } / 24.0;
                assert!((m[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn edge_mass_matrix_closed_form() {
        // Sigma = the edge from vertex 1 to vertex 2: 1D mass in those
        // nodes, zero row/col for vertex 0.
        let verts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
        ];
        let domain = IntegrationDomain::Curve {
            verts,
            pieces: vec![CurvePiece::Segment {
                a: verts[1],
                b: verts[2],
            }],
        };
        let m = sigma_mass_matrix(&domain);
        let l = 1.0;
        assert!((m[(1, 1)] - 2.0 * l / 6.0).abs() < 1e-12);
        assert!((m[(1, 2)] - l / 6.0).abs() < 1e-12);
        assert!((m[(2, 2)] - 2.0 * l / 6.0).abs() < 1e-12);
        for k in 0..3 {
            assert!(m[(0, k)].abs() < 1e-12);
        }
    }

    #[test]
    fn arc_mass_matrix_is_spd_and_converged() {
        // Shape 1 arc with a = 3 gives a well-conditioned 3x3 system.
        let m = sigma_mass_matrix(&shape_domain(1, 3.0));
        let (vals, _) = jacobi_eigen(&m);
        assert!(vals.iter().all(|&v| v > 0.0));
        // Halving the tolerance does not change the entries beyond 1e-11.
        if let IntegrationDomain::Curve { verts, pieces } = shape_domain(1, 3.0) {
            let tight = integrate_products(verts, &pieces[0], QUADRATURE_TOL * 0.5);
            let loose = integrate_products(verts, &pieces[0], QUADRATURE_TOL);
            for k in 0..6 {
                assert!((tight[k] - loose[k]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn dual_basis_biorthogonal_on_triangle() {
        let domain = IntegrationDomain::Triangle {
            verts: REF_TRIANGLE,
        };
        let m = sigma_mass_matrix(&domain);
        for n in 0..3 {
            let b = dual_basis(&domain, n);
            assert_eq!(b.status, DualBasisStatus::Unique);
            // <psi_n, lambda_j> = delta_nj
            for j in 0..3 {
                let mut s = 0.0;
                for i in 0..3 {
                    s += b.coeffs[i] * m[(i, j)];
                }
                let expected = if j == n { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dual_norm_table_row_a2_shape1() {
        let b1 = dual_basis(&shape_domain(1, 2.0), 0);
        let b2 = dual_basis(&shape_domain(1, 2.0), 1);
        assert!((b1.norm - 3.9).abs() / 3.9 < 0.05, "norm1 = {}", b1.norm);
        assert!((b2.norm - 2.0).abs() / 2.0 < 0.05, "norm2 = {}", b2.norm);
    }

    #[test]
    fn dual_norm_degenerate_arc_matches_asymptotic_oracle() {
        // For the shape-2 arc the sagitta is
        // delta = sqrt(1/4 + (a - 1/2)^2) - (a - 1/2), and as the arc
        // degenerates both dual norms approach (3/4) sqrt(5) / delta
        // (expansion of the 3x3 system in the basis {1, x, 1 - 4x^2} of
        // functions on the chord).
        let a = 2000.0;
        let delta = (0.25f64 + (a - 0.5) * (a - 0.5)).sqrt() - (a - 0.5);
        let oracle = 0.75 * 5.0f64.sqrt() / delta;
        let b1 = dual_basis(&shape_domain(2, a), 0);
        let b2 = dual_basis(&shape_domain(2, a), 1);
        let b3 = dual_basis(&shape_domain(2, a), 2);
        assert!(
            (b1.norm - oracle).abs() / oracle < 1e-3,
            "norm1 = {} vs oracle {}",
            b1.norm,
            oracle
        );
        assert!(
            (b2.norm - b3.norm).abs() <= 1e-8 * b2.norm,
            "symmetry: {} vs {}",
            b2.norm,
            b3.norm
        );
        assert!(
            (b2.norm - oracle).abs() / oracle < 1e-3,
            "norm2 = {}",
            b2.norm
        );
    }

    #[test]
    fn straight_chord_through_node_is_min_norm() {
        // A straight line through vertex 0 crossing the triangle interior:
        // rank-deficient but consistent for node 0.
        let verts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let domain = IntegrationDomain::Curve {
            verts,
            pieces: vec![CurvePiece::Segment {
                a: Point2::new(0.0, 0.0),
                b: Point2::new(0.5, 0.5),
            }],
        };
        let b = dual_basis(&domain, 0);
        assert_eq!(b.status, DualBasisStatus::MinNorm);
        assert!(b.norm.is_finite());
        // For the nodes away from the chord line, inconsistent.
        let b1 = dual_basis(&domain, 1);
        assert_eq!(b1.status, DualBasisStatus::NoSolution);
    }

    fn vertical_setup(n: usize) -> (crate::mesh::MeshHierarchy, FractureTrace, FractureTrace) {
        let coarse = unit_square_structured(n).unwrap();
        let hier = crate::mesh::MeshHierarchy::from_coarse(coarse, 2);
        let network =
            FractureNetwork::new(vec![vec![Point2::new(0.5, 0.0), Point2::new(0.5, 1.0)]]).unwrap();
        let ct = trace_fracture(hier.level(0), &network).unwrap();
        let ft = trace_fracture(hier.level(2), &network).unwrap();
        (hier, ct, ft)
    }

    #[test]
    fn indicator_on_aligned_edge_matches_closed_form() {
        let (hier, ct, _) = vertical_setup(4);
        let coarse = hier.level(0);
        // Node at (0.5, 0.5).
        let node = (0..coarse.num_vertices())
            .find(|&v| coarse.vertex(v).dist(Point2::new(0.5, 0.5)) < 1e-12)
            .unwrap();
        let mut finite = 0;
        for &t in coarse.tris_of_vertex(node) {
            let s = indicator(coarse, &ct, node, t);
            if s.is_finite() {
                finite += 1;
                // Trace = one full edge of length 1/4 containing the node:
                // |psi| = 2 / sqrt(L), s = diam^(1/2) |psi|.
                let l = 0.25f64;
                let expected = coarse.tri_diameter(t).sqrt() * 2.0 / l.sqrt();
                assert!(
                    (s - expected).abs() < 1e-9 * expected,
                    "s = {s}, expected {expected}"
                );
            }
        }
        assert!(finite >= 2);
        // A triangle not touched by the fracture has infinite indicator.
        let far = (0..coarse.num_triangles())
            .find(|&t| ct.segments(t).is_empty())
            .unwrap();
        assert_eq!(
            indicator(coarse, &ct, coarse.triangle(far)[0], far),
            f64::INFINITY
        );
    }

    #[test]
    fn indicator_scale_invariance() {
        // Scaling mesh and fracture by c leaves s_{N,T} unchanged.
        for scale in [1.0f64, 3.7, 0.01] {
            let verts = [
                Point2::new(0.0, 0.0).scale(scale),
                Point2::new(1.0, 0.0).scale(scale),
                Point2::new(0.3, 1.0).scale(scale),
            ];
            let domain = IntegrationDomain::Curve {
                verts,
                pieces: vec![
                    CurvePiece::Segment {
                        a: Point2::new(0.2, 0.1).scale(scale),
                        b: Point2::new(0.5, 0.4).scale(scale),
                    },
                    CurvePiece::Segment {
                        a: Point2::new(0.5, 0.4).scale(scale),
                        b: Point2::new(0.7, 0.2).scale(scale),
                    },
                ],
            };
            let b = dual_basis(&domain, 0);
            let diam = verts[0]
                .dist(verts[1])
                .max(verts[1].dist(verts[2]))
                .max(verts[2].dist(verts[0]));
            let s = diam.sqrt() * b.norm;
            // Compare against the unscaled value.
            let base_domain = IntegrationDomain::Curve {
                verts: [
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 0.0),
                    Point2::new(0.3, 1.0),
                ],
                pieces: vec![
                    CurvePiece::Segment {
                        a: Point2::new(0.2, 0.1),
                        b: Point2::new(0.5, 0.4),
                    },
                    CurvePiece::Segment {
                        a: Point2::new(0.5, 0.4),
                        b: Point2::new(0.7, 0.2),
                    },
                ],
            };
            let base = dual_basis(&base_domain, 0);
            let base_diam = 1.0f64
                .max(Point2::new(1.0, 0.0).dist(Point2::new(0.3, 1.0)))
                .max(Point2::new(0.3, 1.0).norm());
            let s_base = base_diam.sqrt() * base.norm;
            assert!(
                (s - s_base).abs() <= 1e-8 * s_base,
                "scale {scale}: {s} vs {s_base}"
            );
        }
    }

    #[test]
    fn classify_no_fracture_keeps_all_nodes_interior() {
        let mesh = unit_square_structured(4).unwrap();
        let empty = FractureNetwork::new(vec![vec![
            Point2::new(0.125, 0.125),
            Point2::new(0.375, 0.125),
        ]])
        .unwrap();
        let trace = trace_fracture(&mesh, &empty).unwrap();
        // Clear the fracture influence by classifying a node far away:
        let sets = classify(&mesh, &trace, 500.0, Variant::FractureAware).unwrap();
        // Only nodes near the short fracture may be interface nodes.
        for v in sets.interface_nodes() {
            let p = mesh.vertex(v);
            assert!(p.y < 0.5 && p.x < 0.7);
        }
        // Element-based variant selects nothing.
        let eb = classify(&mesh, &trace, 500.0, Variant::ElementBased).unwrap();
        assert_eq!(eb.interface_nodes().count(), 0);
    }

    #[test]
    fn classify_matches_lemma_rule_when_edge_aligned() {
        let (hier, ct, _) = vertical_setup(4);
        let coarse = hier.level(0);
        assert!(ct.union_of_edges);
        let sets = classify(coarse, &ct, 1e6, Variant::FractureAware).unwrap();
        let lemma = lemma_edge_sets(coarse, &ct);
        for v in 0..coarse.num_vertices() {
            // Restrict the comparison to fracture-edge-bearing triangles.
            let bearing: Vec<usize> = coarse
                .tris_of_vertex(v)
                .iter()
                .copied()
                .filter(|&t| {
                    ct.segments(t)
                        .iter()
                        .any(|s| crate::mesh::segment_edge_vertices(coarse, t, s).is_some())
                })
                .collect();
            let classified: Vec<usize> = sets.t_gamma[v]
                .iter()
                .copied()
                .filter(|t| bearing.contains(t))
                .collect();
            let expected: Vec<usize> = lemma[v]
                .iter()
                .copied()
                .filter(|t| bearing.contains(t))
                .collect();
            assert_eq!(classified, expected, "node {v}");
        }
    }

    #[test]
    fn projection_property_on_coarse_functions() {
        let (hier, ct, ft) = vertical_setup(4);
        let sets = classify(hier.level(0), &ct, 500.0, Variant::FractureAware).unwrap();
        let op = assemble_interpolation(&hier, 0, 2, &sets, Some(&ct), Some(&ft)).unwrap();
        let nc = op.coarse_dofs.num_free();
        // 50 random coarse functions: |(I_H P v)(N) - v(N)| <= 1e-9.
        let mut state = 7u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..50 {
            let v = DenseVector::from_vec((0..nc).map(|_| next()).collect());
            let fine = op.prolong(&v).unwrap();
            let nodal = op.apply(&fine).unwrap();
            let mut worst = 0.0f64;
            for i in 0..nc {
                worst = worst.max((nodal[i] - v[i]).abs());
            }
            assert!(worst <= 1e-9, "projection error {worst}");
        }
    }

    #[test]
    fn idempotence_through_prolongation() {
        let (hier, ct, ft) = vertical_setup(2);
        let sets = classify(hier.level(0), &ct, 500.0, Variant::FractureAware).unwrap();
        let op = assemble_interpolation(&hier, 0, 2, &sets, Some(&ct), Some(&ft)).unwrap();
        let nc = op.coarse_dofs.num_free();
        let v = DenseVector::from_vec((0..nc).map(|i| (i as f64 * 0.37).sin()).collect());
        let once = op.apply(&op.prolong(&v).unwrap()).unwrap();
        let twice = op.apply(&op.prolong(&once).unwrap()).unwrap();
        for i in 0..nc {
            assert!((once[i] - twice[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn element_based_projection_property() {
        let hier = crate::mesh::MeshHierarchy::from_coarse(unit_square_structured(4).unwrap(), 2);
        let network =
            FractureNetwork::new(vec![vec![Point2::new(0.5, 0.0), Point2::new(0.5, 1.0)]]).unwrap();
        let ct = trace_fracture(hier.level(0), &network).unwrap();
        let sets = classify(hier.level(0), &ct, 500.0, Variant::ElementBased).unwrap();
        let op = assemble_interpolation(&hier, 0, 2, &sets, None, None).unwrap();
        let nc = op.coarse_dofs.num_free();
        let v = DenseVector::from_vec((0..nc).map(|i| 1.0 + (i % 5) as f64).collect());
        let nodal = op.apply(&op.prolong(&v).unwrap()).unwrap();
        for i in 0..nc {
            assert!((nodal[i] - v[i]).abs() < 1e-10);
        }
    }

    /// Largest quotient |v - I_H v|_T / (H (|grad v|_{U(T)} +
    /// |tangential grad v|_{U_Gamma(T)})) over all elements and a batch
    /// of random fine functions, for the edge-aligned vertical-fracture
    /// configuration.
    fn stability_quotient(n: usize) -> f64 {
        use crate::mesh::{p1_gradients, MeshHierarchy};
        let hier = MeshHierarchy::from_coarse(unit_square_structured(n).unwrap(), 2);
        let (coarse, fine) = (hier.level(0), hier.level(2));
        let network =
            FractureNetwork::new(vec![vec![Point2::new(0.5, 0.0), Point2::new(0.5, 1.0)]]).unwrap();
        let ct = trace_fracture(coarse, &network).unwrap();
        let ft = trace_fracture(fine, &network).unwrap();
        let sets = classify(coarse, &ct, 500.0, Variant::FractureAware).unwrap();
        let op = assemble_interpolation(&hier, 0, 2, &sets, Some(&ct), Some(&ft)).unwrap();
        let nf = op.fine_dofs.num_free();
        let h_coarse = coarse.mesh_size();
        // One-layer element neighborhoods.
        let patches: Vec<Vec<usize>> = (0..coarse.num_triangles())
            .map(|t| crate::mesh::patch(coarse, t, 1).elements)
            .collect();
        let mut state = 17u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let v = DenseVector::from_vec((0..nf).map(|_| next()).collect());
            let mut w = v.clone();
            w.axpy(-1.0, &op.prolong(&op.apply(&v).unwrap()).unwrap());
            let v_full = op.fine_dofs.expand(&v);
            let w_full = op.fine_dofs.expand(&w);
            // Per fine triangle: mass of w and A=1 gradient energy of v;
            // per fine trace segment: tangential energy of v.
            let nt_fine = fine.num_triangles();
            let mut mass_w = vec![0.0; nt_fine];
            let mut grad_v = vec![0.0; nt_fine];
            for t in 0..nt_fine {
                let verts = fine.triangle(t);
                let tri = fine.tri_vertices(t);
                let area = fine.tri_area(t);
                let local_w = [w_full[verts[0]], w_full[verts[1]], w_full[verts[2]]];
                for i in 0..3 {
                    for j in 0..3 {
                        let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                        mass_w[t] += m * local_w[i] * local_w[j];
                    }
                }
                let grads = p1_gradients(tri);
                let mut gx = 0.0;
                let mut gy = 0.0;
                for i in 0..3 {
                    gx += grads[i].x * v_full[verts[i]];
                    gy += grads[i].y * v_full[verts[i]];
                }
                grad_v[t] = area * (gx * gx + gy * gy);
            }
            let mut tang_v = vec![0.0; nt_fine];
            for t in 0..nt_fine {
                for seg in ft.segments(t) {
                    let verts = fine.triangle(t);
                    let grads = p1_gradients(fine.tri_vertices(t));
                    let len = seg.length();
                    let tangent = seg.end.sub(seg.start).scale(1.0 / len);
                    let mut slope = 0.0;
                    for i in 0..3 {
                        slope += grads[i].dot(tangent) * v_full[verts[i]];
                    }
                    tang_v[t] += len * slope * slope;
                }
            }
            for (tc, patch) in patches.iter().enumerate() {
                let mut numerator = 0.0;
                for tf in hier.elem_descendants(0, 2, tc) {
                    numerator += mass_w[tf];
                }
                let mut denom = 0.0;
                let mut tang = 0.0;
                for &e in patch {
                    for tf in hier.elem_descendants(0, 2, e) {
                        denom += grad_v[tf];
                        tang += tang_v[tf];
                    }
                }
                let scale = h_coarse * (denom.sqrt() + tang.sqrt());
                if scale > 1e-12 {
                    worst = worst.max(numerator.sqrt() / scale);
                }
            }
        }
        worst
    }

    #[test]
    fn interpolation_stability_constant_bounded_across_refinement() {
        // Diagnostic: the discrete approximation-bound quotients stay
        // bounded by a fixed constant when the coarse mesh is refined.
        let q_coarse = stability_quotient(4);
        let q_fine = stability_quotient(8);
        assert!(q_coarse.is_finite() && q_fine.is_finite());
        assert!(
            q_fine <= 1.4 * q_coarse.max(0.1),
            "stability quotient grew from {q_coarse} to {q_fine} under refinement"
        );
    }
}
