//! Conforming 2D triangulations with boundary flags, vertex adjacency,
//! and shape-regularity reporting.

use super::point::{signed_area2, Point2};
use super::refine::ParentLink;
use crate::{Error, Result};

/// Conforming triangle mesh. Immutable after construction; all derived
/// structures (edges, adjacency, boundary flags) are built once.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    /// Unique undirected edges as (min, max) vertex pairs, sorted.
    edges: Vec<(usize, usize)>,
    /// Triangles incident to each vertex, sorted.
    vertex_tris: Vec<Vec<usize>>,
    level: usize,
    parent: Option<ParentLink>,
}

impl TriMesh {
    /// Builds and validates a mesh. Triangles must be CCW with positive
    /// area; the edge structure must be conforming (at most two incident
    /// triangles per edge, boundary edges forming the vertex boundary).
    pub fn new(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_level(vertices, triangles, 0, None)
    }

    pub(super) fn with_level(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        level: usize,
        parent: Option<ParentLink>,
    ) -> Result<Self> {
        for (i, p) in vertices.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::MeshFormat(format!("vertex {i} not finite")));
            }
        }
        let nv = vertices.len();
        let mut scale = 0.0f64;
        for t in &triangles {
            for &v in t {
                if v >= nv {
                    return Err(Error::MeshFormat(format!(
                        "triangle references vertex {v} of {nv}"
                    )));
                }
            }
            scale = scale.max(vertices[t[0]].dist(vertices[t[1]]));
        }
        for (i, t) in triangles.iter().enumerate() {
            let area2 = signed_area2(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area2 <= 1e-14 * scale * scale {
                return Err(Error::DegenerateTriangle {
                    index: i,
                    area: 0.5 * area2,
                });
            }
        }

        // Edge incidence.
        let mut edge_count: std::collections::BTreeMap<(usize, usize), usize> =
            std::collections::BTreeMap::new();
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        let mut boundary_vertex = vec![false; nv];
        for (&(a, b), &count) in &edge_count {
            if count > 2 {
                return Err(Error::NonConforming(format!(
                    "edge ({a}, {b}) belongs to {count} triangles"
                )));
            }
            if count == 1 {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
        }
        let edges: Vec<(usize, usize)> = edge_count.keys().copied().collect();

        let mut vertex_tris = vec![Vec::new(); nv];
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_tris[v].push(i);
            }
        }

        Ok(Self {
            vertices,
            triangles,
            boundary_vertex,
            edges,
            vertex_tris,
            level,
            parent,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tri_vertices(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_vertices(t);
        0.5 * signed_area2(a, b, c)
    }

    /// Longest edge of triangle t.
    pub fn tri_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_vertices(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    pub fn tri_centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.tri_vertices(t);
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Inscribed-circle diameter of triangle t.
    pub fn tri_incircle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_vertices(t);
        let (la, lb, lc) = (b.dist(c), c.dist(a), a.dist(b));
        let s = 0.5 * (la + lb + lc);
        2.0 * self.tri_area(t) / s
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    /// Mesh size: maximum triangle diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.tri_diameter(t))
            .fold(0.0, f64::max)
    }

    /// Shape-regularity constant: the larger of max_T H / d_T and
    /// max_{T,T'} d_T' / d_T, with d_T the inscribed-circle diameter.
    pub fn shape_regularity(&self) -> f64 {
        let h = self.mesh_size();
        let mut d_min = f64::INFINITY;
        let mut d_max = 0.0f64;
        for t in 0..self.num_triangles() {
            let d = self.tri_incircle_diameter(t);
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
        (h / d_min).max(d_max / d_min)
    }

    /// Minimum interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let v = self.tri_vertices(t);
            for i in 0..3 {
                let u = v[(i + 1) % 3].sub(v[i]);
                let w = v[(i + 2) % 3].sub(v[i]);
                let angle = u.cross(w).atan2(u.dot(w)).abs();
                worst = worst.min(angle);
            }
        }
        worst
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).is_ok()
    }

    /// Triangles incident to vertex v, sorted.
    pub fn tris_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn parent(&self) -> Option<&ParentLink> {
        self.parent.as_ref()
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Structured triangulation of the unit square: n x n cells, each split
/// into two CCW right triangles along a diagonal. Diagonal directions
/// alternate checkerboard-fashion (southwest-northeast on even cells), so
/// every interior lattice node of an even-n mesh is surrounded
/// symmetrically and both diagonal families appear.
pub fn unit_square_structured(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "unit_square_structured requires n >= 1".into(),
        ));
    }
    let nv = n + 1;
    let mut vertices = Vec::with_capacity(nv * nv);
    for j in 0..nv {
        for i in 0..nv {
            vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let idx = |i: usize, j: usize| j * nv + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                // Diagonal a-c.
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                // Diagonal b-d.
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    TriMesh::new(vertices, triangles)
}
