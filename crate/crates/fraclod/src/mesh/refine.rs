//! Quadrisection refinement and nested mesh hierarchies.
//!
//! Each refinement splits every triangle into four similar children using
//! edge midpoints. Children of parent t are stored at indices 4t..4t+4, so
//! ancestor lookup is integer division; parent vertices keep their indices
//! and new vertices record the parent edge they bisect.

use super::point::{barycentric, Point2};
use super::trimesh::TriMesh;
use crate::{Error, Result};

/// Link from a refined mesh to its parent.
#[derive(Debug, Clone)]
pub struct ParentLink {
    /// Number of parent vertices (index prefix shared with the parent).
    pub parent_vertices: usize,
    /// For each new vertex (offset by `parent_vertices`): the parent edge
    /// endpoints it bisects.
    pub midpoint_of: Vec<(usize, usize)>,
}

/// Refines every triangle into four via edge midpoints. The child mesh is
/// nested in the parent: parent vertices keep their indices, new vertices
/// are edge midpoints, and children of triangle t sit at 4t..4t+4.
pub fn refine_quadrisect(mesh: &TriMesh) -> TriMesh {
    let nv = mesh.num_vertices();
    let edges = mesh.edges().to_vec();
    let midpoint_index = |a: usize, b: usize| -> usize {
        let key = (a.min(b), a.max(b));
        nv + edges.binary_search(&key).expect("edge exists")
    };

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint_of = Vec::with_capacity(edges.len());
    for &(a, b) in &edges {
        let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
        vertices.push(Point2::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)));
        midpoint_of.push((a, b));
    }

    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle(t);
        let mab = midpoint_index(a, b);
        let mbc = midpoint_index(b, c);
        let mca = midpoint_index(c, a);
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }

    let link = ParentLink {
        parent_vertices: nv,
        midpoint_of,
    };
    TriMesh::with_level(vertices, triangles, mesh.level() + 1, Some(link))
        .expect("quadrisection preserves validity")
}

/// Nested mesh family: level 0 is the coarsest.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<TriMesh>,
}

impl MeshHierarchy {
    /// Applies `refinements` quadrisections to `coarse`.
    pub fn from_coarse(coarse: TriMesh, refinements: usize) -> Self {
        let mut levels = Vec::with_capacity(refinements + 1);
        levels.push(coarse);
        for _ in 0..refinements {
            let next = refine_quadrisect(levels.last().unwrap());
            levels.push(next);
        }
        Self { levels }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &TriMesh {
        &self.levels[l]
    }

    pub fn finest(&self) -> &TriMesh {
        self.levels.last().unwrap()
    }

    pub fn coarsest(&self) -> &TriMesh {
        &self.levels[0]
    }

    /// Ancestor of fine triangle `t` on a coarser level.
    pub fn elem_ancestor(&self, fine_level: usize, coarse_level: usize, t: usize) -> usize {
        assert!(coarse_level <= fine_level);
        t >> (2 * (fine_level - coarse_level))
    }

    /// Range of descendants of coarse triangle `t` on a finer level.
    pub fn elem_descendants(
        &self,
        coarse_level: usize,
        fine_level: usize,
        t: usize,
    ) -> std::ops::Range<usize> {
        assert!(coarse_level <= fine_level);
        let factor = 1usize << (2 * (fine_level - coarse_level));
        t * factor..(t + 1) * factor
    }

    /// Prolongs vertex values from a coarse level to a fine level by
    /// repeated midpoint interpolation; exact for piecewise linears.
    pub fn prolong_vertex_values(
        &self,
        coarse_level: usize,
        fine_level: usize,
        values: &[f64],
    ) -> Result<Vec<f64>> {
        if values.len() != self.levels[coarse_level].num_vertices() {
            return Err(Error::DimensionMismatch {
                context: "prolong_vertex_values",
                expected: self.levels[coarse_level].num_vertices(),
                found: values.len(),
            });
        }
        let mut current = values.to_vec();
        for l in coarse_level + 1..=fine_level {
            let mesh = &self.levels[l];
            let link = mesh.parent().expect("refined levels carry parent links");
            let mut next = Vec::with_capacity(mesh.num_vertices());
            next.extend_from_slice(&current);
            for &(a, b) in &link.midpoint_of {
                next.push(0.5 * (current[a] + current[b]));
            }
            current = next;
        }
        Ok(current)
    }

    /// Barycentric coordinates of fine vertex `v` inside its containing
    /// coarse ancestor triangle. Returns (coarse triangle, coordinates).
    pub fn vertex_in_ancestor(
        &self,
        fine_level: usize,
        coarse_level: usize,
        v: usize,
    ) -> (usize, [f64; 3]) {
        let fine = &self.levels[fine_level];
        let t_fine = fine.tris_of_vertex(v)[0];
        let t_coarse = self.elem_ancestor(fine_level, coarse_level, t_fine);
        let coarse = &self.levels[coarse_level];
        let mut bary = barycentric(fine.vertex(v), coarse.tri_vertices(t_coarse));
        for b in &mut bary {
            if b.abs() < 1e-13 {
                *b = 0.0;
            }
        }
        (t_coarse, bary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_structured;

    #[test]
    fn refine_two_triangle_mesh() {
        let m = unit_square_structured(1).unwrap();
        let f = refine_quadrisect(&m);
        assert_eq!(f.num_triangles(), 8);
        assert_eq!(f.num_vertices(), 9);
        assert_eq!(f.level(), 1);
    }

    #[test]
    fn nesting_invariant() {
        let m = unit_square_structured(2).unwrap();
        let f = refine_quadrisect(&m);
        let link = f.parent().unwrap();
        assert_eq!(link.parent_vertices, m.num_vertices());
        // Shared prefix coincides bit-exactly.
        for v in 0..m.num_vertices() {
            assert_eq!(m.vertex(v), f.vertex(v));
        }
        // New vertices are parent edge midpoints.
        for (k, &(a, b)) in link.midpoint_of.iter().enumerate() {
            let mid = f.vertex(m.num_vertices() + k);
            assert!((mid.x - 0.5 * (m.vertex(a).x + m.vertex(b).x)).abs() < 1e-16);
            assert!((mid.y - 0.5 * (m.vertex(a).y + m.vertex(b).y)).abs() < 1e-16);
        }
    }

    #[test]
    fn refinement_composes() {
        // Refining twice equals refining the refinement once: counts and
        // coordinates agree level by level.
        let m = unit_square_structured(1).unwrap();
        let h = MeshHierarchy::from_coarse(m, 2);
        let direct = refine_quadrisect(&refine_quadrisect(h.coarsest()));
        assert_eq!(direct.num_vertices(), h.level(2).num_vertices());
        assert_eq!(direct.num_triangles(), h.level(2).num_triangles());
        for v in 0..direct.num_vertices() {
            assert_eq!(direct.vertex(v), h.level(2).vertex(v));
        }
    }

    #[test]
    fn quadrisection_preserves_min_angle() {
        let m = unit_square_structured(3).unwrap();
        let f = refine_quadrisect(&m);
        assert!((m.min_angle() - f.min_angle()).abs() < 1e-13);
        assert!((m.shape_regularity() - f.shape_regularity()).abs() < 1e-12);
    }

    #[test]
    fn ancestor_and_descendants() {
        let m = unit_square_structured(2).unwrap();
        let h = MeshHierarchy::from_coarse(m, 2);
        for t in 0..h.level(0).num_triangles() {
            for c in h.elem_descendants(0, 2, t) {
                assert_eq!(h.elem_ancestor(2, 0, c), t);
            }
        }
        // Geometric containment: descendant centroids lie in the ancestor.
        for c in 0..h.level(2).num_triangles() {
            let t = h.elem_ancestor(2, 0, c);
            let bary = barycentric(h.level(2).tri_centroid(c), h.level(0).tri_vertices(t));
            assert!(bary.iter().all(|&b| b > -1e-12));
        }
    }

    #[test]
    fn prolongation_is_exact_for_linears() {
        let m = unit_square_structured(2).unwrap();
        let h = MeshHierarchy::from_coarse(m, 3);
        // v(x, y) = 2x - 3y + 1 is linear, so prolongation reproduces it.
        let coarse: Vec<f64> = (0..h.level(0).num_vertices())
            .map(|v| {
                let p = h.level(0).vertex(v);
                2.0 * p.x - 3.0 * p.y + 1.0
            })
            .collect();
        let fine = h.prolong_vertex_values(0, 3, &coarse).unwrap();
        for v in 0..h.level(3).num_vertices() {
            let p = h.level(3).vertex(v);
            assert!((fine[v] - (2.0 * p.x - 3.0 * p.y + 1.0)).abs() < 1e-13);
        }
    }
}
