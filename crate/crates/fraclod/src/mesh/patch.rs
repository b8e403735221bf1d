//! Element patches: k-fold application of the vertex-sharing neighborhood
//! operator.

use super::trimesh::TriMesh;

/// Element patch around a center element.
#[derive(Debug, Clone)]
pub struct Patch {
    pub center_element: usize,
    pub k: usize,
    /// Sorted member triangle indices.
    pub elements: Vec<usize>,
}

impl Patch {
    pub fn contains_all(&self, mesh: &TriMesh) -> bool {
        self.elements.len() == mesh.num_triangles()
    }
}

/// k-layer patch of a single element: the k-fold vertex-sharing
/// neighborhood, with the zero-layer convention patch(m, t, 0) = {t}.
pub fn patch(mesh: &TriMesh, t: usize, k: usize) -> Patch {
    Patch {
        center_element: t,
        k,
        elements: neighborhood(mesh, &[t], k),
    }
}

/// k-fold vertex-sharing neighborhood of a seed element set; sorted.
pub fn neighborhood(mesh: &TriMesh, seeds: &[usize], k: usize) -> Vec<usize> {
    let layers = layer_map(mesh, seeds, k);
    let mut out: Vec<usize> = layers
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= k)
        .map(|(t, _)| t)
        .collect();
    out.sort_unstable();
    out
}

/// For every element, the first layer index at which the expanding
/// neighborhood of `seeds` reaches it (0 for the seeds themselves);
/// usize::MAX past `max_layer`.
pub fn patch_layers(mesh: &TriMesh, seeds: &[usize], max_layer: usize) -> Vec<usize> {
    layer_map(mesh, seeds, max_layer)
}

fn layer_map(mesh: &TriMesh, seeds: &[usize], max_layer: usize) -> Vec<usize> {
    let nt = mesh.num_triangles();
    let mut layer = vec![usize::MAX; nt];
    let mut frontier: Vec<usize> = seeds.to_vec();
    frontier.sort_unstable();
    frontier.dedup();
    for &t in &frontier {
        layer[t] = 0;
    }
    for step in 1..=max_layer {
        let mut next = Vec::new();
        for &t in &frontier {
            for &v in &mesh.triangle(t) {
                for &u in mesh.tris_of_vertex(v) {
                    if layer[u] == usize::MAX {
                        layer[u] = step;
                        next.push(u);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        frontier = next;
    }
    layer
}
