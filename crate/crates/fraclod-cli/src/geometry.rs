//! Built-in experiment geometries, generated programmatically so the
//! drivers run without external assets.

use crate::CliError;
use fraclod::mesh::{FractureNetwork, Point2, TriMesh};

/// Single vertical interface x = 0.5 through the unit square.
pub fn gamma_vertical_half() -> FractureNetwork {
    FractureNetwork::new(vec![vec![Point2::new(0.5, 0.0), Point2::new(0.5, 1.0)]])
        .expect("static geometry")
}

/// Five-interface network on the 1/64 lattice: two vertical-ish and two
/// horizontal-ish staircase polylines plus one main-diagonal polyline,
/// with declared crossings, one triple intersection at (39, 39)/64, and
/// nine immersed tips. Every piece runs along lattice edges (horizontal,
/// vertical, or main-diagonal), so the network is a union of element
/// edges on structured meshes of 64 cells and finer, while crossing
/// coarse elements of 16-cell meshes through their interiors.
pub fn five_interfaces() -> FractureNetwork {
    let chains: [&[(i32, i32)]; 5] = [
        // Vertical zigzag through (25,18), (25,25), (25,39).
        &[
            (25, 10),
            (25, 13),
            (26, 13),
            (26, 17),
            (25, 17),
            (25, 18),
            (25, 21),
            (26, 21),
            (26, 24),
            (25, 24),
            (25, 25),
            (25, 29),
            (26, 29),
            (26, 33),
            (25, 33),
            (25, 36),
            (26, 36),
            (26, 38),
            (25, 38),
            (25, 39),
            (25, 43),
            (26, 43),
            (26, 47),
            (25, 47),
            (25, 50),
            (26, 50),
            (26, 52),
            (25, 52),
            (25, 54),
        ],
        // Horizontal zigzag through (25,39) and (39,39).
        &[
            (8, 39),
            (12, 39),
            (12, 40),
            (16, 40),
            (16, 39),
            (20, 39),
            (25, 39),
            (28, 39),
            (28, 40),
            (32, 40),
            (32, 39),
            (36, 39),
            (39, 39),
            (42, 39),
            (42, 40),
            (46, 40),
            (46, 39),
            (49, 39),
            (49, 40),
            (53, 40),
            (53, 39),
            (57, 39),
            (60, 39),
        ],
        // Main-diagonal polyline with jogs, through (18,18), (25,25),
        // and (39,39).
        &[
            (12, 12),
            (16, 16),
            (18, 18),
            (20, 20),
            (25, 25),
            (28, 28),
            (28, 31),
            (31, 31),
            (35, 35),
            (35, 38),
            (38, 38),
            (39, 39),
            (44, 44),
            (48, 48),
            (52, 52),
        ],
        // Vertical zigzag from a tip up to the triple point, through (39,18).
        &[
            (39, 12),
            (39, 18),
            (39, 22),
            (40, 22),
            (40, 26),
            (39, 26),
            (39, 30),
            (40, 30),
            (40, 33),
            (39, 33),
            (39, 39),
        ],
        // Horizontal zigzag through (18,18), (25,18), and (39,18).
        &[
            (6, 18),
            (9, 18),
            (9, 19),
            (13, 19),
            (13, 18),
            (18, 18),
            (25, 18),
            (29, 18),
            (29, 19),
            (33, 19),
            (33, 18),
            (39, 18),
            (43, 18),
            (43, 19),
            (47, 19),
            (47, 18),
            (50, 18),
        ],
    ];
    let polylines = chains
        .iter()
        .map(|chain| {
            chain
                .iter()
                .map(|&(x, y)| Point2::new(x as f64 / 64.0, y as f64 / 64.0))
                .collect()
        })
        .collect();
    FractureNetwork::new(polylines).expect("static geometry")
}

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Unstructured-style triangulation of the unit square with two interface
/// polylines dividing it into three layers.
///
/// Construction: a 10 x 10 grid triangulation, five boundary-edge splits,
/// 111 interior centroid insertions, and a deterministic jitter of all
/// interior vertices (interface chains included; the interfaces follow
/// the jittered vertex chains, so they stay unions of element edges).
/// The counts are fixed: 237 vertices, 427 triangles, 45 boundary
/// vertices.
pub fn two_layer_unstructured() -> Result<(TriMesh, FractureNetwork), CliError> {
    let n = 10usize;
    let nv = n + 1;
    let idx = |i: usize, j: usize| j * nv + i;
    let mut vertices: Vec<Point2> = Vec::with_capacity(nv * nv);
    for j in 0..nv {
        for i in 0..nv {
            vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }

    // Five boundary-edge splits away from the interface columns.
    let splits = [
        (idx(4, 0), idx(5, 0)),
        (idx(8, 0), idx(9, 0)),
        (idx(5, 10), idx(6, 10)),
        (idx(0, 2), idx(0, 3)),
        (idx(10, 6), idx(10, 7)),
    ];
    for (u, v) in splits {
        let t = triangles
            .iter()
            .position(|tri| tri.contains(&u) && tri.contains(&v))
            .expect("boundary edge exists");
        let m = vertices.len();
        let (pu, pv) = (vertices[u], vertices[v]);
        vertices.push(Point2::new(0.5 * (pu.x + pv.x), 0.5 * (pu.y + pv.y)));
        // Rotate so the split edge comes first, preserving orientation.
        let tri = triangles[t];
        let rot = (0..3)
            .find(|&r| {
                (tri[r] == u && tri[(r + 1) % 3] == v) || (tri[r] == v && tri[(r + 1) % 3] == u)
            })
            .expect("edge in triangle");
        let (p, q, w) = (tri[rot], tri[(rot + 1) % 3], tri[(rot + 2) % 3]);
        triangles[t] = [p, m, w];
        triangles.push([m, q, w]);
    }

    // Boundary detection for the jitter mask: edge incidence of one.
    let mut edge_count = std::collections::BTreeMap::new();
    for t in &triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
        }
    }
    let mut on_boundary = vec![false; vertices.len()];
    let mut min_edge = vec![f64::INFINITY; vertices.len()];
    for (&(a, b), &count) in &edge_count {
        let len = vertices[a].dist(vertices[b]);
        min_edge[a] = min_edge[a].min(len);
        min_edge[b] = min_edge[b].min(len);
        if count == 1 {
            on_boundary[a] = true;
            on_boundary[b] = true;
        }
    }

    // Deterministic jitter of the interior grid vertices, applied before
    // the centroid insertions so the inserted points stay well-centered.
    let seed = 0x5EED_2D2Du64;
    for v in 0..vertices.len() {
        if on_boundary[v] {
            continue;
        }
        let r1 = unit(splitmix64(seed ^ (v as u64).wrapping_mul(GOLDEN)));
        let r2 = unit(splitmix64(seed ^ (v as u64).wrapping_mul(GOLDEN) ^ 1));
        let amp = 0.18 * min_edge[v];
        vertices[v] = Point2::new(
            vertices[v].x + amp * (2.0 * r1 - 1.0),
            vertices[v].y + amp * (2.0 * r2 - 1.0),
        );
    }

    // 111 centroid insertions spread over the triangle list.
    let base_count = triangles.len();
    for i in 0..111usize {
        let t = i * base_count / 111;
        let [a, b, c] = triangles[t];
        let g = vertices.len();
        let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
        vertices.push(Point2::new(
            (pa.x + pb.x + pc.x) / 3.0,
            (pa.y + pb.y + pc.y) / 3.0,
        ));
        triangles[t] = [a, b, g];
        triangles.push([b, c, g]);
        triangles.push([c, a, g]);
    }

    // Interface chains along the original grid columns i = 3 and i = 7.
    let chains: Vec<Vec<Point2>> = [3usize, 7]
        .iter()
        .map(|&col| (0..nv).map(|j| vertices[idx(col, j)]).collect())
        .collect();

    let mesh = TriMesh::new(vertices, triangles)
        .map_err(|e| CliError::Config(format!("builtin mesh generation failed: {e}")))?;
    let network = FractureNetwork::new(chains)
        .map_err(|e| CliError::Config(format!("builtin interfaces failed: {e}")))?;
    Ok((mesh, network))
}
