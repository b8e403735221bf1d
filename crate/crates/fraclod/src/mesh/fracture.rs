//! Fracture polyline networks and their per-triangle traces.
//!
//! Polylines are stored exactly as given; crossings between polylines must
//! be supplied as shared chain vertices. Traces partition each polyline's
//! arclength over mesh triangles: pieces along shared mesh edges are
//! assigned to the lower-index triangle so lengths are conserved.

use super::point::{barycentric, clip_segment_to_triangle, Point2};
use super::trimesh::TriMesh;
use crate::{Error, Result};

/// Polyline fracture geometry.
#[derive(Debug, Clone)]
pub struct FractureNetwork {
    polylines: Vec<Vec<Point2>>,
    /// Points shared by at least two polylines.
    intersection_points: Vec<Point2>,
    /// Endpoints not shared with any other polyline.
    tip_points: Vec<Point2>,
}

const SHARED_POINT_TOL: f64 = 1e-12;

impl FractureNetwork {
    /// Validates and stores a set of polylines.
    pub fn new(polylines: Vec<Vec<Point2>>) -> Result<Self> {
        if polylines.is_empty() || polylines.iter().any(|p| p.len() < 2) {
            return Err(Error::FractureGeometry(
                "each polyline needs at least two points".into(),
            ));
        }
        // Reference scale: bounding box diagonal of all polylines.
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for poly in &polylines {
            for p in poly {
                if !p.is_finite() {
                    return Err(Error::FractureGeometry("non-finite polyline point".into()));
                }
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        let diam = hi.sub(lo).norm().max(f64::MIN_POSITIVE);
        for (pi, poly) in polylines.iter().enumerate() {
            for w in poly.windows(2) {
                if w[0].dist(w[1]) <= 1e-12 * diam {
                    return Err(Error::FractureGeometry(format!(
                        "polyline {pi} has a segment shorter than 1e-12 of the domain diameter"
                    )));
                }
            }
        }
        // Simplicity: segments of one polyline may only touch at shared
        // chain vertices.
        for (pi, poly) in polylines.iter().enumerate() {
            let n = poly.len() - 1;
            for i in 0..n {
                for j in i + 1..n {
                    if segments_cross_improperly(
                        poly[i],
                        poly[i + 1],
                        poly[j],
                        poly[j + 1],
                        j == i + 1,
                        diam,
                    ) {
                        return Err(Error::FractureGeometry(format!(
                            "polyline {pi} self-intersects between segments {i} and {j}"
                        )));
                    }
                }
            }
        }
        // Undeclared crossings between different polylines are rejected:
        // shared points must be chain vertices of both.
        for a in 0..polylines.len() {
            for b in a + 1..polylines.len() {
                check_declared_crossings(&polylines[a], &polylines[b], a, b, diam)?;
            }
        }

        let mut intersection_points = Vec::new();
        let mut tip_points = Vec::new();
        for (pi, poly) in polylines.iter().enumerate() {
            for p in poly {
                let shared = polylines.iter().enumerate().any(|(qi, q)| {
                    qi != pi && q.iter().any(|r| r.dist(*p) <= SHARED_POINT_TOL * diam)
                });
                if shared
                    && !intersection_points
                        .iter()
                        .any(|r: &Point2| r.dist(*p) <= SHARED_POINT_TOL * diam)
                {
                    intersection_points.push(*p);
                }
            }
            for &end in [poly.first().unwrap(), poly.last().unwrap()].iter() {
                let shared = polylines.iter().enumerate().any(|(qi, q)| {
                    qi != pi && q.iter().any(|r| r.dist(*end) <= SHARED_POINT_TOL * diam)
                });
                if !shared {
                    tip_points.push(*end);
                }
            }
        }

        Ok(Self {
            polylines,
            intersection_points,
            tip_points,
        })
    }

    pub fn num_polylines(&self) -> usize {
        self.polylines.len()
    }

    pub fn polyline(&self, i: usize) -> &[Point2] {
        &self.polylines[i]
    }

    pub fn polylines(&self) -> &[Vec<Point2>] {
        &self.polylines
    }

    pub fn intersection_points(&self) -> &[Point2] {
        &self.intersection_points
    }

    /// Endpoints not shared with another polyline; whether they are
    /// interior tips depends on the meshed domain.
    pub fn tip_points(&self) -> &[Point2] {
        &self.tip_points
    }

    pub fn polyline_length(&self, i: usize) -> f64 {
        self.polylines[i].windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn total_length(&self) -> f64 {
        (0..self.polylines.len())
            .map(|i| self.polyline_length(i))
            .sum()
    }
}

fn segments_cross_improperly(
    a0: Point2,
    a1: Point2,
    b0: Point2,
    b1: Point2,
    adjacent: bool,
    diam: f64,
) -> bool {
    let tol = 1e-12 * diam;
    let d1 = a1.sub(a0);
    let d2 = b1.sub(b0);
    let denom = d1.cross(d2);
    if denom.abs() <= tol * tol {
        // Parallel: reject overlap beyond a shared endpoint.
        if d1.cross(b0.sub(a0)).abs() > tol * d1.norm() {
            return false;
        }
        let proj = |p: Point2| p.sub(a0).dot(d1) / d1.dot(d1);
        let (s0, s1) = (proj(b0), proj(b1));
        let (lo, hi) = (s0.min(s1), s0.max(s1));
        let overlap = hi.min(1.0) - lo.max(0.0);
        return overlap > tol / d1.norm();
    }
    let t = b0.sub(a0).cross(d2) / denom;
    let u = b0.sub(a0).cross(d1) / denom;
    let eps = tol / d1.norm().max(d2.norm());
    if !(t >= -eps && t <= 1.0 + eps && u >= -eps && u <= 1.0 + eps) {
        return false;
    }
    if adjacent {
        // Consecutive segments legitimately share the middle vertex.
        return !(t > 1.0 - eps && u < eps);
    }
    // Touching exactly at mutual endpoints is allowed (closed chains).
    let at_endpoint = (t < eps || t > 1.0 - eps) && (u < eps || u > 1.0 - eps);
    !at_endpoint
}

fn check_declared_crossings(
    pa: &[Point2],
    pb: &[Point2],
    ia: usize,
    ib: usize,
    diam: f64,
) -> Result<()> {
    let tol = 1e-12 * diam;
    for (i, wa) in pa.windows(2).enumerate() {
        for (j, wb) in pb.windows(2).enumerate() {
            let d1 = wa[1].sub(wa[0]);
            let d2 = wb[1].sub(wb[0]);
            let denom = d1.cross(d2);
            if denom.abs() <= tol * tol {
                // Parallel overlap between different polylines is rejected.
                if d1.cross(wb[0].sub(wa[0])).abs() <= tol * d1.norm() {
                    let proj = |p: Point2| p.sub(wa[0]).dot(d1) / d1.dot(d1);
                    let (s0, s1) = (proj(wb[0]), proj(wb[1]));
                    let overlap = s0.max(s1).min(1.0) - s0.min(s1).max(0.0);
                    if overlap > tol / d1.norm() {
                        return Err(Error::FractureGeometry(format!(
                            "polylines {ia} and {ib} overlap along segments {i} and {j}"
                        )));
                    }
                }
                continue;
            }
            let t = wb[0].sub(wa[0]).cross(d2) / denom;
            let u = wb[0].sub(wa[0]).cross(d1) / denom;
            let eps = tol / d1.norm().max(d2.norm());
            if t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps {
                return Err(Error::FractureGeometry(format!(
                    "polylines {ia} and {ib} cross between chain vertices \
                     (segments {i} and {j}); declare the crossing as a shared vertex"
                )));
            }
        }
    }
    Ok(())
}

/// One fracture sub-segment inside a triangle.
#[derive(Debug, Clone)]
pub struct TraceSegment {
    pub start: Point2,
    pub end: Point2,
    /// Owning polyline.
    pub polyline: usize,
    /// Arclength coordinates along the polyline.
    pub arc_start: f64,
    pub arc_end: f64,
}

impl TraceSegment {
    pub fn length(&self) -> f64 {
        self.start.dist(self.end)
    }

    pub fn midpoint(&self) -> Point2 {
        self.start.lerp(self.end, 0.5)
    }
}

/// Per-triangle restriction of a fracture network to a mesh.
#[derive(Debug, Clone)]
pub struct FractureTrace {
    /// Sub-segments per triangle.
    per_triangle: Vec<Vec<TraceSegment>>,
    /// True when every sub-segment coincides with a mesh edge.
    pub union_of_edges: bool,
    total_length: f64,
    /// Sub-segments of each polyline in arclength order as
    /// (arc_start, arc_end, triangle, index within the triangle).
    polyline_pieces: Vec<Vec<(f64, f64, usize, usize)>>,
}

impl FractureTrace {
    pub fn segments(&self, tri: usize) -> &[TraceSegment] {
        &self.per_triangle[tri]
    }

    pub fn num_triangles(&self) -> usize {
        self.per_triangle.len()
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn crossed_triangles(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.per_triangle.len()).filter(|&t| !self.per_triangle[t].is_empty())
    }

    /// Triangle owning the piece of `polyline` containing arclength `s`.
    pub fn owner_at(&self, polyline: usize, s: f64) -> Option<usize> {
        let pieces = &self.polyline_pieces[polyline];
        let idx = pieces.partition_point(|&(_, e, _, _)| e <= s);
        pieces.get(idx).and_then(|&(a, e, t, _)| {
            if s >= a - 1e-12 && s <= e + 1e-12 {
                Some(t)
            } else {
                None
            }
        })
    }

    /// Pieces of `polyline` whose arclength ranges overlap [s0, s1], as
    /// (triangle, index within the triangle).
    pub fn pieces_in_range(&self, polyline: usize, s0: f64, s1: f64) -> Vec<(usize, usize)> {
        let pieces = &self.polyline_pieces[polyline];
        let start = pieces.partition_point(|&(_, e, _, _)| e <= s0 + 1e-12);
        let mut out = Vec::new();
        for &(a, _, t, i) in &pieces[start..] {
            if a >= s1 - 1e-12 {
                break;
            }
            out.push((t, i));
        }
        out
    }
}

/// Computes the per-triangle trace of a fracture network.
///
/// Each polyline's arclength is partitioned over triangles by a sweep over
/// the clipped intervals: overlaps (pieces on shared edges, kept by both
/// neighbors) go to the lower-index triangle, and any uncovered gap means
/// the fracture leaves the meshed domain.
pub fn trace_fracture(mesh: &TriMesh, network: &FractureNetwork) -> Result<FractureTrace> {
    let nt = mesh.num_triangles();
    let mesh_h = mesh.mesh_size();
    let mut per_triangle: Vec<Vec<TraceSegment>> = vec![Vec::new(); nt];
    let mut polyline_pieces: Vec<Vec<(f64, f64, usize, usize)>> = Vec::new();
    let mut total_length = 0.0;

    // Bounding boxes for cheap rejection.
    let boxes: Vec<(Point2, Point2)> = (0..nt)
        .map(|t| {
            let v = mesh.tri_vertices(t);
            (
                Point2::new(
                    v[0].x.min(v[1].x).min(v[2].x),
                    v[0].y.min(v[1].y).min(v[2].y),
                ),
                Point2::new(
                    v[0].x.max(v[1].x).max(v[2].x),
                    v[0].y.max(v[1].y).max(v[2].y),
                ),
            )
        })
        .collect();

    for (pi, poly) in network.polylines().iter().enumerate() {
        let mut pieces: Vec<(f64, f64, usize, usize)> = Vec::new();
        let mut arc_offset = 0.0;
        for w in poly.windows(2) {
            let (p, q) = (w[0], w[1]);
            let seg_len = p.dist(q);
            // Clip against every candidate triangle.
            let mut intervals: Vec<(f64, f64, usize)> = Vec::new();
            let seg_lo = Point2::new(p.x.min(q.x), p.y.min(q.y));
            let seg_hi = Point2::new(p.x.max(q.x), p.y.max(q.y));
            let pad = 1e-9 * mesh_h;
            for t in 0..nt {
                let (lo, hi) = boxes[t];
                if seg_hi.x < lo.x - pad
                    || seg_lo.x > hi.x + pad
                    || seg_hi.y < lo.y - pad
                    || seg_lo.y > hi.y + pad
                {
                    continue;
                }
                if let Some((t0, t1)) = clip_segment_to_triangle(p, q, mesh.tri_vertices(t)) {
                    intervals.push((t0, t1, t));
                }
            }
            // Sweep: sort by start then triangle index; trim overlaps.
            intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.2.cmp(&b.2)));
            let gap_tol = (1e-9 * mesh_h / seg_len).max(1e-12);
            let mut covered = 0.0f64;
            for (t0, t1, t) in intervals {
                let start = t0.max(covered);
                if t1 - start <= gap_tol {
                    continue;
                }
                if start - covered > gap_tol {
                    return Err(Error::FractureOutsideDomain { polyline: pi });
                }
                let a = p.lerp(q, start);
                let b = p.lerp(q, t1);
                let seg = TraceSegment {
                    start: a,
                    end: b,
                    polyline: pi,
                    arc_start: arc_offset + start * seg_len,
                    arc_end: arc_offset + t1 * seg_len,
                };
                total_length += seg.length();
                pieces.push((seg.arc_start, seg.arc_end, t, per_triangle[t].len()));
                per_triangle[t].push(seg);
                covered = t1;
            }
            if 1.0 - covered > gap_tol {
                return Err(Error::FractureOutsideDomain { polyline: pi });
            }
            arc_offset += seg_len;
        }
        polyline_pieces.push(pieces);
    }

    // Edge-alignment flag: every sub-segment must join two mesh vertices
    // of its triangle (within 1e-10 of the mesh size).
    let tol = 1e-10 * mesh_h;
    let mut union_of_edges = true;
    'outer: for (t, segs) in per_triangle.iter().enumerate() {
        let verts = mesh.tri_vertices(t);
        for s in segs {
            let match_vertex = |p: Point2| (0..3).find(|&i| verts[i].dist(p) <= tol);
            match (match_vertex(s.start), match_vertex(s.end)) {
                (Some(a), Some(b)) if a != b => {}
                _ => {
                    union_of_edges = false;
                    break 'outer;
                }
            }
        }
    }

    Ok(FractureTrace {
        per_triangle,
        union_of_edges,
        total_length,
        polyline_pieces,
    })
}

/// Local index (0..3) of the triangle vertices matched by the segment
/// endpoints, when the segment coincides with a full edge of triangle `t`.
pub fn segment_edge_vertices(
    mesh: &TriMesh,
    t: usize,
    seg: &TraceSegment,
) -> Option<(usize, usize)> {
    let verts = mesh.tri_vertices(t);
    let tol = 1e-10 * mesh.tri_diameter(t);
    let find = |p: Point2| (0..3).find(|&i| verts[i].dist(p) <= tol);
    match (find(seg.start), find(seg.end)) {
        (Some(a), Some(b)) if a != b => Some((a, b)),
        _ => None,
    }
}

/// Barycentric coordinates of a trace point in its triangle.
pub fn trace_point_barycentric(mesh: &TriMesh, t: usize, p: Point2) -> [f64; 3] {
    barycentric(p, mesh.tri_vertices(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_structured;

    fn vertical_half() -> FractureNetwork {
        FractureNetwork::new(vec![vec![Point2::new(0.5, 0.0), Point2::new(0.5, 1.0)]]).unwrap()
    }

    #[test]
    fn aligned_trace_is_union_of_edges() {
        let m = unit_square_structured(2).unwrap();
        let trace = trace_fracture(&m, &vertical_half()).unwrap();
        assert!(trace.union_of_edges);
        assert!((trace.total_length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_trace_has_one_piece_per_triangle() {
        let m = unit_square_structured(2).unwrap();
        let network =
            FractureNetwork::new(vec![vec![Point2::new(0.0, 0.3), Point2::new(1.0, 0.3)]]).unwrap();
        let trace = trace_fracture(&m, &network).unwrap();
        assert!(!trace.union_of_edges);
        for t in trace.crossed_triangles() {
            assert_eq!(trace.segments(t).len(), 1);
        }
        assert!((trace.total_length() - 1.0).abs() < 1e-12);
        // Independent clipping oracle: sample the line finely and
        // accumulate per-triangle hit fractions.
        let samples = 20000;
        let mut hits = vec![0usize; m.num_triangles()];
        for k in 0..samples {
            let p = Point2::new((k as f64 + 0.5) / samples as f64, 0.3);
            for t in 0..m.num_triangles() {
                let b = barycentric(p, m.tri_vertices(t));
                if b.iter().all(|&x| x >= 0.0) {
                    hits[t] += 1;
                    break;
                }
            }
        }
        for t in 0..m.num_triangles() {
            let expected: f64 = trace.segments(t).iter().map(|s| s.length()).sum();
            let sampled = hits[t] as f64 / samples as f64;
            assert!(
                (expected - sampled).abs() < 2e-3,
                "triangle {t}: trace {expected} vs sampled {sampled}"
            );
        }
    }

    #[test]
    fn fracture_leaving_domain_errors() {
        let m = unit_square_structured(2).unwrap();
        let network =
            FractureNetwork::new(vec![vec![Point2::new(0.5, 0.5), Point2::new(1.5, 0.5)]]).unwrap();
        assert!(matches!(
            trace_fracture(&m, &network),
            Err(Error::FractureOutsideDomain { .. })
        ));
    }

    #[test]
    fn undeclared_crossing_rejected() {
        let r = FractureNetwork::new(vec![
            vec![Point2::new(0.1, 0.5), Point2::new(0.9, 0.5)],
            vec![Point2::new(0.5, 0.1), Point2::new(0.5, 0.9)],
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn declared_crossing_accepted() {
        let n = FractureNetwork::new(vec![
            vec![
                Point2::new(0.1, 0.5),
                Point2::new(0.5, 0.5),
                Point2::new(0.9, 0.5),
            ],
            vec![
                Point2::new(0.5, 0.1),
                Point2::new(0.5, 0.5),
                Point2::new(0.5, 0.9),
            ],
        ])
        .unwrap();
        assert_eq!(n.intersection_points().len(), 1);
        // All four loose ends are tips.
        assert_eq!(n.tip_points().len(), 4);
    }

    #[test]
    fn tiny_segment_rejected() {
        let r = FractureNetwork::new(vec![vec![
            Point2::new(0.0, 0.0),
            Point2::new(1e-14, 0.0),
            Point2::new(1.0, 1.0),
        ]]);
        assert!(r.is_err());
    }

    #[test]
    fn length_conserved_on_random_rotated_lines() {
        let m = unit_square_structured(4).unwrap();
        let mut state = 42u64;
        let mut next = move || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            // Random chord through the unit square interior.
            let cx = 0.3 + 0.4 * next();
            let cy = 0.3 + 0.4 * next();
            let angle = std::f64::consts::PI * next();
            let (s, c) = angle.sin_cos();
            // Walk to the boundary in both directions, shrink slightly.
            let t_max = [
                if c > 1e-9 {
                    (1.0 - cx) / c
                } else {
                    f64::INFINITY
                },
                if c < -1e-9 { -cx / c } else { f64::INFINITY },
                if s > 1e-9 {
                    (1.0 - cy) / s
                } else {
                    f64::INFINITY
                },
                if s < -1e-9 { -cy / s } else { f64::INFINITY },
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
                * 0.95;
            let t_min = [
                if c > 1e-9 { cx / c } else { f64::INFINITY },
                if c < -1e-9 {
                    (cx - 1.0) / c
                } else {
                    f64::INFINITY
                },
                if s > 1e-9 { cy / s } else { f64::INFINITY },
                if s < -1e-9 {
                    (cy - 1.0) / s
                } else {
                    f64::INFINITY
                },
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
                * 0.95;
            let p = Point2::new(cx - t_min * c, cy - t_min * s);
            let q = Point2::new(cx + t_max * c, cy + t_max * s);
            let network = FractureNetwork::new(vec![vec![p, q]]).unwrap();
            let trace = trace_fracture(&m, &network).unwrap();
            let expected = p.dist(q);
            assert!(
                (trace.total_length() - expected).abs() <= 1e-10 * expected,
                "length {} vs {}",
                trace.total_length(),
                expected
            );
        }
    }

    #[test]
    fn subsegments_stay_in_their_triangles() {
        let m = unit_square_structured(3).unwrap();
        let network =
            FractureNetwork::new(vec![vec![Point2::new(0.05, 0.1), Point2::new(0.95, 0.77)]])
                .unwrap();
        let trace = trace_fracture(&m, &network).unwrap();
        for t in trace.crossed_triangles() {
            for s in trace.segments(t) {
                for p in [s.start, s.end, s.midpoint()] {
                    let b = trace_point_barycentric(&m, t, p);
                    assert!(b.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
                }
            }
        }
    }

    #[test]
    fn owner_lookup_by_arclength() {
        let m = unit_square_structured(2).unwrap();
        let trace = trace_fracture(&m, &vertical_half()).unwrap();
        for t in trace.crossed_triangles() {
            for s in trace.segments(t) {
                let mid = 0.5 * (s.arc_start + s.arc_end);
                assert_eq!(trace.owner_at(0, mid), Some(t));
            }
        }
    }
}
