//! Planar points and the geometric predicates used by mesh and trace code.

/// Point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn add(&self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(&self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(&self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(&self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product self x other.
    pub fn cross(&self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        self.dot(*self).sqrt()
    }

    pub fn dist(&self, other: Point2) -> f64 {
        self.sub(other).norm()
    }

    /// Linear interpolation self + t (other - self).
    pub fn lerp(&self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }
}

/// Twice the signed area of triangle (a, b, c); positive for CCW.
pub fn signed_area2(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// Barycentric coordinates of p in triangle (a, b, c).
pub fn barycentric(p: Point2, tri: [Point2; 3]) -> [f64; 3] {
    let area2 = signed_area2(tri[0], tri[1], tri[2]);
    let l0 = signed_area2(p, tri[1], tri[2]) / area2;
    let l1 = signed_area2(tri[0], p, tri[2]) / area2;
    let l2 = 1.0 - l0 - l1;
    [l0, l1, l2]
}

/// Gradients of the three P1 basis functions on triangle `tri`.
pub fn p1_gradients(tri: [Point2; 3]) -> [Point2; 3] {
    let area2 = signed_area2(tri[0], tri[1], tri[2]);
    let [a, b, c] = tri;
    [
        Point2::new(b.y - c.y, c.x - b.x).scale(1.0 / area2),
        Point2::new(c.y - a.y, a.x - c.x).scale(1.0 / area2),
        Point2::new(a.y - b.y, b.x - a.x).scale(1.0 / area2),
    ]
}

/// Clips the parametric segment p + t (q - p), t in [0, 1], against a CCW
/// triangle. Returns the surviving parameter interval, or None when the
/// overlap is shorter than `1e-10` of the local diameter.
///
/// The inside test tolerates points up to 1e-10 of the local element
/// diameter outside an edge, so traces along shared edges are kept by both
/// neighbors and deduplicated downstream.
pub fn clip_segment_to_triangle(p: Point2, q: Point2, tri: [Point2; 3]) -> Option<(f64, f64)> {
    let diam = tri[0]
        .dist(tri[1])
        .max(tri[1].dist(tri[2]))
        .max(tri[2].dist(tri[0]));
    let seg_len = p.dist(q);
    if seg_len == 0.0 {
        return None;
    }
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for e in 0..3 {
        let a = tri[e];
        let b = tri[(e + 1) % 3];
        let edge = b.sub(a);
        let c0 = edge.cross(p.sub(a));
        let cd = edge.cross(q.sub(p));
        // Cross products scale like (edge length) x (distance); tolerance
        // 1e-10 relative to the local element diameter.
        let tol = 1e-10 * edge.norm() * diam;
        if cd.abs() <= 1e-12 * edge.norm() * seg_len {
            // Segment parallel to this edge direction.
            if c0 < -tol {
                return None;
            }
            continue;
        }
        // Exact crossing parameter; the tolerance only guards acceptance,
        // so emitted endpoints stay on the true intersection.
        let t_cross = -c0 / cd;
        if cd > 0.0 {
            t0 = t0.max(t_cross);
        } else {
            t1 = t1.min(t_cross);
        }
    }
    let min_len = 1e-10 * diam / seg_len;
    if t1 - t0 > min_len {
        Some((t0, t1))
    } else {
        None
    }
}
