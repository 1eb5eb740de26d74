//! Convex polygon helpers in the workspace plane.
//!
//! Every polygon here is a list of vertices in counterclockwise order. The
//! clipping routines assume the clip polygon is convex; the subject polygon
//! may be any simple polygon, though in practice both are convex.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point or direction in the workspace plane (meters).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `theta` from the +x axis.
    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise rotation by `theta` radians.
    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Left-hand normal (rotation by +π/2).
    pub fn perp(self) -> Self {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Signed area; positive for counterclockwise winding.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.cross(b);
    }
    0.5 * acc
}

pub fn area(poly: &[Vec2]) -> f64 {
    signed_area(poly).abs()
}

/// Area centroid, falling back to the vertex mean for degenerate input.
pub fn centroid(poly: &[Vec2]) -> Vec2 {
    let a = signed_area(poly);
    if a.abs() < 1e-18 {
        let n = poly.len().max(1) as f64;
        let sum = poly.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
        return sum * (1.0 / n);
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let w = p.cross(q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Vec2::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// True when `poly` is strictly convex and counterclockwise.
pub fn is_convex_ccw(poly: &[Vec2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        (b - a).cross(c - b) > 0.0
    })
}

/// Point-in-convex-polygon test with an outward tolerance `eps` (meters).
pub fn convex_contains(poly: &[Vec2], p: Vec2, eps: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let edge = b - a;
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        // signed distance of p to the left of edge a->b
        if edge.cross(p - a) / len < -eps {
            return false;
        }
    }
    true
}

/// Clip `subject` by the half-plane `{p : n·p >= offset}`.
pub fn clip_halfplane(subject: &[Vec2], normal: Vec2, offset: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(subject.len() + 2);
    let n = subject.len();
    for i in 0..n {
        let cur = subject[i];
        let nxt = subject[(i + 1) % n];
        let dc = normal.dot(cur) - offset;
        let dn = normal.dot(nxt) - offset;
        if dc >= 0.0 {
            out.push(cur);
        }
        if (dc >= 0.0) != (dn >= 0.0) {
            let t = dc / (dc - dn);
            out.push(cur + (nxt - cur) * t);
        }
    }
    out
}

/// Sutherland–Hodgman intersection of `subject` with convex `clip`.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let normal = (b - a).perp();
        out = clip_halfplane(&out, normal, normal.dot(a));
    }
    out
}

/// Area of the intersection of two convex polygons.
pub fn overlap_area(a: &[Vec2], b: &[Vec2]) -> f64 {
    area(&clip_convex(a, b))
}

/// Andrew's monotone chain; returns the hull counterclockwise without
/// collinear points. Fewer than three points are returned as-is (deduplicated).
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-15 && (a.y - b.y).abs() < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for &p in pts.iter() {
        while hull.len() >= 2 {
            let k = hull.len();
            if (hull[k - 1] - hull[k - 2]).cross(p - hull[k - 1]) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len {
            let k = hull.len();
            if (hull[k - 1] - hull[k - 2]).cross(p - hull[k - 1]) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Distance from `p` to segment `a`–`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// True when point `p` lies within `eps` of the convex hull `hull`
/// (which may be degenerate: a point or a segment).
pub fn hull_contains(hull: &[Vec2], p: Vec2, eps: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].distance(p) <= eps,
        2 => point_segment_distance(p, hull[0], hull[1]) <= eps,
        _ => convex_contains(hull, p, eps),
    }
}

/// Separating-axis overlap test for convex polygons; touching counts as
/// overlapping only when the penetration exceeds `eps`.
pub fn convex_overlap(a: &[Vec2], b: &[Vec2], eps: f64) -> bool {
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let edge = poly[(i + 1) % n] - poly[i];
            let len = edge.norm();
            if len == 0.0 {
                continue;
            }
            let axis = edge.perp() * (1.0 / len);
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            if amax <= bmin + eps || bmax <= amin + eps {
                return false;
            }
        }
    }
    true
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
        let d = axis.dot(p);
        (lo.min(d), hi.max(d))
    })
}

/// Minimum distance between two convex polygons; zero when they overlap.
pub fn convex_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    if convex_overlap(a, b, 0.0) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        let n = q.len();
        for &v in p {
            for i in 0..n {
                best = best.min(point_segment_distance(v, q[i], q[(i + 1) % n]));
            }
        }
    }
    best
}

/// Extent of `poly` projected onto unit direction `dir`.
pub fn extent_along(poly: &[Vec2], dir: Vec2) -> f64 {
    let (lo, hi) = project(poly, dir);
    hi - lo
}

/// Axis-aligned bounding box `(min, max)`.
pub fn aabb(poly: &[Vec2]) -> (Vec2, Vec2) {
    poly.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
    )
}

/// Axis-aligned rectangle `[lo, hi]` as a counterclockwise polygon.
pub fn rect(lo: Vec2, hi: Vec2) -> Vec<Vec2> {
    vec![Vec2::new(lo.x, lo.y), Vec2::new(hi.x, lo.y), Vec2::new(hi.x, hi.y), Vec2::new(lo.x, hi.y)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(c: Vec2, h: f64) -> Vec<Vec2> {
        rect(c - Vec2::new(h, h), c + Vec2::new(h, h))
    }

    #[test]
    fn clip_of_offset_squares() {
        let a = square(Vec2::ZERO, 1.0);
        let b = square(Vec2::new(1.0, 1.0), 1.0);
        assert!((overlap_area(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn touching_squares_have_no_area() {
        let a = square(Vec2::ZERO, 1.0);
        let b = square(Vec2::new(2.0, 0.0), 1.0);
        assert!(overlap_area(&a, &b) < 1e-12);
        assert!(!convex_overlap(&a, &b, 1e-12));
        assert!(convex_distance(&a, &b) < 1e-12);
    }

    #[test]
    fn distance_between_separated_squares() {
        let a = square(Vec2::ZERO, 1.0);
        let b = square(Vec2::new(5.0, 0.0), 1.0);
        assert!((convex_distance(&a, &b) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts =
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0), Vec2::new(0.5, 0.5)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(signed_area(&hull) > 0.0);
    }

    #[test]
    fn centroid_of_triangle() {
        let tri = [Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(0.0, 3.0)];
        let c = centroid(&tri);
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }
}
