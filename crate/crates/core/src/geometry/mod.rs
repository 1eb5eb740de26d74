//! Shape primitives, poses, and the height/footprint queries the rest of
//! the crate is built on.
//!
//! A [`Pose`] places a shape's center of mass at `(x, y, z)` with a yaw about
//! the vertical axis. `z` is the center of the shape's vertical extent, so a
//! 3 cm cube resting on the ground has `z = 0.015`.
//!
//! Heights are reported in world frame: [`height_at`] answers "how high is
//! the top surface of this shape in this column", which is exactly what a
//! top-down depth camera sees.

pub mod polygon;

pub use polygon::Vec2;

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Tolerance for exact geometric comparisons (meters).
pub const GEOM_EPS: f64 = 1e-9;

/// Overlaps smaller than this (m²) are treated as touching, not supporting.
pub const AREA_EPS: f64 = 1e-7;

/// Number of polygon segments used when a cylinder footprint must be
/// treated as a polygon (support and clearance queries).
pub const CYLINDER_SEGMENTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("point ({x:.6}, {y:.6}) is outside the workspace")]
    OutOfWorkspace { x: f64, y: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Pose { x, y, z, yaw }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// World point of a local-frame offset.
    pub fn to_world(&self, local: Vec2) -> Vec2 {
        self.xy() + local.rotate(self.yaw)
    }

    /// Local-frame coordinates of a world point.
    pub fn to_local(&self, world: Vec2) -> Vec2 {
        (world - self.xy()).rotate(-self.yaw)
    }
}

/// Geometric primitive. All dimensions are full lengths in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Cuboid {
        lx: f64,
        ly: f64,
        lz: f64,
    },
    /// Ridge runs along local x at the center of the y extent.
    TriangularPrism {
        lx: f64,
        ly: f64,
        lz: f64,
    },
    Cylinder {
        radius: f64,
        height: f64,
    },
    /// Extruded convex polygon; vertices are local-frame, counterclockwise,
    /// with the area centroid at the origin.
    ConvexPrism {
        footprint: Vec<Vec2>,
        height: f64,
    },
    /// Open box: rectangular cavity of `depth` inside walls of `wall`
    /// thickness. The floor thickness is `lz - depth`.
    Container {
        lx: f64,
        ly: f64,
        lz: f64,
        wall: f64,
        depth: f64,
    },
    Slab {
        lx: f64,
        ly: f64,
        lz: f64,
    },
}

/// Planar height function `h(p) = offset + grad · p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub offset: f64,
    pub grad: Vec2,
}

impl Plane {
    pub fn flat(h: f64) -> Self {
        Plane { offset: h, grad: Vec2::ZERO }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        self.offset + self.grad.dot(p)
    }

    pub fn is_flat(&self) -> bool {
        self.grad == Vec2::ZERO
    }
}

/// A piece of a shape's top surface: a convex region with a planar height.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePatch {
    pub region: Vec<Vec2>,
    pub plane: Plane,
}

impl Shape {
    pub fn cuboid(lx: f64, ly: f64, lz: f64) -> Self {
        Shape::Cuboid { lx, ly, lz }
    }

    pub fn cube(side: f64) -> Self {
        Shape::Cuboid { lx: side, ly: side, lz: side }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidShape(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Shape::Cuboid { lx, ly, lz } | Shape::TriangularPrism { lx, ly, lz } | Shape::Slab { lx, ly, lz } => {
                positive("lx", *lx)?;
                positive("ly", *ly)?;
                positive("lz", *lz)
            }
            Shape::Cylinder { radius, height } => {
                positive("radius", *radius)?;
                positive("height", *height)
            }
            Shape::ConvexPrism { footprint, height } => {
                positive("height", *height)?;
                if !(3..=6).contains(&footprint.len()) {
                    return Err(GeometryError::InvalidShape(format!(
                        "convex prism needs 3 to 6 vertices, got {}",
                        footprint.len()
                    )));
                }
                if !polygon::is_convex_ccw(footprint) {
                    return Err(GeometryError::InvalidShape(
                        "convex prism footprint must be convex and counterclockwise".into(),
                    ));
                }
                if polygon::area(footprint) <= 1e-8 {
                    return Err(GeometryError::InvalidShape("degenerate footprint".into()));
                }
                Ok(())
            }
            Shape::Container { lx, ly, lz, wall, depth } => {
                positive("lx", *lx)?;
                positive("ly", *ly)?;
                positive("lz", *lz)?;
                positive("wall", *wall)?;
                positive("depth", *depth)?;
                if 2.0 * wall >= lx.min(*ly) {
                    return Err(GeometryError::InvalidShape("walls leave no cavity".into()));
                }
                if depth > lz {
                    return Err(GeometryError::InvalidShape("cavity deeper than container".into()));
                }
                Ok(())
            }
        }
    }

    /// Vertical extent.
    pub fn height(&self) -> f64 {
        match self {
            Shape::Cuboid { lz, .. }
            | Shape::TriangularPrism { lz, .. }
            | Shape::Slab { lz, .. }
            | Shape::Container { lz, .. } => *lz,
            Shape::Cylinder { height, .. } | Shape::ConvexPrism { height, .. } => *height,
        }
    }

    /// Half extents of the local-frame bounding box.
    pub fn half_extents(&self) -> Vec2 {
        match self {
            Shape::Cuboid { lx, ly, .. }
            | Shape::TriangularPrism { lx, ly, .. }
            | Shape::Slab { lx, ly, .. }
            | Shape::Container { lx, ly, .. } => Vec2::new(lx / 2.0, ly / 2.0),
            Shape::Cylinder { radius, .. } => Vec2::new(*radius, *radius),
            Shape::ConvexPrism { footprint, .. } => {
                let (lo, hi) = polygon::aabb(footprint);
                Vec2::new(lo.x.abs().max(hi.x.abs()), lo.y.abs().max(hi.y.abs()))
            }
        }
    }

    /// Radius of the smallest origin-centered circle containing the footprint.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Cylinder { radius, .. } => *radius,
            Shape::ConvexPrism { footprint, .. } => footprint.iter().map(|p| p.norm()).fold(0.0, f64::max),
            _ => self.half_extents().norm(),
        }
    }

    /// Footprint polygon in the local frame. Cylinders are approximated by an
    /// inscribed regular polygon.
    pub fn local_footprint(&self) -> Vec<Vec2> {
        match self {
            Shape::Cylinder { radius, .. } => (0..CYLINDER_SEGMENTS)
                .map(|i| Vec2::from_angle(TAU * i as f64 / CYLINDER_SEGMENTS as f64) * *radius)
                .collect(),
            Shape::ConvexPrism { footprint, .. } => footprint.clone(),
            _ => {
                let h = self.half_extents();
                polygon::rect(-h, h)
            }
        }
    }

    /// Top-surface height above the shape's base at local point `p`, or
    /// `None` when `p` misses the footprint.
    pub fn local_top(&self, p: Vec2) -> Option<f64> {
        let inside_box = |hx: f64, hy: f64| p.x.abs() <= hx + GEOM_EPS && p.y.abs() <= hy + GEOM_EPS;
        match self {
            Shape::Cuboid { lx, ly, lz } | Shape::Slab { lx, ly, lz } => inside_box(lx / 2.0, ly / 2.0).then_some(*lz),
            Shape::TriangularPrism { lx, ly, lz } => {
                if !inside_box(lx / 2.0, ly / 2.0) {
                    return None;
                }
                let frac = (p.y.abs() / (ly / 2.0)).min(1.0);
                Some(lz * (1.0 - frac))
            }
            Shape::Cylinder { radius, height } => (p.norm() <= radius + GEOM_EPS).then_some(*height),
            Shape::ConvexPrism { footprint, height } => {
                polygon::convex_contains(footprint, p, GEOM_EPS).then_some(*height)
            }
            Shape::Container { lx, ly, lz, wall, depth } => {
                let (hx, hy) = (lx / 2.0, ly / 2.0);
                if !inside_box(hx, hy) {
                    return None;
                }
                let in_cavity = p.x.abs() < hx - wall && p.y.abs() < hy - wall;
                Some(if in_cavity { lz - depth } else { *lz })
            }
        }
    }

    /// Decomposition of the top surface into convex planar patches, local
    /// frame, heights relative to the base.
    pub fn local_patches(&self) -> Vec<SurfacePatch> {
        match self {
            Shape::TriangularPrism { lx, ly, lz } => {
                let (hx, hy) = (lx / 2.0, ly / 2.0);
                let slope = lz / hy;
                vec![
                    SurfacePatch {
                        region: polygon::rect(Vec2::new(-hx, -hy), Vec2::new(hx, 0.0)),
                        plane: Plane { offset: *lz, grad: Vec2::new(0.0, slope) },
                    },
                    SurfacePatch {
                        region: polygon::rect(Vec2::new(-hx, 0.0), Vec2::new(hx, hy)),
                        plane: Plane { offset: *lz, grad: Vec2::new(0.0, -slope) },
                    },
                ]
            }
            Shape::Container { lx, ly, lz, wall, depth } => {
                let (hx, hy) = (lx / 2.0, ly / 2.0);
                let (cx, cy) = (hx - wall, hy - wall);
                let top = Plane::flat(*lz);
                let strip = |lo: Vec2, hi: Vec2| SurfacePatch { region: polygon::rect(lo, hi), plane: top };
                vec![
                    strip(Vec2::new(-hx, -hy), Vec2::new(-cx, hy)),
                    strip(Vec2::new(cx, -hy), Vec2::new(hx, hy)),
                    strip(Vec2::new(-cx, -hy), Vec2::new(cx, -cy)),
                    strip(Vec2::new(-cx, cy), Vec2::new(cx, hy)),
                    SurfacePatch {
                        region: polygon::rect(Vec2::new(-cx, -cy), Vec2::new(cx, cy)),
                        plane: Plane::flat(lz - depth),
                    },
                ]
            }
            _ => vec![SurfacePatch { region: self.local_footprint(), plane: Plane::flat(self.height()) }],
        }
    }

    /// Local-frame cavity rectangle of a container (half extents).
    pub fn cavity_half_extents(&self) -> Option<Vec2> {
        match self {
            Shape::Container { lx, ly, wall, .. } => Some(Vec2::new(lx / 2.0 - wall, ly / 2.0 - wall)),
            _ => None,
        }
    }
}

/// Height of the shape's base for a pose (bottom of its vertical extent).
pub fn base_height(shape: &Shape, pose: &Pose) -> f64 {
    pose.z - shape.height() / 2.0
}

/// World-frame top height of `shape` at column `query`, or `None` on a miss.
pub fn height_at(shape: &Shape, pose: &Pose, query: Vec2) -> Option<f64> {
    shape.local_top(pose.to_local(query)).map(|h| base_height(shape, pose) + h)
}

/// True iff the column at `query` intersects the outer footprint.
pub fn footprint_contains(shape: &Shape, pose: &Pose, query: Vec2) -> bool {
    let p = pose.to_local(query);
    match shape {
        Shape::Cylinder { radius, .. } => p.norm() <= radius + GEOM_EPS,
        Shape::ConvexPrism { footprint, .. } => polygon::convex_contains(footprint, p, GEOM_EPS),
        _ => {
            let h = shape.half_extents();
            p.x.abs() <= h.x + GEOM_EPS && p.y.abs() <= h.y + GEOM_EPS
        }
    }
}

/// Footprint polygon in world frame.
pub fn world_footprint(shape: &Shape, pose: &Pose) -> Vec<Vec2> {
    shape.local_footprint().into_iter().map(|p| pose.to_world(p)).collect()
}

/// Top-surface patches in world frame with world-frame height planes.
pub fn world_patches(shape: &Shape, pose: &Pose) -> Vec<SurfacePatch> {
    let base = base_height(shape, pose);
    let c = pose.xy();
    shape
        .local_patches()
        .into_iter()
        .map(|patch| {
            let grad = patch.plane.grad.rotate(pose.yaw);
            SurfacePatch {
                region: patch.region.into_iter().map(|p| pose.to_world(p)).collect(),
                plane: Plane { offset: base + patch.plane.offset - grad.dot(c), grad },
            }
        })
        .collect()
}

/// Map an angle into `[0, π)` when `half_rotation` is set, else `[0, 2π)`.
pub fn normalize_yaw(theta: f64, half_rotation: bool) -> Result<f64, GeometryError> {
    if !theta.is_finite() {
        return Err(GeometryError::InvalidInput(format!("non-finite angle {theta}")));
    }
    let period = if half_rotation { PI } else { TAU };
    let mut r = theta.rem_euclid(period);
    // rem_euclid can round up to exactly `period`
    if r >= period {
        r -= period;
    }
    Ok(r)
}

/// Angular distance between two yaws modulo `period`.
pub fn yaw_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Square pixel grid laid over the workspace. Row index follows y, column
/// index follows x; pixel `(0, 0)` covers the `(x_min, y_min)` corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub size: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, size: usize) -> Result<Self, GeometryError> {
        let (ex, ey) = (x_max - x_min, y_max - y_min);
        if !(ex > 0.0 && ey > 0.0) || size == 0 {
            return Err(GeometryError::InvalidInput("empty grid".into()));
        }
        if (ex - ey).abs() > 1e-9 {
            return Err(GeometryError::InvalidInput(format!("workspace must be square, got {ex} x {ey}")));
        }
        Ok(GridSpec { x_min, x_max, y_min, y_max, size })
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn pitch(&self) -> f64 {
        self.extent() / self.size as f64
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Pixel containing `p`. Points on a cell boundary go to the larger index.
    pub fn world_to_pixel(&self, p: Vec2) -> Result<(usize, usize), GeometryError> {
        if p.x < self.x_min - GEOM_EPS
            || p.x > self.x_max + GEOM_EPS
            || p.y < self.y_min - GEOM_EPS
            || p.y > self.y_max + GEOM_EPS
            || !p.x.is_finite()
            || !p.y.is_finite()
        {
            return Err(GeometryError::OutOfWorkspace { x: p.x, y: p.y });
        }
        let idx = |v: f64, lo: f64| {
            let f = (v - lo) / self.pitch() + 1e-9;
            (f.floor().max(0.0) as usize).min(self.size - 1)
        };
        Ok((idx(p.y, self.y_min), idx(p.x, self.x_min)))
    }

    /// Center of pixel `(row, col)`.
    pub fn pixel_to_world(&self, row: usize, col: usize) -> Vec2 {
        let pitch = self.pitch();
        Vec2::new(self.x_min + (col as f64 + 0.5) * pitch, self.y_min + (row as f64 + 0.5) * pitch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CUBE: Shape = Shape::Cuboid { lx: 0.03, ly: 0.03, lz: 0.03 };

    fn settled_cube() -> Pose {
        Pose::new(0.2, 0.2, 0.015, 0.0)
    }

    #[test]
    fn cube_center_column() {
        let h = height_at(&CUBE, &settled_cube(), Vec2::new(0.2, 0.2)).unwrap();
        assert!((h - 0.03).abs() < 1e-12);
        assert_eq!(height_at(&CUBE, &settled_cube(), Vec2::new(0.25, 0.2)), None);
    }

    /// Linear interpolation between the ridge (full height) and the base
    /// edges (zero) is the reference profile for a triangular prism.
    fn prism_profile_oracle(lz: f64, half_width: f64, y: f64) -> f64 {
        let t = y.abs() / half_width;
        (1.0 - t) * lz + t * 0.0
    }

    #[test]
    fn prism_profile_matches_interpolation() {
        let prism = Shape::TriangularPrism { lx: 0.03, ly: 0.03, lz: 0.03 };
        let pose = Pose::new(0.0, 0.0, 0.015, 0.0);
        for k in 0..=30 {
            let y = -0.015 + 0.001 * k as f64;
            let h = height_at(&prism, &pose, Vec2::new(0.0, y)).unwrap();
            assert!((h - prism_profile_oracle(0.03, 0.015, y)).abs() < 1e-12, "y={y}");
        }
        assert!((height_at(&prism, &pose, Vec2::ZERO).unwrap() - 0.03).abs() < 1e-12);
        assert!(height_at(&prism, &pose, Vec2::new(0.0, 0.015)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rotated_cube_corner_is_outside() {
        let pose = Pose::new(0.2, 0.2, 0.015, PI / 4.0);
        // oracle: rotate the query into the local frame, compare to half extents
        let q = Vec2::new(0.215, 0.215);
        let local = (q - pose.xy()).rotate(-PI / 4.0);
        let oracle = local.x.abs() <= 0.015 && local.y.abs() <= 0.015;
        assert!(!oracle);
        assert_eq!(footprint_contains(&CUBE, &pose, q), oracle);
        assert!(footprint_contains(&CUBE, &settled_cube(), Vec2::new(0.2, 0.2)));
    }

    #[test]
    fn cylinder_radius_test() {
        let cyl = Shape::Cylinder { radius: 0.025, height: 0.14 };
        let pose = Pose::new(0.2, 0.2, 0.07, 0.0);
        assert!(footprint_contains(&cyl, &pose, Vec2::new(0.2, 0.224)));
        assert!(!footprint_contains(&cyl, &pose, Vec2::new(0.2, 0.226)));
    }

    #[test]
    fn container_walls_and_floor() {
        let bin = Shape::Container { lx: 0.176, ly: 0.144, lz: 0.08, wall: 0.008, depth: 0.072 };
        let pose = Pose::new(0.0, 0.0, 0.04, 0.0);
        assert!((height_at(&bin, &pose, Vec2::ZERO).unwrap() - 0.008).abs() < 1e-12);
        assert!((height_at(&bin, &pose, Vec2::new(0.085, 0.0)).unwrap() - 0.08).abs() < 1e-12);
        assert_eq!(height_at(&bin, &pose, Vec2::new(0.09, 0.0)), None);
    }

    #[test]
    fn normalize_examples() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(normalize_yaw(3.0 * PI / 2.0, true).unwrap(), PI / 2.0));
        assert!(close(normalize_yaw(-PI / 4.0, false).unwrap(), 7.0 * PI / 4.0));
        assert!(close(normalize_yaw(PI, true).unwrap(), 0.0));
        assert!(normalize_yaw(f64::NAN, true).is_err());
        assert!(normalize_yaw(f64::INFINITY, false).is_err());
    }

    #[test]
    fn grid_pitch_and_corners() {
        let grid = GridSpec::new(0.25, 0.65, -0.2, 0.2, 128).unwrap();
        assert!((grid.pitch() - 0.4 / 128.0).abs() < 1e-15);
        assert!((grid.pitch() - 0.003125).abs() < 1e-15);
        assert_eq!(grid.world_to_pixel(Vec2::new(0.25, -0.2)).unwrap(), (0, 0));
        assert_eq!(grid.world_to_pixel(grid.center()).unwrap(), (64, 64));
        assert!(matches!(grid.world_to_pixel(Vec2::new(0.75, 0.0)), Err(GeometryError::OutOfWorkspace { .. })));
    }

    #[test]
    fn patches_agree_with_height_at() {
        let shapes = [
            Shape::TriangularPrism { lx: 0.12, ly: 0.03, lz: 0.03 },
            Shape::Container { lx: 0.176, ly: 0.144, lz: 0.08, wall: 0.008, depth: 0.072 },
            CUBE,
        ];
        let pose = Pose::new(0.4, -0.05, 0.1, 0.7);
        for shape in &shapes {
            let patches = world_patches(shape, &pose);
            for i in 0..40 {
                for j in 0..40 {
                    let q = Vec2::new(0.3 + 0.005 * i as f64, -0.15 + 0.005 * j as f64);
                    let from_patches = patches
                        .iter()
                        .filter(|p| polygon::convex_contains(&p.region, q, GEOM_EPS))
                        .map(|p| p.plane.eval(q))
                        .fold(None, |acc: Option<f64>, h| Some(acc.map_or(h, |a| a.max(h))));
                    let direct = height_at(shape, &pose, q);
                    match (from_patches, direct) {
                        (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{shape:?} {q:?}"),
                        (None, None) => {}
                        other => panic!("mismatch {other:?} at {q:?} for {shape:?}"),
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_periodic(theta in -50.0f64..50.0, half in any::<bool>()) {
            let once = normalize_yaw(theta, half).unwrap();
            prop_assert_eq!(normalize_yaw(once, half).unwrap(), once);
            let period = if half { PI } else { TAU };
            prop_assert!((0.0..period).contains(&once));
            let shifted = normalize_yaw(theta + period, half).unwrap();
            prop_assert!(yaw_distance(shifted, once, period) < 1e-9);
        }

        #[test]
        fn footprint_invariant_under_rigid_motion(
            qx in -0.05f64..0.05, qy in -0.05f64..0.05, yaw in 0.0f64..TAU,
            tx in -0.3f64..0.3, ty in -0.3f64..0.3, phi in 0.0f64..TAU,
        ) {
            let shape = Shape::TriangularPrism { lx: 0.06, ly: 0.03, lz: 0.03 };
            let pose = Pose::new(0.0, 0.0, 0.015, yaw);
            let q = Vec2::new(qx, qy);
            let moved_pose = Pose::new(tx, ty, 0.015, yaw + phi);
            let moved_q = Vec2::new(tx, ty) + q.rotate(phi);
            let a = footprint_contains(&shape, &pose, q);
            let b = footprint_contains(&shape, &moved_pose, moved_q);
            // skip queries within rounding distance of the boundary
            let local = pose.to_local(q);
            let margin = (0.03 - local.x.abs()).abs().min((0.015 - local.y.abs()).abs());
            prop_assume!(margin > 1e-9);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn height_non_negative_for_grounded_shapes(qx in -0.1f64..0.1, qy in -0.1f64..0.1, yaw in 0.0f64..TAU) {
            let shape = Shape::TriangularPrism { lx: 0.12, ly: 0.03, lz: 0.03 };
            let pose = Pose::new(0.0, 0.0, 0.015, yaw);
            if let Some(h) = height_at(&shape, &pose, Vec2::new(qx, qy)) {
                prop_assert!(h >= 0.0);
            }
        }

        #[test]
        fn pixel_mapping_is_bijective(row in 0usize..128, col in 0usize..128) {
            let grid = GridSpec::new(0.25, 0.65, -0.2, 0.2, 128).unwrap();
            let c = grid.pixel_to_world(row, col);
            prop_assert_eq!(grid.world_to_pixel(c).unwrap(), (row, col));
        }

        #[test]
        fn world_round_trip_lands_on_center(x in 0.25f64..0.65, y in -0.2f64..0.2) {
            let grid = GridSpec::new(0.25, 0.65, -0.2, 0.2, 128).unwrap();
            let (r, c) = grid.world_to_pixel(Vec2::new(x, y)).unwrap();
            let back = grid.pixel_to_world(r, c);
            prop_assert!((back.x - x).abs() <= grid.pitch() / 2.0 + 1e-9);
            prop_assert!((back.y - y).abs() <= grid.pitch() / 2.0 + 1e-9);
        }
    }
}
