//! Surface queries under a footprint: what an object would land on, and
//! whether it would stay there.

use super::SimObject;
use crate::geometry::polygon::{self, Vec2};
use crate::geometry::{Plane, AREA_EPS, GEOM_EPS};

/// Vertical slack when deciding which surfaces lie below an object's base.
pub const SETTLE_TOLERANCE: f64 = 1e-6;

/// Height band below the landing height that still counts as contact.
pub const SUPPORT_TOLERANCE: f64 = 0.003;

/// One patch of another object's top surface intersecting a footprint.
#[derive(Clone, Debug)]
pub struct SurfaceContact {
    pub object: u32,
    /// Highest point of the patch over the intersection.
    pub height: f64,
    pub region: Vec<Vec2>,
    pub plane: Plane,
}

/// Every top-surface patch of `objects` that overlaps `footprint` with
/// positive area. With `ceiling`, patches whose highest point over the
/// footprint exceeds `ceiling + SETTLE_TOLERANCE` are ignored (they belong to
/// objects beside or above, not below).
pub fn surfaces_under<'a, I>(objects: I, footprint: &[Vec2], ceiling: Option<f64>) -> Vec<SurfaceContact>
where
    I: IntoIterator<Item = &'a SimObject>,
{
    let (lo, hi) = polygon::aabb(footprint);
    let mut out = Vec::new();
    for obj in objects {
        let r = obj.shape.bounding_radius();
        if obj.pose.x + r < lo.x || obj.pose.x - r > hi.x || obj.pose.y + r < lo.y || obj.pose.y - r > hi.y {
            continue;
        }
        for patch in obj.patches() {
            let region = polygon::clip_convex(footprint, &patch.region);
            if region.len() < 3 || polygon::area(&region) <= AREA_EPS {
                continue;
            }
            let height = region.iter().map(|&p| patch.plane.eval(p)).fold(f64::NEG_INFINITY, f64::max);
            if let Some(c) = ceiling {
                if height > c + SETTLE_TOLERANCE {
                    continue;
                }
            }
            out.push(SurfaceContact { object: obj.id, height, region, plane: patch.plane });
        }
    }
    out
}

/// Highest surface under `footprint`, ground included.
pub fn surface_height(contacts: &[SurfaceContact]) -> f64 {
    contacts.iter().map(|c| c.height).fold(0.0, f64::max)
}

/// Result of dropping a footprint straight down onto the world.
#[derive(Clone, Debug)]
pub struct Landing {
    pub height: f64,
    pub stable: bool,
    /// Objects touched at the landing height (ground excluded).
    pub supports: Vec<u32>,
}

/// Landing height and support-polygon stability for an object whose center
/// of mass projects to `com`.
pub fn analyze_landing<'a, I>(objects: I, footprint: &[Vec2], com: Vec2) -> Landing
where
    I: IntoIterator<Item = &'a SimObject>,
{
    let contacts = surfaces_under(objects, footprint, None);
    let height = surface_height(&contacts);
    let threshold = height - SUPPORT_TOLERANCE;

    let mut points: Vec<Vec2> = Vec::new();
    if threshold <= 0.0 {
        points.extend_from_slice(footprint);
    }
    let mut supports = Vec::new();
    for c in contacts.iter().filter(|c| c.height >= threshold) {
        if c.plane.is_flat() {
            points.extend_from_slice(&c.region);
        } else {
            // keep only the part of a sloped patch within the contact band
            let band = polygon::clip_halfplane(&c.region, c.plane.grad, threshold - c.plane.offset);
            points.extend(band);
        }
        if !supports.contains(&c.object) {
            supports.push(c.object);
        }
    }
    let hull = polygon::convex_hull(&points);
    Landing { height, stable: polygon::hull_contains(&hull, com, GEOM_EPS), supports }
}
