//! Rejection sampling of collision-free object poses.

use super::TaskError;
use crate::geometry::polygon::{self, Vec2};
use crate::geometry::{self, Pose, Shape, GEOM_EPS};
use crate::sim::support::{surface_height, surfaces_under};
use crate::sim::{Bounds, SimObject, WorldState};
use rand::Rng;

/// Minimum gap between sampled footprints.
pub const D_SEP: f64 = 0.015;
/// Pose draws per object before a sampling round is abandoned.
pub const ATTEMPTS_PER_OBJECT: usize = 100;
/// Sampling rounds before initialization is declared infeasible.
pub const MAX_ROUNDS: usize = 1000;

/// True when `footprint` keeps at least `clearance` from every object except
/// those in `ignore`.
pub fn is_clear(world: &WorldState, footprint: &[Vec2], clearance: f64, ignore: &[u32]) -> bool {
    world.objects.iter().filter(|o| !ignore.contains(&o.id)).all(|o| is_clear_of(o, footprint, clearance))
}

/// True when `obj` keeps at least `clearance` from `footprint`.
pub fn is_clear_of(obj: &SimObject, footprint: &[Vec2], clearance: f64) -> bool {
    let (lo, hi) = polygon::aabb(footprint);
    let r = obj.shape.bounding_radius() + clearance;
    if obj.pose.x + r < lo.x || obj.pose.x - r > hi.x || obj.pose.y + r < lo.y || obj.pose.y - r > hi.y {
        return true;
    }
    polygon::convex_distance(footprint, &obj.footprint()) >= clearance
}

/// True when every vertex of `footprint` lies inside the workspace.
pub fn inside_bounds(bounds: &Bounds, footprint: &[Vec2]) -> bool {
    footprint.iter().all(|p| {
        p.x >= bounds.x_min - GEOM_EPS
            && p.x <= bounds.x_max + GEOM_EPS
            && p.y >= bounds.y_min - GEOM_EPS
            && p.y <= bounds.y_max + GEOM_EPS
    })
}

/// Where a sampled footprint must lie.
#[derive(Clone, Debug)]
pub enum Region {
    /// The whole workspace.
    Workspace,
    /// Inside a convex polygon (world frame).
    Polygon(Vec<Vec2>),
}

/// Draw up to [`ATTEMPTS_PER_OBJECT`] poses for `shape` and return the first
/// whose footprint lies in `region` and clears every object by `clearance`.
/// The pose rests on whatever surface is beneath it. `yaw` draws the
/// orientation for each attempt. Objects in `ignore` are exempt from the
/// clearance test.
pub fn sample_pose(
    world: &mut WorldState,
    shape: &Shape,
    region: &Region,
    clearance: f64,
    ignore: &[u32],
    mut yaw: impl FnMut(&mut WorldState) -> f64,
) -> Option<Pose> {
    let r = shape.bounding_radius();
    let b = world.bounds;
    for _ in 0..ATTEMPTS_PER_OBJECT {
        let (lo, hi) = match region {
            Region::Workspace => (Vec2::new(b.x_min + r, b.y_min + r), Vec2::new(b.x_max - r, b.y_max - r)),
            Region::Polygon(poly) => polygon::aabb(poly),
        };
        if lo.x > hi.x || lo.y > hi.y {
            return None;
        }
        let x = world.rng.gen_range(lo.x..=hi.x);
        let y = world.rng.gen_range(lo.y..=hi.y);
        let theta = yaw(world);
        let mut pose = Pose::new(x, y, 0.0, theta);
        let fp = geometry::world_footprint(shape, &pose);
        let in_region = match region {
            Region::Workspace => inside_bounds(&b, &fp),
            Region::Polygon(poly) => fp.iter().all(|&p| polygon::convex_contains(poly, p, GEOM_EPS)),
        };
        if !in_region || !is_clear(world, &fp, clearance, ignore) {
            continue;
        }
        pose.z = surface_height(&surfaces_under(&world.objects, &fp, None)) + shape.height() / 2.0;
        return Some(pose);
    }
    None
}

/// Run `attempt` until it succeeds, rolling the world's objects back after
/// each failed round. The generator keeps advancing across rounds.
pub fn with_rounds<T>(
    world: &mut WorldState,
    task: &str,
    mut attempt: impl FnMut(&mut WorldState) -> Option<T>,
) -> Result<T, TaskError> {
    let objects = world.objects.clone();
    let next_id = world.next_id;
    for _ in 0..MAX_ROUNDS {
        if let Some(v) = attempt(world) {
            return Ok(v);
        }
        world.objects.clone_from(&objects);
        world.next_id = next_id;
    }
    Err(TaskError::Infeasible {
        task: task.to_string(),
        rounds: MAX_ROUNDS,
        detail: format!("{} objects already placed", objects.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Category;

    #[test]
    fn sampled_cubes_are_clear_and_inside() {
        let mut w = WorldState::new(3, Bounds::default(), 0.08, true);
        let cube = Shape::cube(0.03);
        for _ in 0..8 {
            let pose =
                sample_pose(&mut w, &cube, &Region::Workspace, D_SEP, &[], |w| w.rng.gen_range(0.0..6.28)).unwrap();
            w.spawn(cube.clone(), pose, Category::Block, true);
        }
        for (i, a) in w.objects.iter().enumerate() {
            assert!(inside_bounds(&w.bounds, &a.footprint()));
            assert!((a.base()).abs() < 1e-12);
            for b in &w.objects[i + 1..] {
                assert!(polygon::convex_distance(&a.footprint(), &b.footprint()) >= D_SEP);
            }
        }
    }

    #[test]
    fn impossible_request_is_infeasible() {
        let mut w = WorldState::new(3, Bounds::default(), 0.08, true);
        let big = Shape::cube(0.5);
        let res = with_rounds(&mut w, "demo", |w| sample_pose(w, &big, &Region::Workspace, D_SEP, &[], |_| 0.0));
        assert!(matches!(res, Err(TaskError::Infeasible { rounds: MAX_ROUNDS, .. })));
    }
}
