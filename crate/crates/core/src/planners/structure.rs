//! Waypoint expert for block stacking and house building.
//!
//! One object of the first build slot is kept in place as the anchor and the
//! remaining members are placed around it in build order. The layout axis is
//! chosen once per episode so that every target footprint is clear of
//! scattered pieces, which keeps the expert at the optimal step count.

use super::{pick_through, PlanContext, PlannerError};
use crate::geometry::polygon::Vec2;
use crate::geometry::{self, Pose, Shape};
use crate::sim::{Action, SimObject, WorldState};
use crate::tasks::predicates::on_ground;
use crate::tasks::sampler;
use crate::tasks::structures::{StructureTask, Target};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Required gap between a target footprint and unrelated objects.
pub const TARGET_CLEARANCE: f64 = 0.002;
/// A member counts as placed when it is this close to its target.
pub const AT_TARGET: f64 = 1e-5;
const AXIS_CANDIDATES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructurePlan {
    pub anchor: u32,
    pub anchor_pose: Pose,
    pub phi: f64,
    /// Member ids in build order; the first is the anchor.
    pub assignment: Vec<u32>,
    pub targets: Vec<Target>,
}

/// Object `id` wherever it is: in the world or in the gripper.
fn find(world: &WorldState, id: u32) -> Option<&SimObject> {
    world.object(id).or_else(|| world.held().filter(|o| o.id == id))
}

fn target_footprint(shape: &Shape, t: &Target) -> Vec<Vec2> {
    geometry::world_footprint(shape, &Pose::new(t.xy.x, t.xy.y, 0.0, t.yaw))
}

pub fn at_target(obj: &SimObject, t: &Target) -> bool {
    obj.pose.xy().distance(t.xy) <= AT_TARGET && (obj.base() - t.base).abs() <= AT_TARGET
}

impl StructurePlan {
    fn still_valid(&self, world: &WorldState) -> bool {
        world.object(self.anchor).is_some_and(|a| a.pose == self.anchor_pose)
            && self.assignment.iter().all(|&id| find(world, id).is_some())
    }
}

/// Build a plan for the current world, preferring an axis whose targets are
/// all clear. Returns `None` when no anchor candidate exists.
pub fn make_plan(task: &StructureTask, world: &WorldState, n: usize) -> Option<StructurePlan> {
    let cats = task.slot_categories(n);
    let held = world.held().map(|o| o.id);
    let mut fallback = None;
    let anchors = world.objects.iter().filter(|o| o.category == cats[0] && on_ground(o) && Some(o.id) != held);
    for anchor in anchors {
        let mut assignment = vec![anchor.id];
        let mut pool: Vec<&SimObject> =
            world.objects.iter().chain(world.held()).filter(|o| o.id != anchor.id).collect();
        pool.sort_by_key(|o| o.id);
        for cat in &cats[1..] {
            let Some(pos) = pool.iter().position(|o| o.category == *cat) else { break };
            assignment.push(pool.remove(pos).id);
        }
        if assignment.len() != cats.len() {
            continue;
        }
        let members: Vec<&SimObject> = assignment.iter().map(|&id| find(world, id).expect("assigned")).collect();
        let shapes: Vec<Shape> = members.iter().map(|o| o.shape.clone()).collect();
        for k in 0..AXIS_CANDIDATES {
            let phi = anchor.pose.yaw + k as f64 * PI / (AXIS_CANDIDATES as f64 / 2.0);
            let targets = task.layout(&shapes, anchor.pose.xy(), phi);
            let plan = StructurePlan {
                anchor: anchor.id,
                anchor_pose: anchor.pose,
                phi,
                assignment: assignment.clone(),
                targets: targets.clone(),
            };
            let fps: Vec<Vec<Vec2>> = shapes.iter().zip(&targets).map(|(s, t)| target_footprint(s, t)).collect();
            if !fps.iter().all(|fp| sampler::inside_bounds(&world.bounds, fp)) {
                continue;
            }
            let clear = fps.iter().enumerate().skip(1).all(|(i, fp)| {
                let mut ignore = vec![anchor.id, assignment[i]];
                ignore.extend(&assignment[1..i]);
                sampler::is_clear(world, fp, TARGET_CLEARANCE, &ignore)
            });
            if clear {
                return Some(plan);
            }
            fallback.get_or_insert(plan);
        }
    }
    fallback
}

/// Next expert action for a structure task.
pub fn next_action(task: &StructureTask, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
    let world = ctx.world;
    let valid = ctx.memory.structure.as_ref().is_some_and(|p| p.still_valid(world));
    if !valid {
        ctx.memory.structure = make_plan(task, world, ctx.params.num_objects);
    }
    let plan = ctx.memory.structure.clone().ok_or_else(|| PlannerError::Stuck("no anchor for the structure".into()))?;

    let stage = (1..plan.assignment.len())
        .find(|&k| world.object(plan.assignment[k]).is_none_or(|o| !at_target(o, &plan.targets[k])));
    let Some(k) = stage else {
        // Structure complete; anything still in hand goes back down.
        return if world.gripper.is_holding() {
            ctx.relocate_held()
        } else {
            Err(PlannerError::Stuck("structure complete".into()))
        };
    };
    let member = plan.assignment[k];
    let target = plan.targets[k];

    if let Some(held) = world.held() {
        return if held.id == member { ctx.place_at(target.xy, target.yaw) } else { ctx.relocate_held() };
    }

    let obj = world.object(member).expect("plan members exist");
    let fp = target_footprint(&obj.shape, &target);
    let placed = &plan.assignment[..k];
    let obstruction = world
        .objects
        .iter()
        .filter(|o| o.movable && o.id != member && !placed.contains(&o.id))
        .filter(|o| !sampler::is_clear_of(o, &fp, TARGET_CLEARANCE / 2.0))
        .min_by_key(|o| o.id);
    if let Some(o) = obstruction {
        return Ok(pick_through(ctx, o));
    }
    Ok(pick_through(ctx, obj))
}
