//! Stand every bottle in a tray.

use super::predicates::inside_cavity;
use super::sampler::{self, Region, D_SEP};
use super::{EpisodeParams, Task, TaskError, TaskSpec, TaskState};
use crate::geometry::polygon::Vec2;
use crate::geometry::Shape;
use crate::planners::{self, PlanContext, PlannerError};
use crate::sim::{Action, Category, SimObject, WorldState};

pub const TRAY_SIZE: (f64, f64, f64) = (0.24, 0.16, 0.05);
pub const TRAY_WALL: f64 = 0.008;
pub const TRAY_DEPTH: f64 = 0.042;
pub const BOTTLE_RADIUS: f64 = 0.025;
pub const BOTTLE_HEIGHT: f64 = 0.14;
pub const MAX_BOTTLES: usize = 6;

/// Tray-frame centers of the 3 x 2 bottle cells.
pub const CELLS: [(f64, f64); 6] =
    [(-0.0747, -0.036), (0.0, -0.036), (0.0747, -0.036), (-0.0747, 0.036), (0.0, 0.036), (0.0747, 0.036)];

pub fn tray_shape() -> Shape {
    Shape::Container { lx: TRAY_SIZE.0, ly: TRAY_SIZE.1, lz: TRAY_SIZE.2, wall: TRAY_WALL, depth: TRAY_DEPTH }
}

#[derive(Clone, Debug)]
pub struct BottleArrangement {
    spec: TaskSpec,
}

impl BottleArrangement {
    pub fn new() -> Self {
        BottleArrangement { spec: TaskSpec::new("bottle_arrangement", 6, 12, 20, false) }
    }

    pub fn tray(world: &WorldState) -> Option<&SimObject> {
        world.objects.iter().find(|o| o.category == Category::Container)
    }

    pub fn cells(tray: &SimObject) -> Vec<Vec2> {
        CELLS.iter().map(|&(x, y)| tray.pose.to_world(Vec2::new(x, y))).collect()
    }
}

impl Default for BottleArrangement {
    fn default() -> Self {
        Self::new()
    }
}

impl Task for BottleArrangement {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn optimal_steps(&self, n: usize) -> u32 {
        2 * n as u32
    }

    fn check_num_objects(&self, n: usize) -> Result<(), TaskError> {
        if (1..=MAX_BOTTLES).contains(&n) {
            Ok(())
        } else {
            Err(TaskError::NumObjects { task: self.spec.name.clone(), n, reason: "the tray holds 1..=6".into() })
        }
    }

    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError> {
        let s = params.scale;
        let bottle = Shape::Cylinder { radius: BOTTLE_RADIUS * s, height: BOTTLE_HEIGHT * s };
        sampler::with_rounds(world, &self.spec.name, |w| {
            let tray = tray_shape();
            let pose = sampler::sample_pose(w, &tray, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
            w.spawn(tray, pose, Category::Container, false);
            for _ in 0..params.num_objects {
                let pose =
                    sampler::sample_pose(w, &bottle, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
                w.spawn(bottle.clone(), pose, Category::Bottle, true);
            }
            Some(())
        })?;
        Ok(TaskState::None)
    }

    fn check_goal(&self, world: &WorldState, _state: &TaskState) -> bool {
        let Some(tray) = Self::tray(world) else { return false };
        !world.gripper.is_holding()
            && world.objects.iter().all(|o| !o.out_of_play)
            && world.objects.iter().filter(|o| o.movable).all(|o| inside_cavity(o, tray))
    }

    fn expert_action(&self, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
        planners::packing::bottle_arrangement(ctx)
    }
}
