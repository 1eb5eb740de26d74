//! Pack every loose block into an open bin.

use super::predicates::inside_cavity;
use super::sampler::{self, Region, D_SEP};
use super::{EpisodeParams, Task, TaskError, TaskSpec, TaskState};
use crate::geometry::polygon::Vec2;
use crate::geometry::Shape;
use crate::planners::{self, PlanContext, PlannerError};
use crate::sim::{Action, Category, SimObject, WorldState};
use rand::Rng;

pub const BIN_SIZE: (f64, f64, f64) = (0.176, 0.144, 0.08);
pub const BIN_WALL: f64 = 0.008;
pub const BIN_DEPTH: f64 = 0.072;
/// Block length range along the long axis, before scaling. The upper end
/// leaves a millimeter of play in a cell.
pub const BLOCK_LENGTH: (f64, f64) = (0.04, 0.078);
pub const BLOCK_WIDTH: f64 = 0.04;
/// Block height range; two layers fit under the rim.
pub const BLOCK_HEIGHT: (f64, f64) = (0.02, 0.035);
pub const MAX_OBJECTS: usize = 8;

/// Bin-frame centers of the 2 x 2 packing cells.
pub const CELLS: [(f64, f64); 4] = [(-0.04, -0.032), (0.04, -0.032), (-0.04, 0.032), (0.04, 0.032)];
/// Cell half extents, slightly inside the cavity partition.
pub const CELL_HALF: (f64, f64) = (0.039, 0.031);

pub fn bin_shape() -> Shape {
    Shape::Container { lx: BIN_SIZE.0, ly: BIN_SIZE.1, lz: BIN_SIZE.2, wall: BIN_WALL, depth: BIN_DEPTH }
}

#[derive(Clone, Debug)]
pub struct BinPacking {
    spec: TaskSpec,
}

impl BinPacking {
    pub fn new() -> Self {
        BinPacking { spec: TaskSpec::new("bin_packing", 8, 16, 20, false) }
    }

    pub fn bin(world: &WorldState) -> Option<&SimObject> {
        world.objects.iter().find(|o| o.category == Category::Container)
    }

    pub fn is_packed(obj: &SimObject, bin: &SimObject) -> bool {
        inside_cavity(obj, bin) && obj.top() <= bin.top() + 1e-6
    }

    pub fn cells(bin: &SimObject) -> Vec<Vec2> {
        CELLS.iter().map(|&(x, y)| bin.pose.to_world(Vec2::new(x, y))).collect()
    }
}

impl Default for BinPacking {
    fn default() -> Self {
        Self::new()
    }
}

impl Task for BinPacking {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn optimal_steps(&self, n: usize) -> u32 {
        2 * n as u32
    }

    fn check_num_objects(&self, n: usize) -> Result<(), TaskError> {
        if (1..=MAX_OBJECTS).contains(&n) {
            Ok(())
        } else {
            Err(TaskError::NumObjects { task: self.spec.name.clone(), n, reason: "the bin holds 1..=8".into() })
        }
    }

    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError> {
        let s = params.scale;
        let blocks: Vec<Shape> = (0..params.num_objects)
            .map(|_| {
                let lx = world.rng.gen_range(BLOCK_LENGTH.0..=BLOCK_LENGTH.1) * s;
                let lz = world.rng.gen_range(BLOCK_HEIGHT.0..=BLOCK_HEIGHT.1) * s;
                Shape::cuboid(lx, BLOCK_WIDTH * s, lz)
            })
            .collect();
        sampler::with_rounds(world, &self.spec.name, |w| {
            let bin = bin_shape();
            let pose = sampler::sample_pose(w, &bin, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
            w.spawn(bin, pose, Category::Container, false);
            for shape in &blocks {
                let pose = sampler::sample_pose(w, shape, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
                w.spawn(shape.clone(), pose, Category::Box, true);
            }
            Some(())
        })?;
        Ok(TaskState::None)
    }

    fn check_goal(&self, world: &WorldState, _state: &TaskState) -> bool {
        let Some(bin) = Self::bin(world) else { return false };
        !world.gripper.is_holding()
            && world.objects.iter().all(|o| !o.out_of_play)
            && world.objects.iter().filter(|o| o.movable).all(|o| Self::is_packed(o, bin))
    }

    fn expert_action(&self, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
        planners::packing::bin_packing(ctx)
    }
}
