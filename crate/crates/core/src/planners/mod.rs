//! Expert policies. Waypoint planners script the next pick or place from the
//! current world; the deconstruction planner takes a finished structure
//! apart and reverses the episode.

pub mod covid;
pub mod decon;
pub mod packing;
pub mod pallet;
pub mod structure;

use crate::geometry::polygon::Vec2;
use crate::geometry::{self, Pose, GEOM_EPS};
use crate::sim::{Action, SimObject, WorldState};
use crate::tasks::sampler::{self, D_SEP};
use crate::tasks::{EpisodeParams, TaskError, TaskState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decon::{decon_generate, generate_demos, generate_demos_with, DeconEpisode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("task `{0}` has no expert planner")]
    NoExpert(String),
    #[error("planner stuck: {0}")]
    Stuck(String),
    #[error("task `{0}` does not support deconstruction")]
    NoDeconstruction(String),
    #[error("deconstruction failed after {attempts} attempts: {reason}")]
    Deconstruction { attempts: usize, reason: String },
    #[error("demo generation for `{task}` succeeded in {successes} of {attempts} attempts")]
    LowSuccess { task: String, successes: usize, attempts: usize },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("environment error: {0}")]
    Env(String),
}

/// Per-episode planner memory, kept with the environment so a plan chosen
/// at the first step stays fixed while it remains valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerMemory {
    pub structure: Option<structure::StructurePlan>,
}

/// Everything a waypoint planner may read, plus its scratch state.
pub struct PlanContext<'a> {
    pub world: &'a WorldState,
    pub state: &'a TaskState,
    pub params: &'a EpisodeParams,
    pub memory: &'a mut PlannerMemory,
    /// Planner-private randomness; never the world's generator.
    pub rng: ChaCha8Rng,
}

impl PlanContext<'_> {
    pub fn normalize(&self, theta: f64) -> f64 {
        geometry::normalize_yaw(theta, self.params.half_rotation).unwrap_or(0.0)
    }

    /// Pick `obj` at its center with the jaws closing across its short side.
    pub fn pick(&self, obj: &SimObject) -> Action {
        Action::pick(obj.pose.x, obj.pose.y, self.normalize(obj.long_axis_yaw()))
    }

    /// Place the held object so its center lands on `xy` with yaw `yaw`.
    pub fn place_at(&self, xy: Vec2, yaw: f64) -> Result<Action, PlannerError> {
        let grasp = self.world.gripper.holding.as_ref().ok_or_else(|| PlannerError::Stuck("nothing held".into()))?;
        let theta = self.normalize(yaw - grasp.yaw_offset);
        let p = xy - grasp.offset.rotate(theta);
        Ok(Action::place(p.x, p.y, theta))
    }

    /// Put the held object down at a random free spot on the table.
    pub fn relocate_held(&mut self) -> Result<Action, PlannerError> {
        let grasp = self.world.gripper.holding.as_ref().ok_or_else(|| PlannerError::Stuck("nothing held".into()))?;
        let shape = grasp.object.shape.clone();
        let pose = free_pose(self.world, &shape, &mut self.rng, self.params.random_orientation, &[])
            .ok_or_else(|| PlannerError::Stuck("no free spot for the held object".into()))?;
        self.place_at(pose.xy(), pose.yaw)
    }
}

/// Topmost object at `obj`'s center, if it is not `obj` itself.
pub fn blocker<'w>(world: &'w WorldState, obj: &SimObject) -> Option<&'w SimObject> {
    let q = obj.pose.xy();
    world
        .objects
        .iter()
        .filter(|o| o.id != obj.id && o.base() >= obj.top() - 1e-6)
        .filter_map(|o| o.height_at(q).map(|h| (o, h)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(o, _)| o)
}

/// Random ground pose where `shape` clears every object not in `ignore` by
/// [`D_SEP`].
pub fn free_pose(
    world: &WorldState,
    shape: &geometry::Shape,
    rng: &mut ChaCha8Rng,
    random_orientation: bool,
    ignore: &[u32],
) -> Option<Pose> {
    let b = world.bounds;
    let r = shape.bounding_radius() + GEOM_EPS;
    if b.x_min + r > b.x_max - r || b.y_min + r > b.y_max - r {
        return None;
    }
    for _ in 0..sampler::ATTEMPTS_PER_OBJECT * 10 {
        let x = rng.gen_range(b.x_min + r..=b.x_max - r);
        let y = rng.gen_range(b.y_min + r..=b.y_max - r);
        let yaw = if random_orientation { rng.gen_range(0.0..std::f64::consts::TAU) } else { 0.0 };
        let pose = Pose::new(x, y, shape.height() / 2.0, yaw);
        let fp = geometry::world_footprint(shape, &pose);
        if sampler::inside_bounds(&b, &fp) && sampler::is_clear(world, &fp, D_SEP, ignore) {
            return Some(pose);
        }
    }
    None
}

/// Deterministic action for when the task planner has nothing to offer:
/// put down whatever is held, otherwise try the lowest-id movable object.
pub fn fallback_action(ctx: &mut PlanContext<'_>) -> Action {
    if ctx.world.gripper.is_holding() {
        if let Ok(a) = ctx.relocate_held() {
            return a;
        }
        let c = ctx.world.bounds.center();
        return Action::place(c.x, c.y, 0.0);
    }
    match ctx.world.objects.iter().filter(|o| o.movable).min_by_key(|o| o.id) {
        Some(obj) => {
            let target = blocker(ctx.world, obj).unwrap_or(obj);
            ctx.pick(target)
        }
        None => {
            let c = ctx.world.bounds.center();
            Action::pick(c.x, c.y, 0.0)
        }
    }
}

/// Pick `obj`, or the object blocking it.
pub fn pick_through(ctx: &PlanContext<'_>, obj: &SimObject) -> Action {
    let mut target = obj;
    while let Some(b) = blocker(ctx.world, target) {
        target = b;
    }
    ctx.pick(target)
}
