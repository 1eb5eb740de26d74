//! Task definitions: episode initialization, goal predicates and scripted
//! reactions to agent steps.
//!
//! Built-in tasks live in a [`Registry`]; custom tasks implement [`Task`]
//! and are registered the same way.
//!
//! ```
//! use armbench::tasks::Registry;
//!
//! let registry = Registry::builtin();
//! let task = registry.get("block_stacking").unwrap();
//! let spec = task.spec();
//! assert_eq!((spec.num_objects, spec.optimal_steps, spec.max_steps), (4, 6, 10));
//! ```

pub mod bin_packing;
pub mod bottles;
pub mod covid;
pub mod pallet;
pub mod predicates;
pub mod sampler;
pub mod structures;

use crate::config::{EnvConfig, WorkspaceCheck};
use crate::geometry::polygon;
use crate::planners::{PlanContext, PlannerError};
use crate::sim::{Action, Bounds, Outcome, WorldState};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

pub use covid::{CovidPhase, CovidState};
pub use pallet::PalletState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{0}` is already registered")]
    Duplicate(String),
    #[error("task `{task}`: unsupported num_objects {n}: {reason}")]
    NumObjects { task: String, n: usize, reason: String },
    #[error("task `{task}`: initialization infeasible after {rounds} rounds ({detail})")]
    Infeasible { task: String, rounds: usize, detail: String },
}

/// Table of per-task constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub num_objects: usize,
    pub optimal_steps: u32,
    pub max_steps: u32,
    pub supports_deconstruction: bool,
}

impl TaskSpec {
    pub fn new(name: &str, num_objects: usize, optimal_steps: u32, max_steps: u32, decon: bool) -> Self {
        TaskSpec { name: name.to_string(), num_objects, optimal_steps, max_steps, supports_deconstruction: decon }
    }
}

/// Task-specific progress data carried alongside the world.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub enum TaskState {
    #[default]
    None,
    Pallet(PalletState),
    Covid(CovidState),
}

/// Per-episode parameters resolved from the config and the task defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    pub num_objects: usize,
    pub max_steps: u32,
    /// Scale applied to movable object dimensions this episode.
    pub scale: f64,
    pub random_orientation: bool,
    pub half_rotation: bool,
    pub workspace_check: WorkspaceCheck,
    pub bounds: Bounds,
}

impl EpisodeParams {
    /// Resolve defaults against `task` and draw the episode scale from `rng`.
    pub fn resolve<R: Rng>(task: &dyn Task, config: &EnvConfig, rng: &mut R) -> Result<Self, TaskError> {
        let spec = task.spec();
        let num_objects = config.num_objects.unwrap_or(spec.num_objects);
        task.check_num_objects(num_objects)?;
        let (lo, hi) = config.object_scale_range;
        let scale = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        Ok(EpisodeParams {
            num_objects,
            max_steps: config.max_steps.unwrap_or(spec.max_steps),
            scale,
            random_orientation: config.random_orientation,
            half_rotation: config.half_rotation,
            workspace_check: config.workspace_check,
            bounds: config.bounds(),
        })
    }

    pub fn yaw<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.random_orientation {
            rng.gen_range(0.0..std::f64::consts::TAU)
        } else {
            0.0
        }
    }
}

pub trait Task: Send + Sync {
    fn spec(&self) -> &TaskSpec;

    /// Optimal step count for `num_objects`.
    fn optimal_steps(&self, num_objects: usize) -> u32 {
        let _ = num_objects;
        self.spec().optimal_steps
    }

    fn check_num_objects(&self, n: usize) -> Result<(), TaskError> {
        if n == self.spec().num_objects {
            Ok(())
        } else {
            Err(TaskError::NumObjects {
                task: self.spec().name.clone(),
                n,
                reason: format!("this task uses exactly {}", self.spec().num_objects),
            })
        }
    }

    /// Populate an empty world for a new episode.
    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError>;

    fn check_goal(&self, world: &WorldState, state: &TaskState) -> bool;

    /// Scripted reaction after each step.
    fn on_step(&self, world: &mut WorldState, state: &mut TaskState, params: &EpisodeParams, outcome: Outcome) {
        let _ = (world, state, params, outcome);
    }

    /// Next expert action. Tasks without an expert report
    /// [`PlannerError::NoExpert`].
    fn expert_action(&self, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
        let _ = ctx;
        Err(PlannerError::NoExpert(self.spec().name.clone()))
    }

    /// Goal-structure description used by the deconstruction planner.
    fn structure(&self) -> Option<&structures::StructureTask> {
        None
    }
}

/// Name-indexed task table.
#[derive(Clone, Default)]
pub struct Registry {
    tasks: BTreeMap<String, Arc<dyn Task>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// All built-in open-loop tasks.
    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        let builtins: Vec<Arc<dyn Task>> = vec![
            Arc::new(structures::StructureTask::block_stacking()),
            Arc::new(structures::StructureTask::house_building_1()),
            Arc::new(structures::StructureTask::house_building_2()),
            Arc::new(structures::StructureTask::house_building_3()),
            Arc::new(structures::StructureTask::house_building_4()),
            Arc::new(structures::StructureTask::improvise_house_building_2()),
            Arc::new(structures::StructureTask::improvise_house_building_3()),
            Arc::new(bin_packing::BinPacking::new()),
            Arc::new(bottles::BottleArrangement::new()),
            Arc::new(pallet::BoxPalletizing::new()),
            Arc::new(covid::CovidTest::new()),
        ];
        for t in builtins {
            r.register(t).expect("built-in names are unique");
        }
        r
    }

    pub fn register(&mut self, task: Arc<dyn Task>) -> Result<(), TaskError> {
        let name = task.spec().name.clone();
        if self.tasks.contains_key(&name) {
            return Err(TaskError::Duplicate(name));
        }
        self.tasks.insert(name, task);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Task>, TaskError> {
        self.tasks.get(name).cloned().ok_or_else(|| TaskError::UnknownTask(name.to_string()))
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<String> {
        self.tasks.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Mark movable objects that have left the workspace. Returns true if any
/// object is out of play.
pub fn update_workspace_check(world: &mut WorldState, check: WorkspaceCheck) -> bool {
    let bounds = world.bounds;
    let eps = crate::geometry::GEOM_EPS;
    for obj in world.objects.iter_mut().filter(|o| o.movable) {
        let outside = match check {
            WorkspaceCheck::Point => !bounds.contains(obj.pose.xy()),
            WorkspaceCheck::BoundingBox => {
                let (lo, hi) = polygon::aabb(&obj.footprint());
                lo.x < bounds.x_min - eps
                    || lo.y < bounds.y_min - eps
                    || hi.x > bounds.x_max + eps
                    || hi.y > bounds.y_max + eps
            }
        };
        obj.out_of_play |= outside;
    }
    world.objects.iter().any(|o| o.out_of_play)
}
