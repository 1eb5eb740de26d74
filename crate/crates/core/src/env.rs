//! A single environment: one task, one world, the observation pipeline and
//! the sparse reward.
//!
//! Actions arrive as five `f32` values `(p, x, y, z, r)`. The primitive slot
//! is advisory: a pick is executed when the gripper is empty and a place
//! when it holds something. `z` is honored only when the action sequence
//! contains `z` and the value is finite; otherwise the height heuristic
//! chooses it. `r` is read only when the sequence contains `r`.
//!
//! ```
//! use armbench::config::EnvConfig;
//! use armbench::env::Env;
//!
//! let mut env = Env::from_name("block_stacking", EnvConfig::default()).unwrap();
//! let obs = env.reset().unwrap();
//! assert_eq!(obs.heightmap.size(), 128);
//! let action = env.expert_action().unwrap();
//! let step = env.step(action).unwrap();
//! assert!(step.obs.holding);
//! ```

use crate::config::{ConfigError, EnvConfig};
use crate::geometry::{GeometryError, GridSpec};
use crate::planners::{fallback_action, PlanContext, PlannerError, PlannerMemory};
use crate::render::{render_heightmap, render_in_hand, Heightmap, InHandImage};
use crate::sim::{self, Action, Outcome, Primitive, SimError, WorldState};
use crate::tasks::{update_workspace_check, EpisodeParams, Registry, Task, TaskError, TaskState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

/// Raw action layout `(p, x, y, z, r)`.
pub type RawAction = [f32; 5];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("malformed action: {0}")]
    ActionFormat(String),
    #[error("step called before reset")]
    NotReset,
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One splitmix64 output for `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th item derived from `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub heightmap: Heightmap,
    pub in_hand: InHandImage,
    pub holding: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Action as executed: unused slots are NaN and `z` holds the height
    /// actually used.
    pub executed: RawAction,
    /// `None` for the step that performed an automatic reset.
    pub outcome: Option<Outcome>,
    /// The primitive slot disagreed with the gripper state.
    pub primitive_overridden: bool,
    pub movable_before: usize,
    /// Movable count after the primitive, before the task reacts.
    pub movable_after_sim: usize,
    pub goal: bool,
    pub auto_reset: bool,
    pub step_count: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f32,
    pub done: bool,
    pub info: StepInfo,
}

/// Observation plus action, reward and done for one step of a recorded
/// episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: RawAction,
    pub reward: f32,
    pub done: bool,
}

pub struct Env {
    config: EnvConfig,
    task: Arc<dyn Task>,
    grid: GridSpec,
    world: WorldState,
    state: TaskState,
    params: Option<EpisodeParams>,
    memory: PlannerMemory,
    heightmap: Heightmap,
    in_hand: InHandImage,
    episode_seed: u64,
    done: bool,
}

impl Env {
    pub fn new(task: Arc<dyn Task>, config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let grid = config.grid()?;
        let world = WorldState::new(config.seed, config.bounds(), config.robot.max_open_width(), config.half_rotation);
        Ok(Env {
            heightmap: Heightmap::zeros(config.obs_size),
            in_hand: InHandImage::zeros(config.in_hand_size),
            episode_seed: config.seed,
            config,
            task,
            grid,
            world,
            state: TaskState::None,
            params: None,
            memory: PlannerMemory::default(),
            done: false,
        })
    }

    /// Environment for a built-in task.
    pub fn from_name(task: &str, config: EnvConfig) -> Result<Self, EnvError> {
        Self::new(Registry::builtin().get(task)?, config)
    }

    /// Environment resumed from a prepared world, as if reset into it.
    pub fn with_world(
        task: Arc<dyn Task>,
        config: EnvConfig,
        world: WorldState,
        state: TaskState,
        params: EpisodeParams,
        episode_seed: u64,
    ) -> Result<Self, EnvError> {
        let mut env = Self::new(task, config)?;
        env.world = world;
        env.state = state;
        env.params = Some(params);
        env.episode_seed = episode_seed;
        env.heightmap = render_heightmap(&env.world, &env.grid);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn task(&self) -> &Arc<dyn Task> {
        &self.task
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn state(&self) -> &TaskState {
        &self.state
    }

    pub fn params(&self) -> Option<&EpisodeParams> {
        self.params.as_ref()
    }

    /// Override the step limit of the current episode.
    pub fn set_max_steps(&mut self, max_steps: u32) {
        if let Some(p) = &mut self.params {
            p.max_steps = max_steps;
        }
    }

    pub fn episode_seed(&self) -> u64 {
        self.episode_seed
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn goal_reached(&self) -> bool {
        self.params.is_some() && self.task.check_goal(&self.world, &self.state)
    }

    pub fn observation(&self) -> Observation {
        Observation {
            heightmap: self.heightmap.clone(),
            in_hand: self.in_hand.clone(),
            holding: self.world.gripper.is_holding(),
        }
    }

    /// Start an episode with the configured seed.
    pub fn reset(&mut self) -> Result<Observation, EnvError> {
        self.reset_with_seed(self.config.seed)
    }

    /// Start the episode that follows the current one.
    pub fn reset_next(&mut self) -> Result<Observation, EnvError> {
        self.reset_with_seed(splitmix64(self.episode_seed))
    }

    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let c = &self.config;
        let mut world = WorldState::new(seed, c.bounds(), c.robot.max_open_width(), c.half_rotation);
        let params = EpisodeParams::resolve(self.task.as_ref(), c, &mut world.rng)?;
        self.state = self.task.init_episode(&mut world, &params)?;
        self.world = world;
        self.params = Some(params);
        self.memory = PlannerMemory::default();
        self.episode_seed = seed;
        self.done = false;
        self.heightmap = render_heightmap(&self.world, &self.grid);
        self.in_hand = InHandImage::zeros(self.config.in_hand_size);
        Ok(self.observation())
    }

    /// Decode a raw action against the current gripper state.
    fn decode(&self, raw: RawAction) -> Result<(Action, bool), EnvError> {
        let seq = &self.config.action_sequence;
        let (x, y) = (raw[1] as f64, raw[2] as f64);
        if !x.is_finite() || !y.is_finite() {
            return Err(EnvError::ActionFormat(format!("non-finite position ({x}, {y})")));
        }
        let theta = if seq.has('r') { raw[4] as f64 } else { 0.0 };
        if !theta.is_finite() {
            return Err(EnvError::ActionFormat(format!("non-finite rotation {theta}")));
        }
        let z = (seq.has('z') && raw[3].is_finite()).then_some(raw[3] as f64);
        let primitive = if self.world.gripper.is_holding() { Primitive::Place } else { Primitive::Pick };
        let requested = if seq.has('p') { Primitive::from_f32(raw[0]) } else { None };
        let overridden = requested.is_some_and(|p| p != primitive);
        Ok((Action { primitive, x, y, z, theta }, overridden))
    }

    /// Apply one action. The step after a terminal step starts the next
    /// episode instead and returns its first observation.
    pub fn step(&mut self, raw: RawAction) -> Result<StepResult, EnvError> {
        if self.done {
            let obs = self.reset_next()?;
            let info = StepInfo {
                executed: [f32::NAN; 5],
                outcome: None,
                primitive_overridden: false,
                movable_before: self.world.movable_count(),
                movable_after_sim: self.world.movable_count(),
                goal: false,
                auto_reset: true,
                step_count: 0,
            };
            return Ok(StepResult { obs, reward: 0.0, done: false, info });
        }
        let params = self.params.clone().ok_or(EnvError::NotReset)?;
        let (action, overridden) = self.decode(raw)?;
        if overridden {
            log::debug!("primitive slot {} overridden by gripper state", raw[0]);
        }
        let movable_before = self.world.movable_count();
        let report = sim::step(&mut self.world, &action)?;
        let movable_after_sim = self.world.movable_count();
        self.in_hand = match action.primitive {
            Primitive::Pick => render_in_hand(
                &self.heightmap,
                &self.grid,
                (report.action.x, report.action.y, report.action.theta),
                self.config.in_hand_size,
            ),
            Primitive::Place => InHandImage::zeros(self.config.in_hand_size),
        };
        self.task.on_step(&mut self.world, &mut self.state, &params, report.outcome);
        update_workspace_check(&mut self.world, params.workspace_check);
        let goal = self.task.check_goal(&self.world, &self.state);
        let steps = self.world.step_count;
        self.done = goal || steps >= params.max_steps;
        self.heightmap = render_heightmap(&self.world, &self.grid);

        let seq = &self.config.action_sequence;
        let slot = |c: char, v: f64| if seq.has(c) { v as f32 } else { f32::NAN };
        let executed = [
            slot('p', action.primitive.to_f32() as f64),
            report.action.x as f32,
            report.action.y as f32,
            report.resolved_z as f32,
            slot('r', report.action.theta),
        ];
        Ok(StepResult {
            obs: self.observation(),
            reward: if goal { 1.0 } else { 0.0 },
            done: self.done,
            info: StepInfo {
                executed,
                outcome: Some(report.outcome),
                primitive_overridden: overridden,
                movable_before,
                movable_after_sim,
                goal,
                auto_reset: false,
                step_count: steps,
            },
        })
    }

    /// The expert's next action. Falls back to a deterministic recovery
    /// action when the task planner is stuck.
    pub fn expert_action(&mut self) -> Result<RawAction, EnvError> {
        let params = self.params.as_ref().ok_or(EnvError::NotReset)?;
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(self.episode_seed, self.world.step_count as u64));
        let mut ctx = PlanContext { world: &self.world, state: &self.state, params, memory: &mut self.memory, rng };
        let action = match self.task.expert_action(&mut ctx) {
            Ok(a) => a,
            Err(PlannerError::Stuck(reason)) => {
                log::debug!("expert stuck ({reason}); using the fallback action");
                fallback_action(&mut ctx)
            }
            Err(e) => return Err(e.into()),
        };
        Ok(encode_action(&action))
    }
}

/// Raw form of a planner action; `z` is left to the heuristic.
pub fn encode_action(a: &Action) -> RawAction {
    [a.primitive.to_f32(), a.x as f32, a.y as f32, a.z.map_or(f32::NAN, |z| z as f32), a.theta as f32]
}
