//! Demonstrations by deconstruction: build the goal structure directly, take
//! it apart one member at a time, then play the removal backwards.
//!
//! Each removal is a pick at the member's center followed by a place at a
//! random free spot. Reversed, the place becomes a pick at the same gripper
//! pose and the pick becomes a place, so the construction episode takes
//! exactly two steps per moved member.

use super::{free_pose, PlannerError};
use crate::config::EnvConfig;
use crate::env::{derive_seed, encode_action, Env, EnvError, Observation, RawAction, Transition};
use crate::geometry;
use crate::render::{render_in_hand, InHandImage};
use crate::runner::expert_episode;
use crate::sim::{self, Action, Outcome, Primitive, WorldState};
use crate::tasks::{EpisodeParams, Task, TaskState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Fresh attempts before deconstruction gives up on a seed.
pub const DECON_ATTEMPTS: usize = 10;
const SCATTER_STREAM: u64 = 0x5CA7_7E42;

/// A construction episode obtained by reversing a deconstruction.
#[derive(Clone, Debug)]
pub struct DeconEpisode {
    pub task: String,
    pub seed: u64,
    pub params: EpisodeParams,
    /// World before each construction step, plus the final (goal) world.
    pub states: Vec<WorldState>,
    pub transitions: Vec<Transition>,
}

impl DeconEpisode {
    /// Scattered world the construction starts from.
    pub fn initial(&self) -> &WorldState {
        &self.states[0]
    }

    /// Raw construction actions in order.
    pub fn actions(&self) -> Vec<RawAction> {
        self.transitions.iter().map(|t| t.action).collect()
    }
}

fn env_err(e: EnvError) -> PlannerError {
    match e {
        EnvError::Planner(p) => p,
        EnvError::Task(t) => PlannerError::Task(t),
        other => PlannerError::Env(other.to_string()),
    }
}

/// Episode parameters, recorded world states (goal first) and the removal
/// actions as executed.
type Recording = (EpisodeParams, Vec<WorldState>, Vec<RawAction>);

/// One deconstruction attempt. The inner error describes why this attempt
/// failed and a fresh one may succeed.
fn deconstruct(task: &Arc<dyn Task>, config: &EnvConfig, seed: u64) -> Result<Result<Recording, String>, PlannerError> {
    let name = task.spec().name.clone();
    let structure = task.structure().ok_or_else(|| PlannerError::NoDeconstruction(name.clone()))?;
    let mut world = WorldState::new(seed, config.bounds(), config.robot.max_open_width(), config.half_rotation);
    let params = EpisodeParams::resolve(task.as_ref(), config, &mut world.rng)?;
    let members = structure.build_goal(&mut world, &params)?;
    let mut env =
        Env::with_world(task.clone(), config.clone(), world, TaskState::None, params.clone(), seed).map_err(env_err)?;
    env.set_max_steps(u32::MAX);
    let mut scatter = ChaCha8Rng::seed_from_u64(derive_seed(seed, SCATTER_STREAM));
    let mut states = vec![env.world().clone()];
    let mut actions = Vec::new();
    for &id in members[1..].iter().rev() {
        let obj = env.world().object(id).expect("member exists").clone();
        let theta = geometry::normalize_yaw(obj.long_axis_yaw(), params.half_rotation)?;
        let pick = env.step(encode_action(&Action::pick(obj.pose.x, obj.pose.y, theta))).map_err(env_err)?;
        if pick.info.outcome != Some(Outcome::Grasped(id)) {
            return Ok(Err(format!("pick of member {id} gave {:?}", pick.info.outcome)));
        }
        states.push(env.world().clone());
        actions.push(pick.info.executed);

        let grasp = env.world().gripper.holding.clone().expect("just grasped");
        let Some(pose) = free_pose(env.world(), &grasp.object.shape, &mut scatter, params.random_orientation, &[])
        else {
            return Ok(Err(format!("no free spot for member {id}")));
        };
        let place_theta = geometry::normalize_yaw(pose.yaw - grasp.yaw_offset, params.half_rotation)?;
        let g = pose.xy() - grasp.offset.rotate(place_theta);
        let place = env.step(encode_action(&Action::place(g.x, g.y, place_theta))).map_err(env_err)?;
        if place.info.outcome != Some(Outcome::PlacedStable) {
            return Ok(Err(format!("place of member {id} gave {:?}", place.info.outcome)));
        }
        states.push(env.world().clone());
        actions.push(place.info.executed);
    }
    Ok(Ok((params, states, actions)))
}

/// Deconstruct a goal structure of `task` and return the reversed episode.
pub fn decon_generate(task: &Arc<dyn Task>, config: &EnvConfig, seed: u64) -> Result<DeconEpisode, PlannerError> {
    let mut reason = String::new();
    for attempt in 0..DECON_ATTEMPTS {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt as u64) };
        match deconstruct(task, config, s)? {
            Ok((params, decon_states, decon_actions)) => {
                return reverse(task, config, s, params, decon_states, &decon_actions);
            }
            Err(r) => reason = r,
        }
    }
    Err(PlannerError::Deconstruction { attempts: DECON_ATTEMPTS, reason })
}

fn reverse(
    task: &Arc<dyn Task>,
    config: &EnvConfig,
    seed: u64,
    params: EpisodeParams,
    decon_states: Vec<WorldState>,
    decon_actions: &[RawAction],
) -> Result<DeconEpisode, PlannerError> {
    let grid = config.grid()?;
    let mut states: Vec<WorldState> = decon_states.into_iter().rev().collect();
    for (j, s) in states.iter_mut().enumerate() {
        s.step_count = j as u32;
    }
    let n = decon_actions.len();
    let mut transitions = Vec::with_capacity(n);
    let mut in_hand = InHandImage::zeros(config.in_hand_size);
    for (j, a) in decon_actions.iter().rev().enumerate() {
        let pre = &states[j];
        let heightmap = crate::render::render_heightmap(pre, &grid);
        let obs = Observation { heightmap, in_hand: in_hand.clone(), holding: pre.gripper.is_holding() };
        let primitive = if pre.gripper.is_holding() { Primitive::Place } else { Primitive::Pick };
        let (x, y, theta) = (a[1] as f64, a[2] as f64, a[4] as f64);
        let held = pre.held().map(|o| o.shape.height());
        let z = sim::compute_z(pre, x, y, primitive, held)?;
        let theta_slot = if config.action_sequence.has('r') { a[4] } else { f32::NAN };
        let p_slot = if config.action_sequence.has('p') { primitive.to_f32() } else { f32::NAN };
        let action = [p_slot, a[1], a[2], z as f32, theta_slot];
        in_hand = match primitive {
            Primitive::Pick => render_in_hand(&obs.heightmap, &grid, (x, y, theta), config.in_hand_size),
            Primitive::Place => InHandImage::zeros(config.in_hand_size),
        };
        let last = j + 1 == n;
        transitions.push(Transition { obs, action, reward: if last { 1.0 } else { 0.0 }, done: last });
    }
    if !task.check_goal(&states[n], &TaskState::None) {
        return Err(PlannerError::Deconstruction { attempts: 1, reason: "recorded goal is not a goal".into() });
    }
    Ok(DeconEpisode { task: task.spec().name.clone(), seed, params, states, transitions })
}

/// Replay `ep` through a fresh environment started from its initial world.
/// Returns the final reward and done flag.
pub fn replay(task: &Arc<dyn Task>, config: &EnvConfig, ep: &DeconEpisode) -> Result<(f32, bool), PlannerError> {
    let mut env = Env::with_world(
        task.clone(),
        config.clone(),
        ep.initial().clone(),
        TaskState::None,
        ep.params.clone(),
        ep.seed,
    )
    .map_err(env_err)?;
    let mut last = (0.0, false);
    for a in ep.actions() {
        let r = env.step(a).map_err(env_err)?;
        last = (r.reward, r.done);
        if r.done {
            break;
        }
    }
    Ok(last)
}

/// `n` successful expert episodes for `task`. Structure tasks use
/// deconstruction, the others roll out the waypoint expert. Attempt `i`
/// draws from seed `derive_seed(seed, i)`; at most `2n` attempts are made.
pub fn generate_demos(
    task: &Arc<dyn Task>,
    config: &EnvConfig,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<Vec<Transition>>, PlannerError> {
    let mut out = Vec::with_capacity(n);
    generate_demos_with(task, config, n, seed, workers, |ep| {
        out.push(ep);
        Ok::<_, PlannerError>(())
    })?;
    Ok(out)
}

/// Streaming form of [`generate_demos`]: successful episodes go to `sink`
/// in attempt order.
pub fn generate_demos_with<E: From<PlannerError>>(
    task: &Arc<dyn Task>,
    config: &EnvConfig,
    n: usize,
    seed: u64,
    workers: usize,
    mut sink: impl FnMut(Vec<Transition>) -> Result<(), E>,
) -> Result<(), E> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PlannerError::Env(e.to_string()))?;
    let budget = 2 * n;
    let use_decon = task.structure().is_some();
    let attempt = |i: usize| -> Result<Option<Vec<Transition>>, PlannerError> {
        let s = derive_seed(seed, i as u64);
        if use_decon {
            match decon_generate(task, config, s) {
                Ok(ep) => Ok(Some(ep.transitions)),
                Err(PlannerError::Deconstruction { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        } else {
            let mut cfg = config.clone();
            cfg.seed = s;
            let mut env = Env::new(task.clone(), cfg).map_err(env_err)?;
            env.reset().map_err(env_err)?;
            let ep = expert_episode(&mut env).map_err(env_err)?;
            Ok(ep.success.then_some(ep.transitions))
        }
    };
    let batch_size = workers.max(1) * 4;
    let (mut produced, mut next) = (0, 0);
    while produced < n && next < budget {
        let batch = (n - produced).min(budget - next).min(batch_size);
        let results: Vec<_> = pool.install(|| (next..next + batch).into_par_iter().map(attempt).collect());
        next += batch;
        for r in results {
            if let Some(ep) = r? {
                if produced < n {
                    sink(ep)?;
                    produced += 1;
                }
            }
        }
    }
    if produced < n {
        return Err(
            PlannerError::LowSuccess { task: task.spec().name.clone(), successes: produced, attempts: next }.into()
        );
    }
    Ok(())
}
