//! Vectorized environments and expert rollouts.
//!
//! Environment `i` of a [`VectorEnv`] is seeded with `config.seed + i` and
//! each later episode on it with the splitmix64 successor of the previous
//! seed, so results do not depend on the worker count.

use crate::config::EnvConfig;
use crate::env::{Env, EnvError, Observation, RawAction, StepResult, Transition};
use crate::tasks::Task;
use rayon::prelude::*;
use rayon::ThreadPool;
use std::sync::Arc;

/// One rolled-out expert episode.
#[derive(Clone, Debug)]
pub struct ExpertEpisode {
    pub seed: u64,
    pub transitions: Vec<Transition>,
    pub success: bool,
    pub steps: u32,
}

/// Roll the expert out from the current (freshly reset) state of `env`
/// until the episode ends.
pub fn expert_episode(env: &mut Env) -> Result<ExpertEpisode, EnvError> {
    let seed = env.episode_seed();
    let mut transitions = Vec::new();
    loop {
        let obs = env.observation();
        let action = env.expert_action()?;
        let r = env.step(action)?;
        transitions.push(Transition { obs, action: r.info.executed, reward: r.reward, done: r.done });
        if r.done {
            return Ok(ExpertEpisode { seed, success: r.reward == 1.0, steps: r.info.step_count, transitions });
        }
    }
}

fn build_pool(workers: usize) -> Result<ThreadPool, EnvError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| EnvError::Pool(e.to_string()))
}

pub struct VectorEnv {
    envs: Vec<Env>,
    pool: ThreadPool,
}

impl VectorEnv {
    pub fn new(task: Arc<dyn Task>, config: &EnvConfig, n: usize, workers: usize) -> Result<Self, EnvError> {
        let envs = (0..n as u64)
            .map(|i| {
                let mut c = config.clone();
                c.seed = config.seed.wrapping_add(i);
                Env::new(task.clone(), c)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorEnv { envs, pool: build_pool(workers)? })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }

    pub fn reset(&mut self) -> Result<Vec<Observation>, EnvError> {
        let envs = &mut self.envs;
        self.pool.install(|| envs.par_iter_mut().map(|e| e.reset()).collect())
    }

    /// Step every environment with its action. Exactly one action per
    /// environment is required.
    pub fn step(&mut self, actions: &[RawAction]) -> Result<Vec<StepResult>, EnvError> {
        if actions.len() != self.envs.len() {
            return Err(EnvError::ActionFormat(format!("expected {} actions, got {}", self.envs.len(), actions.len())));
        }
        let envs = &mut self.envs;
        self.pool.install(|| envs.par_iter_mut().zip(actions).map(|(e, a)| e.step(*a)).collect())
    }

    pub fn expert_actions(&mut self) -> Result<Vec<RawAction>, EnvError> {
        let envs = &mut self.envs;
        self.pool.install(|| envs.par_iter_mut().map(|e| e.expert_action()).collect())
    }

    /// Roll out `episodes` expert episodes; episode `j` runs on environment
    /// `j % len`. Results come back in episode order.
    pub fn run_expert(&mut self, episodes: usize) -> Result<Vec<ExpertEpisode>, EnvError> {
        let mut out = Vec::with_capacity(episodes);
        self.run_expert_with(episodes, |_, ep| {
            out.push(ep);
            Ok::<_, EnvError>(())
        })?;
        Ok(out)
    }

    /// Like [`run_expert`](Self::run_expert) but hands each episode to
    /// `sink` in episode order as soon as its round finishes, so memory use
    /// stays bounded by one episode per environment.
    pub fn run_expert_with<E: From<EnvError>>(
        &mut self,
        episodes: usize,
        mut sink: impl FnMut(usize, ExpertEpisode) -> Result<(), E>,
    ) -> Result<(), E> {
        let n = self.envs.len();
        if n == 0 {
            return Ok(());
        }
        let mut first = true;
        for round_start in (0..episodes).step_by(n) {
            let active = (episodes - round_start).min(n);
            let envs = &mut self.envs[..active];
            let results: Vec<Result<ExpertEpisode, EnvError>> = self.pool.install(|| {
                envs.par_iter_mut()
                    .map(|env| {
                        if first {
                            env.reset()?;
                        } else {
                            env.reset_next()?;
                        }
                        expert_episode(env)
                    })
                    .collect()
            });
            first = false;
            for (k, r) in results.into_iter().enumerate() {
                sink(round_start + k, r?)?;
            }
        }
        Ok(())
    }
}

/// Success rate and mean step count of successful episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
}

pub fn summarize(episodes: &[ExpertEpisode]) -> Summary {
    let wins: Vec<&ExpertEpisode> = episodes.iter().filter(|e| e.success).collect();
    let mean_steps =
        if wins.is_empty() { 0.0 } else { wins.iter().map(|e| e.steps as f64).sum::<f64>() / wins.len() as f64 };
    Summary {
        episodes: episodes.len(),
        success_rate: if episodes.is_empty() { 0.0 } else { wins.len() as f64 / episodes.len() as f64 },
        mean_steps,
    }
}
