//! Supervise three rounds of a swab test: present a swab and a tube in the
//! test area, then collect the used tube.

use super::sampler::{self, Region};
use super::{EpisodeParams, Task, TaskError, TaskSpec, TaskState};
use crate::geometry::polygon::{self, Vec2};
use crate::geometry::{Pose, Shape};
use crate::planners::{self, PlanContext, PlannerError};
use crate::sim::support::SETTLE_TOLERANCE;
use crate::sim::{Action, Category, Outcome, SimObject, WorldState};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const AREA_SIZE: (f64, f64, f64) = (0.12, 0.12, 0.002);
pub const SWAB_SIZE: (f64, f64, f64) = (0.07, 0.01, 0.01);
pub const TUBE_SIZE: (f64, f64, f64) = (0.08, 0.017, 0.017);
pub const ROUNDS: u32 = 3;
/// New-box frame offsets of the six items across the box.
pub const ITEM_ROWS: [f64; 6] = [-0.05, -0.03, -0.01, 0.01, 0.03, 0.05];
pub const ITEM_JITTER: f64 = 0.01;
/// Test-area frame spots for the presented swab and tube.
pub const SWAB_SPOT: (f64, f64) = (0.0, -0.03);
pub const TUBE_SPOT: (f64, f64) = (0.0, 0.03);
/// Used-box frame spots for collected tubes.
pub const USED_ROWS: [f64; 3] = [-0.04, 0.0, 0.04];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovidPhase {
    PresentSwab,
    PresentTube,
    WaitUser,
    Collect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovidState {
    /// Current round, 1-based.
    pub round: u32,
    pub completed: u32,
    pub phase: CovidPhase,
    pub new_box: u32,
    pub test_area: u32,
    pub used_box: u32,
}

/// `obj` rests on `area` with its center over the area.
pub fn rests_in(obj: &SimObject, area: &SimObject) -> bool {
    (obj.base() - area.top()).abs() <= SETTLE_TOLERANCE
        && polygon::convex_contains(&area.footprint(), obj.pose.xy(), 1e-9)
}

#[derive(Clone, Debug)]
pub struct CovidTest {
    spec: TaskSpec,
}

impl CovidTest {
    pub fn new() -> Self {
        CovidTest { spec: TaskSpec::new("covid_test", 6, 18, 30, false) }
    }

    fn area_shape() -> Shape {
        Shape::Slab { lx: AREA_SIZE.0, ly: AREA_SIZE.1, lz: AREA_SIZE.2 }
    }

    pub fn swab_shape(s: f64) -> Shape {
        Shape::cuboid(SWAB_SIZE.0 * s, SWAB_SIZE.1 * s, SWAB_SIZE.2 * s)
    }

    pub fn tube_shape(s: f64) -> Shape {
        Shape::cuboid(TUBE_SIZE.0 * s, TUBE_SIZE.1 * s, TUBE_SIZE.2 * s)
    }

    fn refresh(world: &WorldState, st: &mut CovidState) {
        let (Some(test), Some(used)) = (world.object(st.test_area), world.object(st.used_box)) else { return };
        let tubes: Vec<&SimObject> = world.objects.iter().filter(|o| o.category == Category::UsedTube).collect();
        st.completed = tubes.iter().filter(|o| rests_in(o, used)).count() as u32;
        st.round = (st.completed + 1).min(ROUNDS);
        let loose_used =
            tubes.iter().any(|o| !rests_in(o, used)) || world.held().is_some_and(|o| o.category == Category::UsedTube);
        let has = |cat| world.objects.iter().any(|o| o.category == cat && rests_in(o, test));
        st.phase = if loose_used {
            CovidPhase::Collect
        } else if has(Category::Swab) && has(Category::Tube) {
            CovidPhase::WaitUser
        } else if has(Category::Swab) {
            CovidPhase::PresentTube
        } else {
            CovidPhase::PresentSwab
        };
    }

    /// The simulated user: with a swab and a tube in the test area, the swab
    /// goes into the tube and the used tube lands somewhere in the area.
    fn simulate_user(world: &mut WorldState, st: &CovidState) {
        let Some(test) = world.object(st.test_area).cloned() else { return };
        let find =
            |w: &WorldState, cat| w.objects.iter().find(|o| o.category == cat && rests_in(o, &test)).map(|o| o.id);
        let (Some(swab), Some(tube)) = (find(world, Category::Swab), find(world, Category::Tube)) else { return };
        world.remove(swab);
        let mut used = world.remove(tube).expect("tube is in the world");
        used.category = Category::UsedTube;
        let fixtures = [st.new_box, st.test_area, st.used_box];
        let region = Region::Polygon(test.footprint());
        let pose = sampler::sample_pose(world, &used.shape, &region, 0.0, &fixtures, |w| {
            w.rng.gen_range(0.0..std::f64::consts::TAU)
        })
        .unwrap_or(Pose::new(test.pose.x, test.pose.y, test.top() + used.shape.height() / 2.0, test.pose.yaw));
        used.pose = pose;
        world.objects.push(used);
        crate::sim::settle(world);
    }
}

impl Default for CovidTest {
    fn default() -> Self {
        Self::new()
    }
}

impl Task for CovidTest {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError> {
        let s = params.scale;
        let ids = sampler::with_rounds(world, &self.spec.name, |w| {
            let b = w.bounds;
            let area = Self::area_shape();
            for _ in 0..sampler::ATTEMPTS_PER_OBJECT {
                let c = Vec2::new(w.rng.gen_range(b.x_min..=b.x_max), w.rng.gen_range(b.y_min..=b.y_max));
                let yaw = params.yaw(&mut w.rng);
                let poses: Vec<Pose> = (-1..=1)
                    .map(|k| {
                        let p = c + Vec2::from_angle(yaw) * (k as f64 * AREA_SIZE.0);
                        Pose::new(p.x, p.y, AREA_SIZE.2 / 2.0, yaw)
                    })
                    .collect();
                let inside =
                    poses.iter().all(|p| sampler::inside_bounds(&b, &crate::geometry::world_footprint(&area, p)));
                if !inside {
                    continue;
                }
                let ids: Vec<u32> =
                    poses.into_iter().map(|p| w.spawn(area.clone(), p, Category::Container, false)).collect();
                let new_box = w.object(ids[0]).expect("spawned").clone();
                for (i, row) in ITEM_ROWS.iter().enumerate() {
                    let (shape, cat) = if i % 2 == 0 {
                        (Self::swab_shape(s), Category::Swab)
                    } else {
                        (Self::tube_shape(s), Category::Tube)
                    };
                    let jitter = w.rng.gen_range(-ITEM_JITTER..=ITEM_JITTER);
                    let xy = new_box.pose.to_world(Vec2::new(jitter, *row));
                    let z = new_box.top() + shape.height() / 2.0;
                    w.spawn(shape, Pose::new(xy.x, xy.y, z, yaw), cat, true);
                }
                return Some(ids);
            }
            None
        })?;
        let mut st = CovidState {
            round: 1,
            completed: 0,
            phase: CovidPhase::PresentSwab,
            new_box: ids[0],
            test_area: ids[1],
            used_box: ids[2],
        };
        Self::refresh(world, &mut st);
        Ok(TaskState::Covid(st))
    }

    fn check_goal(&self, world: &WorldState, state: &TaskState) -> bool {
        let TaskState::Covid(st) = state else { return false };
        let Some(used) = world.object(st.used_box) else { return false };
        st.completed == ROUNDS
            && !world.gripper.is_holding()
            && world.objects.iter().all(|o| !o.out_of_play)
            && world.objects.iter().filter(|o| o.category == Category::UsedTube).all(|o| rests_in(o, used))
    }

    fn on_step(&self, world: &mut WorldState, state: &mut TaskState, _params: &EpisodeParams, _outcome: Outcome) {
        let TaskState::Covid(st) = state else { return };
        Self::refresh(world, st);
        if st.phase == CovidPhase::WaitUser {
            Self::simulate_user(world, st);
            Self::refresh(world, st);
        }
    }

    fn expert_action(&self, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
        planners::covid::next_action(ctx)
    }
}

/// Test-area spot for a presented item of category `cat`.
pub fn present_spot(area: &SimObject, cat: Category) -> Vec2 {
    let (x, y) = if cat == Category::Swab { SWAB_SPOT } else { TUBE_SPOT };
    area.pose.to_world(Vec2::new(x, y))
}
