use armbench::config::EnvConfig;
use armbench::env::Env;
use armbench::geometry::polygon::{self, Vec2};
use armbench::geometry::Shape;
use armbench::sim::{Category, SimObject, WorldState};
use armbench::tasks::predicates::{adjacent, on_ground, rests_on_both};
use armbench::tasks::sampler::{self, Region};
use armbench::tasks::{EpisodeParams, Registry, Task, TaskError, TaskSpec, TaskState};
use std::sync::Arc;

/// Two cubes side by side with a brick bridging them.
struct PyramidStacking {
    spec: TaskSpec,
}

impl PyramidStacking {
    fn new() -> Self {
        PyramidStacking { spec: TaskSpec::new("pyramid_stacking", 3, 4, 10, false) }
    }
}

impl Task for PyramidStacking {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError> {
        let s = params.scale;
        let shapes = [Shape::cube(0.03 * s), Shape::cube(0.03 * s), Shape::cuboid(0.09 * s, 0.03 * s, 0.02 * s)];
        sampler::with_rounds(world, &self.spec.name, |w| {
            for shape in &shapes {
                let pose = sampler::sample_pose(w, shape, &Region::Workspace, sampler::D_SEP, &[], |w| {
                    params.yaw(&mut w.rng)
                })?;
                let cat = if matches!(shape, Shape::Cuboid { lz, .. } if *lz < 0.025 * s) {
                    Category::Brick
                } else {
                    Category::Block
                };
                w.spawn(shape.clone(), pose, cat, true);
            }
            Some(())
        })?;
        Ok(TaskState::None)
    }

    fn check_goal(&self, world: &WorldState, _state: &TaskState) -> bool {
        let cubes: Vec<&SimObject> = world.objects.iter().filter(|o| o.category == Category::Block).collect();
        let Some(brick) = world.objects.iter().find(|o| o.category == Category::Brick) else { return false };
        let [a, b] = cubes[..] else { return false };
        !world.gripper.is_holding() && on_ground(a) && adjacent(a, b, 1.0) && rests_on_both(brick, a, b)
    }
}

#[test]
fn builtin_tasks_are_registered() {
    let r = Registry::builtin();
    assert!(r.len() >= 11);
    for name in ["block_stacking", "house_building_4", "bin_packing", "box_palletizing", "covid_test"] {
        assert_eq!(r.get(name).unwrap().spec().name, name);
    }
    assert!(matches!(r.get("nope"), Err(TaskError::UnknownTask(_))));
}

#[test]
fn duplicate_names_are_rejected() {
    let mut r = Registry::builtin();
    r.register(Arc::new(PyramidStacking::new())).unwrap();
    let err = r.register(Arc::new(PyramidStacking::new())).unwrap_err();
    assert_eq!(err, TaskError::Duplicate("pyramid_stacking".into()));
}

#[test]
fn custom_task_runs_in_env() {
    let mut r = Registry::builtin();
    r.register(Arc::new(PyramidStacking::new())).unwrap();
    let mut env = Env::new(r.get("pyramid_stacking").unwrap(), EnvConfig::default()).unwrap();
    let obs = env.reset().unwrap();
    assert!(obs.heightmap.max() > 0.0);
    assert!(!env.goal_reached());

    // Build the pyramid by hand: cubes 0.04 apart, brick across them.
    let ids: Vec<(u32, Category)> = env.world().objects.iter().map(|o| (o.id, o.category)).collect();
    let (cx, cy) = (0..81)
        .map(|k| (0.33 + 0.03 * (k % 9) as f64, -0.12 + 0.03 * (k / 9) as f64))
        .find(|&(x, y)| {
            let rect = polygon::rect(Vec2::new(x - 0.05, y - 0.02), Vec2::new(x + 0.05, y + 0.02));
            sampler::is_clear(env.world(), &rect, 0.005, &[])
        })
        .expect("a free spot");
    let mut cube_x = [cx - 0.02, cx + 0.02].into_iter();
    let mut steps = 0;
    for (id, cat) in
        ids.iter().filter(|(_, c)| *c == Category::Block).chain(ids.iter().filter(|(_, c)| *c == Category::Brick))
    {
        let o = env.world().object(*id).unwrap().clone();
        env.step([0.0, o.pose.x as f32, o.pose.y as f32, f32::NAN, o.long_axis_yaw() as f32]).unwrap();
        assert!(env.world().gripper.is_holding(), "pick of {cat:?} {id} missed");
        let x = if *cat == Category::Block { cube_x.next().unwrap() } else { cx };
        let r = env.step([1.0, x as f32, cy as f32, f32::NAN, 0.0]).unwrap();
        steps += 2;
        if *cat == Category::Brick {
            assert!(r.done && r.reward == 1.0);
        }
    }
    assert_eq!(steps, 6);
}

#[test]
fn fresh_episodes_never_start_solved() {
    let r = Registry::builtin();
    for name in r.names() {
        let mut config = EnvConfig::default();
        config.seed = 17;
        let mut env = Env::new(r.get(&name).unwrap(), config).unwrap();
        env.reset().unwrap();
        for _ in 0..1000 {
            assert!(!env.goal_reached(), "{name} seed {} starts solved", env.episode_seed());
            assert!(env.world().unsettled().is_empty());
            env.reset_next().unwrap();
        }
    }
}
