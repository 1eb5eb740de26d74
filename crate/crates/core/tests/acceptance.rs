//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process exits non-zero if any criterion fails, except criteria whose
//! failure is explained by the host (reported as `FAIL (host)`).

use armbench::config::EnvConfig;
use armbench::demo_file::write_demos;
use armbench::env::{Env, RawAction};
use armbench::geometry::polygon::Vec2;
use armbench::geometry::{GridSpec, Shape};
use armbench::planners::decon::{decon_generate, replay};
use armbench::protocol::{self, ObsRecord};
use armbench::render::render_heightmap;
use armbench::runner::VectorEnv;
use armbench::server::Server;
use armbench::sim::{Category, SimObject, WorldState};
use armbench::tasks::Registry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

/// Objects, optimal steps and step limit per task, as published.
const TABLE: [(&str, usize, u32, u32); 11] = [
    ("block_stacking", 4, 6, 10),
    ("house_building_1", 4, 6, 10),
    ("house_building_2", 3, 4, 10),
    ("house_building_3", 4, 6, 10),
    ("house_building_4", 6, 10, 20),
    ("improvise_house_building_2", 3, 4, 10),
    ("improvise_house_building_3", 4, 6, 10),
    ("bin_packing", 8, 16, 20),
    ("bottle_arrangement", 6, 12, 20),
    ("box_palletizing", 18, 36, 40),
    ("covid_test", 6, 18, 30),
];

/// Step bounds for tasks without a deconstruction expert.
const UPPER_BOUNDS: [(&str, u32); 4] =
    [("bin_packing", 16), ("bottle_arrangement", 12), ("box_palletizing", 36), ("covid_test", 18)];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    host_limited: bool,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail, host_limited: false }
}

fn table2(registry: &Registry) -> Outcome {
    let config = EnvConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, objects, optimal, max) in TABLE {
        let task = registry.get(name).unwrap();
        let spec = task.spec();
        if (spec.num_objects, spec.optimal_steps, spec.max_steps) != (objects, optimal, max) {
            pass = false;
            lines.push(format!(
                "{name}: spec {:?} differs from table",
                (spec.num_objects, spec.optimal_steps, spec.max_steps)
            ));
            continue;
        }
        let episodes: u64 = if name == "block_stacking" { 500 } else { 200 };
        let threshold = if name == "block_stacking" { 0.99 } else { 0.95 };
        let (mut wins, mut worst) = (0u64, 0u32);
        let mut exact = true;
        if task.structure().is_some() {
            for seed in 0..episodes {
                let Ok(ep) = decon_generate(&task, &config, seed) else { continue };
                let steps = ep.transitions.len() as u32;
                let (reward, done) = replay(&task, &config, &ep).unwrap();
                if reward == 1.0 && done {
                    wins += 1;
                    worst = worst.max(steps);
                    exact &= steps == optimal;
                }
            }
        } else {
            let mut cfg = config.clone();
            cfg.seed = 1000;
            let mut envs = VectorEnv::new(task.clone(), &cfg, 1, 1).unwrap();
            for ep in envs.run_expert(episodes as usize).unwrap() {
                if ep.success {
                    wins += 1;
                    worst = worst.max(ep.steps);
                }
            }
            let bound = UPPER_BOUNDS.iter().find(|(n, _)| *n == name).unwrap().1;
            exact = worst <= bound;
        }
        let rate = wins as f64 / episodes as f64;
        let ok = rate >= threshold && exact;
        pass &= ok;
        lines.push(format!(
            "{name}: success {wins}/{episodes}, max steps {worst} (optimal {optimal}) {}",
            if ok { "ok" } else { "BAD" }
        ));
    }
    outcome("table2 step conformance", pass, lines.join("\n    "))
}

fn determinism(registry: &Registry) -> Outcome {
    let task = registry.get("house_building_4").unwrap();
    let mut config = EnvConfig::default();
    config.seed = 7;
    let run = |workers: usize| {
        let mut envs = VectorEnv::new(task.clone(), &config, 4, workers).unwrap();
        let eps: Vec<_> = envs.run_expert(12).unwrap().into_iter().map(|e| e.transitions).collect();
        write_demos(Vec::new(), "house_building_4", &config, &eps).unwrap()
    };
    let (a, b, c) = (run(1), run(1), run(4));
    let pass = a == b && a == c;
    outcome("determinism", pass, format!("{} bytes, repeat equal {}, workers 1 vs 4 equal {}", a.len(), a == b, a == c))
}

/// Independent column-height oracle: for each pixel center, the maximum
/// over objects of the top surface, computed from the shape definitions.
fn oracle_height(obj: &SimObject, x: f64, y: f64) -> Option<f64> {
    let (s, c) = obj.pose.yaw.sin_cos();
    let (dx, dy) = (x - obj.pose.x, y - obj.pose.y);
    let (lx_, ly_) = (c * dx + s * dy, -s * dx + c * dy);
    let eps = 1e-9;
    let base = obj.pose.z - obj.shape.height() / 2.0;
    let in_box = |hx: f64, hy: f64| lx_.abs() <= hx + eps && ly_.abs() <= hy + eps;
    let top = match &obj.shape {
        Shape::Cuboid { lx, ly, lz } | Shape::Slab { lx, ly, lz } => in_box(lx / 2.0, ly / 2.0).then_some(*lz)?,
        Shape::TriangularPrism { lx, ly, lz } => {
            if !in_box(lx / 2.0, ly / 2.0) {
                return None;
            }
            lz * (1.0 - (2.0 * ly_.abs() / ly).min(1.0))
        }
        Shape::Cylinder { radius, height } => ((lx_ * lx_ + ly_ * ly_).sqrt() <= radius + eps).then_some(*height)?,
        Shape::ConvexPrism { footprint, height } => {
            let n = footprint.len();
            let inside = (0..n).all(|i| {
                let (a, b) = (footprint[i], footprint[(i + 1) % n]);
                let cross = (b.x - a.x) * (ly_ - a.y) - (b.y - a.y) * (lx_ - a.x);
                let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
                cross >= -eps * len
            });
            inside.then_some(*height)?
        }
        Shape::Container { lx, ly, lz, wall, depth } => {
            if !in_box(lx / 2.0, ly / 2.0) {
                return None;
            }
            let cavity = lx_.abs() < lx / 2.0 - wall && ly_.abs() < ly / 2.0 - wall;
            if cavity {
                lz - depth
            } else {
                *lz
            }
        }
    };
    Some(base + top)
}

fn renderer_oracle(registry: &Registry) -> Outcome {
    let names = registry.names();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for w in 0..100u64 {
        let task = registry.get(&names[w as usize % names.len()]).unwrap();
        let mut config = EnvConfig::default();
        config.seed = w;
        config.obs_size = [64, 90, 128][w as usize % 3];
        let mut env = Env::new(task, config.clone()).unwrap();
        env.reset().unwrap();
        for _ in 0..rng.gen_range(0..6) {
            let a = if rng.gen_bool(0.5) { env.expert_action().unwrap() } else { random_action(&mut rng, env.world()) };
            if env.step(a).unwrap().done {
                break;
            }
        }
        let grid: GridSpec = config.grid().unwrap();
        let map = render_heightmap(env.world(), &grid);
        let pitch = (grid.x_max - grid.x_min) / grid.size as f64;
        for row in 0..grid.size {
            for col in 0..grid.size {
                let x = grid.x_min + (col as f64 + 0.5) * pitch;
                let y = grid.y_min + (row as f64 + 0.5) * pitch;
                let h = env.world().objects.iter().filter_map(|o| oracle_height(o, x, y)).fold(0.0, f64::max);
                worst = worst.max((map.get(row, col) as f64 - h).abs());
            }
        }
    }
    outcome("renderer oracle", worst <= 1e-6, format!("100 worlds, max cell error {worst:.3e}"))
}

fn decon_reversal(registry: &Registry) -> Outcome {
    let config = EnvConfig::default();
    let structures: Vec<String> =
        registry.names().into_iter().filter(|n| registry.get(n).unwrap().structure().is_some()).collect();
    let mut ok = 0;
    for i in 0..100u64 {
        let task = registry.get(&structures[i as usize % structures.len()]).unwrap();
        let Ok(ep) = decon_generate(&task, &config, 10_000 + i) else { continue };
        let (reward, done) = replay(&task, &config, &ep).unwrap();
        ok += usize::from(reward == 1.0 && done);
    }
    outcome("deconstruction reversal", ok == 100, format!("{ok}/100 replays reach the goal with reward 1"))
}

fn random_action(rng: &mut ChaCha8Rng, world: &WorldState) -> RawAction {
    let b = world.bounds;
    let (x, y) = if rng.gen_bool(0.6) && !world.objects.is_empty() {
        let o = &world.objects[rng.gen_range(0..world.objects.len())];
        (o.pose.x + rng.gen_range(-0.01..0.01), o.pose.y + rng.gen_range(-0.01..0.01))
    } else {
        (rng.gen_range(b.x_min..b.x_max), rng.gen_range(b.y_min..b.y_max))
    };
    [rng.gen_range(0.0..1.0f32).round(), x as f32, y as f32, f32::NAN, rng.gen_range(0.0..std::f32::consts::PI)]
}

/// Independent stack predicate: all blocks form one vertical column.
fn stack_oracle(world: &WorldState) -> bool {
    if world.gripper.holding.is_some() || world.objects.iter().any(|o| o.out_of_play) {
        return false;
    }
    let mut blocks: Vec<&SimObject> = world.objects.iter().filter(|o| o.category == Category::Block).collect();
    blocks.sort_by(|a, b| a.pose.z.total_cmp(&b.pose.z));
    let half = |o: &SimObject| o.shape.height() / 2.0;
    if blocks.is_empty() || (blocks[0].pose.z - half(blocks[0])).abs() > 1e-6 {
        return false;
    }
    blocks.windows(2).all(|w| {
        let d = Vec2::new(w[1].pose.x - w[0].pose.x, w[1].pose.y - w[0].pose.y);
        let gap = (w[1].pose.z - half(w[1])) - (w[0].pose.z + half(w[0]));
        d.norm() <= 0.015 && gap.abs() <= 1e-6
    })
}

fn sparse_reward() -> Outcome {
    let mut env = Env::from_name("block_stacking", EnvConfig::default()).unwrap();
    env.reset().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut violations, mut goals, mut dones) = (0, 0, 0);
    let mut steps_in_episode = 0u32;
    for _ in 0..10_000 {
        let a = if rng.gen_bool(0.7) { env.expert_action().unwrap() } else { random_action(&mut rng, env.world()) };
        let r = env.step(a).unwrap();
        if r.info.auto_reset {
            steps_in_episode = 0;
            continue;
        }
        steps_in_episode += 1;
        let goal = stack_oracle(env.world());
        violations += usize::from((r.reward == 1.0) != goal);
        violations += usize::from(r.done != (goal || steps_in_episode == 10));
        goals += usize::from(goal);
        dones += usize::from(r.done);
    }
    outcome(
        "sparse reward",
        violations == 0 && goals > 0,
        format!("10000 steps, {goals} goal steps, {dones} terminal steps, {violations} violations"),
    )
}

fn settledness(registry: &Registry) -> Outcome {
    let names = registry.names();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut unsettled, mut lost, mut steps) = (0, 0, 0);
    let per_task = 10_000usize.div_ceil(names.len());
    for name in &names {
        let mut config = EnvConfig::default();
        config.seed = rng.gen();
        let mut env = Env::from_name(name, config).unwrap();
        env.reset().unwrap();
        for _ in 0..per_task {
            let a = if rng.gen_bool(0.5) { env.expert_action().unwrap() } else { random_action(&mut rng, env.world()) };
            let r = env.step(a).unwrap();
            steps += 1;
            unsettled += usize::from(!env.world().unsettled().is_empty());
            lost += usize::from(r.info.movable_before != r.info.movable_after_sim);
        }
    }
    outcome(
        "settledness fuzz",
        unsettled == 0 && lost == 0,
        format!("{steps} steps, {unsettled} unsettled states, {lost} count changes"),
    )
}

fn protocol_transparency(registry: &Registry) -> Outcome {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = Server::new(Registry::builtin(), 2);
    std::thread::spawn(move || server.serve(listener));
    let mut client = armbench::client::Client::connect(addr).unwrap();
    let mut config = EnvConfig::default();
    config.seed = 21;
    let n = 2u16;
    client.configure(n, "house_building_3", &config.to_text()).unwrap();
    let mut local = VectorEnv::new(registry.get("house_building_3").unwrap(), &config, n as usize, 1).unwrap();

    let to_records = |obs: Vec<(armbench::env::Observation, f32, bool)>| {
        obs.into_iter().map(|(obs, reward, done)| ObsRecord { obs, reward, done }).collect::<Vec<_>>()
    };
    let mut mismatches = 0;
    let local_reset = local.reset().unwrap().into_iter().map(|o| (o, 0.0, false)).collect();
    mismatches += usize::from(client.reset_raw().unwrap() != protocol::encode_obs(&to_records(local_reset)));
    let mut finished = 0;
    let mut frames = 1;
    while finished < 20 {
        let actions = local.expert_actions().unwrap();
        let remote_actions = client.expert().unwrap();
        mismatches += usize::from(protocol::encode_actions(&actions) != protocol::encode_actions(&remote_actions));
        let results = local.step(&actions).unwrap();
        finished += results.iter().filter(|r| r.done).count();
        let expected =
            protocol::encode_obs(&to_records(results.into_iter().map(|r| (r.obs, r.reward, r.done)).collect()));
        mismatches += usize::from(client.step_raw(&actions).unwrap() != expected);
        frames += 2;
    }
    client.close().unwrap();
    outcome(
        "protocol transparency",
        mismatches == 0,
        format!("{finished} episodes, {frames} frames compared, {mismatches} mismatches"),
    )
}

fn steps_per_second(envs: &mut VectorEnv, duration: Duration) -> f64 {
    envs.reset().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut steps = 0usize;
    while start.elapsed() < duration {
        let actions: Vec<RawAction> = envs.envs().iter().map(|e| random_action(&mut rng, e.world())).collect();
        envs.step(&actions).unwrap();
        steps += actions.len();
    }
    steps as f64 / start.elapsed().as_secs_f64()
}

fn throughput(registry: &Registry) -> Vec<Outcome> {
    let task = registry.get("block_stacking").unwrap();
    let config = EnvConfig::default();
    let single = steps_per_second(&mut VectorEnv::new(task.clone(), &config, 1, 1).unwrap(), Duration::from_secs(2));
    let mut five = VectorEnv::new(task, &config, 5, 5).unwrap();
    let aggregate = steps_per_second(&mut five, Duration::from_secs(2));
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let ratio = aggregate / single;
    vec![
        outcome("throughput single env", single >= 500.0, format!("{single:.0} steps/s (need 500)")),
        Outcome {
            name: "throughput 5-env aggregate",
            pass: ratio >= 2.5,
            detail: format!("{aggregate:.0} steps/s, {ratio:.2}x single (need 2.5x), {cores} core(s) available"),
            host_limited: cores < 5,
        },
    ]
}

fn main() {
    let start = Instant::now();
    let registry = Registry::builtin();
    let mut results = vec![
        table2(&registry),
        determinism(&registry),
        renderer_oracle(&registry),
        decon_reversal(&registry),
        sparse_reward(),
        settledness(&registry),
        protocol_transparency(&registry),
    ];
    results.extend(throughput(&registry));
    let elapsed = start.elapsed();
    results.push(outcome(
        "suite runtime",
        elapsed < Duration::from_secs(600),
        format!("{:.1} s (limit 600 s)", elapsed.as_secs_f64()),
    ));

    let mut failed = false;
    for r in &results {
        let status = match (r.pass, r.host_limited) {
            (true, _) => "PASS",
            (false, true) => "FAIL (host)",
            (false, false) => {
                failed = true;
                "FAIL"
            }
        };
        println!("{status} {}: {}", r.name, r.detail);
    }
    if failed {
        std::process::exit(1);
    }
}
