use anyhow::{Context, Result};
use armbench::config::EnvConfig;
use armbench::demo_file::{header_text, DemoWriter};
use armbench::env::{derive_seed, Env, RawAction};
use armbench::planners::generate_demos_with;
use armbench::protocol::DEFAULT_PORT;
use armbench::render::export_png;
use armbench::runner::{expert_episode, VectorEnv};
use armbench::server::Server;
use armbench::tasks::{Registry, Task};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "armbench", version, about = "Open-loop pick-and-place benchmark environments")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate expert demonstrations into a demo file.
    DemoGen {
        #[arg(long)]
        task: String,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Roll out the waypoint expert and report success and step counts.
    RunExpert {
        #[arg(long)]
        task: String,
        #[arg(long)]
        episodes: usize,
        /// Environments stepped in lockstep.
        #[arg(long, default_value_t = 1)]
        envs: usize,
        #[arg(long)]
        workers: Option<usize>,
        /// Also write every episode to a demo file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Measure environment steps per second.
    Bench {
        #[arg(long, default_value = "block_stacking")]
        task: String,
        #[arg(long, default_value_t = 5)]
        envs: usize,
        /// Steps per environment.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Export the observations of one expert episode as 16-bit PNGs.
    Render {
        #[arg(long)]
        task: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Serve environments over TCP or stdin/stdout.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT, conflicts_with = "stdio")]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        stdio: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the resolved configuration, or reject it.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// key=value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    robot: Option<String>,
    #[arg(long)]
    action_sequence: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    workspace: Option<String>,
    #[arg(long)]
    object_scale_range: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    #[arg(long)]
    num_objects: Option<String>,
    #[arg(long)]
    obs_size: Option<String>,
    #[arg(long)]
    in_hand_size: Option<String>,
    #[arg(long)]
    fast_mode: Option<String>,
    #[arg(long)]
    render: Option<String>,
    #[arg(long)]
    random_orientation: Option<String>,
    #[arg(long)]
    half_rotation: Option<String>,
    #[arg(long)]
    workspace_check: Option<String>,
    #[arg(long)]
    close_loop_tray: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

/// Error caused by the invocation rather than the run; exits with 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

impl ConfigArgs {
    fn pairs(&self) -> [(&'static str, &Option<String>); 15] {
        [
            ("robot", &self.robot),
            ("action_sequence", &self.action_sequence),
            ("workspace", &self.workspace),
            ("object_scale_range", &self.object_scale_range),
            ("max_steps", &self.max_steps),
            ("num_objects", &self.num_objects),
            ("obs_size", &self.obs_size),
            ("in_hand_size", &self.in_hand_size),
            ("fast_mode", &self.fast_mode),
            ("render", &self.render),
            ("random_orientation", &self.random_orientation),
            ("half_rotation", &self.half_rotation),
            ("workspace_check", &self.workspace_check),
            ("close_loop_tray", &self.close_loop_tray),
            ("seed", &self.seed),
        ]
    }

    fn resolve(&self) -> Result<EnvConfig> {
        let mut config = EnvConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            if let Err(e) = config.apply_text(&text) {
                return usage(format!("{}: {e}", path.display()));
            }
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                if let Err(e) = config.set(key, v) {
                    return usage(format!("--{}: {e}", key.replace('_', "-")));
                }
            }
        }
        if let Err(e) = config.validate() {
            return usage(e.to_string());
        }
        Ok(config)
    }
}

fn task(registry: &Registry, name: &str, config: &EnvConfig) -> Result<Arc<dyn Task>> {
    let task = match registry.get(name) {
        Ok(t) => t,
        Err(e) => return usage(format!("{e}; known tasks: {}", registry.names().join(", "))),
    };
    if let Some(n) = config.num_objects {
        if let Err(e) = task.check_num_objects(n) {
            return usage(e.to_string());
        }
    }
    Ok(task)
}

fn workers(flag: Option<usize>) -> usize {
    flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return usage(format!("--{name} must be at least 1"));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn percentile(sorted: &[u32], p: f64) -> u32 {
    if sorted.is_empty() {
        return 0;
    }
    sorted[((sorted.len() - 1) as f64 * p).round() as usize]
}

fn demo_gen(name: &str, episodes: usize, out: &Path, workers: usize, config: &EnvConfig) -> Result<()> {
    positive("episodes", episodes)?;
    let task = task(&Registry::builtin(), name, config)?;
    let text = header_text(name, config);
    let mut writer = DemoWriter::new(create(out)?, &text, config.obs_size, config.in_hand_size, episodes as u32)?;
    let mut steps = 0usize;
    let mut successes = 0usize;
    generate_demos_with(&task, config, episodes, config.seed, workers, |ep| {
        steps += ep.len();
        successes += usize::from(ep.last().is_some_and(|t| t.reward == 1.0));
        writer.write_episode(&ep).map_err(anyhow::Error::from)
    })
    .with_context(|| format!("generating demonstrations for {name}"))?;
    writer.finish()?;
    let mean = steps as f64 / episodes as f64;
    println!("wrote {episodes} episodes to {} ({successes} successful, mean steps {mean:.2})", out.display());
    println!(
        "RESULT task={name} episodes={episodes} success={:.4} mean_steps={mean:.4}",
        successes as f64 / episodes as f64
    );
    Ok(())
}

fn run_expert(
    name: &str,
    episodes: usize,
    envs: usize,
    workers: usize,
    out: Option<&Path>,
    config: &EnvConfig,
) -> Result<()> {
    positive("episodes", episodes)?;
    positive("envs", envs)?;
    let task = task(&Registry::builtin(), name, config)?;
    let mut writer = match out {
        Some(path) => Some(DemoWriter::new(
            create(path)?,
            &header_text(name, config),
            config.obs_size,
            config.in_hand_size,
            episodes as u32,
        )?),
        None => None,
    };
    let mut vec = VectorEnv::new(task, config, envs, workers)?;
    let mut success_steps = Vec::new();
    let mut failures = Vec::new();
    vec.run_expert_with(episodes, |_, ep| {
        if ep.success {
            success_steps.push(ep.steps);
        } else {
            failures.push(ep.seed);
        }
        if let Some(w) = writer.as_mut() {
            w.write_episode(&ep.transitions)?;
        }
        Ok::<_, anyhow::Error>(())
    })?;
    if let Some(w) = writer {
        w.finish()?;
    }
    let rate = success_steps.len() as f64 / episodes as f64;
    let mean = if success_steps.is_empty() {
        0.0
    } else {
        success_steps.iter().map(|&s| s as f64).sum::<f64>() / success_steps.len() as f64
    };
    success_steps.sort_unstable();
    println!("task {name}: {}/{episodes} successful", success_steps.len());
    println!(
        "steps over successes: mean {mean:.2}, p50 {}, p90 {}, max {}",
        percentile(&success_steps, 0.5),
        percentile(&success_steps, 0.9),
        success_steps.last().copied().unwrap_or(0)
    );
    if !failures.is_empty() {
        let seeds: Vec<String> = failures.iter().map(u64::to_string).collect();
        println!("failed episode seeds: {}", seeds.join(" "));
    }
    println!("RESULT task={name} success={rate:.4} mean_steps={mean:.4}");
    Ok(())
}

fn random_action(rng: &mut ChaCha8Rng, config: &EnvConfig) -> RawAction {
    let [[x0, x1], [y0, y1], _] = config.workspace;
    [
        rng.gen_range(0..2) as f32,
        rng.gen_range(x0..x1) as f32,
        rng.gen_range(y0..y1) as f32,
        f32::NAN,
        rng.gen_range(0.0..std::f32::consts::PI),
    ]
}

/// Steps per second over `steps` lockstep rounds of uniformly random actions.
fn measure(vec: &mut VectorEnv, steps: usize, config: &EnvConfig) -> Result<f64> {
    vec.reset()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, vec.len() as u64));
    let rounds: Vec<Vec<RawAction>> =
        (0..steps).map(|_| (0..vec.len()).map(|_| random_action(&mut rng, config)).collect()).collect();
    let start = Instant::now();
    for actions in &rounds {
        vec.step(actions)?;
    }
    Ok((steps * vec.len()) as f64 / start.elapsed().as_secs_f64())
}

fn bench(name: &str, envs: usize, steps: usize, workers: usize, config: &EnvConfig) -> Result<()> {
    positive("envs", envs)?;
    positive("steps", steps)?;
    let task = task(&Registry::builtin(), name, config)?;
    let single = measure(&mut VectorEnv::new(task.clone(), config, 1, 1)?, steps, config)?;
    let aggregate = measure(&mut VectorEnv::new(task, config, envs, workers)?, steps, config)?;
    println!("single env: {single:.0} steps/s over {steps} steps");
    println!("{envs} envs on {workers} workers: {aggregate:.0} steps/s over {} steps", steps * envs);
    println!("RESULT task={name} single={single:.1} aggregate={aggregate:.1} ratio={:.3}", aggregate / single);
    Ok(())
}

fn render(name: &str, out_dir: &Path, config: &EnvConfig) -> Result<()> {
    let task = task(&Registry::builtin(), name, config)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut env = Env::new(task, config.clone())?;
    env.reset()?;
    let ep = expert_episode(&mut env)?;
    let z_max = config.workspace[2][1];
    for (t, tr) in ep.transitions.iter().enumerate() {
        export_png(&tr.obs.heightmap, z_max, &out_dir.join(format!("obs_{t}.png")))?;
        export_png(&tr.obs.in_hand, z_max, &out_dir.join(format!("inhand_{t}.png")))?;
    }
    println!(
        "wrote {} observation pairs to {} (episode seed {}, {})",
        ep.transitions.len(),
        out_dir.display(),
        ep.seed,
        if ep.success { "solved" } else { "not solved" }
    );
    Ok(())
}

fn serve(host: &str, port: u16, stdio: bool, workers: usize) -> Result<()> {
    let server = Server::new(Registry::builtin(), workers);
    if stdio {
        let stdin = std::io::stdin().lock();
        let stdout = std::io::stdout().lock();
        server.handle(stdin, stdout)?;
        return Ok(());
    }
    let listener = std::net::TcpListener::bind((host, port)).with_context(|| format!("binding {host}:{port}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    server.serve(listener)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DemoGen { task, episodes, out, workers: w, config } => {
            demo_gen(&task, episodes, &out, workers(w), &config.resolve()?)
        }
        Command::RunExpert { task, episodes, envs, workers: w, out, config } => {
            run_expert(&task, episodes, envs, workers(w), out.as_deref(), &config.resolve()?)
        }
        Command::Bench { task, envs, steps, workers: w, config } => {
            bench(&task, envs, steps, w.unwrap_or(envs), &config.resolve()?)
        }
        Command::Render { task, out_dir, config } => render(&task, &out_dir, &config.resolve()?),
        Command::Serve { port, host, stdio, workers: w } => serve(&host, port, stdio, workers(w)),
        Command::Validate { config } => {
            let config = config.resolve()?;
            let mut out = std::io::stdout().lock();
            out.write_all(config.to_text().as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
