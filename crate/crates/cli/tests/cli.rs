use armbench::config::EnvConfig;
use armbench::demo_file::DemoReader;
use armbench::protocol::{self, msg};
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn armbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armbench")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn result_line(out: &Output) -> String {
    stdout(out).lines().find(|l| l.starts_with("RESULT ")).expect("RESULT line").to_string()
}

#[test]
fn run_expert_reports_table_steps() {
    let out = armbench(&["run-expert", "--task", "house_building_4", "--episodes", "20"]);
    assert!(out.status.success());
    assert_eq!(result_line(&out), "RESULT task=house_building_4 success=1.0000 mean_steps=10.0000");
}

#[test]
fn run_expert_files_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |file: &str, workers: &str| {
        let path = dir.path().join(file);
        let args = [
            "run-expert",
            "--task",
            "bin_packing",
            "--episodes",
            "8",
            "--envs",
            "4",
            "--workers",
            workers,
            "--seed",
            "3",
        ];
        let out = armbench(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let (a, b, c) = (run("a.barm", "1"), run("b.barm", "1"), run("c.barm", "4"));
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn demo_gen_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.barm");
    let out = armbench(&[
        "demo-gen",
        "--task",
        "block_stacking",
        "--episodes",
        "12",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
        "--obs-size",
        "64",
    ]);
    assert!(out.status.success());
    assert!(result_line(&out).ends_with("mean_steps=6.0000"));
    let (header, eps) = DemoReader::new(std::fs::File::open(&path).unwrap()).unwrap().read_all().unwrap();
    assert_eq!(header.get("task"), Some("block_stacking"));
    assert_eq!(header.obs_size, 64);
    assert_eq!(eps.len(), 12);
    assert!(eps.iter().all(|e| e.len() == 6 && e[5].reward == 1.0 && e[5].done));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.barm");
    let out = out.to_str().unwrap();
    for args in [
        &["demo-gen", "--task", "no_such", "--episodes", "2", "--out", out][..],
        &["run-expert", "--task", "block_stacking", "--episodes", "0"],
        &["validate", "--obs-size", "0"],
        &["validate", "--num-objects", "5", "--robot", "abb"],
        &["run-expert", "--task", "block_stacking", "--episodes", "1", "--num-objects", "9"],
        &["frobnicate"],
    ] {
        assert_eq!(armbench(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_is_a_domain_failure() {
    let out =
        armbench(&["demo-gen", "--task", "block_stacking", "--episodes", "1", "--out", "/nonexistent/dir/d.barm"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_echoes_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("env.cfg");
    std::fs::write(&file, "# override\nobs_size=90\nhalf_rotation=false\n").unwrap();
    let out = armbench(&["validate", "--config", file.to_str().unwrap(), "--obs-size", "128"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("obs_size=128\n"));
    assert!(text.contains("half_rotation=false\n"));
    assert_eq!(EnvConfig::parse(&text).unwrap().obs_size, 128);
}

#[test]
fn render_writes_one_png_pair_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        armbench(&["render", "--task", "house_building_1", "--seed", "7", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let count = |prefix: &str| {
        std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(prefix))
            .count()
    };
    assert_eq!((count("obs_"), count("inhand_")), (6, 6));
    assert!(Path::new(&dir.path().join("obs_0.png")).exists());
}

#[test]
fn bench_prints_rates() {
    let out = armbench(&["bench", "--task", "block_stacking", "--envs", "2", "--steps", "50"]);
    assert!(out.status.success());
    let line = result_line(&out);
    assert!(line.starts_with("RESULT task=block_stacking single="));
    assert!(line.contains(" aggregate=") && line.contains(" ratio="));
}

#[test]
fn serve_speaks_the_protocol_on_stdio() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_armbench"))
        .args(["serve", "--stdio"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = Vec::new();
    let config = protocol::encode_config(1, "block_stacking", &EnvConfig::default().to_text());
    protocol::write_frame(&mut input, msg::CONFIG, &config).unwrap();
    protocol::write_frame(&mut input, msg::RESET, &[]).unwrap();
    protocol::write_frame(&mut input, msg::EXPERT, &[]).unwrap();
    protocol::write_frame(&mut input, msg::CLOSE, &[]).unwrap();
    child.stdin.take().unwrap().write_all(&input).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let mut r = out.stdout.as_slice();
    let kinds: Vec<u8> = std::iter::from_fn(|| protocol::read_frame(&mut r).unwrap()).map(|(k, _)| k).collect();
    assert_eq!(kinds, [msg::ACK, msg::OBS, msg::ACTIONS]);
}
