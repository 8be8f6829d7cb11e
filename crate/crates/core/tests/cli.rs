use std::path::Path;
use std::process::Command;

fn modrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modrl"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = modrl().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn front_widths() {
    let (code, out, _) = run(&["front", "--env", "dst", "--width", "3"]);
    assert_eq!(code, 0);
    assert_eq!(out, "r_1,r_2\n1,-3\n26.25,-5\n100,-7\n");
    let (code, out, _) = run(&["front", "--width", "5"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 6);
}

#[test]
fn front_rejects_other_envs() {
    let (code, _, err) = run(&["front", "--env", "mountain_car"]);
    assert_ne!(code, 0);
    assert!(err.contains("unsupported"), "{err}");
}

#[test]
fn front_to_file_then_hypervolume() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("front.csv");
    let p = path.to_str().unwrap();
    assert_eq!(run(&["front", "--width", "3", "--out", p]).0, 0);
    let (code, out, _) = run(&["hypervolume", "--front", p, "--ref", "0,-25"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "1854.5");
}

#[test]
fn hypervolume_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let (code, out, _) = run(&["hypervolume", "--front", empty.to_str().unwrap(), "--ref", "0,-25"]);
    assert_eq!((code, out.trim()), (0, "0"));

    let below = dir.path().join("below.csv");
    std::fs::write(&below, "r_1,r_2\n-1,-30\n").unwrap();
    let (code, out, _) = run(&["hypervolume", "--front", below.to_str().unwrap(), "--ref", "0,-25"]);
    assert_eq!((code, out.trim()), (0, "0"));

    let three = dir.path().join("three.csv");
    std::fs::write(&three, "-50,-1,-2\n").unwrap();
    let (code, out, _) = run(&["hypervolume", "--front", three.to_str().unwrap(), "--ref", "-110,-110,-110"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim().parse::<f64>().unwrap(), 60.0 * 109.0 * 108.0);

    let (code, _, err) = run(&["hypervolume", "--front", three.to_str().unwrap(), "--ref", "0,-25"]);
    assert_ne!(code, 0);
    assert!(err.contains("error"), "{err}");
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"
[environment]
env = "dst"
width = 3

[agent]
training_steps = 3000
warmup_steps = 500
epsilon_anneal_steps = 2500
replay_capacity = 3000
target_sync_period = 200
hidden = [16]

[[scalarization]]
kind = "linear"
weights = [0.01, 0.99]

[[scalarization]]
kind = "tlo"
thresholds = [63.125]

[execution]
mode = "parallel"
seed = 11
eval_period = 500
"#;

const ARTIFACTS: [&str; 7] =
    ["trainlog_0.csv", "trainlog_1.csv", "trace_0.csv", "trace_1.csv", "merged_front.csv", "front.csv", "hypervolume.csv"];

#[test]
fn train_writes_reproducible_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RUN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, stdout, stderr) = run(&["train", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{stderr}");
        assert!(stdout.contains("final hypervolume"));
        assert!(stderr.contains("merged hypervolume"));
    }
    for name in ARTIFACTS {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    let trainlog = std::fs::read_to_string(a.join("trainlog_0.csv")).unwrap();
    assert!(trainlog.starts_with("step,r_1,r_2,episode_len\n"));
    assert_eq!(trainlog.lines().count(), 7);
    let hv = std::fs::read_to_string(a.join("hypervolume.csv")).unwrap();
    assert!(hv.starts_with("step,hv\n"));
    let values: Vec<f64> = hv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]), "merged hypervolume must not decrease: {values:?}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([11, 12]));
    assert_eq!(manifest["config"]["execution"]["mode"], "parallel");
    assert_eq!(manifest["config"]["agent"]["replay_capacity"], 3000);
    assert!(manifest["config_text"].as_str().unwrap().contains("thresholds = [63.125]"));
    for name in ARTIFACTS {
        let sum = manifest["checksums"][name].as_str().unwrap();
        assert_eq!(sum.len(), 64);
    }
    let b_manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["checksums"], b_manifest["checksums"]);
}

#[test]
fn train_sequential_offsets_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_RUN.replace("\"parallel\"", "\"sequential\""));
    let out = dir.path().join("out");
    let (code, _, stderr) = run(&["train", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let hv = std::fs::read_to_string(out.join("hypervolume.csv")).unwrap();
    let steps: Vec<usize> = hv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(steps, (1..=12).map(|k| k * 500).collect::<Vec<_>>());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[environment]\nenv = \"dst\"\nwidth = 3\n[agent]\ngamma = 1.5\n");
    let (code, _, err) = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("agent.gamma"), "{err}");

    let cfg = write_config(dir.path(), "[environment]\nenv = \"dst\"\nwidth = 3\nspeed = 2\n");
    assert_eq!(run(&["train", cfg.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["train", "/nonexistent/config.toml"]).0, 2);
    assert_eq!(run(&["bogus"]).0, 2);
}
