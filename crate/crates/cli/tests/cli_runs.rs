//! End-to-end runs of the `gridflc` binary: artifact layout, exit codes, and
//! byte-for-byte reproducibility of every command.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridflc"))
}

fn desk3_config() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/desk3.toml"))
}

/// desk3 with a short horizon and small training so each command runs in
/// well under a second.
fn quick_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(desk3_config()).unwrap();
    let text = text
        .replace("t_max = 60.0", "t_max = 2.0")
        .replace("t_max_train = 80.0", "t_max_train = 2.0")
        .replace("rounds = 20", "rounds = 2")
        .replace("batch_size = 256", "batch_size = 128")
        .replace("epochs_per_round = 4", "epochs_per_round = 1")
        .replace("sweep_levels = [0.0, 33.0, 67.0, 100.0]", "sweep_levels = [0.0, 100.0]")
        .replace("sweep_faults = [\"DF2\", \"DF3\"]", "sweep_faults = [\"DF2\"]");
    let path = dir.join("quick.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning gridflc");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gridflc-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_identical(a: &Path, b: &Path, name: &str) {
    let ba = fs::read(a.join(name)).unwrap_or_else(|_| panic!("{name} missing in {a:?}"));
    let bb = fs::read(b.join(name)).unwrap_or_else(|_| panic!("{name} missing in {b:?}"));
    assert_eq!(ba, bb, "{name} differs between reruns");
}

#[test]
fn print_schema_succeeds() {
    let out = run_ok(bin().arg("--print-schema"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[system]"));
    assert!(text.contains("[training]"));
}

#[test]
fn bad_config_exits_two_with_error_json() {
    let dir = tmp_dir("badcfg");
    let path = dir.join("broken.toml");
    fs::write(&path, "this is not toml at all [").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let payload: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).expect("machine-readable error");
    assert_eq!(payload["error"]["kind"], "config");
}

#[test]
fn unknown_fault_id_exits_two() {
    let dir = tmp_dir("badfault");
    let config = quick_config(&dir);
    let out = bin()
        .args(["simulate", "--fault", "NOPE", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_rounds_rejected_as_config_error() {
    let dir = tmp_dir("zerorounds");
    let config_path = {
        let text = fs::read_to_string(quick_config(&dir)).unwrap().replace("rounds = 2", "rounds = 0");
        let p = dir.join("zero.toml");
        fs::write(&p, text).unwrap();
        p
    };
    // shards are checked after the rounds value, so provide real ones
    let shards = dir.join("shards");
    run_ok(bin()
        .args(["gen-data", "--fault", "DF1", "--config"])
        .arg(quick_config(&dir))
        .arg("--out")
        .arg(&shards));
    let out = bin()
        .args(["train", "--config"])
        .arg(&config_path)
        .arg("--shards")
        .arg(&shards)
        .arg("--out")
        .arg(dir.join("train"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_pipeline_artifacts_and_determinism() {
    let dir = tmp_dir("pipeline");
    let config = quick_config(&dir);

    // simulate twice
    let sim_a = dir.join("sim_a");
    let sim_b = dir.join("sim_b");
    for out in [&sim_a, &sim_b] {
        run_ok(bin()
            .args(["simulate", "--fault", "DF1", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out));
    }
    assert_identical(&sim_a, &sim_b, "trajectory.csv");
    assert_identical(&sim_a, &sim_b, "summary.json");
    let header = fs::read_to_string(sim_a.join("trajectory.csv")).unwrap();
    assert!(header.starts_with(
        "t,delta_1,delta_2,delta_3,omega_1,omega_2,omega_3,pu_1,pu_2,pu_3,pa_1,pa_2,pa_3\n"
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim_a.join("summary.json")).unwrap()).unwrap();
    assert!(summary["config_hash"].is_string());

    // gen-data twice
    let shards_a = dir.join("shards_a");
    let shards_b = dir.join("shards_b");
    for out in [&shards_a, &shards_b] {
        run_ok(bin()
            .args(["gen-data", "--fault", "DF1", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out));
    }
    for name in ["manifest.json", "shard_1.csv", "shard_2.csv", "shard_3.csv"] {
        assert_identical(&shards_a, &shards_b, name);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(shards_a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_generators"], 3);
    assert_eq!(manifest["samples_per_shard"], 2001);
    let shard_rows = fs::read_to_string(shards_a.join("shard_1.csv")).unwrap().lines().count();
    assert_eq!(shard_rows, 2002, "header plus one row per sample");

    // train twice
    let train_a = dir.join("train_a");
    let train_b = dir.join("train_b");
    for out in [&train_a, &train_b] {
        run_ok(bin()
            .args(["train", "--config"])
            .arg(&config)
            .arg("--shards")
            .arg(&shards_a)
            .arg("--out")
            .arg(out));
    }
    assert_identical(&train_a, &train_b, "checkpoint.json");
    assert_identical(&train_a, &train_b, "round_report.csv");
    assert_identical(&train_a.join("rounds"), &train_b.join("rounds"), "round_01.json");
    assert_identical(&train_a.join("rounds"), &train_b.join("rounds"), "round_02.json");
    let report = fs::read_to_string(train_a.join("round_report.csv")).unwrap();
    assert!(report.starts_with("round,probe_loss,client_1_loss,client_2_loss,client_3_loss\n"));
    assert_eq!(report.lines().count(), 3);

    // evaluate twice
    let eval_a = dir.join("eval_a");
    let eval_b = dir.join("eval_b");
    for out in [&eval_a, &eval_b] {
        run_ok(bin()
            .args(["evaluate", "--config"])
            .arg(&config)
            .arg("--checkpoint")
            .arg(train_a.join("checkpoint.json"))
            .arg("--out")
            .arg(out)
            .args(["--jobs", "2"]));
    }
    assert_identical(&eval_a, &eval_b, "results.csv");
    assert_identical(&eval_a, &eval_b, "metadata.json");
    let results = fs::read_to_string(eval_a.join("results.csv")).unwrap();
    assert!(results.starts_with("fault,mode,level_pct,group,stab_time_s,unstable,p_inj,p_stor\n"));

    // info twice (stdout compared)
    let info_a = run_ok(bin().args(["info", "--config"]).arg(&config));
    let info_b = run_ok(bin().args(["info", "--config"]).arg(&config));
    assert_eq!(info_a.stdout, info_b.stdout);
    let text = String::from_utf8(info_a.stdout).unwrap();
    assert!(text.contains("trainable parameters: 768"));
    assert!(text.contains("flops per forward pass: 1956"));

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn simulate_without_fault_reports_all_stable() {
    let dir = tmp_dir("nofault");
    let config = quick_config(&dir);
    let out = dir.join("out");
    run_ok(bin().args(["simulate", "--config"]).arg(&config).arg("--out").arg(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["fault"].is_null());
    for entry in summary["stability"].as_array().unwrap() {
        assert_eq!(entry["stab_time_s"], 0.0);
        assert_eq!(entry["unstable"], false);
    }
    let _ = fs::remove_dir_all(&dir);
}
