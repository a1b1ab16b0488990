//! End-to-end tests against the compiled binary: exit codes, JSON
//! outputs, determinism, and the on-disk formats of every subcommand.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hope() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hope"));
    // Tests pin the base seed themselves; a stray HOPE_SEED in the
    // environment must not leak in.
    cmd.env_remove("HOPE_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should spawn")
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout should be JSON")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("process should exit normally")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(hope().arg("--help"))), 0);
    assert_eq!(code(&run(hope().arg("--version"))), 0);
    assert_eq!(code(&run(hope().args(["bench", "--help"]))), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(hope().arg("bogus"))), 1);
    assert_eq!(code(&run(hope().arg("lid"))), 1, "missing required --input");
    assert_eq!(
        code(&run(hope().args([
            "scenegen",
            "--type",
            "skyway",
            "--out",
            "/tmp/never-created"
        ]))),
        1,
        "unknown scene type"
    );
}

#[test]
fn missing_or_malformed_files_exit_three() {
    assert_eq!(
        code(&run(hope().args(["lid", "--input", "/definitely/not/here.hpc"]))),
        3
    );
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("router.json");
    std::fs::write(&config, "{not json").unwrap();
    assert_eq!(
        code(&run(hope().args([
            "route",
            "--dhat",
            "7.0",
            "--config",
            config.to_str().unwrap()
        ]))),
        3
    );
}

#[test]
fn invalid_hope_seed_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(hope()
        .env("HOPE_SEED", "not-a-number")
        .args(["scenegen", "--type", "highway", "--out"])
        .arg(dir.path().join("sc")));
    assert_eq!(code(&output), 1);
    assert!(String::from_utf8_lossy(&output.stderr).contains("HOPE_SEED"));
}

fn scenegen(dir: &Path, scene_type: &str, frames: &str, seed: Option<&str>) -> Value {
    let mut cmd = hope();
    cmd.args(["scenegen", "--type", scene_type, "--frames", frames, "--out"])
        .arg(dir);
    if let Some(seed) = seed {
        cmd.args(["--seed", seed]);
    }
    stdout_json(&run(&mut cmd))
}

#[test]
fn scenegen_writes_a_deterministic_scenario_directory() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let report = scenegen(&a, "highway", "2", Some("7"));
    assert_eq!(report["scene_type"], "highway");
    assert_eq!(report["frames"], 2);
    assert_eq!(report["seed"], 7);
    assert!(a.join("scenario.json").is_file());
    assert!(a.join("frames/frame_00000.hpc").is_file());
    assert!(a.join("frames/obs_00001.json").is_file());

    scenegen(&b, "highway", "2", Some("7"));
    let bytes_a = std::fs::read(a.join("scenario.json")).unwrap();
    let bytes_b = std::fs::read(b.join("scenario.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must give identical files");
}

#[test]
fn lid_reports_low_dimension_for_highway_frames() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    scenegen(&sc, "highway", "1", Some("7"));
    let frame = sc.join("frames/frame_00000.hpc");

    let report = stdout_json(&run(hope().args(["lid", "--input"]).arg(&frame)));
    let d_hat = report["d_hat"].as_f64().unwrap();
    assert!(
        (2.0..4.5).contains(&d_hat),
        "highway frame read d_hat {d_hat}"
    );
    assert_eq!(report["method"], "mle");
    let n_voxeled = report["n_used"].as_u64().unwrap();
    assert!(n_voxeled > 0);

    let full = stdout_json(&run(hope()
        .args(["lid", "--voxel", "0", "--input"])
        .arg(&frame)));
    assert!(
        full["n_used"].as_u64().unwrap() >= n_voxeled,
        "disabling the voxel filter must not shrink the sample"
    );

    let regress = stdout_json(&run(hope()
        .args(["lid", "--method", "regress", "--input"])
        .arg(&frame)));
    assert_eq!(regress["method"], "regress");
}

fn route(dhat: &str, config: &Path, mode: &str) -> Value {
    stdout_json(&run(hope().args([
        "route",
        "--dhat",
        dhat,
        "--config",
        config.to_str().unwrap(),
        "--mode",
        mode,
    ])))
}

#[test]
fn route_modes_agree_on_the_selected_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("router.json");
    std::fs::write(
        &config,
        r#"{"centers":[3.0,8.0,13.0],"beta":1.0,"tau1":5.0,"tau2":12.0}"#,
    )
    .unwrap();

    for mode in ["threshold", "hard", "soft"] {
        assert_eq!(route("3.2", &config, mode)["selected"], 0, "mode {mode}");
        assert_eq!(route("14.5", &config, mode)["selected"], 2, "mode {mode}");
    }

    let threshold = route("5.0", &config, "threshold");
    assert_eq!(threshold["selected"], 0, "boundary values stay shallow");
    assert_eq!(route("12.0", &config, "threshold")["selected"], 1);
    assert_eq!(threshold["weights"], serde_json::json!([1.0, 0.0, 0.0]));

    let soft = route("7.0", &config, "soft");
    let weights: Vec<f64> = soft["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .collect();
    let total: f64 = weights.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(weights.iter().all(|&w| w > 0.0), "soft weights stay dense");

    let hard = route("7.0", &config, "hard");
    assert_eq!(hard["weights"], serde_json::json!([0.0, 1.0, 0.0]));

    let bad_mode = run(hope().args([
        "route",
        "--dhat",
        "7.0",
        "--config",
        config.to_str().unwrap(),
        "--mode",
        "fuzzy",
    ]));
    assert_eq!(code(&bad_mode), 1);
}

#[test]
fn ghn_runs_over_a_generated_scenario_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    scenegen(&sc, "suburban", "1", Some("11"));

    // Directory input, stdout output.
    let processed = stdout_json(&run(hope()
        .args(["ghn", "--path", "shallow", "--scene"])
        .arg(&sc)));
    assert!(!processed["agents"].as_array().unwrap().is_empty());

    // scenario.json input, file output at a different width.
    let out = dir.path().join("deep.json");
    let output = run(hope()
        .args(["ghn", "--path", "deep", "--scene"])
        .arg(sc.join("scenario.json"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&output), 0);
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("width 32"), "summary line: {text}");
    assert!(out.is_file());

    // The written result is itself a loadable scene.
    let rerun = run(hope().args(["ghn", "--path", "deep", "--scene"]).arg(&out));
    assert_eq!(code(&rerun), 0);

    let bad_path = run(hope()
        .args(["ghn", "--path", "bottomless", "--scene"])
        .arg(&sc));
    assert_eq!(code(&bad_path), 1);
}

#[test]
fn hope_seed_environment_variable_sets_the_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    let output = run(hope()
        .env("HOPE_SEED", "123")
        .args(["scenegen", "--type", "urban", "--frames", "1", "--out"])
        .arg(&sc));
    let report = stdout_json(&output);
    assert_eq!(report["seed"], 123, "env seed should fill in for --seed");

    // An explicit --seed still wins over the environment.
    let sc2 = dir.path().join("sc2");
    let report = stdout_json(&run(hope()
        .env("HOPE_SEED", "123")
        .args([
            "scenegen", "--type", "urban", "--frames", "1", "--seed", "9", "--out",
        ])
        .arg(&sc2)));
    assert_eq!(report["seed"], 9);
}

#[test]
fn bench_occlusion_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("occ.csv");
    let output = run(hope()
        .args([
            "bench",
            "occlusion",
            "--gaps",
            "40",
            "--modes",
            "none,stm+ltm",
            "--seeds",
            "1",
            "--out",
        ])
        .arg(&csv));
    assert_eq!(
        code(&output),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,gap,mode,seed,occ_track"));
    // One scripted and one randomized row per mode.
    assert_eq!(lines.count(), 4);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("wrote 4 rows"));
}

#[test]
fn bench_rejects_impossible_parameters() {
    // Too few sizes to fit an exponent.
    assert_eq!(
        code(&run(hope().args([
            "bench", "scaling", "--agents", "32,64,128", "--trials", "1"
        ]))),
        1
    );
    // Gaps at the event threshold never register an occlusion.
    assert_eq!(
        code(&run(hope().args(["bench", "occlusion", "--gaps", "5"]))),
        1
    );
    // Unknown memory mode.
    assert_eq!(
        code(&run(hope().args([
            "bench",
            "occlusion",
            "--gaps",
            "40",
            "--modes",
            "psychic"
        ]))),
        1
    );
}
