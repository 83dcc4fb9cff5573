use std::path::{Path, PathBuf};
use std::process::Command;

use mrvox_cli::{run, CliError};
use mrvox_core::grid::{write_point_cloud_file, PointCloud, Pose};
use mrvox_core::sim::gen_scene;

fn mrvox(args: &[&str]) -> (Result<(), CliError>, String) {
    let mut argv: Vec<String> = vec!["mrvox".into()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let result = run(&argv, &mut out);
    (result, String::from_utf8(out).expect("command output is UTF-8"))
}

fn ok(args: &[&str]) -> String {
    let (result, out) = mrvox(args);
    result.unwrap_or_else(|e| panic!("{args:?} failed: {e}\noutput:\n{out}"));
    out
}

fn exit_code(args: &[&str]) -> i32 {
    match mrvox(args).0 {
        Ok(()) => 0,
        Err(e) => e.exit_code(),
    }
}

fn goldens() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("goldens")
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.split_whitespace()
        .filter_map(|tok| tok.strip_prefix(key).and_then(|t| t.strip_prefix('=')))
        .next()
        .unwrap_or_else(|| panic!("no `{key}=` field in:\n{out}"))
}

#[test]
fn voxelize_seed7_low_matches_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("seed7.pcf");
    let output = dir.path().join("seed7.svg");
    write_point_cloud_file(&input, &mrvox_cli::golden::seed7_cloud()).unwrap();

    let out = ok(&[
        "voxelize",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--level",
        "low",
    ]);
    assert!(out.contains("voxels="), "{out}");
    let written = std::fs::read(&output).unwrap();
    let golden = std::fs::read(goldens().join("voxelize_low_seed7.svg")).unwrap();
    assert_eq!(written, golden, "encoded message drifted from the golden file");
}

#[test]
fn voxelize_empty_cloud_writes_a_zero_voxel_message() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.pcf");
    let output = dir.path().join("empty.svg");
    let empty = PointCloud::new(Vec::new(), Pose::identity()).unwrap();
    write_point_cloud_file(&input, &empty).unwrap();

    let out = ok(&[
        "voxelize",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(field(&out, "voxels"), "0");
    assert_eq!(field(&out, "payload_bytes"), "0");
    assert!(output.exists());
}

#[test]
fn voxelize_missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("never.svg");
    let code = exit_code(&[
        "voxelize",
        "--input",
        "/nonexistent/cloud.pcf",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!output.exists());
}

#[test]
fn bandwidth_reports_truncated_tenths() {
    let out = ok(&["bandwidth", "914900", "54500"]);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].contains("bytes=914900") && lines[0].contains("mbps=73.1"), "{out}");
    assert!(lines[1].contains("bytes=54500") && lines[1].contains("mbps=4.3"), "{out}");
    // Mean of the raw rates (73.192 and 4.36), truncated afterwards.
    assert_eq!(field(&out, "mean_mbps"), "38.7");

    let zero = ok(&["bandwidth", "0"]);
    assert!(zero.contains("mbps=0.0"), "{zero}");
}

#[test]
fn bandwidth_measures_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("payload.bin");
    std::fs::write(&path, vec![0u8; 180_000]).unwrap();
    let out = ok(&["bandwidth", path.to_str().unwrap()]);
    assert!(out.contains("bytes=180000") && out.contains("mbps=14.4"), "{out}");
}

#[test]
fn bandwidth_without_inputs_is_a_usage_error() {
    assert_eq!(exit_code(&["bandwidth"]), 1);
}

#[test]
fn simulate_synthetic_seed1_matches_golden_report() {
    let out = ok(&["simulate", "--synthetic", "1", "--strategy", "uniform"]);
    let golden = std::fs::read_to_string(goldens().join("simulate_uniform_seed1.txt")).unwrap();
    assert_eq!(out, golden, "simulation report drifted from the golden file");
}

#[test]
fn simulate_budget_keeps_reported_rates_under_capacity() {
    let out = ok(&[
        "simulate",
        "--synthetic",
        "1",
        "--strategy",
        "budget",
        "--capacity",
        "5",
    ]);
    let max: f64 = field(&out, "max_mbps_display").parse().unwrap();
    assert!(max <= 5.0, "max {max} exceeds the 5 Mbit/s budget:\n{out}");
    for line in out.lines().filter(|l| l.starts_with("frame ")) {
        let mbps: f64 = field(line, "mbps").parse().unwrap();
        assert!(mbps <= 5.0, "{line}");
    }
}

#[test]
fn simulate_budget_without_capacity_is_a_usage_error() {
    assert_eq!(exit_code(&["simulate", "--synthetic", "1", "--strategy", "budget"]), 1);
}

#[test]
fn simulate_zero_frames_is_a_usage_error() {
    assert_eq!(exit_code(&["simulate", "--synthetic", "1", "--frames", "0"]), 1);
}

#[test]
fn simulate_requires_exactly_one_scenario_source() {
    assert_eq!(exit_code(&["simulate"]), 1);
    assert_eq!(
        exit_code(&["simulate", "--synthetic", "1", "--scenario", "some.scn"]),
        1
    );
}

#[test]
fn synth_then_simulate_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("scn");
    ok(&[
        "synth",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "1",
        "--frames",
        "2",
        "--vehicles",
        "3",
        "--points",
        "4000",
    ]);
    let report = ok(&[
        "simulate",
        "--scenario",
        out_dir.join("scenario.scn").to_str().unwrap(),
    ]);
    // The same synthetic scenario simulated from memory must agree.
    let in_memory = ok(&[
        "simulate",
        "--synthetic",
        "1",
        "--frames",
        "2",
        "--vehicles",
        "3",
        "--points",
        "4000",
    ]);
    assert_eq!(report, in_memory);
}

#[test]
fn bench_repeats_identically_apart_from_timings() {
    let strip = |out: String| -> Vec<String> {
        out.lines()
            .map(|l| l.split(" build_sites_per_s=").next().unwrap().to_string())
            .collect()
    };
    let a = strip(ok(&["bench", "--sites", "800"]));
    let b = strip(ok(&["bench", "--sites", "800"]));
    assert_eq!(a, b, "op counts must not depend on the run");
    assert!(a.iter().all(|l| l.contains("rules_match=true")), "{a:?}");
}

#[test]
fn bench_rates_are_positive() {
    let out = ok(&["bench", "--sites", "500"]);
    for line in out.lines() {
        let build: f64 = field(line, "build_sites_per_s").parse().unwrap();
        let exec: f64 = field(line, "exec_sites_per_s").parse().unwrap();
        assert!(build > 0.0 && exec > 0.0, "{line}");
    }
}

#[test]
fn config_files_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "frequency_hz=10\nbogus=1\n").unwrap();
    let code = exit_code(&[
        "voxelize",
        "--config",
        cfg.to_str().unwrap(),
        "--input",
        "x.pcf",
        "--output",
        "y.svg",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn forward_is_invariant_under_message_order() {
    let dir = tempfile::tempdir().unwrap();
    let frame = gen_scene(11, 3, 3_000).unwrap();
    let mut paths = Vec::new();
    for v in &frame.vehicles {
        let p = dir.path().join(format!("v{}.pcf", v.id));
        write_point_cloud_file(&p, &v.cloud).unwrap();
        paths.push(p);
    }
    let msg = |input: &Path, name: &str, level: &str| -> PathBuf {
        let out = dir.path().join(name);
        ok(&[
            "voxelize",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--level",
            level,
        ]);
        out
    };
    let m1 = msg(&paths[1], "m1.svg", "medium");
    let m2 = msg(&paths[2], "m2.svg", "low");

    let fwd = |messages: [&PathBuf; 2], bev: &str| -> String {
        let out = ok(&[
            "forward",
            "--ego",
            paths[0].to_str().unwrap(),
            "--message",
            messages[0].to_str().unwrap(),
            "--message",
            messages[1].to_str().unwrap(),
            "--output",
            dir.path().join(bev).to_str().unwrap(),
            "--reduced",
            "--seed",
            "9",
        ]);
        field(&out, "sha256").to_string()
    };
    assert_eq!(fwd([&m1, &m2], "a.bev"), fwd([&m2, &m1], "b.bev"));
}

#[test]
fn forward_runs_from_the_ego_cloud_alone() {
    let dir = tempfile::tempdir().unwrap();
    let frame = gen_scene(11, 2, 2_000).unwrap();
    let ego = dir.path().join("ego.pcf");
    write_point_cloud_file(&ego, &frame.ego().cloud).unwrap();
    let out = ok(&[
        "forward",
        "--ego",
        ego.to_str().unwrap(),
        "--output",
        dir.path().join("solo.bev").to_str().unwrap(),
        "--reduced",
        "--seed",
        "9",
    ]);
    assert_eq!(field(&out, "sha256").len(), 64);
    assert!(field(&out, "fused_sites").parse::<usize>().unwrap() > 0);
}

#[test]
fn forward_zero_threads_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let frame = gen_scene(11, 2, 500).unwrap();
    let ego = dir.path().join("ego.pcf");
    write_point_cloud_file(&ego, &frame.ego().cloud).unwrap();
    let code = exit_code(&[
        "forward",
        "--ego",
        ego.to_str().unwrap(),
        "--output",
        dir.path().join("o.bev").to_str().unwrap(),
        "--reduced",
        "--threads",
        "0",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn weights_seed42_hash_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "weights",
        "--output",
        dir.path().join("w.mrw").to_str().unwrap(),
        "--seed",
        "42",
        "--mode",
        "coords",
    ]);
    let want = std::fs::read_to_string(goldens().join("weights_seed42.sha256")).unwrap();
    assert_eq!(field(&out, "sha256"), want.trim());
}

#[test]
fn golden_check_passes_against_checked_in_files() {
    let out = ok(&["golden"]);
    assert_eq!(out.lines().filter(|l| l.ends_with(": ok")).count(), 4, "{out}");
}

#[test]
fn help_renders_without_error() {
    let out = ok(&["--help"]);
    assert!(out.contains("mrvox") && out.contains("voxelize"), "{out}");
}

#[test]
fn binary_reports_errors_on_stderr_with_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mrvox");
    let bad_data = Command::new(bin)
        .args(["voxelize", "--input", "/nonexistent/c.pcf", "--output", "/tmp/x.svg"])
        .output()
        .unwrap();
    assert_eq!(bad_data.status.code(), Some(2));
    assert!(bad_data.stdout.is_empty());
    assert!(String::from_utf8_lossy(&bad_data.stderr).starts_with("error:"));

    let usage = Command::new(bin).args(["simulate"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));

    let good = Command::new(bin).args(["bandwidth", "914900"]).output().unwrap();
    assert_eq!(good.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&good.stdout).contains("mbps=73.1"));
}

#[test]
fn binary_treats_closed_stdout_as_success() {
    // Piping into a consumer that exits early (`mrvox simulate | head`) closes
    // the read end; the resulting EPIPE must not turn into a failure.
    let mut child = Command::new(env!("CARGO_BIN_EXE_mrvox"))
        .args(["simulate", "--synthetic", "1"])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "closed stdout must exit 0");
    assert!(out.stderr.is_empty(), "closed stdout must stay silent");
}
