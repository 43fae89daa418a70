use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use u2flow::io;

fn u2flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_u2flow")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn summary_value(manifest: &Path, key: &str) -> toml::Value {
    let t: toml::Table = fs::read_to_string(manifest).unwrap().parse().unwrap();
    t["summary"][key].clone()
}

fn write_nut(dir: &Path) -> String {
    let d = dir.join("ref");
    let out = u2flow(&[
        "reference",
        "--family",
        "nut",
        "--n",
        "1",
        "--out",
        d.to_str().unwrap(),
        "--set",
        "reference_nodes=200",
        "--set",
        "rho_max=20",
    ]);
    ok(&out);
    d.join("profile.txt").to_str().unwrap().to_string()
}

#[test]
fn reference_manifest_records_the_mass() {
    let dir = tempfile::tempdir().unwrap();
    write_nut(dir.path());
    let m = summary_value(&dir.path().join("ref/manifest.toml"), "mass").as_float().unwrap();
    assert!((m - 0.25).abs() < 1e-3, "{m}");
}

#[test]
fn unknown_key_fails_with_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "kapa = 0.1\n").unwrap();
    let out = u2flow(&["reference", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key `kapa`") && err.contains("kappa") && err.contains("record_every"), "{err}");
}

#[test]
fn resumed_simulation_continues_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_nut(dir.path());
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let base = ["--set", "t_end=5", "--set", "record_every=10"];
    let run = |extra: &[&str]| {
        let mut args = vec!["simulate"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&base);
        ok(&u2flow(&args));
    };
    run(&["--input", &input, "--out", &p("full")]);
    run(&["--input", &input, "--out", &p("part"), "--set", "max_steps=300"]);
    run(&["--resume", &p("part/checkpoint.bin"), "--out", &p("resumed")]);
    run(&["--input", &input, "--out", &p("chunked"), "--set", "checkpoint_every=7"]);
    run(&["--input", &input, "--out", &p("again")]);
    let full = fs::read(p("full/series.txt")).unwrap();
    let part = fs::read(p("part/series.txt")).unwrap();
    assert!(part.len() < full.len());
    assert_eq!(fs::read(p("resumed/series.txt")).unwrap(), full);
    assert_eq!(fs::read(p("chunked/series.txt")).unwrap(), full);
    assert_eq!(fs::read(p("again/series.txt")).unwrap(), full);
    assert_eq!(fs::read(p("again/final.txt")).unwrap(), fs::read(p("full/final.txt")).unwrap());
}

#[test]
fn check_flags_a_broken_series() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_nut(dir.path());
    let sim = dir.path().join("sim");
    ok(&u2flow(&["simulate", "--input", &input, "--out", sim.to_str().unwrap(), "--set", "t_end=1"]));
    let series = sim.join("series.txt");
    ok(&u2flow(&["check", "--input", series.to_str().unwrap(), "--out", dir.path().join("c1").to_str().unwrap()]));

    let mut history = io::read_series(&series).unwrap();
    history.last_mut().unwrap().u_max = 1.01;
    let broken = dir.path().join("broken.txt");
    io::write_series(&broken, &history).unwrap();
    let out = u2flow(&["check", "--input", broken.to_str().unwrap(), "--out", dir.path().join("c2").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL u_bound"));
}

#[test]
fn pipeline_failure_names_the_stage_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("pipe");
    let out = u2flow(&[
        "pipeline",
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "g0_nodes=600",
        "--set",
        "max_steps=200",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `detect`"), "{err}");
    let state = io::read_checkpoint(&out_dir.join("checkpoint_detect.bin")).unwrap();
    assert_eq!(state.steps, 200);
    assert!(out_dir.join("g0.txt").exists() && out_dir.join("initial.txt").exists());
}
