use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sirwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sirwave"))
        .args(args)
        .env_remove("SIRWAVE_OUTPUT_ROOT")
        .env_remove("SIRWAVE_JOBS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SUB_THRESHOLD: &str =
    r#"{"params":{"d1":1,"d2":1,"d3":1,"beta":0.9,"gamma":0.5,"delta":0.5,"s_minus_inf":1}"#;

#[test]
fn analyze_reports_closed_form_and_threshold_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let o = sirwave(&["analyze", "--phi-csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("analyze.json")).unwrap();
    assert!(text.contains("\"c_star\": 2.0"), "{text}");
    assert!(fs::read_to_string(out.join("phi.csv")).unwrap().starts_with("lambda,phi\n"));

    let cfg = write_config(tmp.path(), "d3.json", r#"{"params":{"d1":1,"d2":1,"d3":2,"beta":2,"gamma":0.5,"delta":0.5,"s_minus_inf":1}}"#);
    let out = tmp.path().join("d3");
    assert_eq!(code(&sirwave(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let r = json(&out.join("analyze.json"));
    assert_eq!(r["d3_condition"]["holds"], false);
    assert!(r["d3_condition"]["note"].as_str().unwrap().contains("strictly"));

    let cfg = write_config(tmp.path(), "sub.json", &format!("{SUB_THRESHOLD}}}"));
    let out = tmp.path().join("sub");
    assert_eq!(code(&sirwave(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let r = json(&out.join("analyze.json"));
    assert!(r["c_star"].is_null());
    assert_eq!(r["r0_above_one"], false);
}

#[test]
fn config_errors_exit_one_with_the_field_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "typo.json", r#"{"bta": 2}"#);
    let o = sirwave(&["analyze", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bta"));

    let cfg = write_config(tmp.path(), "neg.json", r#"{"params":{"d1":1,"d2":1,"d3":1,"beta":2,"gamma":-0.5,"delta":0.5,"s_minus_inf":1}}"#);
    let o = sirwave(&["analyze", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("y").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    assert_eq!(code(&sirwave(&["profile", "--bogus"])), 1);
}

#[test]
fn profile_gate_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    let o = sirwave(&["profile", "--c", "1.9", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistence"));
    // Forcing below c* fails numerically: there are no real decay rates.
    let o = sirwave(&["profile", "--c", "1.9", "--force", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let out = tmp.path().join("both");
    let o = sirwave(&["profile", "--c", "2.5", "--solver", "both", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.starts_with("x,S,I,R\n"));
    assert_eq!(csv.lines().count(), 1 + 2401);
    let d = json(&out.join("diagnostics.json"));
    assert_eq!(d["converged"], true);
    assert_eq!(d["diagnostics_pass"], true);
    assert!(d["agreement"]["aligned_max_diff"].as_f64().unwrap() < 1e-4);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "profile");
    assert!(m["derived"]["bounds"]["m"].is_array());
    assert_eq!(m["config"]["solver"], "both");
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["diagnostics.json", "profile.csv", "profile_newton.csv"]);
}

#[test]
fn non_convergence_exits_two_with_partial_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    let o = sirwave(&["profile", "--max-iter", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let d = json(&out.join("diagnostics.json"));
    assert_eq!(d["partial"], true);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(code(&sirwave(&["profile", "--dx", "0.1", "--out", out.to_str().unwrap()])), 0);
    let manifest = out.join("manifest.json");
    let again = tmp.path().join("again");
    let o = sirwave(&["replay", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(fs::read(out.join("profile.csv")).unwrap(), fs::read(again.join("profile.csv")).unwrap());

    let mut m = json(&manifest);
    m["outputs"][0]["sha256"] = Value::String("0".repeat(64));
    fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let o = sirwave(&["replay", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("MISMATCH"));
}

#[test]
fn simulate_records_auto_dt_and_rejects_unstable_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", r#"{"sim_half_width": 60, "sim_dx": 0.2, "t_end": 20}"#);
    let out = tmp.path().join("s");
    let o = sirwave(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert!(m["config"]["dt"].is_null());
    let dt = m["derived"]["dt"].as_f64().unwrap();
    assert!(dt > 0.0 && dt <= 0.4 * 0.04 / 2.0 + 1e-15);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["dt_auto"], true);
    assert!(s["speed"].as_f64().is_some());
    assert!(fs::read_to_string(out.join("front.csv")).unwrap().starts_with("t,x_front\n"));
    assert!(fs::read_to_string(out.join("mass.csv")).unwrap().starts_with("t,S,I,R,total,max_I,clipped\n"));
    assert_eq!(s["snapshots"].as_array().unwrap().len(), 3);

    let o = sirwave(&["simulate", "--config", cfg.to_str().unwrap(), "--dt", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stability"));
}

#[test]
fn simulate_below_threshold_reports_extinction() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sub.json",
        &format!(r#"{SUB_THRESHOLD}, "sim_half_width": 50, "sim_dx": 0.2, "t_end": 100, "snapshot_interval": 0}}"#),
    );
    let out = tmp.path().join("s");
    assert_eq!(code(&sirwave(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    assert_eq!(json(&out.join("summary.json"))["outcome"], "extinction");
    assert_eq!(json(&out.join("manifest.json"))["summary"]["outcome"], "extinction");
}

#[test]
fn sweep_over_speeds_converges_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sw");
    let o = sirwave(&["sweep", "--vary", "c=2.1:4.0:10", "--jobs", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let rows: Vec<&str> = agg.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.contains(",wave,") && r.contains(",true,")), "{agg}");
    for k in 0..10 {
        assert!(out.join(format!("jobs/job_{k:04}/manifest.json")).is_file());
    }
}

#[test]
fn sweep_across_the_threshold_flips_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "auto.json", r#"{"auto_half_width": true}"#);
    let out = tmp.path().join("sw");
    let o = sirwave(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--vary", "beta=0.5:2.0:4", "--jobs", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let outcomes: Vec<&str> = agg.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    // beta = gamma + delta = 1 is the threshold itself: R0 = 1, no wave.
    assert_eq!(outcomes, ["extinction", "extinction", "wave", "wave"], "{agg}");
}

#[test]
fn sweep_is_independent_of_worker_count_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |jobs: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = sirwave(&["sweep", "--vary", "c=2.2:3.0:3", "--vary", "dx=0.05:0.1:2", "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        out
    };
    let a = run("4", "a");
    let b = run("1", "b");
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
    let o = sirwave(&[
        "replay",
        a.join("manifest.json").to_str().unwrap(),
        "--jobs",
        "3",
        "--out",
        tmp.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_exit_code_matches_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = sirwave(&["verify", "--level", "quick", "--seed", "0x5EED", "--out", out.to_str().unwrap()]);
    let r = json(&out.join("report.json"));
    let any_fail = r["checks"].as_array().unwrap().iter().any(|c| c["status"] == "fail");
    assert_eq!(code(&o), if any_fail { 3 } else { 0 });
    assert_eq!(r["seed"], 0x5EED);
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().contains("gamma_invariance"));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["suite"]["passed"], !any_fail);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sirwave"))
        .arg("analyze")
        .env("SIRWAVE_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("analyze/manifest.json").is_file());
}

#[test]
fn foreign_directories_are_not_overwritten() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("notes.txt"), "keep").unwrap();
    let o = sirwave(&["analyze", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(fs::read_to_string(tmp.path().join("notes.txt")).unwrap(), "keep");
}
