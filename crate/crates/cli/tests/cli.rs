use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pfg_core::harness::pps::PpsArtifact;
use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn pfgsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfgsim")).args(args).output().expect("binary runs")
}

fn system() -> String {
    data("systems/transcrotonic.spin").display().to_string()
}

fn error_of(out: &Output) -> (String, String) {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.trim()).unwrap_or_else(|e| panic!("stderr is not one JSON line ({e}): {line}"));
    (v["error"]["kind"].as_str().unwrap().to_string(), v["error"]["message"].as_str().unwrap().to_string())
}

fn summary(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn help_succeeds() {
    let out = pfgsim(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["timedisc", "coherence-trace", "divisions-sweep", "channel", "pps"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn missing_system_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.csv");
    let out = pfgsim(&["coherence-trace", "--system", "/nonexistent.spin", "--seed", "1", "--out", out_path.to_str().unwrap()]);
    assert_eq!(error_of(&out).0, "io");
    assert!(!out_path.exists());
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = pfgsim(&["timedisc", "--system", &system(), "--seed", "x", "--out", "/tmp/never.csv"]);
    assert_eq!(error_of(&out).0, "usage");
}

#[test]
fn malformed_sequence_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("bad.seq");
    std::fs::write(&seq, "rot theta=90deg targets=all\n").unwrap();
    let out_path = dir.path().join("c.csv");
    let out = pfgsim(&[
        "channel", "--system", &system(), "--seed", "1", "--sequence", seq.to_str().unwrap(), "--out", out_path.to_str().unwrap(),
    ]);
    let (kind, message) = error_of(&out);
    assert_eq!(kind, "parse");
    assert!(message.starts_with("parse error: 1:") && message.contains("phi"), "{message}");
}

#[test]
fn coherence_trace_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("trace.csv");
    let v = summary(&pfgsim(&["coherence-trace", "--system", &system(), "--seed", "0", "--out", out_path.to_str().unwrap(), "--points", "11"]));
    assert_eq!(v["study"], "coherence-trace");
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_s,order,divisions,re,im"));
    // 3 ensembles x 4 orders x 11 points
    assert_eq!(lines.count(), 132);
    assert!(text.contains(",inf,"));
}

#[test]
fn timedisc_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let args = [
            "timedisc", "--system", &system(), "--seed", seed, "--out", p.to_str().unwrap(), "--dt-us", "2,5", "--states", "2", "--divisions", "4",
            "--tau-us", "40", "--shapes", "const",
        ];
        summary(&pfgsim(&args));
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv", "9");
    assert_eq!(a, run("b.csv", "9"));
    assert_ne!(a, run("c.csv", "10"));
    assert!(String::from_utf8(a).unwrap().starts_with("dt_us,const:x_all_90,const:x_odd_90,const:x_odd_180\n"));
}

#[test]
fn unknown_shape_is_rejected() {
    let out = pfgsim(&["timedisc", "--system", &system(), "--seed", "1", "--out", "/tmp/never.csv", "--shapes", "square"]);
    assert_eq!(error_of(&out).0, "usage");
}

#[test]
fn divisions_sweep_small() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    let v = summary(&pfgsim(&["divisions-sweep", "--system", &system(), "--seed", "3", "--out", p.to_str().unwrap(), "--gammas", "1,2,4", "--trials", "2"]));
    assert!(v["maxima"][0]["max_divisions"].as_u64().unwrap() <= 6);
    let text = std::fs::read_to_string(p).unwrap();
    assert!(text.starts_with("gamma,max_divisions,flagged,trial_divisions\n"));
    assert!(text.lines().last().unwrap().starts_with("# fit"));
}

#[test]
fn channel_summary_and_reduced_states() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ch.csv");
    let seq = data("sequences/channel_b.seq").display().to_string();
    let v = summary(&pfgsim(&[
        "channel", "--system", &system(), "--seed", "1", "--sequence", &seq, "--out", p.to_str().unwrap(), "--large", "60", "--pair", "2,3",
    ]));
    assert_eq!(v["small"], 6);
    assert!(v["fidelity"].as_f64().unwrap() > 0.99999);
    let text = std::fs::read_to_string(p).unwrap();
    assert!(text.starts_with("divisions,row,col,re,im\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 16);
}

#[test]
fn channel_pair_must_be_distinct() {
    let seq = data("sequences/channel_a.seq").display().to_string();
    let out = pfgsim(&["channel", "--system", &system(), "--seed", "1", "--sequence", &seq, "--out", "/tmp/never.csv", "--pair", "2,2"]);
    assert_eq!(error_of(&out).0, "invalid_input");
}

#[test]
fn pps_smoke_run_writes_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pps.txt");
    let v = summary(&pfgsim(&["pps", "--system", &system(), "--seed", "5", "--out", p.to_str().unwrap(), "--budget", "100", "--restarts", "2"]));
    assert_eq!(v["evaluations"], 100);
    let art = PpsArtifact::parse(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!((art.seed, art.qubits, art.scans, art.blocks, art.budget), (5, 4, 2, 5, 100));
    assert_eq!(art.trace.len(), 100);
    assert!(art.trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(art.sequence.scan_count(), 2);
    assert_eq!(art.best_params.len(), 2 * 5 * 3);
    assert_eq!(v["fidelity"].as_f64().unwrap(), art.fidelity);
}

#[test]
fn pps_rejects_out_of_range_epsilon() {
    let out = pfgsim(&["pps", "--system", &system(), "--seed", "5", "--out", "/tmp/never.txt", "--epsilon", "0.9"]);
    assert_eq!(error_of(&out).0, "invalid_input");
}
