use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sprayq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sprayq")).args(args).output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json_line(bytes: &[u8]) -> Value {
    serde_json::from_str(String::from_utf8_lossy(bytes).lines().last().unwrap()).unwrap()
}

/// A config in `dir` over the checked-in benchmark fixture with `extra`
/// appended.
fn config(dir: &Path, extra: &str) -> PathBuf {
    let f = root().join("fixtures/benchmark");
    let text = format!(
        "[paths]\ntrain = {:?}\ntest = {:?}\n{extra}",
        f.join("train.csv").canonicalize().unwrap(),
        f.join("test.csv").canonicalize().unwrap()
    );
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn checked_in_fixture_regenerates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = root().join("configs/benchmark.toml");
    let out = ok(sprayq(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]));
    let summary = json_line(&out.stdout);
    assert_eq!(summary["train"]["rows"], 49);
    assert_eq!(summary["test"]["rows"], 10);
    for name in ["train.csv", "test.csv"] {
        let fresh = std::fs::read(dir.path().join(name)).unwrap();
        let fixture = std::fs::read(root().join("fixtures/benchmark").join(name)).unwrap();
        assert!(fresh == fixture, "{name} differs from the fixture");
    }
}

#[test]
fn seed_override_reaches_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = root().join("configs/benchmark.toml");
    ok(sprayq(&["simulate", "--config", s(&cfg), "--seed", "7", "--out", s(dir.path())]));
    let scenario = std::fs::read_to_string(dir.path().join("scenario.toml")).unwrap();
    assert!(scenario.contains("seed = 7"));
    let fixture = std::fs::read(root().join("fixtures/benchmark/train.csv")).unwrap();
    assert!(std::fs::read(dir.path().join("train.csv")).unwrap() != fixture);
}

#[test]
fn tune_emits_the_grid_with_one_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[grid]\nc_values = [1.0, 10.0, 100.0]\np_values = [1.0, 2.0, 4.0, 8.0]\n");
    let out = ok(sprayq(&["tune", "--config", s(&cfg), "--target", "particle_velocity"]));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p,C=1,C=10,C=100");
    assert_eq!(lines.len(), 5);
    let cells: Vec<&str> = lines[1..].iter().flat_map(|l| l.split(',').skip(1)).collect();
    assert_eq!(cells.len(), 12);
    assert_eq!(cells.iter().filter(|c| c.ends_with('*')).count(), 1);
    let summary = json_line(&out.stderr);
    assert_eq!(summary["rows"], 49);
    assert!(summary["best"]["rmsd"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_of_a_model_trained_on_its_test_set_reports_the_leak() {
    let dir = tempfile::tempdir().unwrap();
    let f = root().join("fixtures/benchmark/test.csv").canonicalize().unwrap();
    let cfg = dir.path().join("leak.toml");
    std::fs::write(&cfg, format!("[paths]\ntrain = {f:?}\ntest = {f:?}\n[train]\nc = 1000.0\np = 2.0\n")).unwrap();
    let model = dir.path().join("v.json");
    let t = ["--target", "particle_velocity"];
    ok(sprayq(&[&["train", "--config", s(&cfg), "--out", s(&model)][..], &t].concat()));
    let out = ok(sprayq(&[&["eval", "--config", s(&cfg), "--model", s(&model)][..], &t].concat()));
    let csv = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "particle_velocity");
    let semkl_rmsd: f64 = row[2].parse().unwrap();
    // every residual sits inside the tube of half-width epsilon
    assert!(semkl_rmsd <= 0.1 + 1e-6, "leakage smoke test: rmsd {semkl_rmsd}");
    assert_eq!(row[6], "10");
}

#[test]
fn held_out_eval_has_no_leak_and_beats_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[train]\nc = 1.0\np = 4.0\n");
    let model = dir.path().join("v.json");
    let t = ["--target", "particle_velocity"];
    let out = ok(sprayq(&[&["train", "--config", s(&cfg), "--out", s(&model)][..], &t].concat()));
    assert_eq!(json_line(&out.stdout)["converged"], true);
    let out_csv = dir.path().join("eval.csv");
    let out = ok(sprayq(&[&["eval", "--config", s(&cfg), "--model", s(&model), "--out", s(&out_csv)][..], &t].concat()));
    let summary = json_line(&out.stdout);
    assert_eq!(summary["leaked_rows"], 0);
    assert!(summary["ratio"].as_f64().unwrap() < 1.0);
    assert!(std::fs::read_to_string(&out_csv).unwrap().starts_with("target,n_test,"));
}

fn replay_setup(dir: &Path) -> PathBuf {
    let cfg = config(dir, "[train]\nc = 10.0\np = 2.0\n");
    let model = dir.join("v.json");
    ok(sprayq(&["train", "--config", s(&cfg), "--target", "particle_velocity", "--out", s(&model)]));
    let scenario = root().join("scenarios/hardness_excursion.toml").canonicalize().unwrap();
    let text = format!("[paths]\nscenario = {scenario:?}\n[models]\nparticle_velocity = {model:?}\n");
    let p = dir.join("replay.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn replay_output_does_not_depend_on_speed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = replay_setup(dir.path());
    let fast = ok(sprayq(&["replay", "--config", s(&cfg), "--speed", "0"]));
    let paced = ok(sprayq(&["replay", "--config", s(&cfg), "--speed", "100"]));
    let lines = String::from_utf8(fast.stdout.clone()).unwrap();
    assert!(lines.lines().filter(|l| l.contains("\"prediction\"")).count() > 100);
    assert!(fast.stdout == paced.stdout);
    assert_eq!(json_line(&fast.stderr)["epochs_closed"], 5);
}

#[test]
fn serve_answers_while_the_stream_plays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = replay_setup(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap() + "[serve]\nbind = \"127.0.0.1:0\"\n";
    std::fs::write(&cfg, text).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_sprayq"))
        .args(["serve", "--config", s(&cfg), "--speed", "50", "--exit-when-done"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    let mut first = String::new();
    stdout.read_line(&mut first).unwrap();
    let addr = serde_json::from_str::<Value>(&first).unwrap()["listening"].as_str().unwrap().to_string();
    std::thread::sleep(std::time::Duration::from_millis(300));
    let mut conn = TcpStream::connect(&addr).unwrap();
    write!(conn, "GET /api/models HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    conn.read_to_string(&mut resp).unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("particle_velocity"));
    let status = child.wait().unwrap();
    assert!(status.success());
    let mut rest = String::new();
    stdout.read_to_string(&mut rest).unwrap();
    let summary: Value = serde_json::from_str(rest.lines().last().unwrap()).unwrap();
    assert_eq!(summary["epochs_closed"], 5);
}

#[test]
fn config_errors_exit_nonzero_with_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n\n[paths]\ntrain = \"missing.csv\"\n").unwrap();
    let out = sprayq(&["tune", "--config", s(&cfg), "--target", "particle_velocity"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.toml:4:"), "{err}");

    std::fs::write(&cfg, "[engine]\ncadence_ms = 1000\nwarmup = 3\n").unwrap();
    let err = String::from_utf8(sprayq(&["replay", "--config", s(&cfg)]).stderr).unwrap();
    assert!(err.contains("bad.toml:3:"), "{err}");

    let good = config(dir.path(), "");
    let out = sprayq(&["train", "--config", s(&good)]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("--target"));
}
