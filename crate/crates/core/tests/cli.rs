use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn lethe(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lethe"))
        .args(args)
        .current_dir(dir)
        .env_remove("LETHE_SEED")
        .output()
        .unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SMALL_SIM: &[&str] = &[
    "simulate",
    "--availability",
    "0.9",
    "--mean-down",
    "1h",
    "--theta-days",
    "20",
    "--theta-days",
    "40",
    "--initial-posts",
    "800",
    "--creations-per-day",
    "4",
    "--deletions-per-day",
    "2",
    "--horizon-days",
    "120",
];

#[test]
fn tune_reports_the_mechanism() {
    let dir = tempfile::tempdir().unwrap();
    let out = lethe(
        &[
            "tune",
            "--availability",
            "0.9",
            "--mean-down",
            "1h",
            "--theta",
            "30d",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["mean_up_seconds"].as_f64().unwrap() - 32_400.0).abs() < 1e-6);
    assert_eq!(v["mean_down_seconds"].as_f64(), Some(3600.0));
    assert_eq!(v["theta_star_seconds"].as_f64(), Some(2_592_000.0));
    let n = v["shape_n"].as_f64().unwrap();
    assert!((n - 6e-4).abs() < 0.3e-4, "{n}");

    let same = lethe(
        &[
            "tune",
            "--availability",
            "0.9",
            "--mean-down-seconds",
            "3600",
            "--theta-days",
            "30",
            "--out",
            "t/tune.json",
        ],
        dir.path(),
    );
    assert!(same.status.success());
    assert_eq!(json_file(&dir.path().join("t/tune.json")), v);
    assert!(dir.path().join("t/manifest.json").exists());
}

#[test]
fn missing_flag_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let args: Vec<&str> = SMALL_SIM
        .iter()
        .copied()
        .filter(|a| *a != "--horizon-days" && *a != "120")
        .collect();
    let out = lethe(&args, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--horizon-days"));

    let out = lethe(
        &["tune", "--availability", "1.5", "--theta", "30d"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let out = lethe(
        &["tune", "--availability", "0.9", "--theta", "30w"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let out = lethe(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "file").unwrap();
    let out = lethe(
        &[
            "tune",
            "--availability",
            "0.9",
            "--theta",
            "30d",
            "--out",
            "blocker/tune.json",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, threads: &str| {
        let mut args = SMALL_SIM.to_vec();
        args.extend(["--seed", "9", "--out", out, "--threads", threads]);
        let o = lethe(&args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a/report.json", "1");
    run("b/report.json", "1");
    run("c/report.json", "4");
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/report.json"), read("b/report.json"));
    assert_eq!(read("a/report.json"), read("c/report.json"));
    assert_eq!(read("a/manifest.json"), read("c/manifest.json"));
    let report = json_file(&dir.path().join("a/report.json"));
    assert_eq!(report["thresholds"].as_array().unwrap().len(), 2);
    assert_eq!(report["thresholds"][0]["recall"].as_f64(), Some(1.0));
    let manifest = json_file(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["horizon_days"], 120);
}

#[test]
fn config_file_and_seed_fallback() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{
            "out_dir": "out",
            "tuning": {"availability": 0.95, "mean_down": "1h"},
            "simulation": {"initial_posts": 800, "creations_per_day": 4, "deletions_per_day": 2,
                           "horizon_days": 120, "thresholds": ["20d", 3456000], "scenario": "once"}
        }"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lethe"))
        .args(["simulate", "--config", "run.json", "--availability", "0.9"])
        .current_dir(dir.path())
        .env("LETHE_SEED", "31")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json_file(&dir.path().join("out/report.json"));
    assert_eq!(report["scenario"], "once");
    assert_eq!(report["seed"], 31);
    assert_eq!(report["thresholds"][1]["theta_days"].as_f64(), Some(40.0));
    let manifest = json_file(&dir.path().join("out/manifest.json"));
    assert_eq!(
        manifest["config"]["availability_target"].as_f64(),
        Some(0.9)
    );

    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"tuning": {"availability": 0.9, "color": "red"}}"#,
    )
    .unwrap();
    let out = lethe(
        &["tune", "--config", "bad.json", "--theta", "30d"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("color"));
}

#[test]
fn curve_commands_write_named_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = lethe(
        &[
            "lr-curve",
            "--shape",
            "6e-4",
            "--shape",
            "1e-4",
            "--t-max",
            "10d",
            "--out-dir",
            "lr",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut names: Vec<String> = std::fs::read_dir(dir.path().join("lr"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "lr_negative-binomial_n1e-4.csv",
            "lr_negative-binomial_n6e-4.csv",
            "lr_zeta.csv",
            "manifest.json"
        ]
    );
    let text = std::fs::read_to_string(dir.path().join("lr/lr_zeta.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_seconds,value"));
    assert_eq!(lines.count(), 10);

    assert!(lethe(&["hazard-curve", "--out-dir", "hz"], dir.path())
        .status
        .success());
    let geo = std::fs::read_to_string(dir.path().join("hz/hazard_geometric.csv")).unwrap();
    assert!(geo.lines().skip(1).all(|l| l.ends_with(",3.2399e4")));
    assert!(lethe(
        &["ccdf-curve", "--out-dir", "cc", "--step", "10m"],
        dir.path()
    )
    .status
    .success());
    assert!(dir.path().join("cc/ccdf_poisson.csv").exists());
}

#[test]
fn utility_from_trace_and_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("trace.csv"),
        "post_key,creation_epoch_seconds,offset_seconds\na,100,0\na,100,5\nb,200,0\n",
    )
    .unwrap();
    let out = lethe(
        &[
            "utility",
            "--trace",
            "trace.csv",
            "--availability",
            "0.9",
            "--theta-days",
            "30",
            "--out",
            "u.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json_file(&dir.path().join("u.json"));
    assert_eq!(v["interactions"], 3);
    assert_eq!(v["cells"][0]["utility"].as_f64(), Some(1.0));

    std::fs::write(
        dir.path().join("empty.csv"),
        "post_key,creation_epoch_seconds,offset_seconds\n",
    )
    .unwrap();
    let out = lethe(
        &["utility", "--trace", "empty.csv", "--theta-days", "30"],
        dir.path(),
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "no-interactions");
    assert!(v["cells"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["utility"].is_null()));

    std::fs::write(
        dir.path().join("neg.csv"),
        "post_key,creation_epoch_seconds,offset_seconds\na,0,-1\n",
    )
    .unwrap();
    let out = lethe(&["utility", "--trace", "neg.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = lethe(
        &["utility", "--synthetic", "--posts", "500", "--seed", "4"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 18);
    assert!(v["cells"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["utility"].as_f64().unwrap() > 0.99));
}

#[test]
fn store_serve_speaks_the_wire_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_lethe"))
        .args([
            "store",
            "serve",
            "--port",
            "0",
            "--seed",
            "3",
            "--data-dir",
            "data",
        ])
        .current_dir(dir.path())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect("address line")
        .to_string();
    let s = TcpStream::connect(&addr).unwrap();
    let mut reader = BufReader::new(s.try_clone().unwrap());
    let mut w = s;
    let mut call = |req: &str| {
        w.write_all(format!("{req}\n").as_bytes()).unwrap();
        let mut out = String::new();
        reader.read_line(&mut out).unwrap();
        out
    };
    let put: Value =
        serde_json::from_str(&call(r#"{"op":"put","content":"hi","token":"me"}"#)).unwrap();
    let id = put["post_id"].as_str().unwrap().to_string();
    assert_eq!(
        call(&format!(r#"{{"op":"get","post_id":"{id}","token":"me"}}"#)),
        "{\"status\":\"ok\",\"content\":\"hi\"}\n"
    );
    assert_eq!(
        call(&format!(
            r#"{{"op":"delete","post_id":"{id}","token":"me"}}"#
        )),
        "{\"status\":\"ok\"}\n"
    );
    child.kill().unwrap();
    child.wait().unwrap();
    let log = std::fs::read_to_string(dir.path().join("data/events.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
}
