use std::fs;
use std::path::Path;
use std::process::Command;

fn bdgas() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bdgas"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL_DUALITY: &str = r#"{
  "schema_version": 1,
  "experiment": {
    "kind": "duality-discrete",
    "n_sites": 3,
    "times": [0.7],
    "initial": [1, 0, 2],
    "max_dual": 2
  },
  "mc": { "n_samples": 20000, "seed": 9, "streams": 8 }
}
"#;

#[test]
fn passing_run_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL_DUALITY);
    let out = dir.path().join("out");
    let st = bdgas().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["metadata"]["version"], bdgas::VERSION);
    assert_eq!(report["config"]["experiment"]["kind"], "duality-discrete");
    let csv = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(csv.lines().count() > 5);
    assert!(!csv.contains('\r'));
}

#[test]
fn negative_control_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &SMALL_DUALITY.replace("duality-discrete", "equivalence"));
    let out = dir.path().join("out");
    let st = bdgas()
        .args(["run", "--negative-control", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    let csv = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(csv.contains("corrupted-lambda-right"));
}

#[test]
fn malformed_config_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"schema_version\": 1,\n  \"experiment\": {\n    \"kind\": \"doob\",\n    \"thetaa\": 1.5\n  }\n}\n");
    let out = bdgas().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:5:5"), "{err}");
    assert!(err.contains("thetaa"), "{err}");

    let cfg = write(dir.path(), "neg.json", "{\n  \"schema_version\": 1,\n  \"experiment\": {\n    \"kind\": \"doob\",\n    \"theta\": -1\n  }\n}\n");
    let out = bdgas().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("neg.json:5:5"));

    let out = bdgas().args(["run", "--config", "/nonexistent.json", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn strip_timestamp(report: &str) -> String {
    report.lines().filter(|l| !l.contains("\"timestamp_unix\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL_DUALITY);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let st = bdgas()
            .args(["run", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        outputs.push(out);
    }
    for o in &outputs[1..] {
        assert_eq!(
            fs::read_to_string(outputs[0].join("checks.csv")).unwrap(),
            fs::read_to_string(o.join("checks.csv")).unwrap()
        );
        assert_eq!(
            strip_timestamp(&fs::read_to_string(outputs[0].join("report.json")).unwrap()),
            strip_timestamp(&fs::read_to_string(o.join("report.json")).unwrap())
        );
    }
    // the seed override changes the estimates
    let out = dir.path().join("seeded");
    bdgas().args(["run", "--seed", "10", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_ne!(
        fs::read_to_string(outputs[0].join("checks.csv")).unwrap(),
        fs::read_to_string(out.join("checks.csv")).unwrap()
    );
}

#[test]
fn simulate_at_time_zero_echoes_initial_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"schema_version": 1, "experiment": {"kind": "simulate", "geometry": "chain", "counts": [3, 0, 1], "t": 0.0, "replicas": 2}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(bdgas().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().code(), Some(0));
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples, "replica,site_1,site_2,site_3,absorbed_left,absorbed_right\n0,3,0,1,0,0\n1,3,0,1,0,0\n");

    let cfg = write(
        dir.path(),
        "i.json",
        r#"{"schema_version": 1, "experiment": {"kind": "simulate", "geometry": "interval", "positions": [0.25, 0.5], "t": 0.0, "replicas": 1}}"#,
    );
    assert_eq!(bdgas().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().code(), Some(0));
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples, "replica,index,position\n0,0,2.5000000000000000e-1\n0,1,5.0000000000000000e-1\n");
}

fn profile(args: &[&str]) -> Vec<(f64, f64)> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let st = bdgas().arg("profile").args(args).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            assert_eq!(a.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn profiles() {
    let rows = profile(&["--kind", "stationary", "--lambda-left", "1", "--lambda-right", "3", "--points", "11"]);
    assert_eq!(rows.len(), 11);
    for (x, v) in &rows {
        assert!((v - (1.0 + 2.0 * x)).abs() < 1e-15);
    }
    let rows = profile(&["--kind", "intensity", "--t", "0"]);
    assert!(rows.iter().all(|r| r.1 == 0.0));
    let rows = profile(&["--kind", "kernel", "--t", "0.3", "--x0", "0.4", "--points", "2001"]);
    let h = 1.0 / 2000.0;
    let trapezoid: f64 = rows.windows(2).map(|w| 0.5 * h * (w[0].1 + w[1].1)).sum();
    let split = bdgas::interval::absorption_split(0.4, 0.3, &Default::default()).unwrap();
    assert!((trapezoid - split.survive).abs() < 1e-6, "{trapezoid} vs {}", split.survive);
}
