use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mmbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmbt"))
        .args(args)
        .output()
        .expect("spawn mmbt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn assets() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/assets"))
}

#[test]
fn validate_shipped_trees() {
    for name in ["capping.bt", "insertion.bt"] {
        let path = assets().join(name);
        let out = mmbt(&["validate", "--tree", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        let out = mmbt(&["validate", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
}

#[test]
fn validate_reports_errors_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bt");
    fs::write(&bad, "tree t\n  sequence\n    frobnicate x\n").unwrap();
    let out = mmbt(&["validate", "--tree", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("bad.bt:3:"), "{text}");
}

#[test]
fn run_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, workers) in [(&a, "1"), (&b, "4")] {
        let o = mmbt(&[
            "run",
            "--task",
            "capping",
            "--trials",
            "200",
            "--seed",
            "9",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let body = fs::read(&a).unwrap();
    assert_eq!(body, fs::read(&b).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(json["trials"], 200);
    assert_eq!(json["seed"], 9);
    let hist = json["outcome_histogram"].as_object().unwrap();
    assert_eq!(hist.values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 200);
}

#[test]
fn run_with_config_file_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(
        assets().join("insertion.bt"),
        dir.path().join("insertion.bt"),
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    let text = fs::read_to_string(assets().join("insertion.toml")).unwrap();
    fs::write(&cfg, text).unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = mmbt(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "20",
        "--faults",
        "on",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = fs::read_to_string(&trace).unwrap();
    for line in lines.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert!(lines
        .lines()
        .any(|l| l.contains("\"condition\":\"rack_inserted\"")));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "task = \"capping\"\nbogus_key = 1\n").unwrap();
    let out = mmbt(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = mmbt(&[
        "run",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let out = mmbt(&["run", "--faults", "sometimes"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oracle_prints_mount_accuracy() {
    let out = mmbt(&[
        "oracle",
        "--task",
        "capping",
        "--condition",
        "mount_aligned",
    ]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let acc = json["accuracy"].as_f64().unwrap();
    assert!((acc - 0.968).abs() < 5e-4, "{acc}");
    let out = mmbt(&["oracle", "--condition", "no_such_condition"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn trace_is_reproducible() {
    let run = || mmbt(&["trace", "--task", "capping", "--seed", "4", "--trial", "3"]);
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 0);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn skill_and_show() {
    let out = mmbt(&[
        "skill",
        "--task",
        "insertion",
        "--skill",
        "align_rack",
        "--trials",
        "200",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap();
    let out = mmbt(&["show", "capping"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("tree capping"));
}
