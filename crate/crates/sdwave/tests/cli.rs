use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_sdwave");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.json"))
}

fn sdwave(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_line(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    assert_eq!(text.trim_end().lines().count(), 1, "stderr: {text}");
    serde_json::from_str(text.trim_end()).unwrap()
}

const FAST: &[&str] = &[
    "--override",
    "checks.sample_count=200",
    "--override",
    "degree.n_ladder=[4]",
    "--override",
    "degree.starts=8",
    "--override",
    "checks.sr_samples=50",
];

#[test]
fn shipped_configs_validate_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str)] = &[
        ("default", "spectrum"),
        ("arctan_k1", "check-conditions"),
        ("neg_arctan_k1", "find-periodic"),
        ("rational_k1", "degree"),
        ("nonexistence", "nonexistence-demo"),
        ("averaging", "verify-averaging"),
    ];
    for (name, cmd) in cases {
        let cfg = config(name);
        let mut args = vec![*cmd, "--config", cfg.to_str().unwrap()];
        args.extend_from_slice(FAST);
        let o = sdwave(&args, &dir.path().join(name));
        assert!(
            o.status.success(),
            "{name} {cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["spectrum", "simulate", "check-conditions", "find-periodic"] {
        let mut args = vec![cmd, "--override", "basis.modes=4"];
        args.extend_from_slice(FAST);
        let (a, b) = (
            dir.path().join(format!("{cmd}-a")),
            dir.path().join(format!("{cmd}-b")),
        );
        assert!(sdwave(&args, &a).status.success());
        assert!(sdwave(&args, &b).status.success());
        let mut names: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(
                fs::read(a.join(&n)).unwrap(),
                fs::read(b.join(&n)).unwrap(),
                "{cmd}: {n:?}"
            );
        }
    }
}

#[test]
fn spectrum_resonant_row_has_zero_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdwave(&["spectrum", "--override", "basis.modes=4"], dir.path());
    assert!(o.status.success());
    let mut r = csv::Reader::from_path(dir.path().join("spectrum.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let col = |n: &str| h.iter().position(|x| x == n).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][col("i")], "1");
    assert_eq!(rows[0][col("mu_minus_re")].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][col("mu_minus_im")].parse::<f64>().unwrap(), 0.0);
    assert_eq!(&rows[0][col("class")], "KERNEL");
}

#[test]
fn nonexistence_demo_slope_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdwave(&["nonexistence-demo"], dir.path());
    assert!(o.status.success());
    let r = json(dir.path().join("nonexistence.json"));
    assert!((r["slope"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(r["newton"]["exhaustive_failure"], true);
    let drift = fs::read_to_string(dir.path().join("drift.csv")).unwrap();
    assert!(drift.starts_with("t,drift\n"));
}

#[test]
fn degree_of_arctan_scenario_is_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdwave(
        &[
            "degree",
            "--override",
            "degree.n_ladder=[4,8]",
            "--override",
            "checks.sample_count=500",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(dir.path().join("degree.json"));
    assert_eq!(r["value"], -1);
    assert_eq!(r["predicted"], -1);
    assert_eq!(r["condition"], "G1");
}

#[test]
fn validation_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdwave(&["spectrum", "--override", "basis.bogus=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_line(&o)["kind"], "config");

    let cfg = dir.path().join("noseed.json");
    fs::write(&cfg, r#"{"basis": {"modes": 4}}"#).unwrap();
    let o = sdwave(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o)["message"]
        .as_str()
        .unwrap()
        .contains("seed"));

    let o = sdwave(&["spectrum", "--override", "damped.c=-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = sdwave(&["nosuchcommand"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_line(&o)["kind"], "usage");
}

#[test]
fn missing_periodic_solution_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("nonexistence");
    let o = sdwave(
        &[
            "find-periodic",
            "--config",
            cfg.to_str().unwrap(),
            "--override",
            "degree.starts=16",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let d = stderr_line(&o);
    assert_eq!(d["exit"], 3);
    assert_eq!(d["kind"], "newton_budget");
}

#[test]
fn degree_does_not_depend_on_alpha() {
    let dir = tempfile::tempdir().unwrap();
    for alpha in ["0.25", "0.75"] {
        let set = format!("damped.alpha={alpha}");
        let out = dir.path().join(alpha);
        let o = sdwave(
            &[
                "degree",
                "--override",
                &set,
                "--override",
                "degree.n_ladder=[4,8]",
            ],
            &out,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(
            json(out.join("degree.json"))["value"],
            -1,
            "alpha = {alpha}"
        );
    }
}
