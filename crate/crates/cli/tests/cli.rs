//! The binary end to end: exit codes, config files, dumps, reruns.

use std::path::Path;
use std::process::{Command, Output};

use acdlab_cli::report::without_wall_time;
use serde_json::Value;

fn acdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acdlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report on stdout")
}

#[test]
fn passing_run_exits_zero() {
    let out = acdlab(&[
        "simulate",
        "--process",
        "ou",
        "--seed",
        "3",
        "--paths",
        "2000",
        "--steps",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "simulate");
    assert_eq!(r["pass"], true);
    assert_eq!(r["config"]["seed"], 3);
    assert!(r["records"].as_array().unwrap().iter().all(|x| x["pass"] == true));
}

#[test]
fn failed_diagnostic_exits_one() {
    let out = acdlab(&[
        "ac-check",
        "--process",
        "planted",
        "--seed",
        "1",
        "--paths",
        "400",
        "--steps",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    assert!(r.get("error").is_none());
}

#[test]
fn config_problems_exit_two() {
    for args in [
        &["simulate", "--paths", "10"][..],
        &["simulate", "--seed", "1", "--bogus", "2"],
        &["simulate", "--seed", "1", "--paths", "ten"],
        &["example", "nonesuch", "--seed", "1"],
        &["example", "planted", "--seed", "1", "--n", "4"],
        &["ineq-check", "--seed", "1", "--b", "0.5", "--c", "0.2"],
        &[
            "lip-check",
            "--seed",
            "1",
            "--process",
            "brownian",
            "--s",
            "0.33",
            "--steps",
            "10",
        ],
    ] {
        assert_eq!(acdlab(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(acdlab(&["--help"]).status.code(), Some(0));
    assert_eq!(acdlab(&["--version"]).status.code(), Some(0));
    assert_eq!(acdlab(&["example", "--help"]).status.code(), Some(0));
}

#[test]
fn blowup_exits_three_with_path_index() {
    let out = acdlab(&[
        "simulate",
        "--process",
        "ou",
        "--kappa",
        "1e40",
        "--seed",
        "1",
        "--paths",
        "4",
        "--steps",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["error"]["kind"], "numerical_blowup");
    assert!(r["error"]["path_index"].is_u64());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.conf");
    std::fs::write(&file, "# small run\nseed = 5\npaths = 300\nsteps = 50\nsigma = 2\n").unwrap();
    let file = file.to_str().unwrap();
    let out = acdlab(&["simulate", "--config", file, "--paths", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["n_paths"], 200);
    assert_eq!(r["config"]["steps"], 50);
    assert_eq!(r["config"]["params"]["sigma"], 2);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "seed 5\n").unwrap();
    assert_eq!(
        acdlab(&["simulate", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

fn csv_rows(path: &Path) -> Vec<(usize, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_index,t,value"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn dump_writes_paths_on_the_run_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("paths.csv");
    let json = dir.path().join("report.json");
    let out = acdlab(&[
        "example",
        "refl-bm-limit",
        "--seed",
        "9",
        "--paths",
        "500",
        "--steps",
        "40",
        "--dump",
        csv.to_str().unwrap(),
        "--dump-paths",
        "3",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert!(out.stdout.is_empty());
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(r["command"], "example");
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 3 * 41);
    assert_eq!(rows[0], (0, 0.0, 0.0));
    assert_eq!(rows[40].1, 1.0);
    // Values are read after the Brownian step that moves the clock past a
    // node, which may overshoot zero by about one step.
    let step = (1.0f64 / 40.0).sqrt();
    assert!(rows.iter().all(|&(_, _, x)| x > -6.0 * step));
}

#[test]
fn reruns_match_across_thread_counts() {
    let base = [
        "example", "poisson", "--n", "16", "--seed", "11", "--paths", "300", "--steps", "20",
    ];
    let run = |threads: &str| {
        let mut args = base.to_vec();
        args.extend(["--threads", threads]);
        let out = acdlab(&args);
        without_wall_time(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("4"));
    assert_eq!(one, run("8"));
    let other = acdlab(&[
        "example", "poisson", "--n", "16", "--seed", "12", "--paths", "300", "--steps", "20",
    ]);
    assert_ne!(
        one,
        without_wall_time(std::str::from_utf8(&other.stdout).unwrap()).unwrap()
    );
}
