use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn pwavg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwavg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    p.to_str().unwrap().to_owned()
}

fn rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

const UNIT_ROOT: &str = "a1=1,1,1,1;b1=0,0,0,-pi";

#[test]
fn averaged_matches_closed_form() {
    let out = pwavg(&[
        "averaged",
        "--system",
        "linear-center-4z",
        "--params",
        UNIT_ROOT,
        "--order",
        "1",
        "--grid",
        "5",
        "--rho-min",
        "0.5",
        "--rho-max",
        "2.5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&out);
    assert_eq!(rows.len(), 5);
    for row in rows {
        let (rho, f1): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((f1 - (PI * rho - PI)).abs() < 1e-8);
        assert_eq!(row[2], "");
    }
}

#[test]
fn order_zero_is_a_config_error() {
    let out = pwavg(&["averaged", "--system", "linear-center-4z", "--order", "0"]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn two_zone_average_is_linear() {
    let out = pwavg(&["--config", &config("two-zone-averaged.toml")]);
    assert_eq!(code(&out), 0);
    for row in rows(&out) {
        let (rho, f1): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((f1 - PI * (0.7 - 1.9) * rho / 2.0).abs() < 1e-9);
    }
}

#[test]
fn unit_root_cycle_is_verified() {
    let out = pwavg(&["--config", &config("unit-root-cycles.toml")]);
    assert_eq!(code(&out), 0);
    let rows = rows(&out);
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let eps: f64 = row[3].parse().unwrap();
        let distance: f64 = row[5].parse().unwrap();
        assert_eq!(row[9], "verified");
        assert!(distance <= 20.0 * eps);
    }
}

#[test]
fn no_root_gives_an_empty_report() {
    let out = pwavg(&[
        "cycles",
        "--system",
        "linear-center-4z",
        "--params",
        "a1=0,0,0,0;b1=0,0,0,1",
    ]);
    assert_eq!(code(&out), 0);
    assert!(rows(&out).is_empty());
}

#[test]
fn three_zone_instance_has_three_cycles() {
    let out = pwavg(&["--config", &config("three-zone-cycles.toml")]);
    assert_eq!(code(&out), 0);
    let rows = rows(&out);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[9] == "verified"));
    let mut stars: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    stars.dedup();
    assert_eq!(stars.len(), 3);
}

#[test]
fn rank_tables() {
    for name in ["linear-center-rank.toml", "constant-center-rank.toml"] {
        let out = pwavg(&["--config", &config(name)]);
        assert_eq!(code(&out), 0);
        let table: Vec<(String, String)> = rows(&out).into_iter().map(|r| (r[2].clone(), r[3].clone())).collect();
        assert_eq!(
            table,
            vec![("2".into(), "1".into()), ("3".into(), "2".into())],
            "{name}"
        );
    }
    let out = pwavg(&["rank", "--system", "linear-center-4z", "--order", "3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = config("linear-center-f2.toml");
    assert_eq!(code(&pwavg(&["--config", &cfg, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(
        code(&pwavg(&[
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap(),
            "--sequential"
        ])),
        0
    );
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    assert!(!a.contains(&b'\r'));
}

#[test]
fn flags_override_the_file() {
    let out = pwavg(&["--config", &config("unit-root-averaged.toml"), "--grid", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(rows(&out).len(), 3);
}

#[test]
fn expression_system_matches_builtin() {
    let from_file = pwavg(&[
        "--config",
        &config("linear-center-expressions.toml"),
        "averaged",
        "--grid",
        "7",
    ]);
    let builtin = pwavg(&[
        "averaged",
        "--system",
        "linear-center-4z",
        "--params",
        UNIT_ROOT,
        "--grid",
        "7",
    ]);
    assert_eq!(code(&from_file), 0, "{}", String::from_utf8_lossy(&from_file.stderr));
    for (x, y) in rows(&from_file).iter().zip(rows(&builtin)) {
        let (fx, fy): (f64, f64) = (x[1].parse().unwrap(), y[1].parse().unwrap());
        assert!((fx - fy).abs() < 1e-9);
    }
}

#[test]
fn malformed_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[system]\nbuiltin = \"linear-center-4z\"\n[run]\ncommand = \"averaged\"\ngrdi = 3\n",
        "[system]\nbuiltin = \"no-such-system\"\n[run]\ncommand = \"averaged\"\n",
        "[system]\ndomain = [0.1, 1]\n[[system.sector]]\nxdot = [\"-y +\"]\nydot = [\"x\"]\n[run]\ncommand = \"averaged\"\n",
        "[system]\nbuiltin = \"quadratic-isochronous-nz\"\ndomain = [0.1, 1.5]\n[run]\ncommand = \"averaged\"\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let path = dir.path().join(format!("c{i}.toml"));
        fs::write(&path, text).unwrap();
        let out = pwavg(&["--config", path.to_str().unwrap()]);
        assert_eq!(code(&out), 2, "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn sliding_is_a_numerical_failure() {
    let out = pwavg(&[
        "displacement",
        "--system",
        "constant-center-4z",
        "--params",
        UNIT_ROOT,
        "--eps",
        "5",
        "--grid",
        "3",
    ]);
    assert_eq!(code(&out), 3);
    assert!(rows(&out).iter().any(|r| r[2] == "NaN"));
}

#[test]
fn trace_rows_follow_the_sectors() {
    let out = pwavg(&[
        "trace",
        "--system",
        "constant-center-4z",
        "--params",
        UNIT_ROOT,
        "--rho",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let sectors: Vec<u32> = rows(&out).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(sectors.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(sectors.last(), Some(&4));
}
