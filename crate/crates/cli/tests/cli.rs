use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn setobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setobs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_into(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run", "--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    setobs(&all)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const EXAMPLE1_HEADER: &str = "t,x1,x2,x3,y1,y2,yv1,yv2,\
zeta_m1,zeta_m2,zeta_m3,zeta_M1,zeta_M2,zeta_M3,xi_m1,xi_m2,xi_m3,xi_M1,xi_M2,xi_M3,\
theta_hat_m1,theta_hat_m2,theta_hat_M1,theta_hat_M2,theta_bar_m1,theta_bar_m2,theta_bar_M1,theta_bar_M2,\
pe_m,pe_M,branch,s1,s2,d1,d2,z1,z2,S,D,Z";

#[test]
fn trace_header_is_exact_and_rows_match_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(
        dir.path(),
        &[
            "--scenario",
            "example1",
            "--horizon",
            "0.05",
            "--step",
            "0.001",
        ],
    );
    assert!(out.status.success() || code(&out) == 2, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), EXAMPLE1_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 51);
    let width = EXAMPLE1_HEADER.split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == width));
    let last_t: f64 = rows[50].split(',').next().unwrap().parse().unwrap();
    assert!((last_t - 0.05).abs() < 1e-12);
}

#[test]
fn tank_row_count_follows_horizon_over_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(
        dir.path(),
        &["--scenario", "tank2", "--horizon", "2", "--step", "0.01"],
    );
    assert!(code(&out) != 1, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 201);
}

#[test]
fn zero_horizon_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--scenario", "example1", "--horizon", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv, format!("{EXAMPLE1_HEADER}\n"));
    let r = report(dir.path());
    assert_eq!(r["samples"], 0);
    assert!(r["final_conditions"].is_null());
}

#[test]
fn identical_config_and_seed_give_identical_traces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = [
        "--scenario",
        "tank1",
        "--horizon",
        "5",
        "--noise",
        "on",
        "--seed",
        "11",
    ];
    run_into(a.path(), &args);
    run_into(b.path(), &args);
    run_into(
        c.path(),
        &[
            "--scenario",
            "tank1",
            "--horizon",
            "5",
            "--noise",
            "on",
            "--seed",
            "12",
        ],
    );
    let read = |d: &Path| fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn example2_certifies_direct_order_with_containment() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--scenario", "example2", "--horizon", "60"]);
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), stderr(&out));
    let r = report(dir.path());
    let fc = &r["final_conditions"];
    assert_eq!(fc["certified"], "Direct");
    assert_eq!(fc["theorem2_periodic"], "Direct");
    let frac = r["containment"]["theta_fraction"].as_f64().unwrap();
    assert!((0.99..=1.0).contains(&frac), "containment {frac}");
    let state = r["containment"]["state_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&state));
}

#[test]
fn plots_include_equilibrium_figure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(
        dir.path(),
        &["--scenario", "example1", "--horizon", "15", "--plots"],
    );
    assert!(code(&out) != 1, "{}", stderr(&out));
    for name in ["parameters", "theta_bar", "states", "indicators"] {
        let svg = fs::read_to_string(dir.path().join(format!("{name}.svg"))).unwrap();
        assert!(
            svg.starts_with("<svg") && svg.contains("polyline"),
            "{name}.svg"
        );
    }
    let bar = fs::read_to_string(dir.path().join("theta_bar.svg")).unwrap();
    assert!(bar.contains("theta_bar_m") && bar.contains("theta_bar_M"));
}

#[test]
fn verify_builtin_passes() {
    let out = setobs(&["verify", "--scenario", "example1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("assumption 2: pass"));
    let json = setobs(&["verify", "--scenario", "tank2", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["assumption2"]["hurwitz_lower"], true);
    assert_eq!(v["q"], 3);
}

#[test]
fn verify_reports_the_matrices_actually_configured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("l0.toml");
    fs::write(
        &cfg,
        "scenario = \"example1\"\n[params]\nl = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]\n",
    )
    .unwrap();
    let out = setobs(&["verify", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code(&out), 2);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let a = &v["assumption2"];
    assert_eq!(a["cooperative_lower"], true);
    assert_eq!(a["cooperative_upper"], true);
    assert_eq!(a["hurwitz_lower"], true);
    assert_eq!(a["hurwitz_upper"], false);
    assert!(a["max_eig_realpart"].as_f64().unwrap() > 0.0);

    let run = setobs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 1);
    assert!(
        stderr(&run).contains("assumption 2 fails"),
        "{}",
        stderr(&run)
    );
}

#[test]
fn unknown_scenario_and_bad_keys_are_errors() {
    let out = setobs(&["verify", "--scenario", "nope"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown scenario 'nope'"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "scenario = \"tank1\"\n[params]\nsurface = 2.0\n").unwrap();
    let out = setobs(&["verify", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("unknown field `surface`"),
        "{}",
        stderr(&out)
    );

    fs::write(
        &bad,
        "scenario = \"tank1\"\n[params]\nkind = \"example1\"\n",
    )
    .unwrap();
    assert_eq!(
        code(&setobs(&["verify", "--config", bad.to_str().unwrap()])),
        1
    );

    let out = setobs(&["run", "--scenario", "example1", "--step", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_overrides_apply_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let out = dir.path().join("from-config");
    fs::write(
        &cfg,
        format!(
            "scenario = \"example1\"\nhorizon = 0.02\nstep = 0.01\nout = {:?}\nchecks = [\"assumption2\"]\n[params]\nhorizon = 99.0\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let res = setobs(&["run", "--config", cfg.to_str().unwrap(), "--step", "0.005"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let r = report(&out);
    assert_eq!(r["step"], 0.005);
    assert_eq!(r["checks"].as_array().unwrap().len(), 1);
}

#[test]
fn batch_writes_one_directory_per_config() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    fs::create_dir(&configs).unwrap();
    fs::write(
        configs.join("a.toml"),
        "scenario = \"tank1\"\nhorizon = 1.0\nchecks = [\"assumption2\"]\n",
    )
    .unwrap();
    fs::write(
        configs.join("b.toml"),
        "scenario = \"example2\"\nhorizon = 0.5\nchecks = [\"assumption2\"]\n",
    )
    .unwrap();
    fs::write(configs.join("notes.txt"), "ignored").unwrap();
    let out = dir.path().join("out");
    let res = setobs(&[
        "batch",
        "--configs",
        configs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&res), 0, "{}\n{}", stdout(&res), stderr(&res));
    for (name, rows) in [("a", 101), ("b", 501)] {
        let csv = fs::read_to_string(out.join(name).join("trace.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + rows, "{name}");
    }

    fs::write(
        configs.join("c.toml"),
        "scenario = \"tank1\"\nhorizon = 1.0\n[params]\nbogus = 1\n",
    )
    .unwrap();
    let res = setobs(&[
        "batch",
        "--configs",
        configs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stdout(&res).contains("c.toml: error"));
}
