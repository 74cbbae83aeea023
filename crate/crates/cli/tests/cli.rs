//! Runs the `epgrav` binary and checks output, files and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epgrav(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epgrav"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EPGRAV_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = stderr(o);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

#[test]
fn ep_for_case_x() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(&["ep", "--case", "X"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "alpha_ep = 200 w_r^1/2");
    // Single-shot commands leave the working directory untouched.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn ep_json_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(&["ep", "--case", "Z", "--format", "json"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["alpha_ep_w_r"], 20.0);
}

#[test]
fn invert_g_recovers_codata_from_tungsten_shift() {
    // |dnu_-| = (2 pi G rho / 3 w)(1 + sqrt((1 + sqrt(1 + r^2)) / 2)), r = 3 eps w / (pi G rho).
    let (g, rho, w, eps) = (6.67408e-11f64, 19350.0f64, 2e9f64, 2e7f64);
    let pi = std::f64::consts::PI;
    let r = 3.0 * eps * w / (pi * g * rho);
    let shift =
        2.0 * pi * g * rho / (3.0 * w) * (1.0 + ((1.0 + (1.0 + r * r).sqrt()) / 2.0).sqrt());
    let shift = format!("{shift:e}");
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(
        &[
            "invert-g",
            "--shift",
            &shift,
            "--rho",
            "19350",
            "--omega-r",
            "2e9",
            "--epsilon",
            "2e7",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let value: f64 = out
        .trim()
        .strip_prefix("G = ")
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((value / g - 1.0).abs() < 1e-10, "{out}");
}

#[test]
fn zero_point_grid_exits_with_grid_miss() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(&["sweep", "--case", "X", "--grid", "0"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "GridMiss");
    assert_eq!(e["error"]["class"], "numeric");
    assert_eq!(
        fs::read_dir(dir.path()).unwrap().count(),
        0,
        "nothing written before validation"
    );
}

#[test]
fn negative_epsilon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(&["eigen", "--omega-r", "1", "--epsilon", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "InvariantViolation");
}

#[test]
fn config_file_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "[system]\nomega_r = \"1 rad_s\"\nepsilom = \"1e-2 w_r\"\n",
    )
    .unwrap();
    let o = epgrav(&["eigen", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = error_json(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.contains("epsilom") && msg.contains("line 3"), "{msg}");

    fs::write(&path, "[system]\nomega_r = 1\n").unwrap();
    let o = epgrav(&["eigen", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "UnitError");
}

#[test]
fn flag_overrides_file_and_logs_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "case = \"X\"\n[system]\nepsilon = \"1e-2 w_r\"\neta1 = 1e-6\neta2 = 2e-6\n",
    )
    .unwrap();
    let o = epgrav(
        &[
            "ep",
            "--config",
            path.to_str().unwrap(),
            "--epsilon",
            "4e-2 w_r",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "alpha_ep = 400 w_r^1/2");
    assert!(stderr(&o).contains("--epsilon"), "{}", stderr(&o));

    let o = epgrav(
        &[
            "ep",
            "--quiet",
            "--config",
            path.to_str().unwrap(),
            "--epsilon",
            "4e-2 w_r",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(stdout(&o).is_empty() && stderr(&o).is_empty());
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_epgrav"))
        .args(["gamma", "--case", "Y", "--grid", "201"])
        .current_dir(dir.path())
        .env("EPGRAV_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("fig5.csv").exists());
    assert!(target.join("fig5.json").exists());
    assert!(stdout(&o).contains("monotone: true"), "{}", stdout(&o));

    let flag = dir.path().join("from-flag");
    let o = Command::new(env!("CARGO_BIN_EXE_epgrav"))
        .args([
            "gamma",
            "--case",
            "Y",
            "--grid",
            "201",
            "--out",
            flag.to_str().unwrap(),
        ])
        .current_dir(dir.path())
        .env("EPGRAV_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag.join("fig5.csv").exists());
}

#[test]
fn sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(
        &[
            "sweep",
            "--case",
            "Z",
            "--grid",
            "0.1:2:191 alpha_ep",
            "--delta-omega",
            "-1e-5,-1e-6",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fig4 = fs::read_to_string(dir.path().join("o/fig4_Z.csv")).unwrap();
    assert!(fig4.starts_with("# epgrav-core"));
    assert!(dir.path().join("o/fig2_Z.csv").exists());
    assert!(stdout(&o).contains("alpha = 20"), "{}", stdout(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = epgrav(
        &[
            "gamma",
            "--case",
            "Y",
            "--grid",
            "51",
            "--out",
            blocker.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(error_json(&o)["error"]["class"], "io");
}

#[test]
fn simulate_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(
        &[
            "simulate",
            "--omega-r",
            "1",
            "--gamma-m",
            "1e-3",
            "--epsilon",
            "1e-2",
            "--kappa",
            "0.1",
            "--t-end",
            "20 periods",
            "--out",
            "sim",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sim/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,alpha_1_re"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim/simulate.json")).unwrap())
            .unwrap();
    assert!(report["accepted_steps"].as_u64().unwrap() > 0);
}

#[test]
fn gravity_for_tungsten_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(
        &[
            "gravity",
            "--rho",
            "19350",
            "--radius",
            "0.1",
            "--a1",
            "1",
            "--a2",
            "0.1",
            "--m1",
            "1e-12",
            "--m2",
            "1e-12",
            "--omega-r",
            "2e9",
            "--epsilon",
            "1e-2 w_r",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let shift = v["report"]["abs_dnu_minus"].as_f64().unwrap();
    assert!((shift / 1.645e-4 - 1.0).abs() < 1e-3, "{shift}");
}

#[test]
fn usage_errors_are_json_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = epgrav(&["transmogrify"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "Usage");
    let o = epgrav(&["ep"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "MissingField");
}
