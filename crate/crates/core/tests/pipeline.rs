//! End-to-end runs across modules: simulation to lock to backaction, and the
//! figure export on disk.

use std::fs;

use epgrav::backaction::{evaluate, BackactionOptions, LimitCycleAnsatz};
use epgrav::dynamics::{extract_lock_frequency, integrate, StateVector};
use epgrav::harness::{run_figures, CaseName, FiguresConfig};
use epgrav::{Mode, SystemParams};

fn driven() -> SystemParams {
    SystemParams {
        alpha_in: 16.0,
        g: 1e-2,
        kappa: 0.1,
        delta1: -5.0,
        delta2: 1.0,
        ..SystemParams::ep_model(1.0, 1e-4, 1e-2, 1e-6, 2e-6)
    }
}

#[test]
fn simulated_lock_feeds_backaction() {
    let p = driven();
    let traj = integrate(&p, &StateVector::seed(), 3000.0, 1e-8).unwrap();
    let one = extract_lock_frequency(&traj, Mode::One).unwrap();
    let two = extract_lock_frequency(&traj, Mode::Two).unwrap();
    assert!((one.omega_lock - two.omega_lock).abs() < 1e-3 * one.omega_lock);
    assert!((one.omega_lock - 1.0).abs() < 0.05);

    let ansatz = LimitCycleAnsatz {
        beta_bar: [one.beta_bar, two.beta_bar],
        amplitude: [one.amplitude, two.amplitude],
        omega_lock: one.omega_lock,
    };
    for mode in [Mode::One, Mode::Two] {
        let r = evaluate(&p, &ansatz, mode, &BackactionOptions::default()).unwrap();
        assert!(r.delta_omega.is_finite() && r.gamma_opt.is_finite());
    }
}

#[test]
fn figures_land_on_disk_with_preamble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = FiguresConfig {
        cases: vec![CaseName::Y],
        coalescence_points: 201,
        sweep_points: 201,
        g_values: vec![6.0e-11, 6.67408e-11, 7.4e-11],
        ..FiguresConfig::default()
    };
    let out = run_figures(&cfg, dir.path()).unwrap();
    let names: Vec<String> = out
        .files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for expected in [
        "fig2_Y.csv",
        "fig4_Y.csv",
        "fig5.csv",
        "fig5.json",
        "fig6.csv",
    ] {
        assert!(
            names.iter().any(|n| n == expected),
            "missing {expected} in {names:?}"
        );
    }
    for f in &out.files {
        let text = fs::read_to_string(f).unwrap();
        if f.extension().unwrap() == "csv" {
            assert!(text.starts_with("# epgrav-core "), "{}", f.display());
            assert!(text.lines().nth(1).unwrap().starts_with("# config: {"));
        }
    }
    out.gamma.check_monotone().unwrap();
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}
