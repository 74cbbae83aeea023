//! Backaction series against a brute-force partial sum whose Bessel values
//! come from trapezoid quadrature of the integral representation.

use epgrav::backaction::{evaluate, BackactionOptions, KappaPower, LimitCycleAnsatz};
use epgrav::{Complex64, Mode, SystemParams};

const N: i64 = 120;

/// `J_n(x) = (1/2pi) int_0^2pi cos(n t - x sin t) dt`; the trapezoid rule is
/// spectrally accurate for this periodic integrand.
fn bessel_quadrature(n: i64, x: f64) -> f64 {
    let m = 4096;
    let h = std::f64::consts::TAU / m as f64;
    (0..m)
        .map(|k| {
            let t = k as f64 * h;
            (n as f64 * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / m as f64
}

fn oracle(p: &SystemParams, a: &LimitCycleAnsatz, j: usize, kappa_spring: f64) -> (f64, f64) {
    let w = a.omega_lock;
    let zeta = 2.0 * p.g * a.amplitude[j].re / w;
    let detuning = if j == 0 { p.delta1 } else { p.delta2 };
    let d = detuning + 2.0 * p.g * a.beta_bar[j].re;
    let h = |n: i64| Complex64::new(p.kappa / 2.0, n as f64 * w - d);
    let mut spring = Complex64::new(0.0, 0.0);
    let mut damping = 0.0;
    for n in -N..=N {
        let weight = bessel_quadrature(n + 1, -zeta) * bessel_quadrature(n, -zeta);
        let denom = h(n + 1).conj() * h(n);
        spring += weight / denom;
        damping += weight / denom.norm_sqr();
    }
    let drive = (p.g * p.alpha_in).powi(2);
    (
        -(2.0 * kappa_spring * drive / (w * zeta)) * spring.re,
        2.0 * p.kappa * p.kappa * drive / zeta * damping,
    )
}

fn params() -> SystemParams {
    SystemParams {
        alpha_in: 16.0,
        g: 1e-2,
        kappa: 0.1,
        delta1: -1.0,
        delta2: 1.0,
        ..SystemParams::ep_model(1.0, 1e-4, 1e-2, 1e-6, 2e-6)
    }
}

fn ansatz(amp: f64) -> LimitCycleAnsatz {
    LimitCycleAnsatz {
        beta_bar: [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.05)],
        amplitude: [Complex64::new(amp, 0.4), Complex64::new(0.7 * amp, -0.2)],
        omega_lock: 1.01,
    }
}

#[test]
fn series_matches_brute_force_partial_sum() {
    let p = params();
    for amp in [0.05, 2.0, 40.0, 300.0] {
        let a = ansatz(amp);
        for (j, mode) in [(0, Mode::One), (1, Mode::Two)] {
            for (power, kappa_spring) in [
                (KappaPower::AsPrinted, p.kappa),
                (KappaPower::SquaredBoth, p.kappa * p.kappa),
            ] {
                let opts = BackactionOptions {
                    kappa_power: power,
                    extra_terms: 0,
                };
                let r = evaluate(&p, &a, mode, &opts).unwrap();
                let (spring, damping) = oracle(&p, &a, j, kappa_spring);
                let scale_s = spring.abs().max(1e-300);
                let scale_d = damping.abs().max(1e-300);
                assert!(
                    (r.delta_omega - spring).abs() <= 1e-9 * scale_s,
                    "amp {amp} mode {j}: {} vs {spring}",
                    r.delta_omega
                );
                assert!(
                    (r.gamma_opt - damping).abs() <= 1e-9 * scale_d,
                    "amp {amp} mode {j}: {} vs {damping}",
                    r.gamma_opt
                );
            }
        }
    }
}

#[test]
fn red_and_blue_detuning_give_opposite_damping_signs() {
    let p = params();
    let a = ansatz(2.0);
    let opts = BackactionOptions::default();
    let red = evaluate(&p, &a, Mode::One, &opts).unwrap();
    let blue = evaluate(&p, &a, Mode::Two, &opts).unwrap();
    assert!(
        red.gamma_opt > 0.0,
        "red-detuned mode should be damped: {}",
        red.gamma_opt
    );
    assert!(
        blue.gamma_opt < 0.0,
        "blue-detuned mode should see gain: {}",
        blue.gamma_opt
    );
}
