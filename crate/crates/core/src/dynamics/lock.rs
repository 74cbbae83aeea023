//! Locked-frequency extraction from a sampled mechanical amplitude.
//!
//! The coarse frequency is the dominant Hann-windowed DFT peak with parabolic
//! interpolation on `ln P`. It is then refined by minimising the residual of a
//! least-squares fit `beta(t) ~ c0 + c1 exp(-i w t)` over the analysis window,
//! which yields `beta_bar = c0` and `A = c1` free of finite-window leakage.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Trajectory};
use crate::spectra::Mode;

/// Bins on either side of a peak counted as belonging to it.
const PEAK_HALF_WIDTH: usize = 3;
const GOLDEN_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockOptions {
    /// Fraction of the run discarded as transient.
    pub transient_fraction: f64,
    /// Alternative cutoff in mechanical decay times `1/gamma_m`; the smaller
    /// of the two cutoffs is used.
    pub transient_decay_times: f64,
    pub min_periods: f64,
    /// Minimum share of windowed spectral power in the dominant peak.
    pub min_peak_fraction: f64,
    /// A second peak with at least this fraction of the dominant peak's power
    /// is read as beating rather than locking.
    pub max_secondary_ratio: f64,
}

impl Default for LockOptions {
    fn default() -> Self {
        LockOptions {
            transient_fraction: 0.3,
            transient_decay_times: 20.0,
            min_periods: 50.0,
            min_peak_fraction: 0.5,
            max_secondary_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockEstimate {
    pub omega_lock: f64,
    /// Complex amplitude `A_j` of `exp(-i omega_lock t)`, with `t` absolute.
    pub amplitude: Complex64,
    pub beta_bar: Complex64,
    pub peak_fraction: f64,
    /// Start of the analysis window (s).
    pub window_start: f64,
    /// RMS residual of the fit relative to `|A|`.
    pub relative_residual: f64,
}

pub fn extract_lock_frequency(
    traj: &Trajectory,
    mode: Mode,
) -> Result<LockEstimate, DynamicsError> {
    extract_lock_frequency_with(traj, mode, &LockOptions::default())
}

pub fn extract_lock_frequency_with(
    traj: &Trajectory,
    mode: Mode,
    opts: &LockOptions,
) -> Result<LockEstimate, DynamicsError> {
    let samples = traj.samples();
    let p = traj.params();
    let t0 = samples[0].t;
    let run = traj.last().t - t0;
    let decay_cutoff = if p.gamma_m > 0.0 {
        opts.transient_decay_times / p.gamma_m
    } else {
        f64::INFINITY
    };
    let cutoff = (opts.transient_fraction * run).min(decay_cutoff);
    let first = ((cutoff / traj.dt_sample()).ceil() as usize).min(samples.len() - 1);
    let window: Vec<(f64, Complex64)> = samples[first..]
        .iter()
        .map(|s| (s.t, s.beta(mode.index())))
        .collect();

    let period = TAU / p.omega_r;
    let periods = if window.len() > 1 {
        (window[window.len() - 1].0 - window[0].0) / period
    } else {
        0.0
    };
    if periods < opts.min_periods {
        return Err(DynamicsError::ShortWindow {
            periods,
            required: opts.min_periods,
        });
    }

    let dt = traj.dt_sample();
    let (coarse, peak_fraction) = spectral_peak(&window, dt, opts)?;
    let bin = TAU / (window.len() as f64 * dt);

    // Golden-section search on the fit residual around the coarse estimate.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (coarse - 0.5 * bin, coarse + 0.5 * bin);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = fit(&window, x1).2;
    let mut f2 = fit(&window, x2).2;
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= 1e-14 * coarse.abs().max(bin) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = fit(&window, x1).2;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = fit(&window, x2).2;
        }
    }
    let omega_lock = 0.5 * (lo + hi);
    let (beta_bar, amplitude, residual) = fit(&window, omega_lock);
    if !(omega_lock > 0.0) {
        return Err(DynamicsError::NoLock {
            reason: format!("dominant rotation has non-positive frequency {omega_lock:e} rad/s"),
            peak_fraction,
        });
    }
    let rms = (residual / window.len() as f64).sqrt();
    Ok(LockEstimate {
        omega_lock,
        amplitude,
        beta_bar,
        peak_fraction,
        window_start: window[0].0,
        relative_residual: rms / amplitude.norm(),
    })
}

/// Coarse lock frequency `-w_peak` and the dominant peak's power share.
fn spectral_peak(
    window: &[(f64, Complex64)],
    dt: f64,
    opts: &LockOptions,
) -> Result<(f64, f64), DynamicsError> {
    let n = window.len();
    let mean = window.iter().map(|w| w.1).sum::<Complex64>() / n as f64;
    let mut buf: Vec<Complex64> = window
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let hann = 0.5 - 0.5 * (TAU * k as f64 / (n - 1) as f64).cos();
            (w.1 - mean) * hann
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(DynamicsError::NoLock {
            reason: "signal is constant over the analysis window".into(),
            peak_fraction: 0.0,
        });
    }

    let peak = argmax(&power, |_| true).unwrap_or(0);
    let near = |k: usize, centre: usize| {
        let d = k.abs_diff(centre);
        d.min(n - d) <= PEAK_HALF_WIDTH
    };
    let lobe = |centre: usize| {
        (0..n)
            .filter(|&k| near(k, centre))
            .map(|k| power[k])
            .sum::<f64>()
    };
    let peak_power = lobe(peak);
    let peak_fraction = peak_power / total;
    if peak_fraction < opts.min_peak_fraction {
        return Err(DynamicsError::NoLock {
            reason: format!(
                "dominant peak holds {:.3} of the spectral power",
                peak_fraction
            ),
            peak_fraction,
        });
    }
    if let Some(second) = argmax(&power, |k| !near(k, peak)) {
        let ratio = lobe(second) / peak_power;
        if ratio >= opts.max_secondary_ratio {
            return Err(DynamicsError::NoLock {
                reason: format!("secondary peak at {ratio:.3} of the dominant one"),
                peak_fraction,
            });
        }
    }

    let ln = |k: usize| power[k].max(f64::MIN_POSITIVE).ln();
    let (lm, l0, lp) = (ln((peak + n - 1) % n), ln(peak), ln((peak + 1) % n));
    let curvature = lm - 2.0 * l0 + lp;
    let offset = if curvature < 0.0 {
        (0.5 * (lm - lp) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let signed_bin = if peak > n / 2 {
        peak as f64 - n as f64
    } else {
        peak as f64
    };
    let omega_peak = TAU * (signed_bin + offset) / (n as f64 * dt);
    // DFT bin k matches exp(+i w_k t); the ansatz rotates as exp(-i w t).
    Ok((-omega_peak, peak_fraction))
}

fn argmax(values: &[f64], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if keep(k) && best.map_or(true, |b| v > values[b]) {
            best = Some(k);
        }
    }
    best
}

/// Least-squares `c0 + c1 exp(-i w t)`; returns `(c0, c1, residual)`.
fn fit(window: &[(f64, Complex64)], omega: f64) -> (Complex64, Complex64, f64) {
    let n = window.len() as f64;
    let mut se = Complex64::new(0.0, 0.0);
    let mut sb = Complex64::new(0.0, 0.0);
    let mut seb = Complex64::new(0.0, 0.0);
    let mut sbb = 0.0;
    for &(t, b) in window {
        let e = Complex64::from_polar(1.0, -omega * t);
        se += e;
        sb += b;
        seb += e.conj() * b;
        sbb += b.norm_sqr();
    }
    // [[n, se], [conj(se), n]] [c0, c1] = [sb, seb]
    let det = n * n - se.norm_sqr();
    if det <= 1e-12 * n * n {
        let c0 = sb / n;
        return (
            c0,
            Complex64::new(0.0, 0.0),
            (sbb - n * c0.norm_sqr()).max(0.0),
        );
    }
    let c0 = (n * sb - se * seb) / det;
    let c1 = (n * seb - se.conj() * sb) / det;
    let residual = window
        .iter()
        .map(|&(t, b)| (b - c0 - c1 * Complex64::from_polar(1.0, -omega * t)).norm_sqr())
        .sum::<f64>();
    (c0, c1, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, StateVector};
    use crate::spectra::SystemParams;

    fn synthetic(omega: f64, offset: Complex64, amp: Complex64, dt: f64, n: usize) -> Trajectory {
        let p = SystemParams::ep_model(omega.abs(), 0.0, 0.0, 0.0, 0.0);
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                StateVector {
                    alpha_1: Complex64::new(0.0, 0.0),
                    alpha_2: Complex64::new(0.0, 0.0),
                    beta_1: offset + amp * Complex64::from_polar(1.0, -omega * t),
                    beta_2: Complex64::new(0.0, 0.0),
                    t,
                }
            })
            .collect();
        Trajectory::from_samples(p, samples).unwrap()
    }

    #[test]
    fn recovers_synthetic_ansatz() {
        let traj = synthetic(
            1.7,
            Complex64::new(0.3, 0.0),
            Complex64::new(2.0, 0.0),
            0.05,
            10_000,
        );
        let est = extract_lock_frequency(&traj, Mode::One).unwrap();
        assert!((est.omega_lock - 1.7).abs() < 1e-6 * 1.7);
        assert!((est.amplitude - 2.0).norm() < 1e-6 * 2.0);
        assert!((est.beta_bar - 0.3).norm() < 1e-6);
        assert!(est.peak_fraction > 0.99);
    }

    #[test]
    fn complex_amplitude_phase_is_absolute() {
        let amp = Complex64::from_polar(0.8, 1.1);
        let traj = synthetic(3.0, Complex64::new(-0.1, 0.2), amp, 0.02, 20_000);
        let est = extract_lock_frequency(&traj, Mode::One).unwrap();
        assert!((est.amplitude - amp).norm() < 1e-8);
    }

    #[test]
    fn beating_modes_do_not_lock() {
        let p = SystemParams::ep_model(1.0, 0.0, 0.02, 0.0, 0.0);
        let x0 = StateVector {
            beta_1: Complex64::new(1.0, 0.0),
            beta_2: Complex64::new(0.0, 0.0),
            ..StateVector::seed()
        };
        let traj = integrate(&p, &x0, 3000.0, 1e-9).unwrap();
        let err = extract_lock_frequency(&traj, Mode::One).unwrap_err();
        assert!(matches!(err, DynamicsError::NoLock { .. }), "{err}");
    }

    #[test]
    fn driven_run_locks_near_mechanical_frequency() {
        // Blue-detuned drive on cavity 2 pushes the mechanics into a limit cycle.
        let p = SystemParams {
            alpha_in: 16.0,
            g: 1e-2,
            kappa: 0.1,
            delta1: -5.0,
            delta2: 1.0,
            ..SystemParams::ep_model(1.0, 1e-4, 1e-2, 1e-6, 2e-6)
        };
        let traj = integrate(&p, &StateVector::seed(), 3000.0, 1e-8).unwrap();
        for mode in [Mode::One, Mode::Two] {
            let est = extract_lock_frequency(&traj, mode).unwrap();
            assert!((est.omega_lock / p.omega_r - 1.0).abs() < 0.05, "{est:?}");
            assert!(est.amplitude.norm() > 1.0);
        }
    }

    #[test]
    fn short_window_rejected() {
        let traj = synthetic(
            1.0,
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            0.1,
            2000,
        );
        assert!(matches!(
            extract_lock_frequency(&traj, Mode::One),
            Err(DynamicsError::ShortWindow { .. })
        ));
    }

    #[test]
    fn reversed_rotation_rejected() {
        let traj = synthetic(
            -1.0,
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            0.1,
            8000,
        );
        assert!(matches!(
            extract_lock_frequency(&traj, Mode::One),
            Err(DynamicsError::NoLock { .. })
        ));
    }
}
