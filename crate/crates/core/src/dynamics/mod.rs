//! Classical mean-field dynamics of the two optomechanical cavities.
//!
//! Integrates
//!
//! ```text
//! da_j/dt = [i(D_j + 2g Re b_j) - k/2] a_j - i c a_in
//! db_j/dt = -(i w_r + g_m/2) b_j + i eps b_k + i g |a_j|^2      (k = 3 - j)
//! ```
//!
//! where `c = sqrt(kappa)` by default (see [`DriveCoupling`]). Time is
//! rescaled by `omega_r` internally, and every public quantity is in physical
//! units.

mod integrator;
mod lock;
mod rates;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{SpectraError, SystemParams};
use integrator::{Integrator, State, StepFailure};

pub use integrator::IntegratorStats;
pub use lock::{extract_lock_frequency, extract_lock_frequency_with, LockEstimate, LockOptions};
pub use rates::{effective_rate_check, RateCheckReport, SupermodeRate};

/// Amplitude magnitude above which a run is declared divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;
pub const MIN_TOLERANCE: f64 = 1e-12;
pub const MAX_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("input `{field}` = {value} must be {requirement}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("amplitude {magnitude:e} exceeded the overflow guard at t = {t:e} s")]
    Blowup { t: f64, magnitude: f64 },
    #[error("step size underflow ({step:e} s) at t = {t:e} s")]
    StiffnessFailure { t: f64, step: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t:e} s")]
    StepLimit { t: f64, max_steps: usize },
    #[error("analysis window spans {periods:.1} mechanical periods, need at least {required}")]
    ShortWindow { periods: f64, required: f64 },
    #[error("no single locked frequency: {reason}")]
    NoLock { reason: String, peak_fraction: f64 },
    #[error("exponential fit of supermode {supermode} failed (R^2 = {r_squared})")]
    FitFailure {
        supermode: &'static str,
        r_squared: f64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SpectraError> for DynamicsError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::InvalidParameter {
                field,
                value,
                requirement,
            } => DynamicsError::InvalidInput {
                field,
                value,
                requirement,
            },
            _ => DynamicsError::InvalidInput {
                field: "params",
                value: f64::NAN,
                requirement: "valid",
            },
        }
    }
}

/// How the input field enters the cavity equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DriveCoupling {
    /// `-i sqrt(kappa) a_in`.
    #[default]
    SqrtKappa,
    /// `-i sqrt(gamma_m) a_in`, matching the substitution `E = sqrt(gamma_m) a_in`.
    SqrtGammaM,
}

/// Instantaneous mean-field state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub alpha_1: Complex64,
    pub alpha_2: Complex64,
    pub beta_1: Complex64,
    pub beta_2: Complex64,
    pub t: f64,
}

impl StateVector {
    /// Default seed: `beta_j = 1e-3`, empty cavities, `t = 0`.
    pub fn seed() -> Self {
        StateVector {
            alpha_1: Complex64::new(0.0, 0.0),
            alpha_2: Complex64::new(0.0, 0.0),
            beta_1: Complex64::new(1e-3, 0.0),
            beta_2: Complex64::new(1e-3, 0.0),
            t: 0.0,
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [self.alpha_1, self.alpha_2, self.beta_1, self.beta_2]
    }

    pub fn alpha(&self, j: usize) -> Complex64 {
        [self.alpha_1, self.alpha_2][j]
    }

    pub fn beta(&self, j: usize) -> Complex64 {
        [self.beta_1, self.beta_2][j]
    }

    fn to_state(self) -> State {
        let mut y = [0.0; 8];
        for (i, z) in self.amplitudes().iter().enumerate() {
            y[2 * i] = z.re;
            y[2 * i + 1] = z.im;
        }
        y
    }

    fn from_state(y: &State, t: f64) -> Self {
        let z = |i: usize| Complex64::new(y[2 * i], y[2 * i + 1]);
        StateVector {
            alpha_1: z(0),
            alpha_2: z(1),
            beta_1: z(2),
            beta_2: z(3),
            t,
        }
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !self.t.is_finite() {
            return Err(DynamicsError::InvalidInput {
                field: "x0.t",
                value: self.t,
                requirement: "finite",
            });
        }
        let names = ["x0.alpha_1", "x0.alpha_2", "x0.beta_1", "x0.beta_2"];
        for (field, z) in names.into_iter().zip(self.amplitudes()) {
            let m = z.norm();
            if !m.is_finite() || m >= OVERFLOW_GUARD {
                return Err(DynamicsError::InvalidInput {
                    field,
                    value: m,
                    requirement: "finite and below the overflow guard",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    pub drive_coupling: DriveCoupling,
    /// Output samples per mechanical period `2 pi / omega_r`.
    pub samples_per_period: f64,
    pub max_samples: usize,
    pub max_steps: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions {
            drive_coupling: DriveCoupling::SqrtKappa,
            samples_per_period: 16.0,
            max_samples: 1 << 22,
            max_steps: 50_000_000,
        }
    }
}

/// Uniformly sampled solution of the mean-field equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    params: SystemParams,
    samples: Vec<StateVector>,
    dt_sample: f64,
    stats: IntegratorStats,
}

impl Trajectory {
    /// Wraps externally produced samples, e.g. measured or synthetic data.
    ///
    /// Timestamps must be strictly increasing and uniform to `1e-9` relative.
    pub fn from_samples(
        params: SystemParams,
        samples: Vec<StateVector>,
    ) -> Result<Self, DynamicsError> {
        params.validate()?;
        if samples.len() < 2 {
            return Err(DynamicsError::InvalidInput {
                field: "samples",
                value: samples.len() as f64,
                requirement: "at least 2",
            });
        }
        let dt = (samples[samples.len() - 1].t - samples[0].t) / (samples.len() - 1) as f64;
        for (k, pair) in samples.windows(2).enumerate() {
            let step = pair[1].t - pair[0].t;
            if !(step > 0.0) || (step - dt).abs() > 1e-9 * dt.max(pair[1].t.abs()) {
                return Err(DynamicsError::InvalidInput {
                    field: "samples.t",
                    value: k as f64,
                    requirement: "strictly increasing on a uniform grid",
                });
            }
        }
        Ok(Trajectory {
            params,
            samples,
            dt_sample: dt,
            stats: IntegratorStats::default(),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn samples(&self) -> &[StateVector] {
        &self.samples
    }

    pub fn dt_sample(&self) -> f64 {
        self.dt_sample
    }

    pub fn stats(&self) -> &IntegratorStats {
        &self.stats
    }

    pub fn last(&self) -> &StateVector {
        &self.samples[self.samples.len() - 1]
    }

    /// CSV with columns `t` and the real/imaginary parts of each amplitude.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "t,alpha_1_re,alpha_1_im,alpha_2_re,alpha_2_im,beta_1_re,beta_1_im,beta_2_re,beta_2_im"
        )?;
        for s in &self.samples {
            write!(out, "{}", s.t)?;
            for z in s.amplitudes() {
                write!(out, ",{},{}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check_run_inputs(
    p: &SystemParams,
    x0: &StateVector,
    t_end: f64,
    tol: f64,
) -> Result<(), DynamicsError> {
    p.validate()?;
    x0.validate()?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(DynamicsError::InvalidInput {
            field: "t_end",
            value: t_end,
            requirement: "> 0 and finite",
        });
    }
    if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        return Err(DynamicsError::InvalidInput {
            field: "tol",
            value: tol,
            requirement: "in [1e-12, 1e-4]",
        });
    }
    Ok(())
}

/// Integrates from `x0.t` for a duration `t_end` with default options.
pub fn integrate(
    p: &SystemParams,
    x0: &StateVector,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate_with(p, x0, t_end, tol, &DynamicsOptions::default())
}

pub fn integrate_with(
    p: &SystemParams,
    x0: &StateVector,
    t_end: f64,
    tol: f64,
    opts: &DynamicsOptions,
) -> Result<Trajectory, DynamicsError> {
    check_run_inputs(p, x0, t_end, tol)?;
    if !(opts.samples_per_period > 0.0) || !opts.samples_per_period.is_finite() {
        return Err(DynamicsError::InvalidInput {
            field: "samples_per_period",
            value: opts.samples_per_period,
            requirement: "> 0 and finite",
        });
    }

    let w = p.omega_r;
    let span = t_end * w; // dimensionless duration
    let intervals = (span * opts.samples_per_period / std::f64::consts::TAU)
        .ceil()
        .max(1.0);
    if intervals + 1.0 > opts.max_samples as f64 {
        return Err(DynamicsError::InvalidInput {
            field: "t_end",
            value: t_end,
            requirement: "short enough for max_samples at the requested sampling",
        });
    }
    let intervals = intervals as usize;

    let rate = |x: f64| x / w;
    let (d1, d2) = (rate(p.delta1), rate(p.delta2));
    let g = rate(p.g);
    let kappa_half = rate(p.kappa) / 2.0;
    let gamma_half = rate(p.gamma_m) / 2.0;
    let eps = rate(p.epsilon);
    let drive = match opts.drive_coupling {
        DriveCoupling::SqrtKappa => p.kappa.sqrt(),
        DriveCoupling::SqrtGammaM => p.gamma_m.sqrt(),
    } * p.alpha_in
        / w;

    let rhs = move |_t: f64, y: &State| {
        let a1 = Complex64::new(y[0], y[1]);
        let a2 = Complex64::new(y[2], y[3]);
        let b1 = Complex64::new(y[4], y[5]);
        let b2 = Complex64::new(y[6], y[7]);
        let i = Complex64::i();
        let drive_term = Complex64::new(0.0, -drive);
        let da1 = (i * (d1 + 2.0 * g * b1.re) - kappa_half) * a1 + drive_term;
        let da2 = (i * (d2 + 2.0 * g * b2.re) - kappa_half) * a2 + drive_term;
        let mech = Complex64::new(-gamma_half, -1.0);
        let db1 = mech * b1 + i * eps * b2 + i * g * a1.norm_sqr();
        let db2 = mech * b2 + i * eps * b1 + i * g * a2.norm_sqr();
        [
            da1.re, da1.im, da2.re, da2.im, db1.re, db1.im, db2.re, db2.im,
        ]
    };

    let fastest = [1.0, d1.abs(), d2.abs(), kappa_half, gamma_half, eps]
        .into_iter()
        .fold(0.0, f64::max);
    let h0 = 0.01 / fastest;
    let mut integ = Integrator::new(rhs, tol, span, OVERFLOW_GUARD, opts.max_steps, h0);

    let t0 = x0.t;
    let mut y = x0.to_state();
    let mut tau = 0.0;
    let mut samples = Vec::with_capacity(intervals + 1);
    samples.push(StateVector { t: t0, ..*x0 });
    for k in 1..=intervals {
        let target = span * k as f64 / intervals as f64;
        integ
            .advance(&mut tau, &mut y, target)
            .map_err(|f| match f {
                StepFailure::Underflow { t, h } => DynamicsError::StiffnessFailure {
                    t: t0 + t / w,
                    step: h / w,
                },
                StepFailure::StepLimit { t } => DynamicsError::StepLimit {
                    t: t0 + t / w,
                    max_steps: opts.max_steps,
                },
                StepFailure::Blowup { t, magnitude } => DynamicsError::Blowup {
                    t: t0 + t / w,
                    magnitude,
                },
            })?;
        samples.push(StateVector::from_state(
            &y,
            t0 + t_end * k as f64 / intervals as f64,
        ));
    }

    Ok(Trajectory {
        params: *p,
        samples,
        dt_sample: t_end / intervals as f64,
        stats: integ.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(omega_r: f64, gamma_m: f64, epsilon: f64) -> SystemParams {
        SystemParams::ep_model(omega_r, gamma_m, epsilon, 0.0, 0.0)
    }

    fn single(beta_1: Complex64) -> StateVector {
        StateVector {
            alpha_1: Complex64::new(0.0, 0.0),
            alpha_2: Complex64::new(0.0, 0.0),
            beta_1,
            beta_2: Complex64::new(0.0, 0.0),
            t: 0.0,
        }
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn linear_cavity_fixed_point() {
        let p = SystemParams {
            kappa: 0.4,
            delta1: -0.7,
            delta2: 0.3,
            alpha_in: 2.0,
            ..free(1.0, 1e-2, 0.0)
        };
        let traj = integrate(&p, &StateVector::seed(), 200.0, 1e-11).unwrap();
        let end = traj.last();
        for (j, delta) in [(0, p.delta1), (1, p.delta2)] {
            let expected = Complex64::new(0.0, -p.kappa.sqrt() * p.alpha_in)
                / Complex64::new(p.kappa / 2.0, -delta);
            assert!(
                rel(end.alpha(j), expected) < 1e-8,
                "alpha_{}: {}",
                j + 1,
                end.alpha(j)
            );
            assert!(end.beta(j).norm() < 1e-3 * (-p.gamma_m * 200.0 / 2.0).exp() * 1.01);
        }
    }

    #[test]
    fn full_exchange_after_half_beat() {
        let eps = 0.05;
        let p = free(1.0, 0.0, eps);
        let half_beat = std::f64::consts::PI / (2.0 * eps);
        let traj = integrate(&p, &single(Complex64::new(1.0, 0.0)), half_beat, 1e-12).unwrap();
        let end = traj.last();
        assert!(end.beta_1.norm() < 1e-8);
        assert!((end.beta_2.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn decay_envelope() {
        let gamma = 0.02;
        let p = free(1.0, gamma, 0.0);
        let traj = integrate(&p, &single(Complex64::new(1.0, 0.0)), 100.0, 1e-10).unwrap();
        for s in traj.samples().iter().step_by(37) {
            let expected = (-gamma * s.t / 2.0).exp();
            assert!((s.beta_1.norm() / expected - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn physical_time_scaling() {
        // Identical dimensionless problems at different omega_r.
        let a = integrate(
            &free(1.0, 0.01, 0.03),
            &single(Complex64::new(1.0, 0.0)),
            50.0,
            1e-10,
        )
        .unwrap();
        let b = integrate(
            &free(1e6, 1e4, 3e4),
            &single(Complex64::new(1.0, 0.0)),
            50e-6,
            1e-10,
        )
        .unwrap();
        assert_eq!(a.samples().len(), b.samples().len());
        assert!((b.dt_sample() / a.dt_sample() - 1e-6).abs() < 1e-12);
        assert!(rel(b.last().beta_2, a.last().beta_2) < 1e-9);
    }

    #[test]
    fn samples_are_uniform_and_start_at_x0() {
        let mut x0 = StateVector::seed();
        x0.t = 3.0;
        let traj = integrate(&free(2.0, 0.0, 0.0), &x0, 10.0, 1e-8).unwrap();
        assert_eq!(traj.samples()[0], x0);
        assert_eq!(traj.last().t, 13.0);
        for pair in traj.samples().windows(2) {
            assert!(((pair[1].t - pair[0].t) / traj.dt_sample() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sqrt_gamma_drive_option() {
        let p = SystemParams {
            kappa: 0.5,
            alpha_in: 1.0,
            ..free(1.0, 0.04, 0.0)
        };
        let opts = DynamicsOptions {
            drive_coupling: DriveCoupling::SqrtGammaM,
            ..Default::default()
        };
        let traj = integrate_with(&p, &StateVector::seed(), 100.0, 1e-10, &opts).unwrap();
        let expected = Complex64::new(0.0, -p.gamma_m.sqrt()) / (p.kappa / 2.0);
        assert!(rel(traj.last().alpha_1, expected) < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = free(1.0, 0.0, 0.0);
        let x0 = StateVector::seed();
        assert!(matches!(
            integrate(&p, &x0, 0.0, 1e-8),
            Err(DynamicsError::InvalidInput { .. })
        ));
        assert!(matches!(
            integrate(&p, &x0, 1.0, 1e-13),
            Err(DynamicsError::InvalidInput { .. })
        ));
        assert!(matches!(
            integrate(&p, &x0, 1.0, 1e-3),
            Err(DynamicsError::InvalidInput { .. })
        ));
        let mut bad = x0;
        bad.beta_2 = Complex64::new(f64::NAN, 0.0);
        assert!(integrate(&p, &bad, 1.0, 1e-8).is_err());
        assert!(integrate(&free(-1.0, 0.0, 0.0), &x0, 1.0, 1e-8).is_err());
    }

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

    fn max_rel_diff(a: &StateVector, b: &StateVector) -> f64 {
        let scale = a.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max);
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn step_halving_consistency() {
        let cases = [
            (
                free(1.0, 1e-2, 0.05),
                single(Complex64::new(1.0, 0.0)),
                200.0,
            ),
            (driven(), StateVector::seed(), 100.0),
        ];
        for (p, x0, t_end) in cases {
            for tol in [1e-6, 1e-8, 1e-10] {
                let coarse = integrate(&p, &x0, t_end, tol).unwrap();
                let fine = integrate(&p, &x0, t_end, tol / 10.0).unwrap();
                let d = max_rel_diff(fine.last(), coarse.last());
                assert!(d < 10.0 * tol, "tol {tol}: {d}");
            }
        }
    }

    #[test]
    fn rotating_frame_covariance() {
        // With g = 0 and no drive, shifting w_r and every detuning by theta
        // multiplies beta by exp(-i theta t) and alpha by exp(+i theta t).
        let theta = 0.3;
        let base = SystemParams {
            kappa: 0.2,
            delta1: -0.4,
            delta2: 0.6,
            ..free(1.0, 0.01, 0.05)
        };
        let shifted = SystemParams {
            omega_r: base.omega_r + theta,
            delta1: base.delta1 + theta,
            delta2: base.delta2 + theta,
            ..base
        };
        let x0 = StateVector {
            alpha_1: Complex64::new(0.5, 0.1),
            alpha_2: Complex64::new(-0.2, 0.3),
            ..single(Complex64::new(1.0, 0.0))
        };
        let tol = 1e-10;
        let t_end = 50.0;
        let opts = DynamicsOptions {
            samples_per_period: 1.0,
            ..Default::default()
        };
        let a = integrate_with(&base, &x0, t_end, tol, &opts).unwrap();
        let b = integrate_with(&shifted, &x0, t_end, tol, &opts).unwrap();
        let (sa, sb) = (a.last(), b.last());
        let rot = Complex64::from_polar(1.0, theta * t_end);
        let back = StateVector {
            alpha_1: sb.alpha_1 / rot,
            alpha_2: sb.alpha_2 / rot,
            beta_1: sb.beta_1 * rot,
            beta_2: sb.beta_2 * rot,
            t: sb.t,
        };
        assert!(max_rel_diff(sa, &back) < 10.0 * tol);
    }

    #[test]
    fn norm_conserved_without_loss() {
        let p = free(1.0, 0.0, 0.03);
        let t_end = 1e3 * std::f64::consts::TAU;
        let traj = integrate(
            &p,
            &StateVector {
                beta_2: Complex64::new(0.0, 0.4),
                ..single(Complex64::new(1.0, 0.0))
            },
            t_end,
            1e-10,
        )
        .unwrap();
        let n0 = 1.0 + 0.16;
        for s in traj.samples() {
            let n = s.beta_1.norm_sqr() + s.beta_2.norm_sqr();
            assert!((n / n0 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_export_columns() {
        let traj = integrate(&free(1.0, 0.0, 0.0), &StateVector::seed(), 1.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 9);
        assert_eq!(lines.count(), traj.samples().len());
    }
}
