//! Cross-check of simulated supermode decay/growth against the effective
//! Hamiltonian.
//!
//! The mechanical amplitudes are projected onto the right eigenvectors of
//! `H_eff`. A supermode with eigenvalue `tau` evolves as `exp(-i tau t)`, so
//! its amplitude grows at rate `Im(tau)` (field convention) and its energy at
//! `2 Im(tau)`. Rates are fitted to `ln|c(t)|` by linear least squares.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Trajectory};
use crate::spectra::{eigenvalues_general, SupermodeSpectrum};

pub const MIN_R_SQUARED: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupermodeRate {
    /// Predicted eigenvalue.
    pub tau: Complex64,
    /// Fitted `d ln|c| / dt` (field amplitude convention).
    pub fitted_rate: f64,
    /// Fitted `-d arg(c) / dt`, to compare with `Re(tau)`.
    pub fitted_frequency: f64,
    pub r_squared: f64,
    /// `|fitted_rate - Im(tau)| / |Im(tau)|`; infinite when `Im(tau) = 0`
    /// and the fit is non-zero.
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheckReport {
    pub spectrum: SupermodeSpectrum,
    pub plus: SupermodeRate,
    pub minus: SupermodeRate,
    /// Describes the rate convention used in this report.
    pub convention: String,
}

impl RateCheckReport {
    /// Energy decay/growth rates `2 * fitted_rate` for (plus, minus).
    pub fn energy_rates(&self) -> (f64, f64) {
        (2.0 * self.plus.fitted_rate, 2.0 * self.minus.fitted_rate)
    }
}

/// Fits the supermode rates of `traj` and compares them with the spectrum of
/// `p.effective_modes()`.
///
/// The static mechanical offset `beta_s = g M^-1 |alpha|^2` driven by the
/// radiation pressure, where `M` is the bare mechanical matrix, is subtracted
/// sample by sample before projecting.
pub fn effective_rate_check(
    p: &crate::spectra::SystemParams,
    traj: &Trajectory,
) -> Result<RateCheckReport, DynamicsError> {
    p.validate()?;
    let eff = p.effective_modes();
    let spectrum = eigenvalues_general(&eff)?;
    let h = eff.matrix();
    let v_plus = eigenvector(&h, spectrum.tau_plus, [1.0, 0.0]);
    let v_minus = eigenvector(&h, spectrum.tau_minus, [0.0, 1.0]);
    // Columns of V are the eigenvectors; invert the 2x2 matrix.
    let det = v_plus[0] * v_minus[1] - v_minus[0] * v_plus[1];
    let det = if det.norm() > 1e-12 {
        det
    } else {
        Complex64::new(1.0, 0.0)
    };
    let inv = [
        [v_minus[1] / det, -v_minus[0] / det],
        [-v_plus[1] / det, v_plus[0] / det],
    ];

    let mech_diag = Complex64::new(p.omega_r, -p.gamma_m / 2.0);
    let mech_det = mech_diag * mech_diag - p.epsilon * p.epsilon;

    let mut times = Vec::with_capacity(traj.samples().len());
    let mut plus = Vec::with_capacity(times.capacity());
    let mut minus = Vec::with_capacity(times.capacity());
    for s in traj.samples() {
        let f = [p.g * s.alpha_1.norm_sqr(), p.g * s.alpha_2.norm_sqr()];
        let (b1, b2) = if p.g != 0.0 {
            let o1 = (mech_diag * f[0] + p.epsilon * f[1]) / mech_det;
            let o2 = (p.epsilon * f[0] + mech_diag * f[1]) / mech_det;
            (s.beta_1 - o1, s.beta_2 - o2)
        } else {
            (s.beta_1, s.beta_2)
        };
        times.push(s.t);
        plus.push(inv[0][0] * b1 + inv[0][1] * b2);
        minus.push(inv[1][0] * b1 + inv[1][1] * b2);
    }

    let plus = fit_mode("plus", &times, &plus, spectrum.tau_plus)?;
    let minus = fit_mode("minus", &times, &minus, spectrum.tau_minus)?;
    Ok(RateCheckReport {
        spectrum,
        plus,
        minus,
        convention: "field amplitude: |c| ~ exp(rate t), compared with Im(tau); \
                     energy rates are twice these"
            .into(),
    })
}

/// A null vector of `H - lambda`, falling back to `fallback` when `H` is
/// a multiple of the identity.
fn eigenvector(h: &[[Complex64; 2]; 2], lambda: Complex64, fallback: [f64; 2]) -> [Complex64; 2] {
    let a = h[0][0] - lambda;
    let b = h[0][1];
    let c = h[1][0];
    let d = h[1][1] - lambda;
    let u = [-b, a];
    let w = [d, -c];
    let nu = u[0].norm_sqr() + u[1].norm_sqr();
    let nw = w[0].norm_sqr() + w[1].norm_sqr();
    let (v, n) = if nu >= nw { (u, nu) } else { (w, nw) };
    if n == 0.0 {
        return [
            Complex64::new(fallback[0], 0.0),
            Complex64::new(fallback[1], 0.0),
        ];
    }
    let n = n.sqrt();
    [v[0] / n, v[1] / n]
}

fn fit_mode(
    supermode: &'static str,
    times: &[f64],
    coeffs: &[Complex64],
    tau: Complex64,
) -> Result<SupermodeRate, DynamicsError> {
    let log_mod: Vec<f64> = coeffs.iter().map(|c| c.norm().ln()).collect();
    if log_mod.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::FitFailure {
            supermode,
            r_squared: f64::NAN,
        });
    }
    let mut phase = Vec::with_capacity(coeffs.len());
    let mut acc = 0.0;
    for (k, c) in coeffs.iter().enumerate() {
        if k > 0 {
            acc += (c / coeffs[k - 1]).arg();
        } else {
            acc = c.arg();
        }
        phase.push(acc);
    }
    let (rate, r_squared) = linear_fit(times, &log_mod);
    let (phase_slope, _) = linear_fit(times, &phase);
    if r_squared < MIN_R_SQUARED {
        return Err(DynamicsError::FitFailure {
            supermode,
            r_squared,
        });
    }
    let relative_deviation = if tau.im != 0.0 {
        (rate - tau.im).abs() / tau.im.abs()
    } else if rate == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SupermodeRate {
        tau,
        fitted_rate: rate,
        fitted_frequency: -phase_slope,
        r_squared,
        relative_deviation,
    })
}

/// Slope and coefficient of determination of `y ~ a + b x`.
///
/// A flat series whose residual is at rounding level counts as a perfect fit.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let r_squared = if syy <= (1e-10 * scale).powi(2) * n {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    (slope, r_squared)
}
