//! Optical spring and optical damping from the limit-cycle ansatz.
//!
//! With the mechanical motion written as `beta_j(t) = beta_bar_j + A_j e^{-i w_lock t}`,
//! radiation pressure shifts the mechanical frequency by
//!
//! ```text
//! dw_j = -(2 kappa (g a_in)^2 / (w_lock zeta_j)) Re sum_n J_{n+1}(-zeta_j) J_n(-zeta_j) / (conj(h_{n+1}) h_n)
//! ```
//!
//! and adds the damping
//!
//! ```text
//! gamma_opt_j = (2 (kappa g a_in)^2 / zeta_j) sum_n J_{n+1}(-zeta_j) J_n(-zeta_j) / |conj(h_{n+1}) h_n|^2
//! ```
//!
//! where `zeta_j = 2 g Re(A_j) / w_lock`, `D_j = delta_j + 2 g Re(beta_bar_j)` and
//! `h_n = i(n w_lock - D_j) + kappa/2`. The two prefactors carry different
//! powers of `kappa`; [`KappaPower`] selects between that form and `kappa^2`
//! in both.

mod bessel;

pub use bessel::{bessel_j, BesselError, MAX_ARGUMENT, MAX_ORDER};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{Mode, SystemParams};

/// Below this `|zeta|` the series is replaced by its analytic `zeta -> 0` limit.
pub const SMALL_ZETA: f64 = 1e-30;

/// Bessel magnitude below which the truncation order is reached.
const TRUNCATION_THRESHOLD: f64 = 1e-16;
const GUARD_TERMS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackactionError {
    #[error("invalid input `{field}` = {value}: {requirement}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("drive amplitude must be positive to extract a damping coefficient")]
    ZeroDrive,
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

/// Limit-cycle parameters `(beta_bar_j, A_j, w_lock)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleAnsatz {
    pub beta_bar: [Complex64; 2],
    pub amplitude: [Complex64; 2],
    pub omega_lock: f64,
}

impl LimitCycleAnsatz {
    pub fn validate(&self) -> Result<(), BackactionError> {
        let parts = [
            ("beta_bar_1", self.beta_bar[0]),
            ("beta_bar_2", self.beta_bar[1]),
            ("A_1", self.amplitude[0]),
            ("A_2", self.amplitude[1]),
        ];
        for (field, z) in parts {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(BackactionError::InvalidInput {
                    field,
                    value: if z.re.is_finite() { z.im } else { z.re },
                    requirement: "must be finite",
                });
            }
        }
        if !(self.omega_lock.is_finite() && self.omega_lock > 0.0) {
            return Err(BackactionError::InvalidInput {
                field: "omega_lock",
                value: self.omega_lock,
                requirement: "must be finite and > 0",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KappaPower {
    /// `kappa` in the spring prefactor, `kappa^2` in the damping prefactor.
    #[default]
    AsPrinted,
    /// `kappa^2` in both prefactors.
    SquaredBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BackactionOptions {
    pub kappa_power: KappaPower,
    /// Terms added on top of the truncation rule (for convergence checks).
    pub extra_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionResult {
    pub delta_omega: f64,
    pub gamma_opt: f64,
    pub zeta: f64,
    pub delta_tilde: f64,
    /// The sum runs over `n = -n_terms ..= n_terms`.
    pub n_terms: usize,
    pub small_zeta_limit: bool,
}

/// `J_k(y)` for all `k` in `-(n+1) ..= n+1`, indexed by `k + n + 1`.
struct SignedBessel {
    offset: i64,
    values: Vec<f64>,
}

impl SignedBessel {
    fn new(n: usize, y: f64) -> Self {
        let positive = bessel::bessel_j_sequence(n + 1, y.abs());
        let offset = n as i64 + 1;
        let values = (-offset..=offset)
            .map(|k| {
                let m = k.unsigned_abs() as usize;
                let mut v = positive[m];
                let odd = m % 2 == 1;
                if k < 0 && odd {
                    v = -v;
                }
                if y < 0.0 && odd {
                    v = -v;
                }
                v
            })
            .collect();
        SignedBessel { offset, values }
    }

    fn get(&self, k: i64) -> f64 {
        self.values[(k + self.offset) as usize]
    }
}

/// Smallest `N >= 1` with `|J_N(|zeta|)| < 1e-16`, plus guard terms.
fn truncation_order(zeta: f64) -> usize {
    let az = zeta.abs();
    let mut nmax = (az.ceil() as usize) + 40 + (15.0 * az.cbrt()).ceil() as usize;
    loop {
        let seq = bessel::bessel_j_sequence(nmax, az);
        if let Some(n) = (1..=nmax).find(|&n| seq[n].abs() < TRUNCATION_THRESHOLD) {
            return n + GUARD_TERMS;
        }
        nmax *= 2;
    }
}

fn validate_inputs(p: &SystemParams, ansatz: &LimitCycleAnsatz) -> Result<(), BackactionError> {
    p.validate().map_err(|e| match e {
        crate::spectra::SpectraError::InvalidParameter {
            field,
            value,
            requirement,
        } => BackactionError::InvalidInput {
            field,
            value,
            requirement,
        },
        _ => BackactionError::InvalidInput {
            field: "params",
            value: f64::NAN,
            requirement: "must be valid",
        },
    })?;
    if p.kappa <= 0.0 {
        return Err(BackactionError::InvalidInput {
            field: "kappa",
            value: p.kappa,
            requirement: "must be > 0",
        });
    }
    ansatz.validate()
}

/// Sum of `J_{n+1} J_n / (conj(h_{n+1}) h_n)` and of `J_{n+1} J_n / |conj(h_{n+1}) h_n|^2`
/// for `n = -order ..= order`, with the Bessel functions evaluated at `-zeta`.
fn series(zeta: f64, order: usize, h: impl Fn(i64) -> Complex64) -> (Complex64, f64) {
    let bessel = SignedBessel::new(order, -zeta);
    let mut spring = Complex64::new(0.0, 0.0);
    let mut damping = 0.0;
    let n = order as i64;
    for k in -n..=n {
        let weight = bessel.get(k + 1) * bessel.get(k);
        if weight == 0.0 {
            continue;
        }
        let denom = h(k + 1).conj() * h(k);
        spring += weight / denom;
        damping += weight / denom.norm_sqr();
    }
    (spring, damping)
}

/// Spring shift and optical damping of mode `mode`.
pub fn evaluate(
    p: &SystemParams,
    ansatz: &LimitCycleAnsatz,
    mode: Mode,
    opts: &BackactionOptions,
) -> Result<BackactionResult, BackactionError> {
    validate_inputs(p, ansatz)?;
    let j = mode.index();
    let w = ansatz.omega_lock;
    let zeta = 2.0 * p.g * ansatz.amplitude[j].re / w;
    let delta_tilde = p.detuning(mode) + 2.0 * p.g * ansatz.beta_bar[j].re;
    let kappa = p.kappa;
    let h = |n: i64| Complex64::new(kappa / 2.0, n as f64 * w - delta_tilde);

    let drive = (p.g * p.alpha_in).powi(2);
    let spring_kappa = match opts.kappa_power {
        KappaPower::AsPrinted => kappa,
        KappaPower::SquaredBoth => kappa * kappa,
    };
    let damping_kappa = kappa * kappa;

    if zeta.abs() > MAX_ARGUMENT {
        return Err(BesselError::OutOfRange {
            order: 0,
            argument: zeta,
        }
        .into());
    }

    if zeta.abs() < SMALL_ZETA {
        // J_{n+1}(-z) J_n(-z) / z -> -1/2 at n = 0 and +1/2 at n = -1.
        let (h_m1, h0, h1) = (h(-1), h(0), h(1));
        let spring = -0.5 / (h1.conj() * h0) + 0.5 / (h0.conj() * h_m1);
        let damping = -0.5 / (h1.conj() * h0).norm_sqr() + 0.5 / (h0.conj() * h_m1).norm_sqr();
        return Ok(BackactionResult {
            delta_omega: -(2.0 * spring_kappa * drive / w) * spring.re,
            gamma_opt: 2.0 * damping_kappa * drive * damping,
            zeta,
            delta_tilde,
            n_terms: 1,
            small_zeta_limit: true,
        });
    }

    let order = truncation_order(zeta) + opts.extra_terms;
    let (spring, damping) = series(zeta, order, h);
    Ok(BackactionResult {
        delta_omega: -(2.0 * spring_kappa * drive / (w * zeta)) * spring.re,
        gamma_opt: (2.0 * damping_kappa * drive / zeta) * damping,
        zeta,
        delta_tilde,
        n_terms: order,
        small_zeta_limit: false,
    })
}

/// Optical spring shift `dw_j` (rad/s).
pub fn spring_shift(
    p: &SystemParams,
    ansatz: &LimitCycleAnsatz,
    mode: Mode,
    opts: &BackactionOptions,
) -> Result<f64, BackactionError> {
    evaluate(p, ansatz, mode, opts).map(|r| r.delta_omega)
}

/// Optical damping `gamma_opt_j` (rad/s); negative values are gain.
pub fn optical_damping(
    p: &SystemParams,
    ansatz: &LimitCycleAnsatz,
    mode: Mode,
    opts: &BackactionOptions,
) -> Result<f64, BackactionError> {
    evaluate(p, ansatz, mode, opts).map(|r| r.gamma_opt)
}

/// How the ansatz is treated when the drive is varied around its nominal value.
pub enum AnsatzPolicy<'a> {
    /// Keep the supplied ansatz for every drive amplitude.
    Held,
    /// Recompute the ansatz for each drive amplitude, e.g. from a simulation.
    Recompute(&'a dyn Fn(f64) -> Result<LimitCycleAnsatz, BackactionError>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub eta: f64,
    /// `(alpha_in, eta)` over the +-20 % drive window.
    pub window: Vec<(f64, f64)>,
    /// `(max - min) / |eta|` over the window, or 0 when all values vanish.
    pub relative_variation: f64,
}

const ETA_WINDOW: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.2];

/// Linear damping coefficient `eta_j = gamma_opt_j / alpha_in^2`, together with
/// its spread across a +-20 % window of drive amplitudes.
pub fn extract_eta(
    p: &SystemParams,
    ansatz: &LimitCycleAnsatz,
    mode: Mode,
    opts: &BackactionOptions,
    policy: AnsatzPolicy<'_>,
) -> Result<EtaEstimate, BackactionError> {
    if !(p.alpha_in > 0.0) {
        return Err(BackactionError::ZeroDrive);
    }
    let eta = optical_damping(p, ansatz, mode, opts)? / (p.alpha_in * p.alpha_in);
    let mut window = Vec::with_capacity(ETA_WINDOW.len());
    for factor in ETA_WINDOW {
        let alpha = p.alpha_in * factor;
        let local = match &policy {
            AnsatzPolicy::Held => *ansatz,
            AnsatzPolicy::Recompute(f) => f(alpha)?,
        };
        let shifted = SystemParams {
            alpha_in: alpha,
            ..*p
        };
        let gamma = optical_damping(&shifted, &local, mode, opts)?;
        window.push((alpha, gamma / (alpha * alpha)));
    }
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, e)| {
            (lo.min(e), hi.max(e))
        });
    let relative_variation = if eta == 0.0 && lo == 0.0 && hi == 0.0 {
        0.0
    } else {
        (hi - lo) / eta.abs()
    };
    Ok(EtaEstimate {
        eta,
        window,
        relative_variation,
    })
}
