//! Source-mass frequency shifts and their enhancement at the EP.
//!
//! A sphere of mass `M` at distance `a_j` from membrane `j` shifts its
//! frequency by `dw_j = -G M / (w_j a_j^3)`. Only membrane 2 is taken to be
//! perturbed (`a_1 >> a_2`), which moves the supermode eigenvalues to
//!
//! ```text
//! tau'_pm = w_r + dw/2 - i(2 g_m + a^2 (e1+e2))/4 +- sqrt([-dw + i a^2 (e2-e1)/2]^2 + 4 eps^2)/2
//! ```
//!
//! and the observable is `dnu_pm = Re(tau'_pm) - Re(tau_pm)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{principal_sqrt, root_difference};
use crate::spectra::{eigenvalues_degenerate, SpectraError, SupermodeSpectrum, SystemParams};

/// CODATA-2014 recommended Newtonian constant (m^3 kg^-1 s^-2).
pub const G_CODATA_2014: f64 = 6.67408e-11;
/// Its standard uncertainty.
pub const G_CODATA_2014_SIGMA: f64 = 3.1e-15;

/// Search bracket for [`invert_g`] (m^3 kg^-1 s^-2).
pub const G_BRACKET: (f64, f64) = (1e-13, 1e-8);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GravityError {
    #[error("input `{field}` = {value} must be {requirement}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("shift {shift:e} rad/s is outside [{lo:e}, {hi:e}], the image of the G bracket")]
    NoBracket { shift: f64, lo: f64, hi: f64 },
    #[error("shift is not increasing across the G bracket ({lo:e} >= {hi:e})")]
    NonMonotone { lo: f64, hi: f64 },
}

impl From<SpectraError> for GravityError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::InvalidParameter {
                field,
                value,
                requirement,
            } => GravityError::InvalidInput {
                field,
                value,
                requirement,
            },
            _ => GravityError::InvalidInput {
                field: "params",
                value: f64::NAN,
                requirement: "valid",
            },
        }
    }
}

fn require(
    field: &'static str,
    value: f64,
    ok: bool,
    requirement: &'static str,
) -> Result<(), GravityError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(GravityError::InvalidInput {
            field,
            value,
            requirement,
        })
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), GravityError> {
    require(field, value, value > 0.0, "> 0 and finite")
}

/// Uniform source sphere and the two membranes it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSphere {
    /// Density (kg/m^3).
    pub rho: f64,
    /// Radius (m).
    pub radius: f64,
    /// Centre-to-membrane distances (m).
    pub a1: f64,
    pub a2: f64,
    /// Membrane masses (kg).
    pub m1: f64,
    pub m2: f64,
}

impl SourceSphere {
    pub fn new(
        rho: f64,
        radius: f64,
        a1: f64,
        a2: f64,
        m1: f64,
        m2: f64,
    ) -> Result<Self, GravityError> {
        let s = SourceSphere {
            rho,
            radius,
            a1,
            a2,
            m1,
            m2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), GravityError> {
        positive("rho", self.rho)?;
        positive("radius", self.radius)?;
        require("a1", self.a1, self.a1 >= self.radius, ">= radius")?;
        require("a2", self.a2, self.a2 >= self.radius, ">= radius")?;
        positive("m1", self.m1)?;
        positive("m2", self.m2)
    }

    /// `M = (4/3) pi R^3 rho`.
    pub fn mass(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3) * self.rho
    }

    /// Distance to membrane `j` (1 or 2).
    pub fn distance(&self, j: usize) -> f64 {
        if j == 1 {
            self.a1
        } else {
            self.a2
        }
    }

    pub fn membrane_mass(&self, j: usize) -> f64 {
        if j == 1 {
            self.m1
        } else {
            self.m2
        }
    }
}

fn check_membrane(j: usize) -> Result<(), GravityError> {
    require("j", j as f64, j == 1 || j == 2, "1 or 2")
}

/// `F = G M m_j / a_j^2` (N).
pub fn gravitational_force(s: &SourceSphere, j: usize, big_g: f64) -> Result<f64, GravityError> {
    s.validate()?;
    check_membrane(j)?;
    positive("G", big_g)?;
    let a = s.distance(j);
    Ok(big_g * s.mass() * s.membrane_mass(j) / (a * a))
}

/// `dw_j = -G M / (w_j a_j^3)` (rad/s).
pub fn frequency_shift(
    s: &SourceSphere,
    omega_j: f64,
    j: usize,
    big_g: f64,
) -> Result<f64, GravityError> {
    s.validate()?;
    check_membrane(j)?;
    positive("omega_j", omega_j)?;
    positive("G", big_g)?;
    let a = s.distance(j);
    Ok(-big_g * s.mass() / (omega_j * a * a * a))
}

/// The same shift from the force gradient, `dw_j = w_j (dF/da_j) / (2 m_j w_j^2)`.
pub fn frequency_shift_from_gradient(
    s: &SourceSphere,
    omega_j: f64,
    j: usize,
    big_g: f64,
) -> Result<f64, GravityError> {
    let force = gravitational_force(s, j, big_g)?;
    positive("omega_j", omega_j)?;
    let gradient = -2.0 * force / s.distance(j);
    Ok(gradient / (2.0 * s.membrane_mass(j) * omega_j))
}

/// `|dw_1| / |dw_2| = (a_2/a_1)^3` for equal membrane frequencies, the error
/// made by neglecting the shift of membrane 1.
pub fn hierarchy_bound(s: &SourceSphere) -> f64 {
    (s.a2 / s.a1).powi(3)
}

/// Perturbed eigenvalues and the resulting eigenfrequency shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedSpectrum {
    pub unperturbed: SupermodeSpectrum,
    pub tau_p_plus: Complex64,
    pub tau_p_minus: Complex64,
    pub dnu_plus: f64,
    pub dnu_minus: f64,
    pub delta_omega: f64,
}

/// Eigenvalues of the degenerate model with membrane 2 shifted by
/// `delta_omega`, paired `+` with `+` on the principal branch.
///
/// The shifts are formed relative to the common centre `w_r`, and the
/// difference of the two square roots is taken in the ratio form, so they
/// stay accurate when `|dw| << w_r`.
pub fn perturbed_eigenvalues(
    p: &SystemParams,
    delta_omega: f64,
) -> Result<PerturbedSpectrum, GravityError> {
    let unperturbed = eigenvalues_degenerate(p)?;
    require(
        "delta_omega",
        delta_omega,
        delta_omega.abs() < p.omega_r,
        "finite with |delta_omega| < omega_r",
    )?;
    let contrast = p.damping_contrast(); // a^2 (e2 - e1)
    let two_eps = Complex64::new(2.0 * p.epsilon, 0.0);
    let i = Complex64::i();
    let d = Complex64::new(0.0, contrast / 2.0);
    let d_p = Complex64::new(-delta_omega, contrast / 2.0);
    // Quarter discriminants, each factored so cancellation stays exact.
    let q = (two_eps + i * d) * (two_eps - i * d) / 4.0;
    let q_p = (two_eps + i * d_p) * (two_eps - i * d_p) / 4.0;
    let s = principal_sqrt(q);
    let s_p = principal_sqrt(q_p);
    let square_diff = Complex64::new(delta_omega * delta_omega, -delta_omega * contrast) / 4.0;
    let split_shift = root_difference(s_p, s, square_diff);

    let centre_p = unperturbed.center + delta_omega / 2.0;
    let tau_p_plus = centre_p + s_p;
    let tau_p_minus = centre_p - s_p;
    Ok(PerturbedSpectrum {
        unperturbed,
        tau_p_plus,
        tau_p_minus,
        dnu_plus: delta_omega / 2.0 + split_shift.re,
        dnu_minus: delta_omega / 2.0 - split_shift.re,
        delta_omega,
    })
}

/// Closed-form shifts
/// `dnu_pm = Re(dw/2 +- sqrt(R + (dw^2 - i dw a^2 (e2-e1))/4) -+ sqrt(R))`
/// with `R = eps^2 - a^4 (e2-e1)^2 / 16`.
pub fn shift_closed_form(p: &SystemParams, delta_omega: f64) -> Result<(f64, f64), GravityError> {
    p.validate()?;
    require("delta_omega", delta_omega, true, "finite")?;
    let contrast = p.damping_contrast();
    let quarter = contrast.abs() / 4.0;
    let r = (p.epsilon - quarter) * (p.epsilon + quarter);
    let extra = Complex64::new(delta_omega * delta_omega, -delta_omega * contrast) / 4.0;
    let s = principal_sqrt(Complex64::new(r, 0.0));
    let s_p = principal_sqrt(Complex64::new(r, 0.0) + extra);
    let diff = root_difference(s_p, s, extra).re;
    Ok((delta_omega / 2.0 + diff, delta_omega / 2.0 - diff))
}

/// `sqrt((1 + sqrt(1 + r^2)) / 2)`, the enhancement factor shared by the EP
/// formulas.
fn enhancement(r: f64) -> f64 {
    ((1.0 + 1f64.hypot(r)) / 2.0).sqrt()
}

/// Shifts at the EP: `dnu_pm = (dw/2)(1 -+ K)` with
/// `K = sqrt((1 + sqrt(1 + 16 eps^2/dw^2))/2)`.
///
/// `dnu_minus` is the enhanced branch. For `dw < 0`, the physical case of an
/// attracting source, this agrees with [`perturbed_eigenvalues`]; for
/// `dw > 0` the principal-branch labels of that function are swapped relative
/// to this one.
pub fn shift_at_ep(epsilon: f64, delta_omega: f64) -> Result<(f64, f64), GravityError> {
    require("epsilon", epsilon, epsilon >= 0.0, ">= 0 and finite")?;
    require("delta_omega", delta_omega, true, "finite")?;
    if delta_omega == 0.0 {
        return Ok((0.0, 0.0));
    }
    let k = enhancement(4.0 * epsilon / delta_omega.abs());
    Ok((delta_omega / 2.0 * (1.0 - k), delta_omega / 2.0 * (1.0 + k)))
}

/// `|dnu_minus|` in the contact limit `a_2 = R`:
/// `(2 pi G rho / 3 w_r) (1 + K(3 eps w_r / (G pi rho)))`.
pub fn shift_magnitude_vs_g(
    big_g: f64,
    rho: f64,
    omega_r: f64,
    epsilon: f64,
) -> Result<f64, GravityError> {
    positive("G", big_g)?;
    positive("rho", rho)?;
    positive("omega_r", omega_r)?;
    require("epsilon", epsilon, epsilon >= 0.0, ">= 0 and finite")?;
    let pi = std::f64::consts::PI;
    let base = 2.0 * pi * big_g * rho / (3.0 * omega_r);
    let r = 3.0 * epsilon * omega_r / (big_g * pi * rho);
    Ok(base * (1.0 + enhancement(r)))
}

/// `|dnu_minus|` for a sphere of mass `M` at distance `a_2`:
/// `(G M / 2 w_r a_2^3) (1 + K(4 eps w_r a_2^3 / (G M)))`.
pub fn shift_magnitude_pre_contact(
    big_g: f64,
    mass: f64,
    a2: f64,
    omega_r: f64,
    epsilon: f64,
) -> Result<f64, GravityError> {
    positive("G", big_g)?;
    positive("mass", mass)?;
    positive("a2", a2)?;
    positive("omega_r", omega_r)?;
    require("epsilon", epsilon, epsilon >= 0.0, ">= 0 and finite")?;
    let a3 = a2 * a2 * a2;
    let base = big_g * mass / (2.0 * omega_r * a3);
    let r = 4.0 * epsilon * omega_r * a3 / (big_g * mass);
    Ok(base * (1.0 + enhancement(r)))
}

/// `d|dnu_minus|/dG` of [`shift_magnitude_vs_g`].
pub fn shift_magnitude_derivative(
    big_g: f64,
    rho: f64,
    omega_r: f64,
    epsilon: f64,
) -> Result<f64, GravityError> {
    positive("G", big_g)?;
    positive("rho", rho)?;
    positive("omega_r", omega_r)?;
    require("epsilon", epsilon, epsilon >= 0.0, ">= 0 and finite")?;
    let pi = std::f64::consts::PI;
    let slope = 2.0 * pi * rho / (3.0 * omega_r);
    let r = 3.0 * epsilon * omega_r / (big_g * pi * rho);
    let u = 1f64.hypot(r);
    let k = enhancement(r);
    Ok(slope * ((1.0 + k) - r * r / (4.0 * k * u)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub big_g: f64,
    pub sigma_g: f64,
    /// `d|dnu_minus|/dG` at the solution.
    pub derivative: f64,
    pub bisection_steps: usize,
    pub newton_steps: usize,
}

const BISECTION_TOLERANCE: f64 = 1e-6;
const NEWTON_TOLERANCE: f64 = 1e-14;
const MAX_NEWTON_STEPS: usize = 50;

/// Solves `shift_magnitude_vs_g(G) = measured_shift` for `G` on
/// [`G_BRACKET`], propagating `sigma_shift` to `sigma_G` through the analytic
/// derivative.
pub fn invert_g(
    measured_shift: f64,
    sigma_shift: f64,
    rho: f64,
    omega_r: f64,
    epsilon: f64,
) -> Result<GEstimate, GravityError> {
    require(
        "measured_shift",
        measured_shift,
        measured_shift >= 0.0,
        ">= 0 and finite",
    )?;
    require(
        "sigma_shift",
        sigma_shift,
        sigma_shift >= 0.0,
        ">= 0 and finite",
    )?;
    let f = |g: f64| shift_magnitude_vs_g(g, rho, omega_r, epsilon);
    let (mut lo, mut hi) = G_BRACKET;
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo >= f_hi {
        return Err(GravityError::NonMonotone { lo: f_lo, hi: f_hi });
    }
    if !(f_lo..=f_hi).contains(&measured_shift) {
        return Err(GravityError::NoBracket {
            shift: measured_shift,
            lo: f_lo,
            hi: f_hi,
        });
    }

    let mut bisection_steps = 0;
    while hi / lo - 1.0 > BISECTION_TOLERANCE {
        let mid = (lo * hi).sqrt();
        if f(mid)? < measured_shift {
            lo = mid;
        } else {
            hi = mid;
        }
        bisection_steps += 1;
    }

    let mut g = (lo * hi).sqrt();
    let mut newton_steps = 0;
    while newton_steps < MAX_NEWTON_STEPS {
        let step = (f(g)? - measured_shift) / shift_magnitude_derivative(g, rho, omega_r, epsilon)?;
        let next = (g - step).clamp(lo, hi);
        newton_steps += 1;
        let converged = (next - g).abs() <= NEWTON_TOLERANCE * g;
        g = next;
        if converged {
            break;
        }
    }

    let derivative = shift_magnitude_derivative(g, rho, omega_r, epsilon)?;
    Ok(GEstimate {
        big_g: g,
        sigma_g: sigma_shift / derivative.abs(),
        derivative,
        bisection_steps,
        newton_steps,
    })
}
