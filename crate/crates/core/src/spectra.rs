//! Supermode spectrum of the effective non-Hermitian Hamiltonian.
//!
//! The two mechanical modes obey `i dPsi/dt = H_eff Psi` with
//!
//! ```text
//! H_eff = [ w1 - i g1/2      -eps       ]
//!         [   -eps        w2 - i g2/2   ]
//! ```
//!
//! whose eigenvalues are `tau = (w1+w2)/2 - i(g1+g2)/4 +- sqrt(D)/2` with the
//! discriminant `D = [(w1-w2) + i(g2-g1)/2]^2 + 4 eps^2`. The exceptional point
//! is where `D` vanishes. Square roots are always taken on the principal branch
//! (`Re >= 0`, ties toward `Im >= 0`), so `tau_plus` carries `+sqrt(D)/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::principal_sqrt;

/// Relative tolerance (in units of the mechanical frequency) under which the
/// discriminant is considered zero: `|D| < (EP_TOLERANCE * omega_r)^2`.
pub const EP_TOLERANCE: f64 = 1e-9;

/// Relative cost gap below which a branch matching is considered a tie.
pub const TRACKING_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("parameter `{field}` = {value} must be {requirement}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("eta1 equals eta2: no finite exceptional point exists")]
    DegenerateDamping,
    #[error("branch matching is ambiguous at step {step} (costs {keep:e} vs {swap:e})")]
    AmbiguousTracking { step: usize, keep: f64, swap: f64 },
}

/// Which of the two resonators (or cavities) an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
        }
    }

    /// The coupled partner, `k = 3 - j`.
    pub fn partner(self) -> Mode {
        match self {
            Mode::One => Mode::Two,
            Mode::Two => Mode::One,
        }
    }
}

/// Physical parameters of the two-cavity system.
///
/// Both mechanical resonators share the frequency `omega_r`. The optical
/// damping of mode `j` is modelled as `eta_j * alpha_in^2`, so `eta_j` is
/// dimensionless when `alpha_in` is measured in `(rad/s)^(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_r: f64,
    pub gamma_m: f64,
    pub epsilon: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha_in: f64,
    pub g: f64,
    pub kappa: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl SystemParams {
    /// Parameters for the linear EP model: no optomechanical coupling,
    /// zero detuning and no drive.
    pub fn ep_model(omega_r: f64, gamma_m: f64, epsilon: f64, eta1: f64, eta2: f64) -> Self {
        SystemParams {
            omega_r,
            gamma_m,
            epsilon,
            eta1,
            eta2,
            alpha_in: 0.0,
            g: 0.0,
            kappa: 0.0,
            delta1: 0.0,
            delta2: 0.0,
        }
    }

    pub fn with_drive(mut self, alpha_in: f64) -> Self {
        self.alpha_in = alpha_in;
        self
    }

    pub fn eta(&self, mode: Mode) -> f64 {
        match mode {
            Mode::One => self.eta1,
            Mode::Two => self.eta2,
        }
    }

    pub fn detuning(&self, mode: Mode) -> f64 {
        match mode {
            Mode::One => self.delta1,
            Mode::Two => self.delta2,
        }
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        let fields = [
            ("omega_r", self.omega_r),
            ("gamma_m", self.gamma_m),
            ("epsilon", self.epsilon),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("alpha_in", self.alpha_in),
            ("g", self.g),
            ("kappa", self.kappa),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(SpectraError::InvalidParameter {
                    field,
                    value,
                    requirement: "finite",
                });
            }
        }
        let positive = [("omega_r", self.omega_r)];
        for (field, value) in positive {
            if value <= 0.0 {
                return Err(SpectraError::InvalidParameter {
                    field,
                    value,
                    requirement: "> 0",
                });
            }
        }
        let non_negative = [
            ("gamma_m", self.gamma_m),
            ("epsilon", self.epsilon),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("alpha_in", self.alpha_in),
            ("kappa", self.kappa),
        ];
        for (field, value) in non_negative {
            if value < 0.0 {
                return Err(SpectraError::InvalidParameter {
                    field,
                    value,
                    requirement: ">= 0",
                });
            }
        }
        Ok(())
    }

    /// Drive-induced damping contrast `alpha_in^2 (eta2 - eta1)`.
    pub fn damping_contrast(&self) -> f64 {
        self.alpha_in * self.alpha_in * (self.eta2 - self.eta1)
    }

    /// Effective mode parameters under the linear damping ansatz, neglecting
    /// the optical spring shift.
    pub fn effective_modes(&self) -> EffectiveModeParams {
        let a2 = self.alpha_in * self.alpha_in;
        EffectiveModeParams {
            omega_eff_1: self.omega_r,
            omega_eff_2: self.omega_r,
            gamma_eff_1: self.gamma_m + self.eta1 * a2,
            gamma_eff_2: self.gamma_m + self.eta2 * a2,
            epsilon: self.epsilon,
        }
    }
}

/// Entries of the effective Hamiltonian.
///
/// Dampings may be negative when a mode has net gain; see [`Self::has_gain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModeParams {
    pub omega_eff_1: f64,
    pub omega_eff_2: f64,
    pub gamma_eff_1: f64,
    pub gamma_eff_2: f64,
    pub epsilon: f64,
}

impl EffectiveModeParams {
    pub fn has_gain(&self) -> bool {
        self.gamma_eff_1 < 0.0 || self.gamma_eff_2 < 0.0
    }

    fn validate(&self) -> Result<(), SpectraError> {
        let fields = [
            ("omega_eff_1", self.omega_eff_1),
            ("omega_eff_2", self.omega_eff_2),
            ("gamma_eff_1", self.gamma_eff_1),
            ("gamma_eff_2", self.gamma_eff_2),
            ("epsilon", self.epsilon),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(SpectraError::InvalidParameter {
                    field,
                    value,
                    requirement: "finite",
                });
            }
        }
        Ok(())
    }

    /// Diagonal entries `w_j - i g_j / 2`.
    pub fn diagonal(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.omega_eff_1, -self.gamma_eff_1 / 2.0),
            Complex64::new(self.omega_eff_2, -self.gamma_eff_2 / 2.0),
        )
    }

    /// `H_eff` as a row-major 2x2 array.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let (a, d) = self.diagonal();
        let off = Complex64::new(-self.epsilon, 0.0);
        [[a, off], [off, d]]
    }

    pub fn trace(&self) -> Complex64 {
        let (a, d) = self.diagonal();
        a + d
    }

    pub fn determinant(&self) -> Complex64 {
        let (a, d) = self.diagonal();
        a * d - self.epsilon * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchConvention {
    /// Labels follow the sign of the principal square root.
    PrincipalSqrt,
    /// Labels follow continuity along a parameter sweep.
    Continuity,
}

/// The two complex supermode eigenvalues and their real/imaginary parts.
///
/// `tau = center +- half_split`; `nu = Re(tau)` and `ups = Im(tau)` (negative
/// for lossy modes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupermodeSpectrum {
    pub tau_plus: Complex64,
    pub tau_minus: Complex64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub ups_plus: f64,
    pub ups_minus: f64,
    pub center: Complex64,
    pub half_split: Complex64,
    pub branch_convention: BranchConvention,
}

impl SupermodeSpectrum {
    pub fn from_center_split(center: Complex64, half_split: Complex64) -> Self {
        let tau_plus = center + half_split;
        let tau_minus = center - half_split;
        SupermodeSpectrum {
            tau_plus,
            tau_minus,
            nu_plus: tau_plus.re,
            nu_minus: tau_minus.re,
            ups_plus: tau_plus.im,
            ups_minus: tau_minus.im,
            center,
            half_split,
            branch_convention: BranchConvention::PrincipalSqrt,
        }
    }

    pub fn abs_ups_plus(&self) -> f64 {
        self.ups_plus.abs()
    }

    pub fn abs_ups_minus(&self) -> f64 {
        self.ups_minus.abs()
    }

    /// `|tau_plus - tau_minus|`.
    pub fn gap(&self) -> f64 {
        2.0 * self.half_split.norm()
    }
}

fn check_finite(field: &'static str, value: f64) -> Result<(), SpectraError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(SpectraError::InvalidParameter {
            field,
            value,
            requirement: "finite",
        })
    }
}

/// Discriminant `D = [(w1-w2) + i(g2-g1)/2]^2 + 4 eps^2`.
///
/// Evaluated as `(2 eps + i d)(2 eps - i d)` so that the cancellation near the
/// exceptional point happens in exact real subtractions.
pub fn discriminant(p: &EffectiveModeParams) -> Complex64 {
    let d = Complex64::new(
        p.omega_eff_1 - p.omega_eff_2,
        (p.gamma_eff_2 - p.gamma_eff_1) / 2.0,
    );
    let two_eps = Complex64::new(2.0 * p.epsilon, 0.0);
    let id = Complex64::i() * d;
    (two_eps + id) * (two_eps - id)
}

/// Whether `|D| < (EP_TOLERANCE * omega_scale)^2`.
pub fn is_at_ep(p: &EffectiveModeParams, omega_scale: f64) -> bool {
    discriminant(p).norm() < (EP_TOLERANCE * omega_scale).powi(2)
}

/// Eigenvalues of a general effective Hamiltonian.
pub fn eigenvalues_general(p: &EffectiveModeParams) -> Result<SupermodeSpectrum, SpectraError> {
    p.validate()?;
    let center = Complex64::new(
        (p.omega_eff_1 + p.omega_eff_2) / 2.0,
        -(p.gamma_eff_1 + p.gamma_eff_2) / 4.0,
    );
    let half = principal_sqrt(discriminant(p)) / 2.0;
    Ok(SupermodeSpectrum::from_center_split(center, half))
}

/// Eigenvalues under the degenerate-resonator, linear-damping model:
///
/// `tau = w_r - i(2 gamma_m + (eta1+eta2) alpha^2)/4 +- sqrt(eps^2 - alpha^4 (eta2-eta1)^2/16)`.
///
/// The radicand is real; it is positive below the EP (real split) and negative
/// above it (imaginary split).
pub fn eigenvalues_degenerate(p: &SystemParams) -> Result<SupermodeSpectrum, SpectraError> {
    p.validate()?;
    let a2 = p.alpha_in * p.alpha_in;
    let center = Complex64::new(p.omega_r, -(2.0 * p.gamma_m + (p.eta1 + p.eta2) * a2) / 4.0);
    let quarter_contrast = (p.damping_contrast() / 4.0).abs();
    let radicand = (p.epsilon - quarter_contrast) * (p.epsilon + quarter_contrast);
    let half = principal_sqrt(Complex64::new(radicand, 0.0));
    Ok(SupermodeSpectrum::from_center_split(center, half))
}

/// Drive amplitude at which the degenerate model hits its EP:
/// `alpha_EP = sqrt(4 eps / |eta2 - eta1|)`.
pub fn ep_drive_amplitude(p: &SystemParams) -> Result<f64, SpectraError> {
    check_finite("epsilon", p.epsilon)?;
    check_finite("eta1", p.eta1)?;
    check_finite("eta2", p.eta2)?;
    if p.epsilon < 0.0 {
        return Err(SpectraError::InvalidParameter {
            field: "epsilon",
            value: p.epsilon,
            requirement: ">= 0",
        });
    }
    let contrast = (p.eta2 - p.eta1).abs();
    if contrast == 0.0 {
        return Err(SpectraError::DegenerateDamping);
    }
    Ok((4.0 * p.epsilon / contrast).sqrt())
}

/// Kind of label change recorded by [`track_spectra`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReorderKind {
    /// The step passes through (or lands on) a branch point, where no
    /// matching is preferred; labels are carried over unchanged.
    BranchPoint,
    /// Continuity pairs the current `tau_plus` with the previous `tau_minus`
    /// curve (or vice versa).
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorderingEvent {
    /// Index of the later sample of the step `step - 1 -> step`.
    pub step: usize,
    pub kind: ReorderKind,
}

/// Two eigenvalue curves labelled by continuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTracks {
    pub branch_a: Vec<Complex64>,
    pub branch_b: Vec<Complex64>,
    /// Per sample, whether `branch_a` holds the principal `tau_plus`.
    pub a_is_plus: Vec<bool>,
    pub events: Vec<ReorderingEvent>,
}

/// Track the eigenvalues of a parameter sweep through continuity.
pub fn track_branches(sweep: &[EffectiveModeParams]) -> Result<BranchTracks, SpectraError> {
    let spectra = sweep
        .iter()
        .map(eigenvalues_general)
        .collect::<Result<Vec<_>, _>>()?;
    track_spectra(&spectra)
}

/// Continuity labelling of precomputed spectra.
///
/// Consecutive samples are matched by minimal total displacement. A step is
/// undecidable when the smaller eigenvalue gap at its ends does not exceed the
/// displacement, or when both matchings cost the same to
/// [`TRACKING_TIE_TOLERANCE`]. An undecidable step touching a local minimum of
/// the gap is a branch-point crossing: labels are carried over unchanged and
/// a run of such steps is reported as one [`ReorderKind::BranchPoint`] event.
/// Undecidable steps anywhere else mean the sweep is too coarse.
pub fn track_spectra(spectra: &[SupermodeSpectrum]) -> Result<BranchTracks, SpectraError> {
    let n = spectra.len();
    let mut tracks = BranchTracks {
        branch_a: Vec::with_capacity(n),
        branch_b: Vec::with_capacity(n),
        a_is_plus: Vec::with_capacity(n),
        events: Vec::new(),
    };
    let Some(first) = spectra.first() else {
        return Ok(tracks);
    };
    let gaps: Vec<f64> = spectra.iter().map(SupermodeSpectrum::gap).collect();
    let is_gap_minimum = |m: usize| {
        let left = if m > 0 { Some(gaps[m - 1]) } else { None };
        let right = gaps.get(m + 1).copied();
        let not_above = left.map_or(true, |l| gaps[m] <= l) && right.map_or(true, |r| gaps[m] <= r);
        let below_one = left.map_or(false, |l| gaps[m] < l) || right.map_or(false, |r| gaps[m] < r);
        not_above && below_one
    };

    tracks.branch_a.push(first.tau_plus);
    tracks.branch_b.push(first.tau_minus);
    tracks.a_is_plus.push(true);

    let mut a_is_plus = true;
    let mut in_branch_point = false;
    for (k, s) in spectra.iter().enumerate().skip(1) {
        let prev_a = tracks.branch_a[k - 1];
        let prev_b = tracks.branch_b[k - 1];
        let keep = (prev_a - s.tau_plus).norm() + (prev_b - s.tau_minus).norm();
        let swap = (prev_a - s.tau_minus).norm() + (prev_b - s.tau_plus).norm();
        let movement = keep.min(swap);
        let scale = keep.max(swap);
        let undecidable = scale > 0.0
            && (gaps[k - 1].min(gaps[k]) <= movement
                || (keep - swap).abs() <= TRACKING_TIE_TOLERANCE * scale);

        if undecidable {
            if !(is_gap_minimum(k - 1) || is_gap_minimum(k)) {
                return Err(SpectraError::AmbiguousTracking {
                    step: k,
                    keep,
                    swap,
                });
            }
            if !in_branch_point {
                tracks.events.push(ReorderingEvent {
                    step: k,
                    kind: ReorderKind::BranchPoint,
                });
            }
            in_branch_point = true;
        } else {
            in_branch_point = false;
            if scale > 0.0 {
                let next_a_is_plus = keep < swap;
                if next_a_is_plus != a_is_plus {
                    tracks.events.push(ReorderingEvent {
                        step: k,
                        kind: ReorderKind::Swap,
                    });
                }
                a_is_plus = next_a_is_plus;
            }
        }

        let (a, b) = if a_is_plus {
            (s.tau_plus, s.tau_minus)
        } else {
            (s.tau_minus, s.tau_plus)
        };
        tracks.branch_a.push(a);
        tracks.branch_b.push(b);
        tracks.a_is_plus.push(a_is_plus);
    }
    Ok(tracks)
}
