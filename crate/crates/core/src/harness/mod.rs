//! Deterministic studies over the model with CSV/JSON export.
//!
//! Parameters of the three reference cases are quoted in units of the
//! mechanical frequency, so every study here runs with `omega_r = 1` and
//! drive amplitudes in `omega_r^(1/2)`.

mod export;
mod studies;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gravity::GravityError;
use crate::numeric::linspace;
use crate::spectra::{ep_drive_amplitude, SpectraError, SystemParams};

pub use export::{
    export_coalescence, export_g_curves, export_gamma, export_shift_sweep, run_figures,
    write_atomic, FigureOutputs, FiguresConfig,
};
pub use studies::{
    gravity_report, run_coalescence, run_g_curves, run_gamma_study, run_gamma_study_on,
    run_shift_sweep, Extremum, GCurveRow, GCurves, GammaEntry, GammaReport, GravityReport,
    SweepResult, SweepRow, DENSITY_PRESETS,
};

/// Relative agreement required between a stored and a recomputed EP amplitude.
pub const CASE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("grid [{lo}, {hi}] with {points} points does not span alpha_ep = {alpha_ep}")]
    GridMiss {
        alpha_ep: f64,
        lo: f64,
        hi: f64,
        points: usize,
    },
    #[error("input `{field}` = {value} must be {requirement}")]
    InvalidInput {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Gravity(#[from] GravityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseName {
    X,
    Y,
    Z,
    #[serde(rename = "custom")]
    Custom,
}

impl CaseName {
    pub fn label(self) -> &'static str {
        match self {
            CaseName::X => "X",
            CaseName::Y => "Y",
            CaseName::Z => "Z",
            CaseName::Custom => "custom",
        }
    }
}

impl std::str::FromStr for CaseName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" | "x" => Ok(CaseName::X),
            "Y" | "y" => Ok(CaseName::Y),
            "Z" | "z" => Ok(CaseName::Z),
            "custom" => Ok(CaseName::Custom),
            other => Err(format!(
                "unknown case `{other}` (expected X, Y, Z or custom)"
            )),
        }
    }
}

/// Damping-contrast model parameters in units of `omega_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseDefinition {
    pub name: CaseName,
    pub eta1: f64,
    pub eta2: f64,
    pub epsilon: f64,
    pub gamma_m: f64,
    /// EP drive amplitude in `omega_r^(1/2)`.
    pub alpha_ep: f64,
}

impl CaseDefinition {
    /// One of the three reference cases, with its quoted EP amplitude checked
    /// against the closed form.
    pub fn preset(name: CaseName) -> Result<Self, HarnessError> {
        let (eta1, eta2, epsilon, gamma_m, alpha_ep) = match name {
            CaseName::X => (1e-6, 2e-6, 1e-2, 1e-4, 200.0),
            CaseName::Y => (3e-7, 7e-7, 1e-3, 1e-3, 100.0),
            CaseName::Z => (1e-5, 4e-5, 3e-3, 2e-3, 20.0),
            CaseName::Custom => {
                return Err(HarnessError::InvalidInput {
                    field: "case",
                    value: f64::NAN,
                    requirement: "X, Y or Z for a preset",
                })
            }
        };
        let case = CaseDefinition {
            name,
            eta1,
            eta2,
            epsilon,
            gamma_m,
            alpha_ep,
        };
        case.verify()?;
        Ok(case)
    }

    pub fn presets() -> Vec<CaseDefinition> {
        [CaseName::X, CaseName::Y, CaseName::Z]
            .into_iter()
            .map(|n| CaseDefinition::preset(n).expect("reference cases are self-consistent"))
            .collect()
    }

    pub fn custom(eta1: f64, eta2: f64, epsilon: f64, gamma_m: f64) -> Result<Self, HarnessError> {
        let mut case = CaseDefinition {
            name: CaseName::Custom,
            eta1,
            eta2,
            epsilon,
            gamma_m,
            alpha_ep: 0.0,
        };
        case.params(0.0).validate()?;
        case.alpha_ep = ep_drive_amplitude(&case.params(0.0))?;
        Ok(case)
    }

    /// Recomputes `alpha_ep` and checks it against the stored value.
    pub fn verify(&self) -> Result<(), HarnessError> {
        self.params(0.0).validate()?;
        let recomputed = ep_drive_amplitude(&self.params(0.0))?;
        if (recomputed - self.alpha_ep).abs() > CASE_TOLERANCE * self.alpha_ep.abs() {
            return Err(HarnessError::Invariant(format!(
                "case {}: stored alpha_ep {} but closed form gives {}",
                self.name.label(),
                self.alpha_ep,
                recomputed
            )));
        }
        Ok(())
    }

    /// System parameters at drive amplitude `alpha_in`, with `omega_r = 1`.
    pub fn params(&self, alpha_in: f64) -> SystemParams {
        SystemParams::ep_model(1.0, self.gamma_m, self.epsilon, self.eta1, self.eta2)
            .with_drive(alpha_in)
    }
}

/// Uniform grid of drive amplitudes, `lo + (hi - lo) i / (points - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

pub const DEFAULT_POINTS: usize = 2001;
/// Default sweep window as multiples of `alpha_ep`.
pub const DEFAULT_WINDOW: (f64, f64) = (0.1, 2.0);

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Grid { lo, hi, points }
    }

    /// `[0, 2 alpha_ep]`, used for coalescence plots.
    pub fn coalescence_default(case: &CaseDefinition) -> Self {
        Grid::new(0.0, 2.0 * case.alpha_ep, DEFAULT_POINTS)
    }

    /// `[0.1, 2] alpha_ep`, used for shift sweeps and the ratio study.
    pub fn sweep_default(case: &CaseDefinition) -> Self {
        Grid::window(case, DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, DEFAULT_POINTS)
    }

    pub fn window(case: &CaseDefinition, lo_factor: f64, hi_factor: f64, points: usize) -> Self {
        Grid::new(lo_factor * case.alpha_ep, hi_factor * case.alpha_ep, points)
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points.max(2) - 1) as f64
    }

    /// Fails with `GridMiss` unless the grid has at least two strictly
    /// increasing points and `lo <= alpha_ep <= hi`.
    pub fn check_spans(&self, alpha_ep: f64) -> Result<(), HarnessError> {
        let ok = self.points >= 2
            && self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo < self.hi
            && self.lo <= alpha_ep
            && alpha_ep <= self.hi;
        if ok {
            Ok(())
        } else {
            Err(HarnessError::GridMiss {
                alpha_ep,
                lo: self.lo,
                hi: self.hi,
                points: self.points,
            })
        }
    }

    /// Index of the node nearest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let pos = ((x - self.lo) / self.step()).round();
        pos.clamp(0.0, (self.points - 1) as f64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_closed_form() {
        let expected = [
            (CaseName::X, 200.0),
            (CaseName::Y, 100.0),
            (CaseName::Z, 20.0),
        ];
        for (name, alpha) in expected {
            let c = CaseDefinition::preset(name).unwrap();
            assert_eq!(c.alpha_ep, alpha);
            let fresh = ep_drive_amplitude(&c.params(0.0)).unwrap();
            assert!((fresh - alpha).abs() <= CASE_TOLERANCE * alpha);
        }
    }

    #[test]
    fn tampered_case_fails_verification() {
        let mut c = CaseDefinition::preset(CaseName::Y).unwrap();
        c.alpha_ep *= 1.0 + 1e-9;
        assert!(matches!(c.verify(), Err(HarnessError::Invariant(_))));
    }

    #[test]
    fn degenerate_custom_case_rejected() {
        assert!(matches!(
            CaseDefinition::custom(1e-6, 1e-6, 1e-2, 1e-4),
            Err(HarnessError::Spectra(SpectraError::DegenerateDamping))
        ));
        let c = CaseDefinition::custom(1e-6, 5e-6, 1e-2, 1e-4).unwrap();
        assert!((c.alpha_ep - 100.0).abs() < 1e-9);
    }

    #[test]
    fn grid_checks() {
        let c = CaseDefinition::preset(CaseName::X).unwrap();
        let g = Grid::coalescence_default(&c);
        assert!(g.check_spans(c.alpha_ep).is_ok());
        assert_eq!(g.nearest_index(200.0), 1000);
        assert_eq!(g.values()[1000], 200.0);
        assert!(Grid::new(0.0, 400.0, 1).check_spans(200.0).is_err());
        assert!(Grid::new(0.0, 100.0, 50).check_spans(200.0).is_err());
        assert!(Grid::new(400.0, 0.0, 50).check_spans(200.0).is_err());
    }

    #[test]
    fn case_names_parse() {
        assert_eq!("X".parse::<CaseName>().unwrap(), CaseName::X);
        assert_eq!("z".parse::<CaseName>().unwrap(), CaseName::Z);
        assert!("W".parse::<CaseName>().is_err());
    }
}
