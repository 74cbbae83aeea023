//! Numerical model of an exceptional-point optomechanical gravimeter.
//!
//! Two optomechanical cavities whose end mirrors are coupled membrane
//! resonators form a pair of mechanical supermodes. Driving one cavity on the
//! red sideband and the other on the blue sideband balances gain and loss and
//! produces an exceptional point (EP) in the supermode spectrum. A source mass
//! detunes one membrane, and the resulting eigenfrequency shift is enhanced
//! near the EP; inverting that shift yields the Newtonian constant `G`.
//!
//! Modules:
//!
//! - [`spectra`]: closed-form eigenvalues of the effective 2x2 Hamiltonian,
//!   EP location and branch tracking.
//! - [`backaction`]: Bessel-series optical spring and optical damping.
//! - [`dynamics`]: adaptive integration of the classical mean-field equations
//!   and limit-cycle analysis.
//! - [`gravity`]: source-sphere frequency shifts, perturbed spectra, the
//!   shift-versus-`G` law and its inversion.
//! - [`harness`]: deterministic reproductions of the coalescence, shift-sweep,
//!   enhancement-ratio and `G`-curve studies with CSV/JSON export.
//!
//! All frequencies are angular frequencies in rad/s.

pub mod backaction;
pub mod dynamics;
pub mod gravity;
pub mod harness;
pub mod numeric;
pub mod spectra;

pub use num_complex::Complex64;
pub use spectra::{EffectiveModeParams, Mode, SupermodeSpectrum, SystemParams};
