//! Quantities with explicit unit suffixes, e.g. `"1e-2 w_r"` or `"2e9 rad_s"`.

use std::f64::consts::TAU;

use thiserror::Error;

/// Physical dimension of a config entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Angular frequency or rate.
    Rate,
    /// Drive amplitude, `(rad/s)^(1/2)`.
    Amplitude,
    Time,
    Density,
    Length,
    Mass,
    /// Newtonian constant, m^3 kg^-1 s^-2.
    Gravitational,
    /// Frequency shift in units of `omega_r` only, used by the normalised studies.
    RelativeRate,
    Dimensionless,
}

impl Dim {
    /// Unit written when serialising and appended to bare flag values.
    pub fn canonical_unit(self) -> Option<&'static str> {
        match self {
            Dim::Rate => Some("rad_s"),
            Dim::Amplitude => Some("rad_s^1/2"),
            Dim::Time => Some("s"),
            Dim::Density => Some("kg_m3"),
            Dim::Length => Some("m"),
            Dim::Mass => Some("kg"),
            Dim::Gravitational => Some("m3_kg_s2"),
            Dim::RelativeRate => Some("w_r"),
            Dim::Dimensionless => None,
        }
    }

    fn accepted(self) -> &'static str {
        match self {
            Dim::Rate => "rad_s, Hz, w_r",
            Dim::Amplitude => "rad_s^1/2, w_r^1/2",
            Dim::Time => "s, w_r^-1, periods",
            Dim::Density => "kg_m3",
            Dim::Length => "m",
            Dim::Mass => "kg",
            Dim::Gravitational => "m3_kg_s2",
            Dim::RelativeRate => "w_r",
            Dim::Dimensionless => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("`{key}` = \"{text}\": missing unit suffix (accepted: {accepted})")]
    Missing {
        key: String,
        text: String,
        accepted: &'static str,
    },
    #[error("`{key}` = \"{text}\": unknown unit `{unit}` (accepted: {accepted})")]
    Unknown {
        key: String,
        text: String,
        unit: String,
        accepted: &'static str,
    },
    #[error("`{key}` = \"{text}\": not a number")]
    NotANumber { key: String, text: String },
    #[error("`{key}` = \"{text}\": unit `{unit}` needs omega_r, which is not set")]
    NeedsOmegaR {
        key: String,
        text: String,
        unit: String,
    },
}

/// Converts `text` to the canonical unit of `dim`. `omega_r` (rad/s) is
/// required only for units relative to the mechanical frequency.
pub fn parse_quantity(
    key: &str,
    text: &str,
    dim: Dim,
    omega_r: Option<f64>,
) -> Result<f64, UnitError> {
    let mut parts = text.split_whitespace();
    let number = parts.next().unwrap_or("");
    let unit = parts.collect::<Vec<_>>().join(" ");
    let value: f64 = number.parse().map_err(|_| UnitError::NotANumber {
        key: key.into(),
        text: text.into(),
    })?;
    if dim == Dim::Dimensionless {
        if unit.is_empty() {
            return Ok(value);
        }
        return Err(UnitError::Unknown {
            key: key.into(),
            text: text.into(),
            unit,
            accepted: dim.accepted(),
        });
    }
    if unit.is_empty() {
        return Err(UnitError::Missing {
            key: key.into(),
            text: text.into(),
            accepted: dim.accepted(),
        });
    }
    let w = || {
        omega_r.ok_or_else(|| UnitError::NeedsOmegaR {
            key: key.into(),
            text: text.into(),
            unit: unit.clone(),
        })
    };
    let factor = match (dim, unit.as_str()) {
        (Dim::Rate, "rad_s") => 1.0,
        (Dim::Rate, "Hz") => TAU,
        (Dim::Rate, "w_r") => w()?,
        (Dim::Amplitude, "rad_s^1/2") => 1.0,
        (Dim::Amplitude, "w_r^1/2") => w()?.sqrt(),
        (Dim::Time, "s") => 1.0,
        (Dim::Time, "w_r^-1") => 1.0 / w()?,
        (Dim::Time, "periods") => TAU / w()?,
        (Dim::Density, "kg_m3")
        | (Dim::Length, "m")
        | (Dim::Mass, "kg")
        | (Dim::Gravitational, "m3_kg_s2")
        | (Dim::RelativeRate, "w_r") => 1.0,
        _ => {
            return Err(UnitError::Unknown {
                key: key.into(),
                text: text.into(),
                unit,
                accepted: dim.accepted(),
            })
        }
    };
    Ok(value * factor)
}

/// Writes `value` in the canonical unit of `dim`; exact under [`parse_quantity`].
pub fn format_quantity(value: f64, dim: Dim) -> String {
    match dim.canonical_unit() {
        Some(unit) => format!("{value:e} {unit}"),
        None => format!("{value:e}"),
    }
}

/// A flag value with the canonical unit appended when it is a bare number.
pub fn with_default_unit(text: &str, dim: Dim) -> String {
    let bare = text.split_whitespace().count() == 1 && text.trim().parse::<f64>().is_ok();
    match (bare, dim.canonical_unit()) {
        (true, Some(unit)) => format!("{} {unit}", text.trim()),
        _ => text.to_string(),
    }
}
