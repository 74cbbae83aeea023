//! Run configuration: a TOML file, command-line overrides, and their
//! resolution into SI values.
//!
//! Every dimensional entry carries a unit suffix (see [`crate::units`]).
//! Entries are stored resolved but optional, so a resolved config serialises
//! back to TOML and re-parses to the same value.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use epgrav::dynamics::{DriveCoupling, MAX_TOLERANCE, MIN_TOLERANCE};
use epgrav::harness::CaseName;
use epgrav::spectra::SpectraError;
use epgrav::SystemParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{format_quantity, parse_quantity, with_default_unit, Dim, UnitError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("`{key}` = {value}: must be {requirement}")]
    Invariant {
        key: String,
        value: String,
        requirement: String,
    },
    #[error("`{mode}` requires `{key}`")]
    Missing { mode: RunMode, key: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Eigen,
    Ep,
    Sweep,
    Gamma,
    Gravity,
    InvertG,
    Simulate,
    Figures,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RunMode::Eigen => "eigen",
            RunMode::Ep => "ep",
            RunMode::Sweep => "sweep",
            RunMode::Gamma => "gamma",
            RunMode::Gravity => "gravity",
            RunMode::InvertG => "invert-g",
            RunMode::Simulate => "simulate",
            RunMode::Figures => "figures",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Drive-amplitude grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// Point count over the command's default window.
    Points(usize),
    /// `lo:hi:points` in `w_r^1/2`.
    Absolute { lo: f64, hi: f64, points: usize },
    /// `lo:hi:points` as multiples of `alpha_ep`.
    Relative { lo: f64, hi: f64, points: usize },
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Points(n) => write!(f, "{n}"),
            GridSpec::Absolute { lo, hi, points } => write!(f, "{lo:e}:{hi:e}:{points} w_r^1/2"),
            GridSpec::Relative { lo, hi, points } => write!(f, "{lo:e}:{hi:e}:{points} alpha_ep"),
        }
    }
}

impl GridSpec {
    /// Parses `N`, `lo:hi:N w_r^1/2` or `lo:hi:N alpha_ep`. With
    /// `bare_allowed`, a range without suffix is read as `w_r^1/2`.
    pub fn parse(key: &str, text: &str, bare_allowed: bool) -> Result<Self, ConfigError> {
        let bad = |why: &str| ConfigError::Parse {
            origin: key.to_string(),
            message: format!(
                "grid \"{text}\": {why} (expected N, lo:hi:N w_r^1/2 or lo:hi:N alpha_ep)"
            ),
        };
        let mut parts = text.split_whitespace();
        let body = parts.next().ok_or_else(|| bad("empty"))?;
        let unit = parts.next();
        if parts.next().is_some() {
            return Err(bad("trailing text"));
        }
        let fields: Vec<&str> = body.split(':').collect();
        match (fields.as_slice(), unit) {
            ([n], None) => Ok(GridSpec::Points(
                n.parse()
                    .map_err(|_| bad("point count is not an integer"))?,
            )),
            ([lo, hi, n], unit) => {
                let lo: f64 = lo.parse().map_err(|_| bad("lower end is not a number"))?;
                let hi: f64 = hi.parse().map_err(|_| bad("upper end is not a number"))?;
                let points: usize = n
                    .parse()
                    .map_err(|_| bad("point count is not an integer"))?;
                match unit {
                    Some("w_r^1/2") => Ok(GridSpec::Absolute { lo, hi, points }),
                    None if bare_allowed => Ok(GridSpec::Absolute { lo, hi, points }),
                    Some("alpha_ep") => Ok(GridSpec::Relative { lo, hi, points }),
                    None => Err(UnitError::Missing {
                        key: key.into(),
                        text: text.into(),
                        accepted: "w_r^1/2, alpha_ep",
                    }
                    .into()),
                    Some(other) => Err(UnitError::Unknown {
                        key: key.into(),
                        text: text.into(),
                        unit: other.into(),
                        accepted: "w_r^1/2, alpha_ep",
                    }
                    .into()),
                }
            }
            _ => Err(bad("wrong number of fields")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemConfig {
    pub omega_r: Option<f64>,
    pub gamma_m: Option<f64>,
    pub epsilon: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub alpha_in: Option<f64>,
    pub g: Option<f64>,
    pub kappa: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphereConfig {
    pub rho: Option<f64>,
    pub radius: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyConfig {
    pub grid: Option<GridSpec>,
    /// Shifts in units of `omega_r`.
    pub delta_omegas: Option<Vec<f64>>,
    pub cases: Option<Vec<CaseName>>,
    /// `(label, rho)` with `rho` in kg/m^3.
    pub densities: Option<Vec<(String, f64)>>,
    pub g_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulateConfig {
    /// Run length in seconds.
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    pub drive_coupling: Option<DriveCoupling>,
    pub samples_per_period: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GravityConfig {
    pub big_g: Option<f64>,
    /// Measured `|dnu_minus|` in rad/s.
    pub shift: Option<f64>,
    pub sigma_shift: Option<f64>,
}

/// Fully parsed run configuration, all values in SI / rad/s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub mode: Option<RunMode>,
    pub case: Option<CaseName>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub system: SystemConfig,
    pub sphere: SphereConfig,
    pub study: StudyConfig,
    pub simulate: SimulateConfig,
    pub gravity: GravityConfig,
}

/// Config value as written: a number (dimensionless entries) or a string
/// with a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Num(f64),
    Text(String),
}

impl RawValue {
    fn text(&self) -> String {
        match self {
            RawValue::Num(v) => format!("{v:e}"),
            RawValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_r: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_m: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta1: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta2: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_in: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta1: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta2: Option<RawValue>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSphere {
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a1: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a2: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m1: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m2: Option<RawValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    name: String,
    rho: RawValue,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_omegas: Option<Vec<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cases: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_values: Option<Vec<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    densities: Option<Vec<RawDensity>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drive_coupling: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_per_period: Option<RawValue>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGravity {
    #[serde(skip_serializing_if = "Option::is_none")]
    big_g: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shift: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_shift: Option<RawValue>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    sphere: RawSphere,
    #[serde(default)]
    study: RawStudy,
    #[serde(default)]
    simulate: RawSimulate,
    #[serde(default)]
    gravity: RawGravity,
}

/// Scalar keys that can be overridden from the command line, with their
/// dimensions.
pub const SCALAR_KEYS: [(&str, Dim); 23] = [
    ("system.omega_r", Dim::Rate),
    ("system.gamma_m", Dim::Rate),
    ("system.epsilon", Dim::Rate),
    ("system.eta1", Dim::Dimensionless),
    ("system.eta2", Dim::Dimensionless),
    ("system.alpha_in", Dim::Amplitude),
    ("system.g", Dim::Rate),
    ("system.kappa", Dim::Rate),
    ("system.delta1", Dim::Rate),
    ("system.delta2", Dim::Rate),
    ("sphere.rho", Dim::Density),
    ("sphere.radius", Dim::Length),
    ("sphere.a1", Dim::Length),
    ("sphere.a2", Dim::Length),
    ("sphere.m1", Dim::Mass),
    ("sphere.m2", Dim::Mass),
    ("simulate.t_end", Dim::Time),
    ("simulate.tol", Dim::Dimensionless),
    ("simulate.samples_per_period", Dim::Dimensionless),
    ("gravity.big_g", Dim::Gravitational),
    ("gravity.shift", Dim::Rate),
    ("gravity.sigma_shift", Dim::Rate),
    ("study.delta_omegas", Dim::RelativeRate),
];

fn dim_of(key: &str) -> Dim {
    SCALAR_KEYS
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, d)| *d)
        .unwrap_or(Dim::Dimensionless)
}

impl RawConfig {
    fn slot(&mut self, key: &str) -> Option<&mut Option<RawValue>> {
        Some(match key {
            "system.omega_r" => &mut self.system.omega_r,
            "system.gamma_m" => &mut self.system.gamma_m,
            "system.epsilon" => &mut self.system.epsilon,
            "system.eta1" => &mut self.system.eta1,
            "system.eta2" => &mut self.system.eta2,
            "system.alpha_in" => &mut self.system.alpha_in,
            "system.g" => &mut self.system.g,
            "system.kappa" => &mut self.system.kappa,
            "system.delta1" => &mut self.system.delta1,
            "system.delta2" => &mut self.system.delta2,
            "sphere.rho" => &mut self.sphere.rho,
            "sphere.radius" => &mut self.sphere.radius,
            "sphere.a1" => &mut self.sphere.a1,
            "sphere.a2" => &mut self.sphere.a2,
            "sphere.m1" => &mut self.sphere.m1,
            "sphere.m2" => &mut self.sphere.m2,
            "simulate.t_end" => &mut self.simulate.t_end,
            "simulate.tol" => &mut self.simulate.tol,
            "simulate.samples_per_period" => &mut self.simulate.samples_per_period,
            "gravity.big_g" => &mut self.gravity.big_g,
            "gravity.shift" => &mut self.gravity.shift,
            "gravity.sigma_shift" => &mut self.gravity.sigma_shift,
            _ => return None,
        })
    }
}

/// A command-line value that replaces a config entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    /// Dotted config key, e.g. `system.epsilon`.
    pub key: &'static str,
    pub flag: &'static str,
    pub value: OverrideValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OverrideValue {
    One(String),
    List(Vec<String>),
}

fn record_conflict(notes: &mut Vec<String>, o: &Override, file: Option<String>, flag: &str) {
    if let Some(file) = file {
        if file.trim() != flag.trim() {
            notes.push(format!(
                "flag {} = \"{flag}\" overrides config `{}` = \"{file}\"",
                o.flag, o.key
            ));
        }
    }
}

fn apply(
    raw: &mut RawConfig,
    overrides: &[Override],
    notes: &mut Vec<String>,
) -> Result<(), ConfigError> {
    for o in overrides {
        match (o.key, &o.value) {
            ("mode", OverrideValue::One(v)) => {
                record_conflict(notes, o, raw.mode.clone(), v);
                raw.mode = Some(v.clone());
            }
            ("case", OverrideValue::One(v)) => {
                record_conflict(notes, o, raw.case.clone(), v);
                raw.case = Some(v.clone());
            }
            ("out", OverrideValue::One(v)) => {
                record_conflict(
                    notes,
                    o,
                    raw.out.as_ref().map(|p| p.display().to_string()),
                    v,
                );
                raw.out = Some(PathBuf::from(v));
            }
            ("format", OverrideValue::One(v)) => {
                record_conflict(notes, o, raw.format.clone(), v);
                raw.format = Some(v.clone());
            }
            ("seed", OverrideValue::One(v)) => {
                record_conflict(notes, o, raw.seed.map(|s| s.to_string()), v);
                raw.seed = Some(v.parse().map_err(|_| ConfigError::Parse {
                    origin: o.flag.into(),
                    message: format!("\"{v}\" is not a non-negative integer"),
                })?);
            }
            ("study.grid", OverrideValue::One(v)) => {
                record_conflict(notes, o, raw.study.grid.clone(), v);
                // Validate here so a bare range is read with the flag rules.
                let grid = GridSpec::parse(o.flag, v, true)?;
                raw.study.grid = Some(grid.to_string());
            }
            ("simulate.drive_coupling", OverrideValue::One(v)) => {
                record_conflict(notes, o, raw.simulate.drive_coupling.clone(), v);
                raw.simulate.drive_coupling = Some(v.clone());
            }
            ("study.delta_omegas", OverrideValue::List(vs)) => {
                let file = raw
                    .study
                    .delta_omegas
                    .as_ref()
                    .map(|l| l.iter().map(RawValue::text).collect::<Vec<_>>().join(","));
                let dim = dim_of(o.key);
                let vs: Vec<String> = vs.iter().map(|v| with_default_unit(v, dim)).collect();
                record_conflict(notes, o, file, &vs.join(","));
                raw.study.delta_omegas = Some(vs.into_iter().map(RawValue::Text).collect());
            }
            ("study.cases", OverrideValue::List(vs)) => {
                record_conflict(
                    notes,
                    o,
                    raw.study.cases.as_ref().map(|c| c.join(",")),
                    &vs.join(","),
                );
                raw.study.cases = Some(vs.clone());
            }
            (key, OverrideValue::One(v)) => {
                let text = with_default_unit(v, dim_of(key));
                let slot = raw.slot(key).ok_or_else(|| ConfigError::Parse {
                    origin: o.flag.into(),
                    message: format!("no config key `{key}`"),
                })?;
                record_conflict(notes, o, slot.as_ref().map(RawValue::text), &text);
                *slot = Some(RawValue::Text(text));
            }
            (key, OverrideValue::List(_)) => {
                return Err(ConfigError::Parse {
                    origin: o.flag.into(),
                    message: format!("`{key}` takes a single value"),
                })
            }
        }
    }
    Ok(())
}

/// Result of [`parse_config`]: the config plus notes on flag/file conflicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub notes: Vec<String>,
}

/// Reads `path` (if any), applies `overrides` on top and resolves units.
pub fn parse_config(path: Option<&Path>, overrides: &[Override]) -> Result<Parsed, ConfigError> {
    let mut raw = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            parse_raw(&text, &p.display().to_string())?
        }
        None => RawConfig::default(),
    };
    let mut notes = Vec::new();
    apply(&mut raw, overrides, &mut notes)?;
    Ok(Parsed {
        config: resolve(&raw)?,
        notes,
    })
}

/// Parses TOML text without overrides.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(&parse_raw(text, "config")?)
}

fn parse_raw(text: &str, origin: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        message: e.to_string().trim_end().to_string(),
    })
}

fn parse_enum<T: FromStr<Err = String>>(key: &str, text: &str) -> Result<T, ConfigError> {
    text.parse().map_err(|message| ConfigError::Parse {
        origin: key.to_string(),
        message,
    })
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <RunMode as clap::ValueEnum>::from_str(s, false).map_err(|_| format!("unknown mode `{s}`"))
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Format as clap::ValueEnum>::from_str(s, false)
            .map_err(|_| format!("unknown format `{s}` (csv or json)"))
    }
}

fn parse_coupling(text: &str) -> Result<DriveCoupling, ConfigError> {
    match text {
        "sqrt_kappa" => Ok(DriveCoupling::SqrtKappa),
        "sqrt_gamma_m" => Ok(DriveCoupling::SqrtGammaM),
        other => Err(ConfigError::Parse {
            origin: "simulate.drive_coupling".into(),
            message: format!("unknown coupling `{other}` (sqrt_kappa or sqrt_gamma_m)"),
        }),
    }
}

fn coupling_name(c: DriveCoupling) -> &'static str {
    match c {
        DriveCoupling::SqrtKappa => "sqrt_kappa",
        DriveCoupling::SqrtGammaM => "sqrt_gamma_m",
    }
}

fn invariant(key: &str, value: f64, requirement: &str) -> ConfigError {
    ConfigError::Invariant {
        key: key.to_string(),
        value: format!("{value:e}"),
        requirement: requirement.to_string(),
    }
}

fn resolve(raw: &RawConfig) -> Result<RunConfig, ConfigError> {
    let case = raw
        .case
        .as_deref()
        .map(|c| parse_enum::<CaseName>("case", c))
        .transpose()?;
    if case == Some(CaseName::Custom) {
        return Err(ConfigError::Parse {
            origin: "case".into(),
            message: "`custom` is not a preset; give the system parameters instead".into(),
        });
    }
    // Reference cases are quoted in units of w_r.
    let omega_r = raw
        .system
        .omega_r
        .as_ref()
        .map(|v| parse_quantity("system.omega_r", &v.text(), Dim::Rate, None))
        .transpose()?;
    let frame = omega_r.or(case.map(|_| 1.0));
    let q = |key: &str, v: &Option<RawValue>| -> Result<Option<f64>, ConfigError> {
        v.as_ref()
            .map(|v| match v {
                RawValue::Num(x) if dim_of(key) == Dim::Dimensionless => Ok(*x),
                _ => parse_quantity(key, &v.text(), dim_of(key), frame).map_err(ConfigError::from),
            })
            .transpose()
    };
    let s = &raw.system;
    let system = SystemConfig {
        omega_r,
        gamma_m: q("system.gamma_m", &s.gamma_m)?,
        epsilon: q("system.epsilon", &s.epsilon)?,
        eta1: q("system.eta1", &s.eta1)?,
        eta2: q("system.eta2", &s.eta2)?,
        alpha_in: q("system.alpha_in", &s.alpha_in)?,
        g: q("system.g", &s.g)?,
        kappa: q("system.kappa", &s.kappa)?,
        delta1: q("system.delta1", &s.delta1)?,
        delta2: q("system.delta2", &s.delta2)?,
    };
    let sp = &raw.sphere;
    let sphere = SphereConfig {
        rho: q("sphere.rho", &sp.rho)?,
        radius: q("sphere.radius", &sp.radius)?,
        a1: q("sphere.a1", &sp.a1)?,
        a2: q("sphere.a2", &sp.a2)?,
        m1: q("sphere.m1", &sp.m1)?,
        m2: q("sphere.m2", &sp.m2)?,
    };
    let st = &raw.study;
    let list = |key: &str, vs: &Option<Vec<RawValue>>| -> Result<Option<Vec<f64>>, ConfigError> {
        vs.as_ref()
            .map(|vs| {
                vs.iter()
                    .map(|v| {
                        parse_quantity(key, &v.text(), dim_of(key), frame)
                            .map_err(ConfigError::from)
                    })
                    .collect()
            })
            .transpose()
    };
    let study = StudyConfig {
        grid: st
            .grid
            .as_deref()
            .map(|g| GridSpec::parse("study.grid", g, false))
            .transpose()?,
        delta_omegas: list("study.delta_omegas", &st.delta_omegas)?,
        cases: st
            .cases
            .as_ref()
            .map(|cs| {
                cs.iter()
                    .map(|c| parse_enum::<CaseName>("study.cases", c))
                    .collect()
            })
            .transpose()?,
        densities: st
            .densities
            .as_ref()
            .map(|ds| {
                ds.iter()
                    .map(|d| {
                        Ok((
                            d.name.clone(),
                            parse_quantity(
                                "study.densities.rho",
                                &d.rho.text(),
                                Dim::Density,
                                frame,
                            )?,
                        ))
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()
            })
            .transpose()?,
        g_values: st
            .g_values
            .as_ref()
            .map(|vs| {
                vs.iter()
                    .map(|v| {
                        parse_quantity("study.g_values", &v.text(), Dim::Gravitational, frame)
                            .map_err(ConfigError::from)
                    })
                    .collect()
            })
            .transpose()?,
    };
    let sim = &raw.simulate;
    let simulate = SimulateConfig {
        t_end: q("simulate.t_end", &sim.t_end)?,
        tol: q("simulate.tol", &sim.tol)?,
        drive_coupling: sim
            .drive_coupling
            .as_deref()
            .map(parse_coupling)
            .transpose()?,
        samples_per_period: q("simulate.samples_per_period", &sim.samples_per_period)?,
    };
    let gr = &raw.gravity;
    let gravity = GravityConfig {
        big_g: q("gravity.big_g", &gr.big_g)?,
        shift: q("gravity.shift", &gr.shift)?,
        sigma_shift: q("gravity.sigma_shift", &gr.sigma_shift)?,
    };
    let config = RunConfig {
        mode: raw
            .mode
            .as_deref()
            .map(|m| parse_enum("mode", m))
            .transpose()?,
        case,
        out: raw.out.clone(),
        format: raw
            .format
            .as_deref()
            .map(|f| parse_enum("format", f))
            .transpose()?,
        seed: raw.seed,
        system,
        sphere,
        study,
        simulate,
        gravity,
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Checks physical invariants of every value that is present.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        let probe = SystemParams {
            omega_r: s.omega_r.unwrap_or(1.0),
            gamma_m: s.gamma_m.unwrap_or(0.0),
            epsilon: s.epsilon.unwrap_or(0.0),
            eta1: s.eta1.unwrap_or(0.0),
            eta2: s.eta2.unwrap_or(0.0),
            alpha_in: s.alpha_in.unwrap_or(0.0),
            g: s.g.unwrap_or(0.0),
            kappa: s.kappa.unwrap_or(0.0),
            delta1: s.delta1.unwrap_or(0.0),
            delta2: s.delta2.unwrap_or(0.0),
        };
        if let Err(SpectraError::InvalidParameter {
            field,
            value,
            requirement,
        }) = probe.validate()
        {
            return Err(invariant(&format!("system.{field}"), value, requirement));
        }
        let sp = &self.sphere;
        for (key, v) in [
            ("sphere.rho", sp.rho),
            ("sphere.radius", sp.radius),
            ("sphere.a1", sp.a1),
            ("sphere.a2", sp.a2),
            ("sphere.m1", sp.m1),
            ("sphere.m2", sp.m2),
            ("gravity.big_g", self.gravity.big_g),
            ("simulate.t_end", self.simulate.t_end),
            (
                "simulate.samples_per_period",
                self.simulate.samples_per_period,
            ),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(invariant(key, v, "finite and > 0"));
                }
            }
        }
        if let (Some(r), Some(a2)) = (sp.radius, sp.a2) {
            if a2 < r {
                return Err(invariant("sphere.a2", a2, "at least the sphere radius"));
            }
        }
        for (key, v) in [
            ("gravity.shift", self.gravity.shift),
            ("gravity.sigma_shift", self.gravity.sigma_shift),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invariant(key, v, "finite and >= 0"));
                }
            }
        }
        if let Some(seed) = self.seed {
            if seed > i64::MAX as u64 {
                return Err(invariant("seed", seed as f64, "at most 2^63 - 1"));
            }
        }
        if let Some(tol) = self.simulate.tol {
            if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
                return Err(invariant(
                    "simulate.tol",
                    tol,
                    &format!("in [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}]"),
                ));
            }
        }
        for &dw in self.study.delta_omegas.iter().flatten() {
            if !(dw.is_finite() && dw != 0.0 && dw.abs() < 1.0) {
                return Err(invariant(
                    "study.delta_omegas",
                    dw,
                    "non-zero with |dw| < 1 w_r",
                ));
            }
        }
        for (name, rho) in self.study.densities.iter().flatten() {
            if !(rho.is_finite() && *rho > 0.0) {
                return Err(invariant(
                    &format!("study.densities.{name}"),
                    *rho,
                    "finite and > 0",
                ));
            }
        }
        for &g in self.study.g_values.iter().flatten() {
            if !(g.is_finite() && g > 0.0) {
                return Err(invariant("study.g_values", g, "finite and > 0"));
            }
        }
        if let Some(GridSpec::Absolute { lo, hi, .. } | GridSpec::Relative { lo, hi, .. }) =
            self.study.grid
        {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(invariant(
                    "study.grid",
                    if lo.is_finite() { hi } else { lo },
                    "finite",
                ));
            }
        }
        Ok(())
    }

    /// TOML text that [`parse_config_str`] maps back to `self`.
    pub fn to_toml(&self) -> String {
        let q =
            |v: Option<f64>, key: &str| v.map(|x| RawValue::Text(format_quantity(x, dim_of(key))));
        let n = |v: Option<f64>| v.map(RawValue::Num);
        let s = &self.system;
        let sp = &self.sphere;
        let raw = RawConfig {
            mode: self.mode.map(|m| m.to_string()),
            case: self.case.map(|c| c.label().to_string()),
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                Format::Csv => "csv".into(),
                Format::Json => "json".into(),
            }),
            seed: self.seed,
            system: RawSystem {
                omega_r: q(s.omega_r, "system.omega_r"),
                gamma_m: q(s.gamma_m, "system.gamma_m"),
                epsilon: q(s.epsilon, "system.epsilon"),
                eta1: n(s.eta1),
                eta2: n(s.eta2),
                alpha_in: q(s.alpha_in, "system.alpha_in"),
                g: q(s.g, "system.g"),
                kappa: q(s.kappa, "system.kappa"),
                delta1: q(s.delta1, "system.delta1"),
                delta2: q(s.delta2, "system.delta2"),
            },
            sphere: RawSphere {
                rho: q(sp.rho, "sphere.rho"),
                radius: q(sp.radius, "sphere.radius"),
                a1: q(sp.a1, "sphere.a1"),
                a2: q(sp.a2, "sphere.a2"),
                m1: q(sp.m1, "sphere.m1"),
                m2: q(sp.m2, "sphere.m2"),
            },
            study: RawStudy {
                grid: self.study.grid.map(|g| g.to_string()),
                delta_omegas: self.study.delta_omegas.as_ref().map(|vs| {
                    vs.iter()
                        .map(|v| RawValue::Text(format_quantity(*v, Dim::RelativeRate)))
                        .collect()
                }),
                cases: self
                    .study
                    .cases
                    .as_ref()
                    .map(|cs| cs.iter().map(|c| c.label().to_string()).collect()),
                g_values: self.study.g_values.as_ref().map(|vs| {
                    vs.iter()
                        .map(|v| RawValue::Text(format_quantity(*v, Dim::Gravitational)))
                        .collect()
                }),
                densities: self.study.densities.as_ref().map(|ds| {
                    ds.iter()
                        .map(|(name, rho)| RawDensity {
                            name: name.clone(),
                            rho: RawValue::Text(format_quantity(*rho, Dim::Density)),
                        })
                        .collect()
                }),
            },
            simulate: RawSimulate {
                t_end: q(self.simulate.t_end, "simulate.t_end"),
                tol: n(self.simulate.tol),
                drive_coupling: self
                    .simulate
                    .drive_coupling
                    .map(|c| coupling_name(c).to_string()),
                samples_per_period: n(self.simulate.samples_per_period),
            },
            gravity: RawGravity {
                big_g: q(self.gravity.big_g, "gravity.big_g"),
                shift: q(self.gravity.shift, "gravity.shift"),
                sigma_shift: q(self.gravity.sigma_shift, "gravity.sigma_shift"),
            },
        };
        toml::to_string(&raw).expect("config serialises to TOML")
    }
}
