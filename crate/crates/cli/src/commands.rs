//! Validated jobs and their execution.
//!
//! [`plan`] turns a [`RunConfig`] into a [`Job`] without doing any numerical
//! work, so every config problem surfaces before a study starts.

use std::fs;
use std::path::{Path, PathBuf};

use epgrav::backaction::{evaluate, BackactionOptions, BackactionResult, LimitCycleAnsatz};
use epgrav::dynamics::{
    extract_lock_frequency, integrate_with, DynamicsOptions, LockEstimate, StateVector,
};
use epgrav::gravity::{invert_g, SourceSphere, G_CODATA_2014};
use epgrav::harness::{
    export_coalescence, export_gamma, export_shift_sweep, gravity_report, run_coalescence,
    run_figures, run_gamma_study_on, run_shift_sweep, write_atomic, CaseDefinition, CaseName,
    FiguresConfig, Grid, DEFAULT_POINTS, DEFAULT_WINDOW,
};
use epgrav::spectra::{eigenvalues_general, ep_drive_amplitude, is_at_ep};
use epgrav::{Complex64, Mode, SystemParams};
use serde::Serialize;

use crate::config::{ConfigError, Format, GridSpec, RunConfig, RunMode};
use crate::error::CliError;

pub const DEFAULT_OUT: &str = "epgrav-out";
const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Job {
    Eigen {
        params: SystemParams,
    },
    Ep {
        params: SystemParams,
    },
    Sweep {
        case: CaseDefinition,
        coalescence_grid: Grid,
        sweep_grid: Grid,
        delta_omegas: Vec<f64>,
    },
    Gamma {
        cases: Vec<CaseDefinition>,
        delta_omegas: Vec<f64>,
        window: (f64, f64),
        points: usize,
    },
    Gravity {
        sphere: SourceSphere,
        omega_r: f64,
        epsilon: f64,
        big_g: f64,
    },
    InvertG {
        shift: f64,
        sigma_shift: f64,
        rho: f64,
        omega_r: f64,
        epsilon: f64,
    },
    Simulate {
        params: SystemParams,
        t_end: f64,
        tol: f64,
        options: DynamicsOptions,
    },
    Figures {
        figures: FiguresConfig,
    },
}

/// A validated job together with where and how to write its output.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub job: Job,
    pub out: PathBuf,
    pub format: Format,
}

fn need<T>(value: Option<T>, mode: RunMode, key: &'static str) -> Result<T, ConfigError> {
    value.ok_or(ConfigError::Missing { mode, key })
}

/// Physical parameters: the preset case (in units of `w_r`, drive at its EP)
/// with explicit entries on top.
fn system_params(
    cfg: &RunConfig,
    mode: RunMode,
    required: &[&'static str],
) -> Result<SystemParams, CliError> {
    let s = &cfg.system;
    let base = match cfg.case {
        Some(name) => {
            let case = CaseDefinition::preset(name)?;
            case.params(case.alpha_ep)
        }
        None => {
            SystemParams::ep_model(need(s.omega_r, mode, "system.omega_r")?, 0.0, 0.0, 0.0, 0.0)
        }
    };
    if cfg.case.is_none() {
        let present = [
            ("system.epsilon", s.epsilon.is_some()),
            ("system.eta1", s.eta1.is_some()),
            ("system.eta2", s.eta2.is_some()),
        ];
        for key in required {
            if present.iter().any(|(k, ok)| k == key && !ok) {
                return Err(ConfigError::Missing { mode, key }.into());
            }
        }
    }
    Ok(SystemParams {
        omega_r: s.omega_r.unwrap_or(base.omega_r),
        gamma_m: s.gamma_m.unwrap_or(base.gamma_m),
        epsilon: s.epsilon.unwrap_or(base.epsilon),
        eta1: s.eta1.unwrap_or(base.eta1),
        eta2: s.eta2.unwrap_or(base.eta2),
        alpha_in: s.alpha_in.unwrap_or(base.alpha_in),
        g: s.g.unwrap_or(base.g),
        kappa: s.kappa.unwrap_or(base.kappa),
        delta1: s.delta1.unwrap_or(base.delta1),
        delta2: s.delta2.unwrap_or(base.delta2),
    })
}

/// The study case: a preset as is, or the system parameters normalised to
/// `omega_r = 1`.
fn study_case(cfg: &RunConfig, mode: RunMode) -> Result<CaseDefinition, CliError> {
    let s = &cfg.system;
    let touched =
        s.gamma_m.is_some() || s.epsilon.is_some() || s.eta1.is_some() || s.eta2.is_some();
    if let (Some(name), false) = (cfg.case, touched) {
        return Ok(CaseDefinition::preset(name)?);
    }
    let p = system_params(cfg, mode, &["system.epsilon", "system.eta1", "system.eta2"])?;
    Ok(CaseDefinition::custom(
        p.eta1,
        p.eta2,
        p.epsilon / p.omega_r,
        p.gamma_m / p.omega_r,
    )?)
}

fn relative_grid(cfg: &RunConfig) -> Result<((f64, f64), usize), ConfigError> {
    match cfg.study.grid {
        None => Ok((DEFAULT_WINDOW, DEFAULT_POINTS)),
        Some(GridSpec::Points(n)) => Ok((DEFAULT_WINDOW, n)),
        Some(GridSpec::Relative { lo, hi, points }) => Ok(((lo, hi), points)),
        Some(GridSpec::Absolute { .. }) => Err(ConfigError::Invariant {
            key: "study.grid".into(),
            value: cfg.study.grid.map(|g| g.to_string()).unwrap_or_default(),
            requirement: "a point count or a range in alpha_ep for studies over several cases"
                .into(),
        }),
    }
}

fn delta_omegas(cfg: &RunConfig) -> Vec<f64> {
    cfg.study
        .delta_omegas
        .clone()
        .unwrap_or_else(|| vec![-1e-4, -1e-5, -1e-6])
}

fn case_list(cfg: &RunConfig) -> Vec<CaseName> {
    match (&cfg.study.cases, cfg.case) {
        (Some(cs), _) => cs.clone(),
        (None, Some(c)) => vec![c],
        (None, None) => vec![CaseName::X, CaseName::Y, CaseName::Z],
    }
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out
        .clone()
        .or_else(|| std::env::var_os("EPGRAV_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Builds the job for `cfg.mode`. Cheap: no sweep or integration runs here.
pub fn plan(cfg: &RunConfig) -> Result<Plan, CliError> {
    let mode = need(cfg.mode, RunMode::Eigen, "mode")?;
    let job = match mode {
        RunMode::Eigen => Job::Eigen {
            params: system_params(cfg, mode, &["system.epsilon"])?,
        },
        RunMode::Ep => {
            let params =
                system_params(cfg, mode, &["system.epsilon", "system.eta1", "system.eta2"])?;
            Job::Ep { params }
        }
        RunMode::Sweep => {
            let case = study_case(cfg, mode)?;
            let (coalescence_grid, sweep_grid) = match cfg.study.grid {
                None => (Grid::coalescence_default(&case), Grid::sweep_default(&case)),
                Some(GridSpec::Points(n)) => (
                    Grid::new(0.0, 2.0 * case.alpha_ep, n),
                    Grid::window(&case, DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, n),
                ),
                Some(GridSpec::Absolute { lo, hi, points }) => {
                    let g = Grid::new(lo, hi, points);
                    (g, g)
                }
                Some(GridSpec::Relative { lo, hi, points }) => {
                    let g = Grid::window(&case, lo, hi, points);
                    (g, g)
                }
            };
            coalescence_grid.check_spans(case.alpha_ep)?;
            sweep_grid.check_spans(case.alpha_ep)?;
            Job::Sweep {
                case,
                coalescence_grid,
                sweep_grid,
                delta_omegas: delta_omegas(cfg),
            }
        }
        RunMode::Gamma => {
            let (window, points) = relative_grid(cfg)?;
            let s = &cfg.system;
            let cases = if cfg.study.cases.is_none()
                && cfg.case.is_none()
                && (s.eta1.is_some() || s.eta2.is_some())
            {
                vec![study_case(cfg, mode)?]
            } else {
                case_list(cfg)
                    .into_iter()
                    .map(CaseDefinition::preset)
                    .collect::<Result<_, _>>()?
            };
            for case in &cases {
                Grid::window(case, window.0, window.1, points).check_spans(case.alpha_ep)?;
            }
            Job::Gamma {
                cases,
                delta_omegas: delta_omegas(cfg),
                window,
                points,
            }
        }
        RunMode::Gravity => {
            let sp = &cfg.sphere;
            let sphere = SourceSphere::new(
                need(sp.rho, mode, "sphere.rho")?,
                need(sp.radius, mode, "sphere.radius")?,
                need(sp.a1, mode, "sphere.a1")?,
                need(sp.a2, mode, "sphere.a2")?,
                need(sp.m1, mode, "sphere.m1")?,
                need(sp.m2, mode, "sphere.m2")?,
            )?;
            Job::Gravity {
                sphere,
                omega_r: need(cfg.system.omega_r, mode, "system.omega_r")?,
                epsilon: need(cfg.system.epsilon, mode, "system.epsilon")?,
                big_g: cfg.gravity.big_g.unwrap_or(G_CODATA_2014),
            }
        }
        RunMode::InvertG => Job::InvertG {
            shift: need(cfg.gravity.shift, mode, "gravity.shift")?,
            sigma_shift: cfg.gravity.sigma_shift.unwrap_or(0.0),
            rho: need(cfg.sphere.rho, mode, "sphere.rho")?,
            omega_r: need(cfg.system.omega_r, mode, "system.omega_r")?,
            epsilon: need(cfg.system.epsilon, mode, "system.epsilon")?,
        },
        RunMode::Simulate => {
            let defaults = DynamicsOptions::default();
            Job::Simulate {
                params: system_params(cfg, mode, &[])?,
                t_end: need(cfg.simulate.t_end, mode, "simulate.t_end")?,
                tol: cfg.simulate.tol.unwrap_or(DEFAULT_TOLERANCE),
                options: DynamicsOptions {
                    drive_coupling: cfg
                        .simulate
                        .drive_coupling
                        .unwrap_or(defaults.drive_coupling),
                    samples_per_period: cfg
                        .simulate
                        .samples_per_period
                        .unwrap_or(defaults.samples_per_period),
                    ..defaults
                },
            }
        }
        RunMode::Figures => {
            let defaults = FiguresConfig::default();
            let (window, points) = match cfg.study.grid {
                None => (defaults.sweep_window, defaults.sweep_points),
                _ => relative_grid(cfg)?,
            };
            let figures = FiguresConfig {
                cases: case_list(cfg),
                delta_omegas: delta_omegas(cfg),
                coalescence_points: points,
                sweep_window: window,
                sweep_points: points,
                densities: cfg.study.densities.clone().unwrap_or(defaults.densities),
                g_values: cfg.study.g_values.clone().unwrap_or(defaults.g_values),
                omega_r: cfg.system.omega_r.unwrap_or(defaults.omega_r),
                epsilon: cfg.system.epsilon.unwrap_or(defaults.epsilon),
            };
            for name in &figures.cases {
                let case = CaseDefinition::preset(*name)?;
                Grid::new(0.0, 2.0 * case.alpha_ep, points).check_spans(case.alpha_ep)?;
                Grid::window(&case, window.0, window.1, points).check_spans(case.alpha_ep)?;
            }
            Job::Figures { figures }
        }
    };
    Ok(Plan {
        job,
        out: output_dir(cfg),
        format: cfg.format.unwrap_or_default(),
    })
}

/// What a run produced: the summary line, an optional JSON record, and the
/// files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub record: Option<serde_json::Value>,
    pub files: Vec<PathBuf>,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(io_error(&path))?;
    Ok(path)
}

fn complex(z: Complex64) -> String {
    format!("{:e} {:+e}i", z.re, z.im)
}

#[derive(Debug, Clone, Serialize)]
struct SimulationReport {
    job: Job,
    accepted_steps: usize,
    rejected_steps: usize,
    rhs_evaluations: usize,
    samples: usize,
    lock: [Result<LockEstimate, String>; 2],
    backaction: Option<[BackactionResult; 2]>,
}

pub fn execute(plan: &Plan) -> Result<Outcome, CliError> {
    let job = &plan.job;
    match job {
        Job::Eigen { params } => {
            let eff = params.effective_modes();
            let s = eigenvalues_general(&eff)?;
            let regime = if is_at_ep(&eff, params.omega_r) {
                "at EP"
            } else if s.half_split.re.abs() >= s.half_split.im.abs() {
                "frequency split"
            } else {
                "damping split"
            };
            Ok(Outcome {
                summary: format!(
                    "tau_plus = {} rad_s, tau_minus = {} rad_s ({regime})",
                    complex(s.tau_plus),
                    complex(s.tau_minus)
                ),
                record: Some(
                    serde_json::json!({ "params": params, "spectrum": s, "regime": regime }),
                ),
                files: vec![],
            })
        }
        Job::Ep { params } => {
            let alpha = ep_drive_amplitude(params)?;
            let in_wr = alpha / params.omega_r.sqrt();
            Ok(Outcome {
                summary: format!("alpha_ep = {in_wr} w_r^1/2"),
                record: Some(serde_json::json!({
                    "alpha_ep_w_r": in_wr,
                    "alpha_ep_rad_s": alpha,
                    "params": params,
                })),
                files: vec![],
            })
        }
        Job::Sweep {
            case,
            coalescence_grid,
            sweep_grid,
            delta_omegas,
        } => {
            let coalescence = run_coalescence(case, coalescence_grid)?;
            let shifts = run_shift_sweep(case, delta_omegas, sweep_grid)?;
            let files = match plan.format {
                Format::Csv => vec![
                    export_coalescence(&coalescence, &plan.out, job)?,
                    export_shift_sweep(&shifts, &plan.out, job)?,
                ],
                Format::Json => {
                    let body = serde_json::to_vec_pretty(&serde_json::json!({
                        "job": job,
                        "coalescence": coalescence,
                        "shift_sweep": shifts,
                    }))?;
                    vec![write_file(
                        &plan.out,
                        &format!("sweep_{}.json", case.name.label()),
                        &body,
                    )?]
                }
            };
            let extrema: Vec<String> = shifts
                .extrema
                .iter()
                .map(|e| {
                    format!(
                        "dw={:e}: max |dnu_-| = {:e} at alpha = {}",
                        e.delta_omega,
                        e.dnu_minus.abs(),
                        e.alpha_in
                    )
                })
                .collect();
            Ok(Outcome {
                summary: format!(
                    "case {}: alpha_ep = {} w_r^1/2; {}",
                    case.name.label(),
                    case.alpha_ep,
                    extrema.join("; ")
                ),
                record: None,
                files,
            })
        }
        Job::Gamma {
            cases,
            delta_omegas,
            window,
            points,
        } => {
            let report = run_gamma_study_on(cases, delta_omegas, *window, *points)?;
            let files = export_gamma(&report, &plan.out, job)?;
            let values: Vec<String> = report
                .entries
                .iter()
                .map(|e| format!("{}({:e})={:.4}", e.case.label(), e.delta_omega, e.gamma))
                .collect();
            let monotone = report.monotone_by_case().iter().all(|(_, ok)| *ok);
            Ok(Outcome {
                summary: format!("Gamma: {}; monotone: {monotone}", values.join(", ")),
                record: None,
                files,
            })
        }
        Job::Gravity {
            sphere,
            omega_r,
            epsilon,
            big_g,
        } => {
            let r = gravity_report(sphere, *omega_r, *epsilon, *big_g)?;
            Ok(Outcome {
                summary: format!(
                    "dw_2 = {:e} rad_s, |dnu_-| at EP = {:e} rad_s (hierarchy bound {:e})",
                    r.delta_omega_2, r.abs_dnu_minus, r.hierarchy_bound
                ),
                record: Some(serde_json::json!({ "job": job, "report": r })),
                files: vec![],
            })
        }
        Job::InvertG {
            shift,
            sigma_shift,
            rho,
            omega_r,
            epsilon,
        } => {
            let est = invert_g(*shift, *sigma_shift, *rho, *omega_r, *epsilon)?;
            Ok(Outcome {
                summary: format!("G = {:e} +- {:e} m3_kg_s2", est.big_g, est.sigma_g),
                record: Some(serde_json::json!({ "job": job, "estimate": est })),
                files: vec![],
            })
        }
        Job::Simulate {
            params,
            t_end,
            tol,
            options,
        } => {
            let traj = integrate_with(params, &StateVector::seed(), *t_end, *tol, options)?;
            let lock = [Mode::One, Mode::Two]
                .map(|m| extract_lock_frequency(&traj, m).map_err(|e| e.to_string()));
            let backaction = match &lock {
                [Ok(a), Ok(b)] => {
                    let ansatz = LimitCycleAnsatz {
                        beta_bar: [a.beta_bar, b.beta_bar],
                        amplitude: [a.amplitude, b.amplitude],
                        omega_lock: a.omega_lock,
                    };
                    let opts = BackactionOptions::default();
                    Some([
                        evaluate(params, &ansatz, Mode::One, &opts)?,
                        evaluate(params, &ansatz, Mode::Two, &opts)?,
                    ])
                }
                _ => None,
            };
            let mut files = Vec::new();
            match plan.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    traj.write_csv(&mut buf).map_err(io_error(&plan.out))?;
                    files.push(write_file(&plan.out, "trajectory.csv", &buf)?);
                }
                Format::Json => {
                    files.push(write_file(
                        &plan.out,
                        "trajectory.json",
                        &serde_json::to_vec(&traj)?,
                    )?);
                }
            }
            let stats = traj.stats();
            let report = SimulationReport {
                job: job.clone(),
                accepted_steps: stats.accepted_steps,
                rejected_steps: stats.rejected_steps,
                rhs_evaluations: stats.rhs_evaluations,
                samples: traj.samples().len(),
                lock: lock.clone(),
                backaction,
            };
            files.push(write_file(
                &plan.out,
                "simulate.json",
                &serde_json::to_vec_pretty(&report)?,
            )?);
            let locks: Vec<String> = lock
                .iter()
                .enumerate()
                .map(|(j, l)| match l {
                    Ok(e) => format!("omega_lock_{} = {:e} rad_s", j + 1, e.omega_lock),
                    Err(e) => format!("mode {}: {e}", j + 1),
                })
                .collect();
            Ok(Outcome {
                summary: format!(
                    "{} samples, {} steps; {}",
                    report.samples,
                    report.accepted_steps,
                    locks.join("; ")
                ),
                record: None,
                files,
            })
        }
        Job::Figures { figures } => {
            let out = run_figures(figures, &plan.out)?;
            let monotone = out.gamma.monotone_by_case().iter().all(|(_, ok)| *ok);
            Ok(Outcome {
                summary: format!(
                    "wrote {} files to {}; Gamma monotone: {monotone}",
                    out.files.len(),
                    plan.out.display()
                ),
                record: None,
                files: out.files,
            })
        }
    }
}
