//! CSV and JSON export of the studies.
//!
//! Every CSV starts with `#` comment lines recording the crate version and the
//! JSON-encoded configuration, followed by one header row. Floats use Rust's
//! shortest round-trip formatting, so identical inputs give byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::studies::{run_gamma_study_on, GCurves, GammaReport, SweepResult};
use super::{
    run_coalescence, run_g_curves, run_shift_sweep, CaseDefinition, CaseName, Grid, HarnessError,
};
use crate::gravity::{G_CODATA_2014, G_CODATA_2014_SIGMA};
use crate::numeric::linspace;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
/// Missing parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let name = path.file_name().ok_or_else(|| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name")
    })?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn preamble<C: Serialize>(config: &C) -> Result<String, HarnessError> {
    Ok(format!(
        "# epgrav-core {VERSION}\n# config: {}\n",
        serde_json::to_string(config)?
    ))
}

/// Re-checks `tau_plus + tau_minus = trace(H_eff)` for every row.
fn verify_trace(result: &SweepResult) -> Result<(), HarnessError> {
    let c = &result.case;
    for r in &result.rows {
        let a2 = r.alpha_in * r.alpha_in;
        let re: f64 = 2.0;
        let im = -(2.0 * c.gamma_m + (c.eta1 + c.eta2) * a2) / 2.0;
        let sum_re = r.nu_plus + r.nu_minus;
        let sum_im = r.ups_plus + r.ups_minus;
        let scale = re.max(im.abs());
        if (sum_re - re).abs() > 1e-12 * scale || (sum_im - im).abs() > 1e-12 * scale {
            return Err(HarnessError::Invariant(format!(
                "trace identity fails at alpha_in = {}",
                r.alpha_in
            )));
        }
    }
    Ok(())
}

fn case_file(prefix: &str, case: CaseName) -> String {
    format!("{prefix}_{}.csv", case.label())
}

/// `fig2_<case>.csv`: supermode frequencies and rates with tracked branches.
pub fn export_coalescence<C: Serialize>(
    result: &SweepResult,
    dir: &Path,
    config: &C,
) -> Result<PathBuf, HarnessError> {
    verify_trace(result)?;
    let mut out = preamble(config)?;
    out.push_str(
        "alpha_in,nu_plus,nu_minus,ups_plus,ups_minus,branch_a_nu,branch_a_ups,branch_b_nu,branch_b_ups,a_is_plus,reordering\n",
    );
    for (i, r) in result.rows.iter().enumerate() {
        let (a, b) = if r.a_is_plus {
            ((r.nu_plus, r.ups_plus), (r.nu_minus, r.ups_minus))
        } else {
            ((r.nu_minus, r.ups_minus), (r.nu_plus, r.ups_plus))
        };
        let event = result
            .events
            .iter()
            .find(|e| e.step == i)
            .map(|e| format!("{:?}", e.kind))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.alpha_in,
            r.nu_plus,
            r.nu_minus,
            r.ups_plus,
            r.ups_minus,
            a.0,
            a.1,
            b.0,
            b.1,
            r.a_is_plus,
            event
        )
        .expect("writing to a String cannot fail");
    }
    let path = dir.join(case_file("fig2", result.case.name));
    write_atomic(&path, out.as_bytes())?;
    Ok(path)
}

/// `fig4_<case>.csv`: long format, one row per (shift, grid point).
pub fn export_shift_sweep<C: Serialize>(
    result: &SweepResult,
    dir: &Path,
    config: &C,
) -> Result<PathBuf, HarnessError> {
    verify_trace(result)?;
    let mut out = preamble(config)?;
    out.push_str("case,delta_omega,alpha_in,nu_plus,nu_minus,ups_plus,ups_minus,dnu_plus,dnu_minus,is_max_abs_dnu_minus\n");
    for (k, &dw) in result.delta_omegas.iter().enumerate() {
        for (i, r) in result.rows.iter().enumerate() {
            let (dp, dm) = r.shifts[k];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                result.case.name.label(),
                dw,
                r.alpha_in,
                r.nu_plus,
                r.nu_minus,
                r.ups_plus,
                r.ups_minus,
                dp,
                dm,
                result.extrema[k].index == i
            )
            .expect("writing to a String cannot fail");
        }
    }
    let path = dir.join(case_file("fig4", result.case.name));
    write_atomic(&path, out.as_bytes())?;
    Ok(path)
}

/// `fig5.csv` and `fig5.json`.
pub fn export_gamma<C: Serialize>(
    report: &GammaReport,
    dir: &Path,
    config: &C,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = preamble(config)?;
    out.push_str(
        "case,delta_omega,abs_delta_omega,gamma,dnu_minus_ep,dnu_minus_min,alpha_at_min,alpha_ep,window_lo,window_hi,points\n",
    );
    for e in &report.entries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.case.label(),
            e.delta_omega,
            e.delta_omega.abs(),
            e.gamma,
            e.dnu_minus_ep,
            e.dnu_minus_min,
            e.alpha_at_min,
            e.alpha_ep,
            e.grid.lo,
            e.grid.hi,
            e.grid.points
        )
        .expect("writing to a String cannot fail");
    }
    let csv = dir.join("fig5.csv");
    write_atomic(&csv, out.as_bytes())?;
    let json = dir.join("fig5.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_atomic(&json, text.as_bytes())?;
    Ok(vec![csv, json])
}

/// `fig6.csv`: `|dnu_minus|` against `G` per density.
pub fn export_g_curves<C: Serialize>(
    curves: &GCurves,
    dir: &Path,
    config: &C,
) -> Result<PathBuf, HarnessError> {
    let mut out = preamble(config)?;
    writeln!(
        out,
        "# codata_g: {}\n# codata_sigma: {}",
        curves.codata_g, curves.codata_sigma
    )
    .expect("writing to a String cannot fail");
    out.push_str("label,rho,G,abs_dnu_minus,in_codata_interval\n");
    for r in &curves.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.label, r.rho, r.big_g, r.abs_dnu_minus, r.in_codata_interval
        )
        .expect("writing to a String cannot fail");
    }
    let path = dir.join("fig6.csv");
    write_atomic(&path, out.as_bytes())?;
    Ok(path)
}

/// Inputs for regenerating every figure table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresConfig {
    pub cases: Vec<CaseName>,
    /// Shifts in units of `omega_r`.
    pub delta_omegas: Vec<f64>,
    pub coalescence_points: usize,
    /// Sweep window as multiples of `alpha_ep`.
    pub sweep_window: (f64, f64),
    pub sweep_points: usize,
    pub densities: Vec<(String, f64)>,
    /// `G` values for the density curves (m^3 kg^-1 s^-2).
    pub g_values: Vec<f64>,
    pub omega_r: f64,
    pub epsilon: f64,
}

impl Default for FiguresConfig {
    fn default() -> Self {
        // A wide grid for the density comparison plus a fine one around the
        // CODATA interval.
        let mut g_values = linspace(6.0e-11, 7.4e-11, 141);
        g_values.extend(linspace(
            G_CODATA_2014 - 10.0 * G_CODATA_2014_SIGMA,
            G_CODATA_2014 + 10.0 * G_CODATA_2014_SIGMA,
            41,
        ));
        g_values.sort_by(f64::total_cmp);
        g_values.dedup();
        FiguresConfig {
            cases: vec![CaseName::X, CaseName::Y, CaseName::Z],
            delta_omegas: vec![-1e-4, -1e-5, -1e-6],
            coalescence_points: super::DEFAULT_POINTS,
            sweep_window: super::DEFAULT_WINDOW,
            sweep_points: super::DEFAULT_POINTS,
            densities: super::DENSITY_PRESETS
                .iter()
                .map(|(l, r)| (l.to_string(), *r))
                .collect(),
            g_values,
            omega_r: 2e9,
            epsilon: 2e7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureOutputs {
    pub files: Vec<PathBuf>,
    pub gamma: GammaReport,
}

/// Runs every study in `cfg` and writes the tables into `dir`.
pub fn run_figures(cfg: &FiguresConfig, dir: &Path) -> Result<FigureOutputs, HarnessError> {
    fs::create_dir_all(dir)?;
    let cases = cfg
        .cases
        .iter()
        .map(|&n| CaseDefinition::preset(n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut files = Vec::new();
    for case in &cases {
        let grid = Grid::new(0.0, 2.0 * case.alpha_ep, cfg.coalescence_points);
        files.push(export_coalescence(
            &run_coalescence(case, &grid)?,
            dir,
            cfg,
        )?);
        let grid = Grid::window(
            case,
            cfg.sweep_window.0,
            cfg.sweep_window.1,
            cfg.sweep_points,
        );
        files.push(export_shift_sweep(
            &run_shift_sweep(case, &cfg.delta_omegas, &grid)?,
            dir,
            cfg,
        )?);
    }
    let gamma = run_gamma_study_on(
        &cases,
        &cfg.delta_omegas,
        cfg.sweep_window,
        cfg.sweep_points,
    )?;
    files.extend(export_gamma(&gamma, dir, cfg)?);
    let curves = run_g_curves(&cfg.densities, &cfg.g_values, cfg.omega_r, cfg.epsilon)?;
    files.push(export_g_curves(&curves, dir, cfg)?);
    Ok(FigureOutputs { files, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FiguresConfig {
        FiguresConfig {
            coalescence_points: 201,
            sweep_points: 191,
            g_values: vec![G_CODATA_2014, 7e-11],
            ..FiguresConfig::default()
        }
    }

    #[test]
    fn figures_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let out_a = run_figures(&small(), a.path()).unwrap();
        run_figures(&small(), b.path()).unwrap();
        assert_eq!(out_a.files.len(), 3 * 2 + 2 + 1);
        for f in &out_a.files {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(f).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        run_figures(&small(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("fig2_X.csv")).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# epgrav-core "));
        assert!(lines.next().unwrap().starts_with("# config: {"));
        let header = lines.next().unwrap();
        assert!(header.starts_with("alpha_in,nu_plus"));
        assert_eq!(lines.clone().count(), 201);
        let cols = header.split(',').count();
        assert!(lines.all(|l| l.split(',').count() == cols));

        let fig4 = fs::read_to_string(dir.path().join("fig4_Y.csv")).unwrap();
        let rows = fig4.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(rows, 3 * 191);
        let maxima = fig4.lines().filter(|l| l.ends_with(",true")).count();
        assert_eq!(maxima, 3);

        let fig6 = fs::read_to_string(dir.path().join("fig6.csv")).unwrap();
        assert!(fig6.contains("label,rho,G,abs_dnu_minus,in_codata_interval"));
        let json: GammaReport =
            serde_json::from_str(&fs::read_to_string(dir.path().join("fig5.json")).unwrap())
                .unwrap();
        assert_eq!(json.entries.len(), 9);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn trace_check_catches_corruption() {
        let case = CaseDefinition::preset(CaseName::X).unwrap();
        let mut r = run_coalescence(&case, &Grid::new(0.0, 400.0, 201)).unwrap();
        r.rows[3].nu_plus += 1e-6;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_coalescence(&r, dir.path(), &()),
            Err(HarnessError::Invariant(_))
        ));
    }
}
