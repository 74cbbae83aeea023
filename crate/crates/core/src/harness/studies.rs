use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CaseDefinition, CaseName, Grid, HarnessError, DEFAULT_POINTS, DEFAULT_WINDOW};
use crate::gravity::{
    frequency_shift, gravitational_force, hierarchy_bound, shift_at_ep, shift_closed_form,
    shift_magnitude_pre_contact, shift_magnitude_vs_g, SourceSphere, G_CODATA_2014,
    G_CODATA_2014_SIGMA,
};
use crate::spectra::{
    eigenvalues_degenerate, track_spectra, ReorderKind, ReorderingEvent, SupermodeSpectrum,
};

/// Reference densities (kg/m^3): stainless steel, lead, tungsten.
pub const DENSITY_PRESETS: [(&str, f64); 3] =
    [("steel", 9.8e3), ("lead", 11.3e3), ("tungsten", 19.35e3)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha_in: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub ups_plus: f64,
    pub ups_minus: f64,
    /// Whether the continuity-tracked branch `a` holds `tau_plus` here.
    pub a_is_plus: bool,
    /// `(dnu_plus, dnu_minus)` for each requested shift, in request order.
    pub shifts: Vec<(f64, f64)>,
}

/// Grid point where `|dnu_minus|` is largest for one shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub delta_omega: f64,
    pub index: usize,
    pub alpha_in: f64,
    pub dnu_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub case: CaseDefinition,
    pub grid: Grid,
    pub delta_omegas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub events: Vec<ReorderingEvent>,
    /// Grid node nearest to `alpha_ep`.
    pub ep_index: usize,
    pub extrema: Vec<Extremum>,
}

impl SweepResult {
    pub fn spectrum(&self, i: usize) -> SupermodeSpectrum {
        eigenvalues_degenerate(&self.case.params(self.rows[i].alpha_in))
            .expect("validated during the sweep")
    }
}

fn sweep(
    case: &CaseDefinition,
    grid: &Grid,
    delta_omegas: &[f64],
) -> Result<SweepResult, HarnessError> {
    case.verify()?;
    grid.check_spans(case.alpha_ep)?;
    for &dw in delta_omegas {
        if dw == 0.0 || !dw.is_finite() || dw.abs() >= 1.0 {
            return Err(HarnessError::InvalidInput {
                field: "delta_omega",
                value: dw,
                requirement: "nonzero, finite and below omega_r in magnitude",
            });
        }
    }
    let alphas = grid.values();
    let spectra = alphas
        .iter()
        .map(|&a| eigenvalues_degenerate(&case.params(a)))
        .collect::<Result<Vec<_>, _>>()?;
    let tracks = track_spectra(&spectra)?;

    let shifts: Vec<Vec<(f64, f64)>> = delta_omegas
        .par_iter()
        .map(|&dw| {
            alphas
                .iter()
                .map(|&a| shift_closed_form(&case.params(a), dw))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let rows = alphas
        .iter()
        .zip(&spectra)
        .enumerate()
        .map(|(i, (&alpha_in, s))| SweepRow {
            alpha_in,
            nu_plus: s.nu_plus,
            nu_minus: s.nu_minus,
            ups_plus: s.ups_plus,
            ups_minus: s.ups_minus,
            a_is_plus: tracks.a_is_plus[i],
            shifts: shifts.iter().map(|col| col[i]).collect(),
        })
        .collect::<Vec<_>>();

    let extrema = delta_omegas
        .iter()
        .zip(&shifts)
        .map(|(&delta_omega, col)| {
            let mut index = 0;
            for (i, v) in col.iter().enumerate() {
                if v.1.abs() > col[index].1.abs() {
                    index = i;
                }
            }
            Extremum {
                delta_omega,
                index,
                alpha_in: alphas[index],
                dnu_minus: col[index].1,
            }
        })
        .collect();

    Ok(SweepResult {
        case: *case,
        grid: *grid,
        delta_omegas: delta_omegas.to_vec(),
        rows,
        events: tracks.events,
        ep_index: grid.nearest_index(case.alpha_ep),
        extrema,
    })
}

/// Supermode spectrum across the grid, with the coalescence, regime-split
/// and single-reordering invariants verified.
pub fn run_coalescence(case: &CaseDefinition, grid: &Grid) -> Result<SweepResult, HarnessError> {
    let result = sweep(case, grid, &[])?;
    let gaps: Vec<f64> = (0..result.rows.len())
        .map(|i| {
            let r = &result.rows[i];
            (r.nu_plus - r.nu_minus).hypot(r.ups_plus - r.ups_minus)
        })
        .collect();
    let min_gap = gaps
        .iter()
        .enumerate()
        .fold(0, |best, (i, g)| if *g < gaps[best] { i } else { best });
    // With the EP strictly between nodes the two neighbours can tie.
    if min_gap.abs_diff(result.ep_index) > 1 {
        return Err(HarnessError::Invariant(format!(
            "smallest eigenvalue gap at index {min_gap}, EP nearest index {}",
            result.ep_index
        )));
    }
    let near_ep = 1e-9 * case.alpha_ep;
    for r in &result.rows {
        if r.alpha_in < case.alpha_ep - near_ep && r.ups_plus != r.ups_minus {
            return Err(HarnessError::Invariant(format!(
                "dissipation rates differ below the EP at alpha_in = {}",
                r.alpha_in
            )));
        }
        if r.alpha_in > case.alpha_ep + near_ep && r.nu_plus != r.nu_minus {
            return Err(HarnessError::Invariant(format!(
                "frequencies differ above the EP at alpha_in = {}",
                r.alpha_in
            )));
        }
    }
    let branch_points = result
        .events
        .iter()
        .filter(|e| e.kind == ReorderKind::BranchPoint)
        .count();
    if result.events.len() > 1 || branch_points != result.events.len() {
        return Err(HarnessError::Invariant(format!(
            "expected at most one branch-point reordering, found {:?}",
            result.events
        )));
    }
    Ok(result)
}

/// Eigenfrequency shifts across the grid for each `delta_omega`, flagging the
/// drive amplitude of largest `|dnu_minus|`.
pub fn run_shift_sweep(
    case: &CaseDefinition,
    delta_omegas: &[f64],
    grid: &Grid,
) -> Result<SweepResult, HarnessError> {
    sweep(case, grid, delta_omegas)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub case: CaseName,
    pub delta_omega: f64,
    /// `|dnu_minus|` at the exact `alpha_ep` over its minimum on the window.
    pub gamma: f64,
    pub dnu_minus_ep: f64,
    pub dnu_minus_min: f64,
    pub alpha_at_min: f64,
    pub alpha_ep: f64,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    /// Window as multiples of `alpha_ep` over which the minimum is taken.
    pub window: (f64, f64),
    pub points: usize,
    pub entries: Vec<GammaEntry>,
}

impl GammaReport {
    /// Whether, within each case, the ratio strictly grows as `|delta_omega|`
    /// shrinks.
    pub fn monotone_by_case(&self) -> Vec<(CaseName, bool)> {
        let mut names: Vec<CaseName> = self.entries.iter().map(|e| e.case).collect();
        names.dedup();
        names
            .into_iter()
            .map(|name| {
                let mut rows: Vec<&GammaEntry> =
                    self.entries.iter().filter(|e| e.case == name).collect();
                rows.sort_by(|a, b| a.delta_omega.abs().total_cmp(&b.delta_omega.abs()));
                let ok = rows.windows(2).all(|w| w[0].gamma > w[1].gamma);
                (name, ok)
            })
            .collect()
    }

    pub fn check_monotone(&self) -> Result<(), HarnessError> {
        for (name, ok) in self.monotone_by_case() {
            if !ok {
                return Err(HarnessError::Invariant(format!(
                    "ratio not strictly decreasing in |delta_omega| for case {}",
                    name.label()
                )));
            }
        }
        Ok(())
    }
}

/// Ratio study over the default window `[0.1, 2] alpha_ep` with 2001 points.
pub fn run_gamma_study(
    cases: &[CaseDefinition],
    delta_omegas: &[f64],
) -> Result<GammaReport, HarnessError> {
    run_gamma_study_on(cases, delta_omegas, DEFAULT_WINDOW, DEFAULT_POINTS)
}

pub fn run_gamma_study_on(
    cases: &[CaseDefinition],
    delta_omegas: &[f64],
    window: (f64, f64),
    points: usize,
) -> Result<GammaReport, HarnessError> {
    let jobs: Vec<(CaseDefinition, f64)> = cases
        .iter()
        .flat_map(|c| delta_omegas.iter().map(move |&dw| (*c, dw)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|(case, dw)| {
            let grid = Grid::window(case, window.0, window.1, points);
            let result = sweep(case, &grid, &[*dw])?;
            let (_, at_ep) = shift_closed_form(&case.params(case.alpha_ep), *dw)?;
            let (mut min_i, mut min_v) = (0, f64::INFINITY);
            for (i, r) in result.rows.iter().enumerate() {
                if r.shifts[0].1.abs() < min_v {
                    min_i = i;
                    min_v = r.shifts[0].1.abs();
                }
            }
            Ok(GammaEntry {
                case: case.name,
                delta_omega: *dw,
                gamma: at_ep.abs() / min_v,
                dnu_minus_ep: at_ep,
                dnu_minus_min: result.rows[min_i].shifts[0].1,
                alpha_at_min: result.rows[min_i].alpha_in,
                alpha_ep: case.alpha_ep,
                grid,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(GammaReport {
        window,
        points,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCurveRow {
    pub label: String,
    pub rho: f64,
    pub big_g: f64,
    pub abs_dnu_minus: f64,
    pub in_codata_interval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCurves {
    pub omega_r: f64,
    pub epsilon: f64,
    pub codata_g: f64,
    pub codata_sigma: f64,
    pub rows: Vec<GCurveRow>,
}

/// `|dnu_minus|(G)` in the contact limit for each density, ordered by
/// density label then `G`.
pub fn run_g_curves(
    densities: &[(String, f64)],
    g_values: &[f64],
    omega_r: f64,
    epsilon: f64,
) -> Result<GCurves, HarnessError> {
    let mut rows = Vec::with_capacity(densities.len() * g_values.len());
    for (label, rho) in densities {
        for &g in g_values {
            rows.push(GCurveRow {
                label: label.clone(),
                rho: *rho,
                big_g: g,
                abs_dnu_minus: shift_magnitude_vs_g(g, *rho, omega_r, epsilon)?,
                in_codata_interval: (g - G_CODATA_2014).abs() <= G_CODATA_2014_SIGMA,
            });
        }
    }
    Ok(GCurves {
        omega_r,
        epsilon,
        codata_g: G_CODATA_2014,
        codata_sigma: G_CODATA_2014_SIGMA,
        rows,
    })
}

/// Single-shot summary of a source sphere acting on the two membranes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityReport {
    pub mass: f64,
    pub force_2: f64,
    pub delta_omega_1: f64,
    pub delta_omega_2: f64,
    /// `(a_2/a_1)^3`, the relative size of the neglected shift.
    pub hierarchy_bound: f64,
    /// `(dnu_plus, dnu_minus)` at the EP for `delta_omega_2`.
    pub dnu_at_ep: (f64, f64),
    /// `|dnu_minus|` from the sphere's mass and distance.
    pub abs_dnu_minus: f64,
}

pub fn gravity_report(
    sphere: &SourceSphere,
    omega_r: f64,
    epsilon: f64,
    big_g: f64,
) -> Result<GravityReport, HarnessError> {
    let delta_omega_2 = frequency_shift(sphere, omega_r, 2, big_g)?;
    Ok(GravityReport {
        mass: sphere.mass(),
        force_2: gravitational_force(sphere, 2, big_g)?,
        delta_omega_1: frequency_shift(sphere, omega_r, 1, big_g)?,
        delta_omega_2,
        hierarchy_bound: hierarchy_bound(sphere),
        dnu_at_ep: shift_at_ep(epsilon, delta_omega_2)?,
        abs_dnu_minus: shift_magnitude_pre_contact(
            big_g,
            sphere.mass(),
            sphere.a2,
            omega_r,
            epsilon,
        )?,
    })
}
