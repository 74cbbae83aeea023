//! Embedded Dormand-Prince 5(4) integrator with step-size control.

use serde::{Deserialize, Serialize};

pub(crate) const DIM: usize = 8;
pub(crate) type State = [f64; DIM];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
/// Per-step tolerances are not pushed below this, which is near the rounding
/// level of a step.
const LOCAL_TOLERANCE_FLOOR: f64 = 1e-15;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Largest accepted error estimate relative to its per-step budget.
    pub max_error_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepFailure {
    Underflow { t: f64, h: f64 },
    StepLimit { t: f64 },
    Blowup { t: f64, magnitude: f64 },
}

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        for i in 0..DIM {
            out[i] += h * coef * k[i];
        }
    }
    out
}

/// Error norm on complex amplitudes stored as consecutive (re, im) pairs.
///
/// Each amplitude is weighted by `tol * max(|z_old|, |z_new|, floor)` where the
/// floor is `1e-3` of the largest amplitude, so an amplitude passing through
/// zero does not force needlessly small steps.
fn error_ratio(err: &State, y0: &State, y1: &State, tol: f64) -> f64 {
    let modulus = |y: &State, m: usize| y[2 * m].hypot(y[2 * m + 1]);
    let largest = (0..DIM / 2)
        .map(|m| modulus(y0, m).max(modulus(y1, m)))
        .fold(0.0, f64::max);
    let floor = (1e-3 * largest).max(1e-300);
    (0..DIM / 2)
        .map(|m| {
            let scale = tol * modulus(y0, m).max(modulus(y1, m)).max(floor);
            err[2 * m].hypot(err[2 * m + 1]) / scale
        })
        .fold(0.0, f64::max)
}

pub(crate) struct Integrator<F: Fn(f64, &State) -> State> {
    rhs: F,
    tol: f64,
    span: f64,
    guard: f64,
    max_steps: usize,
    pub(crate) stats: IntegratorStats,
    h: f64,
    fsal: Option<State>,
}

impl<F: Fn(f64, &State) -> State> Integrator<F> {
    /// Error is controlled per unit step: a step of length `h` may commit a
    /// local error of `tol * h / span`, so the local errors over the whole
    /// `span` sum to at most `tol`.
    pub(crate) fn new(rhs: F, tol: f64, span: f64, guard: f64, max_steps: usize, h0: f64) -> Self {
        Integrator {
            rhs,
            tol,
            span,
            guard,
            max_steps,
            stats: IntegratorStats::default(),
            h: h0,
            fsal: None,
        }
    }

    fn eval(&mut self, t: f64, y: &State) -> State {
        self.stats.rhs_evaluations += 1;
        (self.rhs)(t, y)
    }

    /// Advance `y` from `t` to exactly `t_target`.
    pub(crate) fn advance(
        &mut self,
        t: &mut f64,
        y: &mut State,
        t_target: f64,
    ) -> Result<(), StepFailure> {
        while *t < t_target {
            let remaining = t_target - *t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            if h <= 1e-13 * t.abs().max(1.0) && !clipped {
                return Err(StepFailure::Underflow { t: *t, h });
            }
            if self.stats.accepted_steps + self.stats.rejected_steps >= self.max_steps {
                return Err(StepFailure::StepLimit { t: *t });
            }

            let k1 = match self.fsal {
                Some(k) => k,
                None => self.eval(*t, y),
            };
            let k2 = self.eval(*t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
            let k3 = self.eval(*t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = self.eval(
                *t + C4 * h,
                &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = self.eval(
                *t + C5 * h,
                &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = self.eval(
                *t + h,
                &axpy(
                    y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = axpy(
                y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = self.eval(*t + h, &y_new);

            let mut err = [0.0; DIM];
            for i in 0..DIM {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let local_tol = (self.tol * (h / self.span).min(1.0)).max(LOCAL_TOLERANCE_FLOOR);
            let ratio = error_ratio(&err, y, &y_new, local_tol);
            // err ~ h^5 against a budget ~ h, hence the 1/4 exponent.
            let factor = if ratio == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * ratio.powf(-0.25)).clamp(MIN_FACTOR, MAX_FACTOR)
            };

            if ratio <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                self.stats.accepted_steps += 1;
                self.stats.max_error_ratio = self.stats.max_error_ratio.max(ratio);
                *t = if clipped { t_target } else { *t + h };
                *y = y_new;
                self.fsal = Some(k7);
                // A step shortened to hit a sample time says nothing about the
                // natural step size, so only shrink on its account.
                let proposed = h * factor;
                self.h = if clipped {
                    self.h.min(proposed.max(self.h))
                } else {
                    proposed
                };
                let magnitude = (0..DIM / 2)
                    .map(|m| y[2 * m].hypot(y[2 * m + 1]))
                    .fold(0.0, f64::max);
                if magnitude > self.guard {
                    return Err(StepFailure::Blowup { t: *t, magnitude });
                }
            } else {
                self.stats.rejected_steps += 1;
                self.h = h * if ratio.is_finite() {
                    factor.min(1.0)
                } else {
                    MIN_FACTOR
                };
                self.fsal = Some(k1);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifth_order_convergence_on_rotation() {
        // z' = -i z on the first amplitude; exact solution e^{-i t}.
        let rhs = |_t: f64, y: &State| {
            let mut d = [0.0; DIM];
            d[0] = y[1];
            d[1] = -y[0];
            d
        };
        let mut y = [0.0; DIM];
        y[0] = 1.0;
        let mut t = 0.0;
        let mut integ = Integrator::new(rhs, 1e-11, 10.0, 1e12, 1_000_000, 0.01);
        integ.advance(&mut t, &mut y, 10.0).unwrap();
        assert_eq!(t, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
        assert!(integ.stats.max_error_ratio <= 1.0);
    }

    #[test]
    fn blowup_is_reported() {
        let rhs = |_t: f64, y: &State| {
            let mut d = [0.0; DIM];
            d[0] = y[0] * y[0];
            d
        };
        let mut y = [0.0; DIM];
        y[0] = 1.0;
        let mut t = 0.0;
        let mut integ = Integrator::new(rhs, 1e-8, 2.0, 1e6, 1_000_000, 0.01);
        let err = integ.advance(&mut t, &mut y, 2.0).unwrap_err();
        assert!(matches!(
            err,
            StepFailure::Blowup { .. } | StepFailure::Underflow { .. }
        ));
    }
}
