//! Small numerical helpers shared across modules.

use num_complex::Complex64;

/// Principal square root: `Re >= 0`, and `Im >= 0` when `Re == 0`.
///
/// Computed componentwise so the smaller component keeps full relative
/// accuracy. A signed zero imaginary part is treated as `+0`, so negative
/// reals map to the positive imaginary axis.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, if z.im == 0.0 { 0.0 } else { z.im });
    if x == 0.0 && y == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let t = ((x.abs() + x.hypot(y)) / 2.0).sqrt();
    if x >= 0.0 {
        Complex64::new(t, y / (2.0 * t))
    } else {
        Complex64::new(y.abs() / (2.0 * t), t.copysign(y))
    }
}

/// `s1 - s0` for two square roots whose squares differ by `square_diff`.
///
/// Uses `(s1^2 - s0^2) / (s1 + s0)` unless the sum itself cancels, which
/// avoids the catastrophic cancellation of subtracting two nearly equal roots.
pub fn root_difference(s1: Complex64, s0: Complex64, square_diff: Complex64) -> Complex64 {
    let sum = s1 + s0;
    if sum.norm() >= 0.5 * (s1.norm() + s0.norm()) && sum.norm() > 0.0 {
        square_diff / sum
    } else {
        s1 - s0
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let span = stop - start;
            let last = (n - 1) as f64;
            (0..n).map(|i| start + span * (i as f64) / last).collect()
        }
    }
}

/// `n` logarithmically spaced points from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_branch_conventions() {
        let r = principal_sqrt(Complex64::new(-4.0, 0.0));
        assert_eq!(r, Complex64::new(0.0, 2.0));
        let r = principal_sqrt(Complex64::new(-4.0, -0.0));
        assert_eq!(r, Complex64::new(0.0, 2.0));
        let r = principal_sqrt(Complex64::new(-4.0, -1e-30));
        assert!(r.re > 0.0 && r.im < 0.0);
        let r = principal_sqrt(Complex64::new(9.0, 0.0));
        assert_eq!(r, Complex64::new(3.0, 0.0));
        assert_eq!(
            principal_sqrt(Complex64::new(0.0, 0.0)),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn principal_sqrt_squares_back() {
        for &(x, y) in &[
            (1.0, 2.0),
            (-3.0, 0.5),
            (-1e-8, -7.0),
            (1e-20, 1e-3),
            (2.5, -4.0),
        ] {
            let z = Complex64::new(x, y);
            let r = principal_sqrt(z);
            assert!(r.re >= 0.0);
            assert!((r * r - z).norm() <= 1e-15 * z.norm());
        }
    }

    #[test]
    fn root_difference_matches_direct_when_well_separated() {
        let s1 = principal_sqrt(Complex64::new(4.0, 1.0));
        let s0 = principal_sqrt(Complex64::new(1.0, 0.0));
        let d = root_difference(s1, s0, Complex64::new(3.0, 1.0));
        assert!((d - (s1 - s0)).norm() < 1e-15);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v = linspace(0.0, 400.0, 2001);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1000], 200.0);
        assert_eq!(v[2000], 400.0);
        assert!(linspace(1.0, 2.0, 0).is_empty());
        let l = logspace(1e-12, 1e-9, 4);
        assert!((l[1] / 1e-11 - 1.0).abs() < 1e-12);
    }
}
