//! Scaled spherical Bessel functions `u_n(x) = j_n(x) / x^n`, n = 0..=3.
//!
//! These are even entire functions; radial derivatives of a sine-series
//! profile are expressed through them without any `1/r` cancellation.

const SERIES_CUTOFF: f64 = 2.0;

fn double_factorial_odd(n: usize) -> f64 {
    // (2n+1)!!
    (0..=n).map(|k| (2 * k + 1) as f64).product()
}

fn series(n: usize, x: f64) -> f64 {
    let q = -0.5 * x * x;
    let mut term = 1.0 / double_factorial_odd(n);
    let mut sum = term;
    for k in 1..40 {
        term *= q / (k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `[u_0, u_1, u_2, u_3]` at `x`, given `sin x` and `cos x`.
#[inline]
pub fn scaled_spherical_bessel_sc(x: f64, s: f64, c: f64) -> [f64; 4] {
    if x.abs() < SERIES_CUTOFF {
        return [series(0, x), series(1, x), series(2, x), series(3, x)];
    }
    let x2 = x * x;
    let x3 = x2 * x;
    let u0 = s / x;
    let u1 = (s - x * c) / x3;
    let u2 = ((3.0 - x2) * s - 3.0 * x * c) / (x3 * x2);
    let u3 = ((15.0 - 6.0 * x2) * s - (15.0 * x - x3) * c) / (x3 * x3 * x);
    [u0, u1, u2, u3]
}

pub fn scaled_spherical_bessel(x: f64) -> [f64; 4] {
    let (s, c) = x.sin_cos();
    scaled_spherical_bessel_sc(x, s, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_agree_at_cutoff() {
        for &x in &[1.999_999f64, 2.000_001] {
            let closed = {
                let (s, c) = x.sin_cos();
                let x2 = x * x;
                [
                    s / x,
                    (s - x * c) / (x2 * x),
                    ((3.0 - x2) * s - 3.0 * x * c) / x.powi(5),
                    ((15.0 - 6.0 * x2) * s - (15.0 * x - x.powi(3)) * c) / x.powi(7),
                ]
            };
            for n in 0..4 {
                assert!((series(n, x) - closed[n]).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn derivative_identity() {
        // d/dx u_n = -x u_{n+1}
        for &x in &[0.3, 1.7, 2.5, 7.0] {
            let h = 1e-5;
            let up = scaled_spherical_bessel(x + h);
            let dn = scaled_spherical_bessel(x - h);
            let mid = scaled_spherical_bessel(x);
            for n in 0..3 {
                let d = (up[n] - dn[n]) / (2.0 * h);
                assert!((d + x * mid[n + 1]).abs() < 1e-8, "x={x} n={n}");
            }
        }
    }
}
