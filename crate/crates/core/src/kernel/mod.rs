//! Per-mode Volterra resolvent `G = K + K ∗ G` and its physical-space
//! assembly.

pub mod green;
pub mod lp;

use crate::dispersion::{dispersion_transform, mode_kernel};
use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::numerics::spline::{CubicSpline, LeftBoundary};
use num_complex::Complex64;
use rayon::prelude::*;

/// Growth factor over `max|K|` at which a mode is declared unstable.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Uniform times `t_n = n·dt`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(horizon >= dt) {
            return Err(Error::param("T", "horizon must be at least one step"));
        }
        Ok(Self {
            dt,
            steps: (horizon / dt).round() as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    /// Index of the grid time equal to `t`, if there is one.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let n = (t / self.dt).round();
        if n < 0.0 || n as usize > self.steps || (n * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) {
            None
        } else {
            Some(n as usize)
        }
    }
}

/// `K(t_n, ξ_i)` stored mode-major.
#[derive(Debug, Clone)]
pub struct ModeKernelTable {
    eq: Equilibrium,
    time: TimeGrid,
    modes: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

/// Frequencies `r·e₁` for a list of radii.
pub fn radial_modes(dim: usize, radii: &[f64]) -> Vec<Vec<f64>> {
    radii
        .iter()
        .map(|&r| {
            let mut xi = vec![0.0; dim];
            xi[0] = r;
            xi
        })
        .collect()
}

pub fn build_mode_kernel_table(eq: &Equilibrium, time: TimeGrid, modes: Vec<Vec<f64>>) -> Result<ModeKernelTable> {
    if modes.is_empty() {
        return Err(Error::param("xi_grid", "must be nonempty"));
    }
    if let Some(bad) = modes.iter().find(|m| m.len() != eq.dim()) {
        return Err(Error::param("xi_grid", format!("mode {bad:?} has wrong dimension")));
    }
    let values = modes
        .par_iter()
        .map(|xi| (0..time.len()).map(|n| mode_kernel(eq, time.time(n), xi)).collect())
        .collect();
    Ok(ModeKernelTable {
        eq: eq.clone(),
        time,
        modes,
        values,
    })
}

impl ModeKernelTable {
    pub fn equilibrium(&self) -> &Equilibrium {
        &self.eq
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn mode_norm(&self, i: usize) -> f64 {
        self.modes[i].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `(len(t_grid), len(ξ_grid))`.
    pub fn shape(&self) -> (usize, usize) {
        (self.time.len(), self.modes.len())
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[i][n]
    }

    pub fn mode_series(&self, i: usize) -> &[f64] {
        &self.values[i]
    }
}

/// Trapezoid product-integration solve of `G = K + K ∗ G` for one mode.
///
/// Returns `None` once `|G|` exceeds `limit`.
pub fn solve_volterra(kernel: &[f64], dt: f64, limit: f64) -> Option<Vec<f64>> {
    let n = kernel.len();
    let mut g = vec![0.0; n];
    if n == 0 {
        return Some(g);
    }
    g[0] = kernel[0];
    let diag = 1.0 - 0.5 * dt * kernel[0];
    for m in 1..n {
        let mut acc = 0.5 * kernel[m] * g[0];
        for j in 1..m {
            acc += kernel[m - j] * g[j];
        }
        g[m] = (kernel[m] + dt * acc) / diag;
        if !(g[m].abs() <= limit) {
            return None;
        }
    }
    Some(g)
}

/// Trapezoid `x(t_n) = s(t_n) + ∫₀^{t_n} k(t_n - s) x(s) ds`.
pub fn solve_volterra_forced(kernel: &[f64], forcing: &[f64], dt: f64) -> Vec<f64> {
    let n = kernel.len().min(forcing.len());
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    x[0] = forcing[0];
    let diag = 1.0 - 0.5 * dt * kernel[0];
    for m in 1..n {
        let mut acc = 0.5 * kernel[m] * x[0];
        for j in 1..m {
            acc += kernel[m - j] * x[j];
        }
        x[m] = (forcing[m] + dt * acc) / diag;
    }
    x
}

/// Trapezoid convolution `(a ∗ b)(t_n) = ∫₀^{t_n} a(t_n - s) b(s) ds`.
pub fn trapezoid_convolution(a: &[f64], b: &[f64], dt: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.5 * (a[n] * b[0] + a[0] * b[n]);
    for j in 1..n {
        acc += a[n - j] * b[j];
    }
    dt * acc
}

#[derive(Debug, Clone)]
pub struct ResolventTable {
    kernel: ModeKernelTable,
    values: Vec<Vec<f64>>,
}

pub fn solve_mode_resolvent(table: &ModeKernelTable) -> Result<ResolventTable> {
    let dt = table.time.dt;
    let values = table
        .values
        .par_iter()
        .enumerate()
        .map(|(i, k)| {
            let kmax = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if kmax == 0.0 {
                return Ok(vec![0.0; k.len()]);
            }
            let limit = DIVERGENCE_FACTOR * kmax;
            solve_volterra(k, dt, limit).ok_or(Error::UnstableMode {
                radius: table.mode_norm(i),
                limit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolventTable {
        kernel: table.clone(),
        values,
    })
}

impl ResolventTable {
    pub fn kernel(&self) -> &ModeKernelTable {
        &self.kernel
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.kernel.eq
    }

    pub fn time(&self) -> TimeGrid {
        self.kernel.time
    }

    pub fn shape(&self) -> (usize, usize) {
        self.kernel.shape()
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[i][n]
    }

    pub fn mode_series(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Largest `|G - K - K ∗ G| / max|G|` over modes and times.
    pub fn residual(&self) -> f64 {
        let dt = self.time().dt;
        self.values
            .par_iter()
            .zip(&self.kernel.values)
            .map(|(g, k)| {
                let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                (0..g.len())
                    .map(|n| (g[n] - k[n] - trapezoid_convolution(k, g, dt, n)).abs() / scale)
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Trapezoid `∫₀^T e^{-iτt} G(t, ξ_i) dt`.
    pub fn laplace(&self, i: usize, tau: Complex64) -> Complex64 {
        let time = self.time();
        let g = &self.values[i];
        let last = g.len() - 1;
        g.iter()
            .enumerate()
            .map(|(n, &v)| {
                let w = if n == 0 || n == last { 0.5 } else { 1.0 };
                let t = time.time(n);
                (Complex64::new(0.0, -t) * tau).exp() * (w * v * time.dt)
            })
            .sum()
    }

    /// Isotropic tables sampled at increasing radii: cubic spline of
    /// `G(t_n, ·)` in `|ξ|`.
    pub fn radial_profile(&self, n: usize) -> Result<RadialProfile> {
        RadialProfile::from_table(self, n)
    }
}

/// `G(t, |ξ|)` at one time, interpolated in `|ξ|`: cubic between table
/// radii, linear to zero below the first positive radius, zero above the
/// last.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    spline: CubicSpline,
    r_min: f64,
    r_max: f64,
    at_min: f64,
}

impl RadialProfile {
    fn from_table(res: &ResolventTable, n: usize) -> Result<Self> {
        if !res.equilibrium().is_isotropic() {
            return Err(Error::Configuration(
                "radial interpolation needs an isotropic equilibrium".into(),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = (0..res.shape().1)
            .map(|i| (res.kernel.mode_norm(i), res.get(n, i)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let positive: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.0 > 0.0).collect();
        if positive.len() < 2 {
            return Err(Error::Configuration("need at least two positive radii".into()));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        let r_min = x[0];
        let r_max = x[x.len() - 1];
        let at_min = y[0];
        Ok(Self {
            spline: CubicSpline::new(x, y, LeftBoundary::Natural),
            r_min,
            r_max,
            at_min,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r > self.r_max {
            0.0
        } else if r < self.r_min {
            self.at_min * r / self.r_min
        } else {
            self.spline.eval(r)
        }
    }
}

/// Default radial mode set: `{0} ∪ 2^[-8, 4]` at 16 points per octave.
pub fn default_radii() -> Vec<f64> {
    let mut r = vec![0.0];
    r.extend(crate::dispersion::log_grid(-8.0, 4.0, 16));
    r
}

/// Max relative error between the transformed resolvent and
/// `K̃ / (1 - K̃)` from the dispersion module, over `(τ, mode index)` samples.
pub fn laplace_consistency(res: &ResolventTable, samples: &[(Complex64, usize)]) -> Result<f64> {
    let eq = res.equilibrium();
    let horizon = res.time().horizon();
    let errors = samples
        .par_iter()
        .map(|&(tau, i)| -> Result<f64> {
            let xi = &res.kernel.modes[i];
            let r = res.kernel.mode_norm(i);
            if r == 0.0 {
                return Ok(0.0);
            }
            let k = dispersion_transform(eq, tau, xi, None, None)?;
            let one_minus = Complex64::new(1.0, 0.0) - k.value;
            let g = &res.values[i];
            let tail_start = (g.len() * 9) / 10;
            let late = g[tail_start..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let tail = k.tail_bound + eq.kernel_tail_bound(r, horizon) + 0.1 * horizon * late;
            if one_minus.norm() < 10.0 * tail {
                return Err(Error::Precision(format!(
                    "|1 - K~| = {:e} below ten times the tail {tail:e} at |xi| = {r}",
                    one_minus.norm()
                )));
            }
            let exact = k.value / one_minus;
            let got = res.laplace(i, tau);
            Ok(if exact.norm() == 0.0 {
                got.norm()
            } else {
                (got - exact).norm() / exact.norm()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{make_equilibrium, Family};
    use approx::assert_abs_diff_eq;

    fn maxwell() -> Equilibrium {
        make_equilibrium(Family::Maxwellian { sigma: 1.0 }, 3).unwrap()
    }

    fn table(dt: f64, horizon: f64, radii: &[f64]) -> ModeKernelTable {
        build_mode_kernel_table(&maxwell(), TimeGrid::new(dt, horizon).unwrap(), radial_modes(3, radii)).unwrap()
    }

    #[test]
    fn table_shape_and_entries() {
        let t = table(0.5, 4.0, &[0.0, 1.0, 2.0]);
        assert_eq!(t.shape(), (9, 3));
        assert!((0..9).all(|n| t.get(n, 0) == 0.0));
        assert_abs_diff_eq!(t.get(2, 1), -0.5 * (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn zero_kernel_has_zero_resolvent() {
        let res = solve_mode_resolvent(&table(0.1, 5.0, &[0.0])).unwrap();
        assert!(res.mode_series(0).iter().all(|&g| g == 0.0));
        assert_eq!(res.laplace(0, Complex64::new(0.3, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn resolvent_identity_holds_discretely() {
        let res = solve_mode_resolvent(&table(0.05, 30.0, &[0.1, 0.5, 1.0, 4.0])).unwrap();
        assert!(res.residual() < 1e-10, "residual {}", res.residual());
        assert!((0..4).all(|i| res.get(0, i) == 0.0));
    }

    #[test]
    fn three_point_neumann_series() {
        // G = Σ K^{*n}, each convolution by the same trapezoid rule
        let k = [0.0, -0.4, 0.3];
        let h = 0.5;
        let g = solve_volterra(&k, h, 1e9).unwrap();
        let mut term = k.to_vec();
        let mut total = k.to_vec();
        for _ in 0..60 {
            let next: Vec<f64> = (0..3).map(|n| trapezoid_convolution(&k, &term, h, n)).collect();
            for (t, v) in total.iter_mut().zip(&next) {
                *t += v;
            }
            term = next;
        }
        for (a, b) in g.iter().zip(&total) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn resolvent_transform_at_zero_frequency() {
        let res = solve_mode_resolvent(&table(0.02, 40.0, &[1.0])).unwrap();
        let g = res.laplace(0, Complex64::new(0.0, 0.0));
        assert!((g.re + 1.0 / 3.0).abs() < 2e-3, "{g}");
        let err = laplace_consistency(&res, &[(Complex64::new(0.0, 0.0), 0)]).unwrap();
        assert!(err < 1e-2);
    }

    #[test]
    fn laplace_error_is_second_order() {
        let err = |dt: f64| {
            let res = solve_mode_resolvent(&table(dt, 40.0, &[1.0])).unwrap();
            laplace_consistency(&res, &[(Complex64::new(0.0, 0.0), 0)]).unwrap()
        };
        let ratio = err(0.04) / err(0.02);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn zero_mode_consistency_is_exact() {
        let res = solve_mode_resolvent(&table(0.1, 10.0, &[0.0, 1.0])).unwrap();
        assert_eq!(laplace_consistency(&res, &[(Complex64::new(1.0, 0.0), 0)]).unwrap(), 0.0);
    }

    #[test]
    fn growing_kernel_is_flagged_unstable() {
        // constant positive kernel: G grows like e^{t}
        let k = vec![1.0; 2000];
        assert!(solve_volterra(&k, 0.05, 1e6).is_none());
    }

    #[test]
    fn forced_solve_matches_resolvent_formula() {
        let t = table(0.05, 20.0, &[0.7]);
        let res = solve_mode_resolvent(&t).unwrap();
        let dt = 0.05;
        let s: Vec<f64> = (0..t.time().len()).map(|n| (-(n as f64 * dt - 3.0).powi(2)).exp()).collect();
        let direct = solve_volterra_forced(t.mode_series(0), &s, dt);
        let g = res.mode_series(0);
        for n in (0..s.len()).step_by(37) {
            let via_g = s[n] + trapezoid_convolution(g, &s, dt, n);
            assert!((via_g - direct[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn time_grid_indexing() {
        let g = TimeGrid::new(0.05, 60.0).unwrap();
        assert_eq!(g.steps, 1200);
        assert_eq!(g.index_of(2.0), Some(40));
        assert_eq!(g.index_of(2.01), None);
        assert!(TimeGrid::new(0.0, 1.0).is_err());
    }
}
