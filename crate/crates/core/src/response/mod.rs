//! Linear response `ρ = S + ∫G(t−s)⋆S(s)ds` and the nonlinear bootstrap.
//!
//! The engine is radial in three dimensions. With a Maxwellian background
//! and a Gaussian datum every stage commutes with rotations, so `ρ`, `S`
//! and the potential are functions of `(t, |x|)` and the field is
//! `E = e(t, r)·x/r`. Histories hold samples on a [`RadialGrid`] together
//! with their spectral values; derivatives come from the spectrum.

pub mod bootstrap;
pub mod forcing;

pub use bootstrap::{bootstrap_run, BootstrapOptions, BootstrapRun, BootstrapState};
pub use forcing::{assemble_forcing, bilinear_reaction, initial_term, ForcingDecomposition, ForcingOptions};

use crate::characteristics::VectorField;
use crate::error::{Error, Result};
use crate::kernel::{build_mode_kernel_table, radial_modes, solve_mode_resolvent, ResolventTable, TimeGrid};
use crate::equilibria::Equilibrium;
use crate::numerics::bracket;
use crate::numerics::radial::RadialGrid;
use rayon::prelude::*;
use std::sync::Arc;

/// Space dimension of the radial engine.
pub const DIM: usize = 3;

/// Relative tolerance when matching time grids and wavenumbers.
const GRID_MATCH: f64 = 1e-9;

fn check_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must be nonempty"));
    }
    if !t_grid.iter().all(|t| t.is_finite() && *t >= 0.0) {
        return Err(Error::param("t_grid", "times must be finite and non-negative"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("t_grid", "times must increase"));
    }
    Ok(())
}

/// Uniform times `0, dt, …` up to `horizon`.
pub fn uniform_times(dt: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::param("dt", "need dt > 0 and horizon >= 0"));
    }
    let steps = (horizon / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|n| n as f64 * dt).collect())
}

/// Radial samples `f(t_n, r_j)` with spectral values `F(t_n, k_m)`.
///
/// The sample at `r = 0` is the one implied by the spectrum, so values and
/// spectra always describe the same function.
#[derive(Clone)]
pub struct DensityHistory {
    t_grid: Vec<f64>,
    grid: Arc<RadialGrid>,
    values: Vec<Vec<f64>>,
    spectra: Vec<Vec<f64>>,
}

impl std::fmt::Debug for DensityHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityHistory")
            .field("times", &self.t_grid.len())
            .field("radii", &self.grid.len())
            .field("dr", &self.grid.dr())
            .finish()
    }
}

impl DensityHistory {
    pub fn from_values(t_grid: Vec<f64>, grid: Arc<RadialGrid>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_time_grid(&t_grid)?;
        if values.len() != t_grid.len() || values.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::param("values", "shape differs from (t_grid, x_grid)"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "must be finite"));
        }
        let spectra: Vec<Vec<f64>> = values.par_iter().map(|v| grid.forward(v)).collect();
        Self::from_spectra(t_grid, grid, spectra)
    }

    pub fn from_spectra(t_grid: Vec<f64>, grid: Arc<RadialGrid>, spectra: Vec<Vec<f64>>) -> Result<Self> {
        check_time_grid(&t_grid)?;
        if spectra.len() != t_grid.len() || spectra.iter().any(|v| v.len() + 1 != grid.len()) {
            return Err(Error::param("spectra", "shape differs from (t_grid, xi_grid)"));
        }
        let values = spectra.par_iter().map(|s| grid.inverse(s)).collect();
        Ok(Self {
            t_grid,
            grid,
            values,
            spectra,
        })
    }

    pub fn zeros(t_grid: Vec<f64>, grid: Arc<RadialGrid>) -> Result<Self> {
        let spectra = vec![vec![0.0; grid.len() - 1]; t_grid.len()];
        Self::from_spectra(t_grid, grid, spectra)
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn values(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn spectrum(&self, n: usize) -> &[f64] {
        &self.spectra[n]
    }

    /// `max |f − inverse(forward(f))|` over the history.
    pub fn round_trip_error(&self) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let back = self.grid.inverse(&self.grid.forward(v));
                back.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `(‖∇ᵏf(t_n)‖_{L¹}, ‖∇ᵏf(t_n)‖_{L^∞})` for `k ≤ k_max`.
    pub fn norms(&self, n: usize, k_max: usize) -> Vec<(f64, f64)> {
        self.grid.norms(&self.spectra[n], k_max)
    }

    /// `max_{k ≤ k_max} ⟨t⟩ᵏ‖∇ᵏf‖_{L¹} + ⟨t⟩^{3+k}‖∇ᵏf‖_{L^∞}` at `t_n`.
    pub fn weighted(&self, n: usize, k_max: usize) -> f64 {
        let b = bracket(self.t_grid[n]);
        self.norms(n, k_max)
            .iter()
            .enumerate()
            .map(|(k, (l1, linf))| b.powi(k as i32) * l1 + b.powi((DIM + k) as i32) * linf)
            .fold(0.0, f64::max)
    }

    /// Running supremum of [`Self::weighted`]: the `Y_t^N` ledger.
    pub fn ledger(&self, k_max: usize) -> Vec<f64> {
        running_max((0..self.len()).map(|n| self.weighted(n, k_max)))
    }

    /// Running supremum of `weighted/log(2+t)`: the bootstrap ledger `N(t)`.
    pub fn log_ledger(&self, k_max: usize) -> Vec<f64> {
        running_max((0..self.len()).map(|n| self.weighted(n, k_max) / (2.0 + self.t_grid[n]).ln()))
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        if self.t_grid != other.t_grid || self.grid.len() != other.grid.len() || self.grid.dr() != other.grid.dr() {
            return Err(Error::Configuration("histories live on different grids".into()));
        }
        let spectra = self
            .spectra
            .iter()
            .zip(&other.spectra)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + sign * y).collect())
            .collect();
        Self::from_spectra(self.t_grid.clone(), self.grid.clone(), spectra)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        let spectra = self.spectra.iter().map(|s| s.iter().map(|v| c * v).collect()).collect();
        Self::from_spectra(self.t_grid.clone(), self.grid.clone(), spectra).expect("same shape")
    }
}

fn running_max(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut best = 0.0f64;
    values
        .map(|v| {
            best = best.max(v);
            best
        })
        .collect()
}

/// Radial field `E(t, x) = e(t, |x|)·x/|x|` from a potential,
/// `e = −∂_r φ`. Cubic in `t` and clamped outside the time grid, cubic in
/// `r`, zero beyond the radial grid.
#[derive(Clone)]
pub struct RadialField {
    t_grid: Vec<f64>,
    grid: Arc<RadialGrid>,
    /// `φ̂(t_n, k_m)`
    potential: Vec<Vec<f64>>,
    /// `e(t_n, r_j)`
    radial: Vec<Vec<f64>>,
    zero: bool,
}

impl std::fmt::Debug for RadialField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialField")
            .field("times", &self.t_grid.len())
            .field("radii", &self.grid.len())
            .field("zero", &self.zero)
            .finish()
    }
}

impl RadialField {
    pub fn from_potential(t_grid: Vec<f64>, grid: Arc<RadialGrid>, potential: Vec<Vec<f64>>) -> Result<Self> {
        check_time_grid(&t_grid)?;
        if potential.len() != t_grid.len() || potential.iter().any(|p| p.len() + 1 != grid.len()) {
            return Err(Error::param("potential", "shape differs from (t_grid, xi_grid)"));
        }
        let radial = potential
            .par_iter()
            .map(|p| grid.jet(p).d1.iter().map(|v| -v).collect())
            .collect();
        let zero = potential.iter().flatten().all(|v| *v == 0.0);
        Ok(Self {
            t_grid,
            grid,
            potential,
            radial,
            zero,
        })
    }

    pub fn zero(t_grid: Vec<f64>, grid: Arc<RadialGrid>) -> Result<Self> {
        let potential = vec![vec![0.0; grid.len() - 1]; t_grid.len()];
        Self::from_potential(t_grid, grid, potential)
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// `e(t_n, r_j)`.
    pub fn radial_values(&self, n: usize) -> &[f64] {
        &self.radial[n]
    }

    pub fn potential_spectrum(&self, n: usize) -> &[f64] {
        &self.potential[n]
    }

    /// First level and weights of the interpolant in time: cubic Lagrange
    /// on four levels, linear on shorter grids, clamped outside.
    fn time_weights(&self, t: f64) -> (usize, [f64; 4], usize) {
        let g = &self.t_grid;
        let n = g.len();
        if n == 1 {
            return (0, [1.0, 0.0, 0.0, 0.0], 1);
        }
        let t = t.clamp(g[0], g[n - 1]);
        let i = (g.partition_point(|&s| s <= t).max(1) - 1).min(n - 2);
        if n < 4 {
            let th = (t - g[i]) / (g[i + 1] - g[i]);
            return (i, [1.0 - th, th, 0.0, 0.0], 2);
        }
        let lo = i.saturating_sub(1).min(n - 4);
        let mut w = [1.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    w[a] *= (t - g[lo + b]) / (g[lo + a] - g[lo + b]);
                }
            }
        }
        (lo, w, 4)
    }

    /// `φ̂(t, ·)` interpolated the same way as the field.
    pub fn potential_at(&self, t: f64) -> Vec<f64> {
        let (lo, w, count) = self.time_weights(t);
        let mut out = vec![0.0; self.potential[0].len()];
        for a in 0..count {
            for (o, p) in out.iter_mut().zip(&self.potential[lo + a]) {
                *o += w[a] * p;
            }
        }
        out
    }

    fn radial_at_level(&self, n: usize, r: f64) -> f64 {
        let e = &self.radial[n];
        let dr = self.grid.dr();
        let u = r / dr;
        let j = u.floor() as isize;
        if j + 2 >= e.len() as isize {
            return 0.0;
        }
        let f = u - j as f64;
        // odd reflection through the origin
        let at = |i: isize| if i < 0 { -e[(-i) as usize] } else { e[i as usize] };
        let (p0, p1, p2, p3) = (at(j - 1), at(j), at(j + 1), at(j + 2));
        let c0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let c2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let c3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        c0 * p0 + c1 * p1 + c2 * p2 + c3 * p3
    }

    /// `e(t, r)`.
    pub fn radial(&self, t: f64, r: f64) -> f64 {
        if self.zero {
            return 0.0;
        }
        let (lo, w, count) = self.time_weights(t);
        (0..count).map(|a| w[a] * self.radial_at_level(lo + a, r)).sum()
    }

    /// `(‖∇ᵏE(t_n)‖_{L¹}, ‖∇ᵏE(t_n)‖_{L^∞})`, `k ≤ k_max ≤ 2`, from
    /// `∇ᵏE = −∇^{k+1}φ`.
    pub fn norms(&self, n: usize, k_max: usize) -> Vec<(f64, f64)> {
        self.grid.norms(&self.potential[n], k_max + 1)[1..].to_vec()
    }
}

impl VectorField for RadialField {
    fn dim(&self) -> usize {
        DIM
    }

    fn eval(&self, t: f64, x: &[f64]) -> [f64; 3] {
        if self.zero {
            return [0.0; 3];
        }
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 {
            return [0.0; 3];
        }
        let e = self.radial(t, r) / r;
        [e * x[0], e * x[1], e * x[2]]
    }
}

/// `Ê(t, ξ) = −iξ ρ̂(t, ξ)/(1 + |ξ|²)`, i.e. `φ̂ = ρ̂/(1 + k²)`.
pub fn field_from_density(rho: &DensityHistory) -> Result<RadialField> {
    let ks = rho.grid.wavenumbers();
    let potential = rho
        .spectra
        .iter()
        .map(|s| s.iter().zip(&ks).map(|(v, k)| v / (1.0 + k * k)).collect())
        .collect();
    RadialField::from_potential(rho.t_grid.clone(), rho.grid.clone(), potential)
}

/// Resolvent on the wavenumbers of `grid`, the layout
/// [`linear_response`] expects.
pub fn response_resolvent(eq: &Equilibrium, grid: &RadialGrid, dt: f64, horizon: f64) -> Result<ResolventTable> {
    if eq.dim() != DIM || !eq.is_isotropic() {
        return Err(Error::Capability("the radial engine needs an isotropic equilibrium in d = 3".into()));
    }
    let table = build_mode_kernel_table(eq, TimeGrid::new(dt, horizon)?, radial_modes(DIM, &grid.wavenumbers()))?;
    solve_mode_resolvent(&table)
}

/// Cubic Lagrange interpolation of uniform samples `y` at fractional index
/// `u`, with the stencil shifted inside at the ends.
fn lagrange_uniform(y: &[f64], u: f64) -> f64 {
    let n = y.len();
    if n == 1 {
        return y[0];
    }
    if n < 4 {
        let i = (u.floor() as usize).min(n - 2);
        let f = u - i as f64;
        return (1.0 - f) * y[i] + f * y[i + 1];
    }
    let i = (u.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let f = u - i as f64;
    let c0 = -(f - 1.0) * (f - 2.0) * (f - 3.0) / 6.0;
    let c1 = f * (f - 2.0) * (f - 3.0) / 2.0;
    let c2 = -f * (f - 1.0) * (f - 3.0) / 2.0;
    let c3 = f * (f - 1.0) * (f - 2.0) / 6.0;
    c0 * y[i] + c1 * y[i + 1] + c2 * y[i + 2] + c3 * y[i + 3]
}

/// Per mode, `ρ̂(t_n) = Ŝ(t_n) + Σ trapezoid Ĝ(t_n − s)Ŝ(s)` on the
/// resolvent's time step, with `Ŝ` interpolated in time when the history
/// is coarser.
pub fn linear_response(s: &DensityHistory, res: &ResolventTable) -> Result<DensityHistory> {
    let time = res.time();
    let dt = time.dt;
    let t = &s.t_grid;
    if t[0].abs() > GRID_MATCH {
        return Err(Error::Configuration("forcing history must start at t = 0".into()));
    }
    let m = if t.len() > 1 {
        let coarse = t[1] - t[0];
        if t.windows(2).any(|w| ((w[1] - w[0]) - coarse).abs() > GRID_MATCH * coarse.max(1.0)) {
            return Err(Error::Configuration("forcing history must be uniform in time".into()));
        }
        let ratio = coarse / dt;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-6 {
            return Err(Error::Configuration(format!(
                "forcing step {coarse} is not a multiple of the resolvent step {dt}"
            )));
        }
        m as usize
    } else {
        1
    };
    let last_fine = (t.len() - 1) * m;
    if last_fine >= time.len() {
        return Err(Error::Configuration(format!(
            "resolvent horizon {} is shorter than the forcing horizon {}",
            time.horizon(),
            t[t.len() - 1]
        )));
    }
    let ks = s.grid.wavenumbers();
    let (_, modes) = res.shape();
    if modes != ks.len() {
        return Err(Error::Configuration(format!(
            "resolvent has {modes} modes, the history has {} wavenumbers",
            ks.len()
        )));
    }
    for (i, &k) in ks.iter().enumerate() {
        let r = res.kernel().mode_norm(i);
        if (r - k).abs() > GRID_MATCH * k {
            return Err(Error::Configuration(format!("resolvent mode {i} has |xi| = {r}, expected {k}")));
        }
    }
    let per_mode: Vec<Vec<f64>> = (0..modes)
        .into_par_iter()
        .map(|i| {
            let g = res.mode_series(i);
            let coarse_vals: Vec<f64> = s.spectra.iter().map(|sp| sp[i]).collect();
            let fine: Vec<f64> = if m == 1 {
                coarse_vals.clone()
            } else {
                (0..=last_fine)
                    .map(|n| lagrange_uniform(&coarse_vals, n as f64 / m as f64))
                    .collect()
            };
            (0..t.len())
                .map(|c| {
                    let n = c * m;
                    if n == 0 {
                        return fine[0];
                    }
                    let mut acc = 0.5 * (g[n] * fine[0] + g[0] * fine[n]);
                    for j in 1..n {
                        acc += g[n - j] * fine[j];
                    }
                    fine[n] + dt * acc
                })
                .collect()
        })
        .collect();
    let spectra = (0..t.len()).map(|c| per_mode.iter().map(|v| v[c]).collect()).collect();
    DensityHistory::from_spectra(t.clone(), s.grid.clone(), spectra)
}
