//! The forcing `S = I + R_L − R_NL` along the flow of a radial field.
//!
//! `I` is split as the free density plus the flowed correction
//! `∫ f₀(X_{0,t}, V_{0,t}) − f₀(x − tv, v) dv`, so it equals the free
//! density exactly when the field vanishes. `T = R_L − R_NL` is one
//! integrand difference on shared `(s, v)` nodes. Both corrections are
//! sampled at `r = ⟨t⟩u` and splined onto the history grid.

use super::{check_time_grid, DensityHistory, RadialField, DIM};
use crate::characteristics::{flow_tracer, CharacteristicsSolution, SolveOptions, VectorField};
use crate::equilibria::{Equilibrium, Family};
use crate::error::{Error, Result};
use crate::numerics::bracket;
use crate::numerics::quadrature::{gauss_legendre, CompositeRule};
use crate::numerics::radial::RadialGrid;
use crate::numerics::spline::{CubicSpline, LeftBoundary};
use crate::transport::{free_density_partial, InitialDatum, Profile};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// Longest radial velocity panel in units of the Maxwellian width.
const PANEL_CAP: f64 = 1.5;

/// Ledger entries above this are reported as an instability.
pub const INSTABILITY_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingOptions {
    pub solve: SolveOptions,
    /// Radii `r = ⟨t⟩u` at which the flowed corrections are computed.
    pub radial_samples: usize,
    /// Largest `u`; corrections vanish beyond it.
    pub sample_extent: f64,
    /// Gauss–Legendre nodes in the polar angle of `v`.
    pub v_angles: usize,
    /// Gauss–Legendre nodes per radial panel of `v`.
    pub v_per_panel: usize,
    /// Velocity cutoff in units of the Maxwellian width.
    pub v_extent: f64,
    /// Highest derivative order `N` in the ledgers.
    pub ledger_order: usize,
}

impl Default for ForcingOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions {
                k_max: 0,
                ..SolveOptions::default()
            },
            radial_samples: 16,
            sample_extent: 6.0,
            v_angles: 8,
            v_per_panel: 4,
            v_extent: 8.0,
            ledger_order: 2,
        }
    }
}

impl ForcingOptions {
    fn validate(&self) -> Result<()> {
        if self.radial_samples < 4 || !(self.sample_extent > 0.0) {
            return Err(Error::param("radial_samples", "need at least 4 samples on a positive extent"));
        }
        if self.v_angles == 0 || self.v_per_panel == 0 || !(self.v_extent > 0.0) {
            return Err(Error::param("v_quadrature", "need positive node counts and extent"));
        }
        if self.ledger_order > 2 {
            return Err(Error::param("ledger_order", "at most 2 supported"));
        }
        Ok(())
    }
}

/// Velocity nodes in the plane `v₃ = 0` with weights that integrate
/// functions invariant under rotations about `e₁` over all of `ℝ³`.
///
/// Spherical shells around `c·e₁`, `c = tr/(1+t²)`, where the free-streamed
/// datum concentrates with width `1/⟨t⟩`; shell panels double outward,
/// capped relative to that width near the centre and to the Maxwellian
/// width beyond.
struct VelocityNodes {
    v: Vec<[f64; 3]>,
    weight: Vec<f64>,
}

impl VelocityNodes {
    fn new(t: f64, r: f64, sigma: f64, opts: &ForcingOptions) -> Self {
        let centre = t * r / (1.0 + t * t);
        let width = sigma / bracket(t);
        let outer = opts.v_extent * sigma + centre;
        let mut breaks = vec![0.0];
        let mut b = width;
        while b < outer {
            breaks.push(b);
            let cap = if b < opts.v_extent * width { width } else { sigma };
            b += b.min(PANEL_CAP * cap);
        }
        breaks.push(outer);
        let radial = CompositeRule::with_breaks(&breaks, opts.v_per_panel);
        let (ax, aw) = gauss_legendre(opts.v_angles);
        let mut v = Vec::with_capacity(radial.len() * ax.len());
        let mut weight = Vec::with_capacity(radial.len() * ax.len());
        for (&rho, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for (&x, &wa) in ax.iter().zip(&aw) {
                let theta = 0.5 * PI * (x + 1.0);
                let (s, c) = theta.sin_cos();
                v.push([centre + rho * c, rho * s, 0.0]);
                weight.push(2.0 * PI * rho * rho * s * wr * wa * 0.5 * PI);
            }
        }
        Self { v, weight }
    }
}

/// Flowed corrections `(ΔI, T)` at `x = r e₁` and the largest Picard count.
fn corrections_at(
    f0: &InitialDatum,
    eq: &Equilibrium,
    field: &RadialField,
    tracer: &CharacteristicsSolution,
    r: f64,
    opts: &ForcingOptions,
) -> Result<(f64, f64, usize)> {
    let t = tracer.t();
    if t == 0.0 || field.is_zero() {
        return Ok((0.0, 0.0, 0));
    }
    let nodes = VelocityNodes::new(t, r, eq.family().sigma(), opts);
    let (taus, omegas) = tracer.quadrature();
    let mut delta_i = 0.0;
    let mut reaction = 0.0;
    let mut iterations = 0;
    for (v, &wt) in nodes.v.iter().zip(&nodes.weight) {
        let w = [r - t * v[0], -t * v[1], -t * v[2]];
        let tr = tracer.trace(&w, v)?;
        iterations = iterations.max(tr.iterations);
        let x0 = [w[0] + tr.y0[0], w[1] + tr.y0[1], w[2] + tr.y0[2]];
        let v0 = [v[0] + tr.w0[0], v[1] + tr.w0[1], v[2] + tr.w0[2]];
        delta_i += wt * (f0.value(&x0, &v0) - f0.value(&w, v));
        let grad = eq.gradient3(*v);
        let mut acc = 0.0;
        for (j, (&tau, &om)) in taus.iter().zip(omegas).enumerate() {
            let free = field.eval(tau, &[w[0] + tau * v[0], w[1] + tau * v[1], w[2] + tau * v[2]]);
            let vj = [v[0] + tr.w[j][0], v[1] + tr.w[j][1], v[2] + tr.w[j][2]];
            let gj = eq.gradient3(vj);
            let e = tr.e[j];
            let lin = free[0] * grad[0] + free[1] * grad[1] + free[2] * grad[2];
            let flowed = e[0] * gj[0] + e[1] * gj[1] + e[2] * gj[2];
            acc += om * (lin - flowed);
        }
        reaction += wt * acc;
    }
    Ok((delta_i, reaction, iterations))
}

fn check_inputs(f0: &InitialDatum, eq: &Equilibrium) -> Result<()> {
    if f0.dim() != DIM || eq.dim() != DIM {
        return Err(Error::Dimension(f0.dim().max(eq.dim())));
    }
    let gaussian = |p: Profile| matches!(p, Profile::Gaussian { .. });
    if !gaussian(f0.x_profile()) || !gaussian(f0.v_profile()) {
        return Err(Error::Capability("the radial engine needs a Gaussian datum".into()));
    }
    if !matches!(eq.family(), Family::Maxwellian { .. }) {
        return Err(Error::Capability("the radial engine needs a Maxwellian background".into()));
    }
    Ok(())
}

/// Samples `(r_i, ΔI_i, T_i)` at `r = ⟨t⟩u_i` and the largest Picard count.
fn sampled_corrections(
    f0: &InitialDatum,
    eq: &Equilibrium,
    field: &RadialField,
    tracer: &CharacteristicsSolution,
    opts: &ForcingOptions,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, usize)> {
    let t = tracer.t();
    let n = opts.radial_samples;
    let radii: Vec<f64> = (0..n)
        .map(|i| bracket(t) * opts.sample_extent * i as f64 / (n - 1) as f64)
        .collect();
    let out = radii
        .par_iter()
        .map(|&r| corrections_at(f0, eq, field, tracer, r, opts))
        .collect::<Result<Vec<_>>>()?;
    let iterations = out.iter().map(|o| o.2).max().unwrap_or(0);
    Ok((
        radii,
        out.iter().map(|o| o.0).collect(),
        out.iter().map(|o| o.1).collect(),
        iterations,
    ))
}

fn spline_onto(grid: &RadialGrid, radii: &[f64], values: &[f64]) -> Vec<f64> {
    if values.iter().all(|v| *v == 0.0) {
        return vec![0.0; grid.len()];
    }
    let last = radii[radii.len() - 1];
    let spline = CubicSpline::new(radii.to_vec(), values.to_vec(), LeftBoundary::ZeroSlope);
    grid.radii()
        .iter()
        .map(|&r| if r <= last { spline.eval(r) } else { 0.0 })
        .collect()
}

fn free_profile(f0: &InitialDatum, t: f64, grid: &RadialGrid) -> Vec<f64> {
    grid.radii()
        .iter()
        .map(|&r| free_density_partial(f0, t, &[0, 0, 0], &[r, 0.0, 0.0]))
        .collect()
}

/// `I(t, ·)` on `grid` for the final time of `sol`.
pub fn initial_term(
    f0: &InitialDatum,
    eq: &Equilibrium,
    field: &RadialField,
    sol: &CharacteristicsSolution,
    grid: &RadialGrid,
    opts: &ForcingOptions,
) -> Result<Vec<f64>> {
    check_inputs(f0, eq)?;
    opts.validate()?;
    let (radii, di, _, _) = sampled_corrections(f0, eq, field, sol, opts)?;
    let free = free_profile(f0, sol.t(), grid);
    let corr = spline_onto(grid, &radii, &di);
    Ok(free.iter().zip(&corr).map(|(a, b)| a + b).collect())
}

/// `T(E, μ)(t, ·) = R_L − R_NL` on `grid` for the final time of `sol`.
pub fn bilinear_reaction(
    field: &RadialField,
    eq: &Equilibrium,
    sol: &CharacteristicsSolution,
    grid: &RadialGrid,
    opts: &ForcingOptions,
) -> Result<Vec<f64>> {
    opts.validate()?;
    if !matches!(eq.family(), Family::Maxwellian { .. }) || eq.dim() != DIM {
        return Err(Error::Capability("the radial engine needs a Maxwellian background in d = 3".into()));
    }
    // the datum only enters ΔI, which is discarded here
    let f0 = InitialDatum::separable(
        DIM,
        0.0,
        Profile::Gaussian { sigma: 1.0 },
        Profile::Gaussian { sigma: 1.0 },
        0,
    )?;
    let (radii, _, t, _) = sampled_corrections(&f0, eq, field, sol, opts)?;
    Ok(spline_onto(grid, &radii, &t))
}

/// `R̂_L(t, k) = ∫₀ᵗ (t−s) k² μ̂((t−s)k) φ̂(s, k) ds` on the nodes of `sol`.
fn linear_reaction_spectrum(eq: &Equilibrium, field: &RadialField, sol: &CharacteristicsSolution, ks: &[f64]) -> Vec<f64> {
    let t = sol.t();
    let mut out = vec![0.0; ks.len()];
    if field.is_zero() || t == 0.0 {
        return out;
    }
    let (taus, omegas) = sol.quadrature();
    for (&s, &om) in taus.iter().zip(omegas) {
        let phi = field.potential_at(s);
        let lag = t - s;
        for (m, &k) in ks.iter().enumerate() {
            out[m] += om * lag * k * k * eq.fourier(&[lag * k, 0.0, 0.0]) * phi[m];
        }
    }
    out
}

/// Terms of `S` on a common `(t, r)` grid with the `Y_t^N` ledger of `S`.
#[derive(Debug, Clone)]
pub struct ForcingDecomposition {
    pub initial: DensityHistory,
    pub linear: DensityHistory,
    pub nonlinear: DensityHistory,
    /// `T = R_L − R_NL`, computed as one difference.
    pub reaction: DensityHistory,
    pub forcing: DensityHistory,
    pub ledger: Vec<f64>,
    pub picard_iterations: usize,
}

/// `S = I + R_L − R_NL` on `t_grid` along the flow of `field`.
pub fn assemble_forcing(
    f0: &InitialDatum,
    eq: &Equilibrium,
    field: Arc<RadialField>,
    grid: Arc<RadialGrid>,
    t_grid: &[f64],
    opts: &ForcingOptions,
) -> Result<ForcingDecomposition> {
    check_inputs(f0, eq)?;
    check_time_grid(t_grid)?;
    opts.validate()?;
    if field.grid().len() != grid.len() || field.grid().dr() != grid.dr() {
        return Err(Error::Configuration("field and forcing live on different radial grids".into()));
    }
    let ks = grid.wavenumbers();
    let mut initial = Vec::with_capacity(t_grid.len());
    let mut reaction = Vec::with_capacity(t_grid.len());
    let mut linear = Vec::with_capacity(t_grid.len());
    let mut picard = 0;
    let dyn_field: Arc<dyn VectorField + Send + Sync> = field.clone();
    for &t in t_grid {
        let tracer = flow_tracer(dyn_field.clone(), t, &opts.solve)?;
        let (radii, di, tt, it) = sampled_corrections(f0, eq, &field, &tracer, opts)?;
        picard = picard.max(it);
        let free = free_profile(f0, t, &grid);
        let corr = spline_onto(&grid, &radii, &di);
        initial.push(free.iter().zip(&corr).map(|(a, b)| a + b).collect::<Vec<f64>>());
        reaction.push(spline_onto(&grid, &radii, &tt));
        linear.push(linear_reaction_spectrum(eq, &field, &tracer, &ks));
    }
    let times = t_grid.to_vec();
    let initial = DensityHistory::from_values(times.clone(), grid.clone(), initial)?;
    let reaction = DensityHistory::from_values(times.clone(), grid.clone(), reaction)?;
    let linear = DensityHistory::from_spectra(times, grid, linear)?;
    let nonlinear = linear.sub(&reaction)?;
    let forcing = initial.add(&reaction)?;
    let ledger = forcing.ledger(opts.ledger_order);
    if let Some(&bad) = ledger.iter().find(|v| !(**v <= INSTABILITY_LIMIT)) {
        return Err(Error::Instability { value: bad });
    }
    Ok(ForcingDecomposition {
        initial,
        linear,
        nonlinear,
        reaction,
        forcing,
        ledger,
        picard_iterations: picard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::make_equilibrium;
    use crate::response::{field_from_density, uniform_times};

    fn maxwellian() -> Equilibrium {
        make_equilibrium(Family::Maxwellian { sigma: 1.0 }, 3).unwrap()
    }

    /// Field of the density `eps·N(0, ⟨t⟩²I)`.
    fn synthetic_field(eps: f64, grid: &Arc<RadialGrid>, times: &[f64]) -> Arc<RadialField> {
        let values = times
            .iter()
            .map(|&t| {
                let s2 = 1.0 + t * t;
                grid.radii()
                    .iter()
                    .map(|r| eps * (2.0 * PI * s2).powf(-1.5) * (-0.5 * r * r / s2).exp())
                    .collect()
            })
            .collect();
        let rho = DensityHistory::from_values(times.to_vec(), grid.clone(), values).unwrap();
        Arc::new(field_from_density(&rho).unwrap())
    }

    #[test]
    fn velocity_nodes_integrate_the_maxwellian_and_free_streaming() {
        let eq = maxwellian();
        let f0 = InitialDatum::gaussian(3, 1.0, 2).unwrap();
        let opts = ForcingOptions::default();
        for (t, r) in [(0.0, 0.0), (0.5, 1.0), (5.0, 3.0), (20.0, 0.0), (20.0, 30.0)] {
            let nodes = VelocityNodes::new(t, r, 1.0, &opts);
            let mass: f64 = nodes.v.iter().zip(&nodes.weight).map(|(v, w)| w * eq.value(v)).sum();
            assert!((mass - 1.0).abs() < 5e-5, "t = {t}, r = {r}: {mass}");
            let free: f64 = nodes
                .v
                .iter()
                .zip(&nodes.weight)
                .map(|(v, w)| w * f0.value(&[r - t * v[0], -t * v[1], -t * v[2]], v))
                .sum();
            let exact = free_density_partial(&f0, t, &[0, 0, 0], &[r, 0.0, 0.0]);
            assert!((free - exact).abs() < 5e-6 * exact, "t = {t}, r = {r}: {free} vs {exact}");
        }
    }

    #[test]
    fn zero_field_gives_the_free_density() {
        let eq = maxwellian();
        let f0 = InitialDatum::gaussian(3, 1e-3, 2).unwrap();
        let grid = Arc::new(RadialGrid::new(128, 0.25));
        let times = uniform_times(0.5, 3.0).unwrap();
        let field = Arc::new(RadialField::zero(times.clone(), grid.clone()).unwrap());
        let opts = ForcingOptions::default();
        let tracer = flow_tracer(field.clone(), 2.0, &opts.solve).unwrap();
        let i = initial_term(&f0, &eq, &field, &tracer, &grid, &opts).unwrap();
        for (j, r) in grid.radii().iter().enumerate() {
            let exact = free_density_partial(&f0, 2.0, &[0, 0, 0], &[*r, 0.0, 0.0]);
            assert!((i[j] - exact).abs() < 1e-10);
        }
        let t = bilinear_reaction(&field, &eq, &tracer, &grid, &opts).unwrap();
        assert!(t.iter().all(|v| *v == 0.0));
        let dec = assemble_forcing(&f0, &eq, field, grid.clone(), &times, &opts).unwrap();
        for n in 0..times.len() {
            assert!(dec.reaction.values(n).iter().all(|v| *v == 0.0));
            assert!(dec.linear.values(n).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn zero_datum_and_field_give_zero_forcing() {
        let eq = maxwellian();
        let f0 = InitialDatum::separable(3, 0.0, Profile::Gaussian { sigma: 1.0 }, Profile::Gaussian { sigma: 1.0 }, 2).unwrap();
        let grid = Arc::new(RadialGrid::new(64, 0.25));
        let times = uniform_times(0.5, 2.0).unwrap();
        let field = Arc::new(RadialField::zero(times.clone(), grid.clone()).unwrap());
        let dec = assemble_forcing(&f0, &eq, field, grid, &times, &ForcingOptions::default()).unwrap();
        assert!(dec.ledger.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reaction_is_quadratic_and_forcing_linear_in_the_data() {
        let eq = maxwellian();
        let grid = Arc::new(RadialGrid::covering(60.0, 0.25));
        let times = uniform_times(0.5, 3.0).unwrap();
        let opts = ForcingOptions::default();
        let run = |eps: f64| {
            let f0 = InitialDatum::gaussian(3, eps, 2).unwrap();
            let field = synthetic_field(eps, &grid, &times);
            assemble_forcing(&f0, &eq, field, grid.clone(), &times, &opts).unwrap()
        };
        let a = run(1e-3);
        let b = run(5e-4);
        let last = |l: &[f64]| *l.last().unwrap();
        let t_ratio = last(&a.reaction.ledger(2)) / last(&b.reaction.ledger(2));
        let l_ratio = last(&a.linear.ledger(2)) / last(&b.linear.ledger(2));
        let s_ratio = last(&a.ledger) / last(&b.ledger);
        assert!((t_ratio - 4.0).abs() < 0.1, "{t_ratio}");
        assert!((l_ratio - 2.0).abs() < 1e-9, "{l_ratio}");
        assert!((s_ratio - 2.0).abs() < 0.02, "{s_ratio}");
        // cancellation: the difference is far below either term
        let sup = |h: &DensityHistory| (0..h.len()).map(|n| h.norms(n, 0)[0].1).fold(0.0, f64::max);
        assert!(sup(&a.reaction) < 0.1 * sup(&a.linear));
        assert!(a.picard_iterations <= 10);
    }

    #[test]
    fn linear_reaction_is_minus_the_kernel_convolution() {
        // for E built from ρ, R̂_L = −∫K(t−s)ρ̂(s)ds
        let eq = maxwellian();
        let grid = Arc::new(RadialGrid::new(64, 0.25));
        let times = uniform_times(0.5, 4.0).unwrap();
        let field = synthetic_field(1.0, &grid, &times);
        let t = 3.0;
        let tracer = flow_tracer(field.clone(), t, &ForcingOptions::default().solve).unwrap();
        let ks = grid.wavenumbers();
        let rl = linear_reaction_spectrum(&eq, &field, &tracer, &ks);
        let scale = rl.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for m in [2, 10, 20] {
            let k = ks[m];
            let rule = CompositeRule::uniform(0.0, t, 60, 8);
            let direct = -rule.integrate(|s| {
                let kern = -(t - s) * k * k / (1.0 + k * k) * (-0.5 * (t - s) * (t - s) * k * k).exp();
                kern * field.potential_at(s)[m] * (1.0 + k * k)
            });
            assert!((rl[m] - direct).abs() < 1e-5 * scale, "k = {k}: {} vs {direct}", rl[m]);
        }
    }
}
