//! Picard iteration on `E → characteristics → S → ρ → E`, starting from
//! `E⁰ ≡ 0`.

use super::forcing::{assemble_forcing, ForcingOptions};
use super::{field_from_density, linear_response, uniform_times, DensityHistory, RadialField};
use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::kernel::ResolventTable;
use crate::numerics::radial::RadialGrid;
use crate::transport::InitialDatum;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub horizon: f64,
    /// Time step of the nonlinear terms.
    pub dt: f64,
    pub max_iter: usize,
    pub eps0: f64,
    pub m0: f64,
    /// Relative change of `N(T)` and of `ρ` at which the loop stops.
    pub tol: f64,
    pub forcing: ForcingOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            horizon: 20.0,
            dt: 0.25,
            max_iter: 8,
            eps0: 1e-3,
            m0: 100.0,
            tol: 1e-6,
            forcing: ForcingOptions::default(),
        }
    }
}

/// One outer iterate. Histories are immutable snapshots.
#[derive(Debug, Clone)]
pub struct BootstrapState {
    pub iteration: usize,
    /// Field built from this iterate's density; drives the next one.
    pub field: Arc<RadialField>,
    pub density: DensityHistory,
    /// `N(t) = sup_{s≤t} max_k [⟨s⟩ᵏ‖∇ᵏρ‖_{L¹} + ⟨s⟩^{3+k}‖∇ᵏρ‖_{L^∞}]/log(2+s)`
    pub ledger: Vec<f64>,
    /// `Y_t^N` ledgers of `S`, of `R_L − R_NL` and of `R_L`.
    pub forcing_ledger: Vec<f64>,
    pub reaction_ledger: Vec<f64>,
    pub linear_ledger: Vec<f64>,
    pub eps0: f64,
    pub m0: f64,
    /// `N(T) > M₀ε₀`.
    pub violation: bool,
    /// `sup_t` weighted norm of `ρ` minus the previous iterate, relative
    /// to `sup_t` of the weighted norm of `ρ`.
    pub density_change: f64,
    pub picard_iterations: usize,
}

impl BootstrapState {
    pub fn final_ledger(&self) -> f64 {
        *self.ledger.last().expect("nonempty history")
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapRun {
    pub states: Vec<BootstrapState>,
    pub converged: bool,
}

impl BootstrapRun {
    pub fn last(&self) -> &BootstrapState {
        self.states.last().expect("at least one iterate")
    }
}

/// Radial grid holding the ballistic spread of unit-width data up to
/// `horizon`.
pub fn bootstrap_grid(horizon: f64, dr: f64) -> RadialGrid {
    RadialGrid::covering(10.0 * (1.0 + horizon) + 20.0, dr)
}

/// Runs the outer loop until `N(T)` and the weighted density history both
/// change by less than `tol` relative, or `max_iter` iterates.
pub fn bootstrap_run(
    f0: &InitialDatum,
    eq: &Equilibrium,
    res: &ResolventTable,
    grid: Arc<RadialGrid>,
    opts: &BootstrapOptions,
) -> Result<BootstrapRun> {
    if opts.max_iter == 0 {
        return Err(Error::param("max_iter", "must be positive"));
    }
    if !(opts.eps0 > 0.0 && opts.m0 > 0.0 && opts.tol > 0.0) {
        return Err(Error::param("eps0", "eps0, M0 and tol must be positive"));
    }
    if f0.epsilon() > opts.eps0 * (1.0 + 1e-9) {
        return Err(Error::param(
            "eps0",
            format!("datum ledger {} exceeds eps0 = {}", f0.epsilon(), opts.eps0),
        ));
    }
    let times = uniform_times(opts.dt, opts.horizon)?;
    let n_order = opts.forcing.ledger_order;
    let mut field = Arc::new(RadialField::zero(times.clone(), grid.clone())?);
    let mut previous = 0.0;
    let mut previous_density: Option<DensityHistory> = None;
    let mut states = Vec::new();
    let mut converged = false;
    for iteration in 1..=opts.max_iter {
        let forcing = assemble_forcing(f0, eq, field.clone(), grid.clone(), &times, &opts.forcing)?;
        let density = linear_response(&forcing.forcing, res)?;
        let ledger = density.log_ledger(n_order);
        let current = *ledger.last().expect("nonempty");
        let next = Arc::new(field_from_density(&density)?);
        let sup = |h: &DensityHistory| *h.ledger(n_order).last().expect("nonempty");
        let size = sup(&density);
        let density_change = match &previous_density {
            Some(p) if size > 0.0 => sup(&density.sub(p)?) / size,
            Some(_) => 0.0,
            None if size > 0.0 => 1.0,
            None => 0.0,
        };
        previous_density = Some(density.clone());
        states.push(BootstrapState {
            iteration,
            field: next.clone(),
            ledger,
            forcing_ledger: forcing.ledger.clone(),
            reaction_ledger: forcing.reaction.ledger(n_order),
            linear_ledger: forcing.linear.ledger(n_order),
            eps0: opts.eps0,
            m0: opts.m0,
            violation: current > opts.m0 * opts.eps0,
            picard_iterations: forcing.picard_iterations,
            density_change,
            density,
        });
        field = next;
        let steady = (current - previous).abs() <= opts.tol * current.abs() || (current == 0.0 && previous == 0.0);
        if steady && density_change <= opts.tol {
            converged = true;
            break;
        }
        previous = current;
    }
    Ok(BootstrapRun { states, converged })
}
