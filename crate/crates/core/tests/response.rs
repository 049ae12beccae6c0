use std::sync::Arc;
use vlasov_decay::equilibria::{make_equilibrium, Equilibrium, Family};
use vlasov_decay::kernel::solve_volterra_forced;
use vlasov_decay::numerics::radial::RadialGrid;
use vlasov_decay::response::bootstrap::{bootstrap_grid, bootstrap_run, BootstrapOptions};
use vlasov_decay::response::forcing::{assemble_forcing, ForcingOptions};
use vlasov_decay::response::*;
use vlasov_decay::transport::{InitialDatum, Profile};

fn maxwellian() -> Equilibrium {
    make_equilibrium(Family::Maxwellian { sigma: 1.0 }, 3).unwrap()
}

/// `K(t, k) = −t k²/(1+k²) e^{−t²k²/2}` for the unit Maxwellian.
fn closed_form_kernel(t: f64, k: f64) -> f64 {
    -t * k * k / (1.0 + k * k) * (-0.5 * t * t * k * k).exp()
}

/// `c ⟨t⟩^{-3} exp(−r²/2⟨t⟩²)`, the profile of a freely spreading Gaussian.
fn spreading_profile(grid: &RadialGrid, times: &[f64], c: f64) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            let s2 = 1.0 + t * t;
            grid.radii()
                .iter()
                .map(|r| c * (2.0 * std::f64::consts::PI * s2).powf(-1.5) * (-0.5 * r * r / s2).exp())
                .collect()
        })
        .collect()
}

#[test]
fn single_mode_matches_brute_force_volterra() {
    let eq = maxwellian();
    let grid = Arc::new(RadialGrid::covering(40.0, 0.25));
    let (dt, horizon) = (0.05, 10.0);
    let res = response_resolvent(&eq, &grid, dt, horizon).unwrap();
    let times = uniform_times(dt, horizon).unwrap();
    let ks = grid.wavenumbers();
    let mut worst = 0.0f64;
    for i0 in [3, 12, 40] {
        let a: Vec<f64> = times.iter().map(|&t| t * (-0.3 * t).exp() + 0.2 * (2.0 * t).sin()).collect();
        let spectra: Vec<Vec<f64>> = a
            .iter()
            .map(|&v| {
                let mut s = vec![0.0; ks.len()];
                s[i0] = v;
                s
            })
            .collect();
        let s = DensityHistory::from_spectra(times.clone(), grid.clone(), spectra).unwrap();
        let rho = linear_response(&s, &res).unwrap();
        let kernel: Vec<f64> = times.iter().map(|&t| closed_form_kernel(t, ks[i0])).collect();
        let oracle = solve_volterra_forced(&kernel, &a, dt);
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for n in 0..times.len() {
            worst = worst.max((rho.spectrum(n)[i0] - oracle[n]).abs() / scale);
            for (j, v) in rho.spectrum(n).iter().enumerate() {
                if j != i0 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }
    println!("per-mode oracle error {worst:.3e}");
    assert!(worst < 1e-6);
}

#[test]
fn density_solves_the_duhamel_equation() {
    // ρ̂(t) − ∫₀ᵗ K(t−s) ρ̂(s) ds = Ŝ(t), checked by an independent trapezoid sum
    let eq = maxwellian();
    let grid = Arc::new(RadialGrid::covering(60.0, 0.25));
    let (dt, horizon) = (0.05, 8.0);
    let res = response_resolvent(&eq, &grid, dt, horizon).unwrap();
    let times = uniform_times(dt, horizon).unwrap();
    let s = DensityHistory::from_values(times.clone(), grid.clone(), spreading_profile(&grid, &times, 1.0)).unwrap();
    let rho = linear_response(&s, &res).unwrap();
    let ks = grid.wavenumbers();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (m, &k) in ks.iter().enumerate() {
        let r: Vec<f64> = (0..times.len()).map(|n| rho.spectrum(n)[m]).collect();
        for n in 1..times.len() {
            let mut conv = 0.0;
            for j in 0..=n {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                conv += w * closed_form_kernel(times[n] - times[j], k) * r[j];
            }
            let residual = r[n] - dt * conv - s.spectrum(n)[m];
            worst = worst.max(residual.abs());
            scale = scale.max(r[n].abs());
        }
    }
    println!("Duhamel residual {:.3e} (scale {scale:.3e})", worst);
    assert!(worst < 1e-10 * scale);
}

#[test]
fn unit_forcing_ledger_gives_bounded_density_ledger() {
    let eq = maxwellian();
    let horizon = 10.0;
    let grid = Arc::new(bootstrap_grid(horizon, 0.25));
    let res = response_resolvent(&eq, &grid, 0.05, horizon).unwrap();
    let times = uniform_times(0.25, horizon).unwrap();
    let s = DensityHistory::from_values(times.clone(), grid.clone(), spreading_profile(&grid, &times, 1.0)).unwrap();
    let s = s.scale(1.0 / s.ledger(2).last().unwrap());
    let rho = linear_response(&s, &res).unwrap();
    let q: Vec<f64> = (0..rho.len()).map(|n| rho.weighted(n, 2) / (2.0 + times[n]).ln()).collect();
    let peak = q.iter().cloned().fold(0.0, f64::max);
    println!("Q(0) {:.4}, Q(T) {:.4}, peak {peak:.4}", q[0], q[q.len() - 1]);
    assert!(peak.is_finite() && peak < 5.0);
    assert!(q[q.len() - 1] <= peak);
}

#[test]
fn flowed_initial_term_keeps_free_decay() {
    let eq = maxwellian();
    let horizon = 20.0;
    let grid = Arc::new(bootstrap_grid(horizon, 0.25));
    let times = uniform_times(2.0, horizon).unwrap();
    let eps = 1e-3;
    let fine = uniform_times(0.25, horizon).unwrap();
    let source = DensityHistory::from_values(fine.clone(), grid.clone(), spreading_profile(&grid, &fine, eps)).unwrap();
    let field = Arc::new(field_from_density(&source).unwrap());
    let f0 = InitialDatum::gaussian(3, eps, 2).unwrap();
    let dec = assemble_forcing(&f0, &eq, field, grid.clone(), &times, &ForcingOptions::default()).unwrap();
    let mut scaled = Vec::new();
    for (n, &t) in times.iter().enumerate() {
        let sup = dec.initial.norms(n, 0)[0].1;
        let v = sup * (1.0 + t * t).powf(1.5);
        println!("t = {t:>4}: |I|_inf <t>^3 = {v:.5e}");
        if t >= 1.0 {
            scaled.push(v);
        }
    }
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 1.1, "spread {}", hi / lo);
}

#[test]
fn zero_datum_converges_on_the_first_iterate() {
    let eq = maxwellian();
    let opts = BootstrapOptions {
        horizon: 4.0,
        dt: 0.5,
        ..Default::default()
    };
    let grid = Arc::new(bootstrap_grid(opts.horizon, 0.25));
    let res = response_resolvent(&eq, &grid, 0.05, opts.horizon).unwrap();
    let g = Profile::Gaussian { sigma: 1.0 };
    let f0 = InitialDatum::separable(3, 0.0, g, g, 2).unwrap();
    let run = bootstrap_run(&f0, &eq, &res, grid, &opts).unwrap();
    assert!(run.converged);
    assert_eq!(run.states.len(), 1);
    assert_eq!(run.last().final_ledger(), 0.0);
    assert!(!run.last().violation);
}

#[test]
fn oversized_datum_is_rejected() {
    let eq = maxwellian();
    let opts = BootstrapOptions {
        horizon: 2.0,
        dt: 0.5,
        ..Default::default()
    };
    let grid = Arc::new(bootstrap_grid(opts.horizon, 0.25));
    let res = response_resolvent(&eq, &grid, 0.05, opts.horizon).unwrap();
    let f0 = InitialDatum::gaussian(3, 1e-2, 2).unwrap();
    assert!(bootstrap_run(&f0, &eq, &res, grid, &opts).is_err());
}
