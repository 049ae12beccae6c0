//! Littlewood–Paley blocks `G_q` of the Green kernel.

use super::ResolventTable;
use crate::error::{Error, Result};
use crate::numerics::radial::RadialGrid;

/// `0` for `x ≤ 0`, `1` for `x ≥ 1`, C^∞ in between.
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Dyadic bump: 1 on `[1/2, 2]`, supported in `[1/4, 4]`.
pub fn chi(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let y = r.log2();
    if y <= -1.0 {
        smoothstep(y + 2.0)
    } else if y <= 1.0 {
        1.0
    } else {
        smoothstep(2.0 - y)
    }
}

/// `χ(|ξ|/2^q) / Σ_p χ(|ξ|/2^p)`; the family sums to 1 for `ξ ≠ 0`.
pub fn chi_q(q: i32, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let y = r.log2();
    let own = chi(r / 2f64.powi(q));
    if own == 0.0 {
        return 0.0;
    }
    let centre = y.round() as i32;
    let total: f64 = (centre - 3..=centre + 3).map(|p| chi(r / 2f64.powi(p))).sum();
    own / total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LPBlockBound {
    pub q: i32,
    pub a_threshold: f64,
    pub delta: f64,
    pub k_pow: f64,
    pub regime: Regime,
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
    /// `sup_t ‖G_q(t)‖_{L¹} / envelope`
    pub l1_ratio: f64,
    /// `sup_t ‖G_q(t)‖_{L^∞} / envelope`
    pub linf_ratio: f64,
}

/// Envelope shapes for `(L¹, L^∞)` at block `q`.
pub fn envelopes(q: i32, t: f64, d: usize, regime: Regime, delta: f64, k_pow: f64) -> (f64, f64) {
    let p = 2f64.powi(q);
    let decay = (1.0 + p * t).powf(-k_pow);
    let df = d as f64;
    match regime {
        Regime::Low => (p * decay, p.powf(df + 1.0) * decay),
        Regime::High => {
            let damp = 1.0 / (1.0 + p * p);
            (
                p.powf(1.0 + delta) * damp * decay,
                p.powf(df + 1.0 + delta) * damp * decay,
            )
        }
    }
}

/// Measures `‖G_q(t)‖` on a radial grid resolving the block's annulus and
/// the ballistic spread of `G`. Requires `d = 3` and an isotropic table.
pub fn littlewood_paley_block(res: &ResolventTable, q: i32, times: &[f64], a_threshold: f64) -> Result<LPBlockBound> {
    let eq = res.equilibrium();
    let d = eq.dim();
    if d != 3 {
        return Err(Error::Dimension(d));
    }
    if !(a_threshold >= 1.0) {
        return Err(Error::param("A", "must be at least 1"));
    }
    let radii: Vec<f64> = (0..res.shape().1)
        .map(|i| res.kernel().mode_norm(i))
        .filter(|&r| r > 0.0)
        .collect();
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let lo = 2f64.powi(q - 2);
    let hi = 2f64.powi(q + 2);
    if lo < r_min || hi > r_max {
        return Err(Error::Range(format!(
            "block q = {q} needs |xi| in [{lo}, {hi}], resolved range is [{r_min}, {r_max}]"
        )));
    }
    let delta = 1.0;
    let k_pow = (d + 3) as f64;
    let regime = if 2f64.powi(q) <= a_threshold {
        Regime::Low
    } else {
        Regime::High
    };
    let sigma = eq.family().sigma();
    let dr = std::f64::consts::PI / (2.0 * hi);
    let mut l1 = Vec::with_capacity(times.len());
    let mut linf = Vec::with_capacity(times.len());
    let mut l1_ratio = 0.0f64;
    let mut linf_ratio = 0.0f64;
    for &t in times {
        let idx = res
            .time()
            .index_of(t)
            .ok_or_else(|| Error::param("times", format!("t = {t} is not on the resolvent time grid")))?;
        let profile = res.radial_profile(idx)?;
        let radius = 16.0 / 2f64.powi(q) + 10.0 * sigma * t + 20.0;
        let grid = RadialGrid::covering(radius, dr);
        let spec: Vec<f64> = grid
            .wavenumbers()
            .iter()
            .map(|&k| if k > hi { 0.0 } else { chi_q(q, k) * profile.eval(k) })
            .collect();
        let (a, b) = grid.sample_norms(&grid.inverse(&spec));
        let (ea, eb) = envelopes(q, t, d, regime, delta, k_pow);
        l1.push(a);
        linf.push(b);
        l1_ratio = l1_ratio.max(a / ea);
        linf_ratio = linf_ratio.max(b / eb);
    }
    Ok(LPBlockBound {
        q,
        a_threshold,
        delta,
        k_pow,
        regime,
        times: times.to_vec(),
        l1,
        linf,
        l1_ratio,
        linf_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{make_equilibrium, Family};
    use crate::kernel::{build_mode_kernel_table, default_radii, radial_modes, solve_mode_resolvent, TimeGrid};

    #[test]
    fn partition_of_unity_at_random_frequencies() {
        let mut seed = 99u64;
        for _ in 0..100 {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let u = (seed >> 11) as f64 / (1u64 << 53) as f64;
            let r = 2f64.powf(-8.0 + 12.0 * u);
            let total: f64 = (-12..=8).map(|q| chi_q(q, r)).sum();
            assert!((total - 1.0).abs() < 1e-14, "r = {r}: {total}");
        }
    }

    #[test]
    fn bump_support_and_plateau() {
        assert_eq!(chi(0.25), 0.0);
        assert_eq!(chi(4.0), 0.0);
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(2.0), 1.0);
        assert!(chi(3.0) > 0.0 && chi(3.0) < 1.0);
        for q in -3..3 {
            assert_eq!(chi_q(q, 2f64.powi(q - 2) * 0.999), 0.0);
            assert_eq!(chi_q(q, 2f64.powi(q + 2) * 1.001), 0.0);
        }
    }

    #[test]
    fn blocks_outside_the_table_are_rejected() {
        let eq = make_equilibrium(Family::Maxwellian { sigma: 1.0 }, 3).unwrap();
        let table =
            build_mode_kernel_table(&eq, TimeGrid::new(0.1, 2.0).unwrap(), radial_modes(3, &default_radii())).unwrap();
        let res = solve_mode_resolvent(&table).unwrap();
        assert!(matches!(littlewood_paley_block(&res, 7, &[1.0], 1.0), Err(Error::Range(_))));
        assert!(matches!(littlewood_paley_block(&res, -7, &[1.0], 1.0), Err(Error::Range(_))));
        let block = littlewood_paley_block(&res, 0, &[1.0, 2.0], 1.0).unwrap();
        assert_eq!(block.regime, Regime::Low);
        assert!(block.l1.iter().all(|v| v.is_finite() && *v > 0.0));
    }
}
