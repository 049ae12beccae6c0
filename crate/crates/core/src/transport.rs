//! Free transport `∂_t f + v·∇_x f = 0` and the decay of its density.
//!
//! Built-in data are separable, `f₀(x, v) = A·Π p(x_i)·Π q(v_i)`, so every
//! density derivative factors into one-dimensional integrals
//! `t^{-1-a} ∫ p(w) q^{(a)}((x − w)/t) dw`.

use crate::error::{Error, Result};
use crate::numerics::jet::{Jet, MAX_ORDER};
use crate::numerics::multi_indices;
use crate::report::{DecayReport, NormKind};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Tail mass beyond the quadrature window that triggers a warning.
const TAIL_LEVEL: f64 = 1e-8;
/// Points per axis for the Cartesian norm grid.
const GRID_POINTS: usize = 129;

/// One-dimensional building block of a separable datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// Normal density with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Mollifier `c·exp(−1/(1 − (y/a)²))` on `|y| < a`, unit mass.
    Bump { radius: f64 },
}

impl Profile {
    fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Profile::Gaussian { sigma } => ("sigma", sigma),
            Profile::Bump { radius } => ("radius", radius),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive and finite, got {v}")));
        }
        Ok(())
    }

    /// Natural length scale.
    pub fn scale(&self) -> f64 {
        match *self {
            Profile::Gaussian { sigma } => sigma,
            Profile::Bump { radius } => radius / 3.0,
        }
    }

    /// Half-width of the region the quadrature treats as the support.
    pub fn extent(&self, cut: f64) -> f64 {
        match *self {
            Profile::Gaussian { sigma } => cut * sigma,
            Profile::Bump { radius } => radius,
        }
    }

    /// Mass outside `[−extent, extent]`.
    pub fn tail_mass(&self, cut: f64) -> f64 {
        match *self {
            Profile::Gaussian { .. } => libm::erfc(cut / std::f64::consts::SQRT_2),
            Profile::Bump { .. } => 0.0,
        }
    }

    /// `p^{(a)}(y)` for `a ≤ order`.
    pub fn jet(&self, y: f64, order: usize) -> [f64; MAX_ORDER + 1] {
        let mut out = [0.0; MAX_ORDER + 1];
        match *self {
            Profile::Gaussian { sigma } => {
                let z = Jet::variable(y / sigma, order);
                let g = z.mul(&z).scale(-0.5).exp().scale(1.0 / ((2.0 * PI).sqrt() * sigma));
                for (a, slot) in out.iter_mut().enumerate().take(order + 1) {
                    *slot = g.derivative(a) / sigma.powi(a as i32);
                }
            }
            Profile::Bump { radius } => {
                let u = y / radius;
                if u.abs() >= 1.0 {
                    return out;
                }
                let z = Jet::variable(u, order);
                let b = z.mul(&z).scale(-1.0).add_const(1.0).recip().scale(-1.0).exp();
                let c = bump_normalizer() / radius;
                for (a, slot) in out.iter_mut().enumerate().take(order + 1) {
                    *slot = c * b.derivative(a) / radius.powi(a as i32);
                }
            }
        }
        out
    }

    pub fn value(&self, y: f64) -> f64 {
        self.jet(y, 0)[0]
    }

    /// `(‖p^{(a)}‖_{L¹}, ‖p^{(a)}‖_{L^∞})` from a fine trapezoid grid.
    pub fn derivative_norms(&self, a: usize, cut: f64) -> (f64, f64) {
        let e = self.extent(cut.max(10.0));
        let n = 20_001;
        let h = 2.0 * e / (n - 1) as f64;
        let mut l1 = 0.0;
        let mut linf = 0.0f64;
        for i in 0..n {
            let v = self.jet(-e + i as f64 * h, a)[a].abs();
            l1 += v * h;
            linf = linf.max(v);
        }
        (l1, linf)
    }
}

/// `1 / ∫_{-1}^{1} exp(−1/(1 − u²)) du`.
fn bump_normalizer() -> f64 {
    use std::sync::OnceLock;
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let rule = crate::numerics::quadrature::CompositeRule::uniform(-1.0, 1.0, 64, 16);
        1.0 / rule.integrate(|u| if u.abs() < 1.0 { (-1.0 / (1.0 - u * u)).exp() } else { 0.0 })
    })
}

/// Per-order entries of the smallness ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub k: usize,
    /// `max_{|α|=k} ‖∂^α f₀‖_{L¹_{x,v}}`
    pub l1: f64,
    /// `max_{|α|=k} ‖∂^α f₀‖_{L¹_x L^∞_v}`
    pub l1_linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    dim: usize,
    amplitude: f64,
    x_profile: Profile,
    v_profile: Profile,
    order: usize,
    cut: f64,
    ledger: Vec<LedgerEntry>,
}

impl InitialDatum {
    /// `f₀ = amplitude · Π p(x_i) · Π q(v_i)` with derivatives tracked up
    /// to `order`.
    pub fn separable(dim: usize, amplitude: f64, x_profile: Profile, v_profile: Profile, order: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if !amplitude.is_finite() {
            return Err(Error::param("amplitude", "must be finite"));
        }
        if order + 2 > MAX_ORDER {
            return Err(Error::param("order", format!("at most {} supported", MAX_ORDER - 2)));
        }
        x_profile.validate()?;
        v_profile.validate()?;
        let mut datum = Self {
            dim,
            amplitude,
            x_profile,
            v_profile,
            order,
            cut: 8.0,
            ledger: Vec::new(),
        };
        datum.ledger = datum.compute_ledger();
        Ok(datum)
    }

    /// Standard normal in `x` and `v`, scaled so the ledger max is `eps0`.
    pub fn gaussian(dim: usize, eps0: f64, order: usize) -> Result<Self> {
        let unit = Self::separable(dim, 1.0, Profile::Gaussian { sigma: 1.0 }, Profile::Gaussian { sigma: 1.0 }, order)?;
        unit.with_smallness(eps0)
    }

    /// Rescales the amplitude so that `ε₀` (the ledger max) equals `eps0`.
    pub fn with_smallness(&self, eps0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::param("eps0", "must be positive and finite"));
        }
        let current = self.epsilon();
        if current == 0.0 {
            return Err(Error::param("amplitude", "zero datum cannot be rescaled"));
        }
        let mut out = self.clone();
        out.amplitude *= eps0 / current;
        out.ledger = out.compute_ledger();
        Ok(out)
    }

    /// Truncation of the Gaussian tails in units of `sigma`.
    pub fn with_cut(mut self, cut: f64) -> Result<Self> {
        if !(cut > 0.0) {
            return Err(Error::param("cut", "must be positive"));
        }
        self.cut = cut;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn x_profile(&self) -> Profile {
        self.x_profile
    }

    pub fn v_profile(&self) -> Profile {
        self.v_profile
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    /// `max_k (‖∇ᵏf₀‖_{L¹} + ‖∇ᵏf₀‖_{L¹L^∞})`.
    pub fn epsilon(&self) -> f64 {
        self.ledger.iter().map(|e| e.l1 + e.l1_linf).fold(0.0, f64::max)
    }

    /// Total mass `∫∫ f₀`.
    pub fn mass(&self) -> f64 {
        self.amplitude
    }

    pub fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        let px: f64 = x.iter().map(|&y| self.x_profile.value(y)).product();
        let pv: f64 = v.iter().map(|&y| self.v_profile.value(y)).product();
        self.amplitude * px * pv
    }

    /// `∂_x^a ∂_v^b f₀` for per-axis orders `a`, `b`.
    pub fn partial(&self, a: &[usize], b: &[usize], x: &[f64], v: &[f64]) -> f64 {
        let mut out = self.amplitude;
        for i in 0..self.dim {
            out *= self.x_profile.jet(x[i], a[i])[a[i]] * self.v_profile.jet(v[i], b[i])[b[i]];
        }
        out
    }

    /// Frobenius norm of `∇ᵏ_{x,v} f₀` at one phase-space point.
    pub fn derivative_norm(&self, k: usize, x: &[f64], v: &[f64]) -> f64 {
        let d = self.dim;
        multi_indices(2 * d, k)
            .iter()
            .map(|(alpha, mult)| mult * self.partial(&alpha[..d], &alpha[d..], x, v).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn compute_ledger(&self) -> Vec<LedgerEntry> {
        let d = self.dim;
        let px: Vec<(f64, f64)> = (0..=self.order).map(|a| self.x_profile.derivative_norms(a, self.cut)).collect();
        let pv: Vec<(f64, f64)> = (0..=self.order).map(|a| self.v_profile.derivative_norms(a, self.cut)).collect();
        (0..=self.order)
            .map(|k| {
                let mut l1 = 0.0f64;
                let mut l1_linf = 0.0f64;
                for (alpha, _) in multi_indices(2 * d, k) {
                    let xs: f64 = alpha[..d].iter().map(|&a| px[a].0).product();
                    l1 = l1.max(self.amplitude.abs() * xs * alpha[d..].iter().map(|&b| pv[b].0).product::<f64>());
                    l1_linf =
                        l1_linf.max(self.amplitude.abs() * xs * alpha[d..].iter().map(|&b| pv[b].1).product::<f64>());
                }
                LedgerEntry { k, l1, l1_linf }
            })
            .collect()
    }

    /// `‖∇_v f₀‖_{L¹_x L^∞_v}` with the Frobenius norm of the gradient.
    pub fn grad_v_mixed_norm(&self) -> f64 {
        let d = self.dim;
        let x_mass = self.x_profile.derivative_norms(0, self.cut).0.powi(d as i32);
        let q = self.v_profile;
        let grad = |v: &[f64]| -> f64 {
            let vals: Vec<[f64; MAX_ORDER + 1]> = v.iter().map(|&y| q.jet(y, 1)).collect();
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| if i == j { vals[j][1] } else { vals[j][0] })
                        .product::<f64>()
                        .powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };
        // coarse scan, then shrinking pattern search from the best node
        let e = q.extent(self.cut);
        let m: usize = if d == 3 { 41 } else { 201 };
        let h = 2.0 * e / (m - 1) as f64;
        let mut best = vec![0.0; d];
        let mut best_val = 0.0;
        let total = m.pow(d as u32);
        for p in 0..total {
            let mut rest = p;
            let v: Vec<f64> = (0..d)
                .map(|_| {
                    let i = rest % m;
                    rest /= m;
                    -e + i as f64 * h
                })
                .collect();
            let g = grad(&v);
            if g > best_val {
                best_val = g;
                best = v;
            }
        }
        let mut step = h;
        while step > 1e-10 * e {
            let mut improved = false;
            for i in 0..d {
                for s in [-step, step] {
                    let mut trial = best.clone();
                    trial[i] += s;
                    let g = grad(&trial);
                    if g > best_val {
                        best_val = g;
                        best = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        self.amplitude.abs() * x_mass * best_val
    }

    /// Mass of one factor lying outside the quadrature window.
    pub fn tail_mass(&self) -> f64 {
        let d = self.dim as f64;
        d * (self.x_profile.tail_mass(self.cut) + self.v_profile.tail_mass(self.cut))
    }

    /// `t^{-1-a} ∫ p(w) q^{(a)}((y − w)/t) dw` for `a ≤ order`; at `t = 0`
    /// this is `p^{(a)}(y) ∫ q`.
    fn density_factor(&self, t: f64, y: f64, order: usize) -> [f64; MAX_ORDER + 1] {
        let mut out = [0.0; MAX_ORDER + 1];
        let (p, q) = (self.x_profile, self.v_profile);
        if t == 0.0 {
            let j = p.jet(y, order);
            out[..=order].copy_from_slice(&j[..=order]);
            return out;
        }
        let ex = p.extent(self.cut);
        let ev = q.extent(self.cut);
        let half = ex.max(t * ev);
        let lo = (y - half).max(-ex).max(y - t * ev);
        let hi = (y + half).min(ex).min(y + t * ev);
        if hi <= lo {
            return out;
        }
        let spacing = p.scale().min(t * q.scale()) / 32.0;
        let n = (((hi - lo) / spacing).ceil() as usize).clamp(32, 20_000);
        let h = (hi - lo) / n as f64;
        for i in 0..=n {
            let w = lo + i as f64 * h;
            let weight = if i == 0 || i == n { 0.5 * h } else { h };
            let pw = p.value(w);
            if pw == 0.0 {
                continue;
            }
            let jq = q.jet((y - w) / t, order);
            for a in 0..=order {
                out[a] += weight * pw * jq[a];
            }
        }
        for (a, slot) in out.iter_mut().enumerate().take(order + 1) {
            *slot /= t.powi(1 + a as i32);
        }
        out
    }
}

/// Uniform Cartesian grid `[−h, h]^d` with `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XGrid {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

impl XGrid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if points < 2 || !(half_width > 0.0) {
            return Err(Error::param("x_grid", "need at least 2 points and a positive half-width"));
        }
        Ok(Self {
            dim,
            points,
            half_width,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| -self.half_width + i as f64 * h).collect()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of flat index `p`, last axis fastest.
    pub fn node(&self, p: usize) -> Vec<f64> {
        let axis = self.axis();
        let mut rest = p;
        let mut c = vec![0.0; self.dim];
        for slot in c.iter_mut().rev() {
            *slot = axis[rest % self.points];
            rest /= self.points;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub t: f64,
    pub grid: XGrid,
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

fn tail_warnings(f0: &InitialDatum) -> Vec<String> {
    let tail = f0.tail_mass();
    if tail > TAIL_LEVEL {
        vec![format!("quadrature window drops relative tail mass {tail:.2e}; widen the cut")]
    } else {
        Vec::new()
    }
}

/// `ρ_free(t, x) = t^{-d} ∫ f₀(w, (x − w)/t) dw` on every grid node.
pub fn free_density(f0: &InitialDatum, t: f64, grid: &XGrid) -> Result<DensityField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    if grid.dim != f0.dim {
        return Err(Error::param("x_grid", "dimension differs from the datum"));
    }
    let factors: Vec<f64> = grid
        .axis()
        .par_iter()
        .map(|&y| f0.density_factor(t, y, 0)[0])
        .collect();
    let n = grid.points;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let mut rest = p;
            let mut v = f0.amplitude;
            for _ in 0..grid.dim {
                v *= factors[rest % n];
                rest /= n;
            }
            v
        })
        .collect();
    Ok(DensityField {
        t,
        grid: *grid,
        values,
        warnings: tail_warnings(f0),
    })
}

/// `∂_x^α ρ_free(t, x)` at a single point.
pub fn free_density_partial(f0: &InitialDatum, t: f64, alpha: &[usize], x: &[f64]) -> f64 {
    let mut v = f0.amplitude;
    for (i, &a) in alpha.iter().enumerate() {
        v *= f0.density_factor(t, x[i], a)[a];
    }
    v
}

/// Grid used for the norms at time `t`: the ballistic spread of the datum.
pub fn norm_grid(f0: &InitialDatum, t: f64) -> XGrid {
    let half = f0.x_profile.extent(f0.cut) + t * f0.v_profile.extent(f0.cut);
    XGrid {
        dim: f0.dim,
        points: GRID_POINTS,
        half_width: half,
    }
}

/// `(‖∇ᵏρ_free(t)‖_{L¹}, ‖∇ᵏρ_free(t)‖_{L^∞})` for `k ≤ k_max`, Frobenius
/// norm pointwise.
pub fn free_norms(f0: &InitialDatum, t: f64, k_max: usize, grid: &XGrid) -> Vec<(f64, f64)> {
    let d = f0.dim;
    let n = grid.points;
    let table: Vec<[f64; MAX_ORDER + 1]> = grid
        .axis()
        .par_iter()
        .map(|&y| f0.density_factor(t, y, k_max))
        .collect();
    let cell = grid.spacing().powi(d as i32);
    (0..=k_max)
        .map(|k| {
            let indices = multi_indices(d, k);
            let (l1, linf) = (0..grid.len())
                .into_par_iter()
                .map(|p| {
                    let mut c = [0usize; 3];
                    let mut rest = p;
                    for slot in c.iter_mut().take(d) {
                        *slot = rest % n;
                        rest /= n;
                    }
                    let s: f64 = indices
                        .iter()
                        .map(|(alpha, mult)| {
                            let prod: f64 = (0..d).map(|i| table[c[i]][alpha[i]]).product();
                            mult * prod * prod
                        })
                        .sum();
                    let v = f0.amplitude.abs() * s.sqrt();
                    (v * cell, v)
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
            (l1, linf)
        })
        .collect()
}

/// Norm time series of `∇ᵏρ_free` for `k ≤ k_max`.
pub fn free_decay_report(f0: &InitialDatum, k_max: usize, times: &[f64]) -> Result<DecayReport> {
    if k_max > f0.order {
        return Err(Error::Capability(format!(
            "derivatives of order {k_max} requested, datum tracks up to {}",
            f0.order
        )));
    }
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    let mut report = DecayReport {
        warnings: tail_warnings(f0),
        ..Default::default()
    };
    for &t in times {
        let grid = norm_grid(f0, t);
        for (k, (l1, linf)) in free_norms(f0, t, k_max, &grid).into_iter().enumerate() {
            report.push("rho_free", k, NormKind::L1, t, l1);
            report.push("rho_free", k, NormKind::LInf, t, linf);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard(dim: usize) -> InitialDatum {
        InitialDatum::separable(dim, 1.0, Profile::Gaussian { sigma: 1.0 }, Profile::Gaussian { sigma: 1.0 }, 3).unwrap()
    }

    fn normal_density(x: &[f64], var: f64) -> f64 {
        let r2: f64 = x.iter().map(|y| y * y).sum();
        (2.0 * PI * var).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * var)).exp()
    }

    #[test]
    fn matches_gaussian_convolution() {
        let f0 = standard(3);
        for &t in &[0.0, 0.1, 1.0, 3.0, 10.0, 50.0] {
            let grid = XGrid::new(3, 17, 3.0 * (1.0 + t)).unwrap();
            let field = free_density(&f0, t, &grid).unwrap();
            let var = 1.0 + t * t;
            let err = field
                .values
                .iter()
                .enumerate()
                .map(|(p, v)| (v - normal_density(&grid.node(p), var)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "t = {t}: {err}");
        }
    }

    #[test]
    fn peak_value_at_t3() {
        let f0 = standard(3);
        let v = free_density_partial(&f0, 3.0, &[0, 0, 0], &[0.0; 3]);
        assert!((v - (2.0 * PI * 10.0f64).powf(-1.5)).abs() < 1e-9);
        assert!((v - 2.008e-3).abs() < 1e-6);
    }

    #[test]
    fn mass_is_conserved() {
        let f0 = InitialDatum::separable(2, 0.7, Profile::Bump { radius: 1.5 }, Profile::Gaussian { sigma: 0.8 }, 2).unwrap();
        for &t in &[0.0, 0.5, 4.0, 20.0] {
            let norms = free_norms(&f0, t, 0, &norm_grid(&f0, t));
            assert!((norms[0].0 - 0.7).abs() < 1e-6 * 0.7, "t = {t}: {}", norms[0].0);
        }
    }

    #[test]
    fn zero_time_is_velocity_integral() {
        let f0 = InitialDatum::separable(1, 1.0, Profile::Bump { radius: 1.0 }, Profile::Bump { radius: 2.0 }, 2).unwrap();
        let rule = crate::numerics::quadrature::CompositeRule::uniform(-2.0, 2.0, 64, 16);
        for &x in &[-0.6, 0.0, 0.3] {
            let direct = rule.integrate(|v| f0.value(&[x], &[v]));
            let rho = free_density_partial(&f0, 0.0, &[0], &[x]);
            assert!((direct - rho).abs() < 1e-10);
        }
    }

    #[test]
    fn bump_has_unit_mass_and_compact_support() {
        let p = Profile::Bump { radius: 2.0 };
        assert!((p.derivative_norms(0, 8.0).0 - 1.0).abs() < 1e-8);
        assert_eq!(p.value(2.0), 0.0);
        assert_eq!(p.jet(-2.5, 3), [0.0; MAX_ORDER + 1]);
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        for p in [Profile::Gaussian { sigma: 0.7 }, Profile::Bump { radius: 1.3 }] {
            let y = 0.41;
            let h = 1e-4;
            let j = p.jet(y, 4);
            for a in 0..4 {
                let fd = (p.jet(y + h, a)[a] - p.jet(y - h, a)[a]) / (2.0 * h);
                assert!((fd - j[a + 1]).abs() < 1e-6 * (1.0 + j[a + 1].abs()), "{p:?} a={a}");
            }
        }
    }

    #[test]
    fn gradient_commutes_with_change_of_variables() {
        let f0 = InitialDatum::separable(2, 1.0, Profile::Gaussian { sigma: 1.0 }, Profile::Bump { radius: 1.0 }, 2).unwrap();
        let t = 2.5;
        let x = [0.3, -0.8];
        let h = 1e-4;
        for axis in 0..2 {
            let mut alpha = [0, 0];
            alpha[axis] = 1;
            let quad = free_density_partial(&f0, t, &alpha, &x);
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (free_density_partial(&f0, t, &[0, 0], &xp) - free_density_partial(&f0, t, &[0, 0], &xm)) / (2.0 * h);
            assert!((quad - fd).abs() < 1e-7, "axis {axis}: {quad} vs {fd}");
        }
    }

    #[test]
    fn gradient_obeys_dispersive_bound() {
        for f0 in [
            standard(3),
            InitialDatum::separable(3, 1.0, Profile::Bump { radius: 1.0 }, Profile::Bump { radius: 1.0 }, 2).unwrap(),
        ] {
            let bound = f0.grad_v_mixed_norm();
            for &t in &[0.5, 2.0, 8.0, 30.0] {
                let norms = free_norms(&f0, t, 1, &norm_grid(&f0, t));
                let rhs = bound / t.powi(4);
                assert!(norms[1].1 <= rhs * (1.0 + 1e-6), "t = {t}: {} > {rhs}", norms[1].1);
            }
        }
    }

    #[test]
    fn smallness_rescaling() {
        let f0 = InitialDatum::gaussian(3, 1e-3, 2).unwrap();
        assert!((f0.epsilon() - 1e-3).abs() < 1e-15);
        let half = f0.with_smallness(5e-4).unwrap();
        assert!((half.amplitude() / f0.amplitude() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn short_cut_warns() {
        let f0 = standard(1).with_cut(3.0).unwrap();
        let field = free_density(&f0, 1.0, &XGrid::new(1, 5, 2.0).unwrap()).unwrap();
        assert_eq!(field.warnings.len(), 1);
        assert!(free_density(&standard(1), 1.0, &XGrid::new(1, 5, 2.0).unwrap())
            .unwrap()
            .warnings
            .is_empty());
    }

    #[test]
    fn order_beyond_datum_is_rejected() {
        let f0 = InitialDatum::gaussian(3, 1e-3, 2).unwrap();
        assert!(matches!(free_decay_report(&f0, 3, &[1.0]), Err(Error::Capability(_))));
    }
}
