//! Homogeneous equilibria μ(v) with closed-form Fourier data.
//!
//! Both built-in families are finite sums of separable Gaussians, so every
//! mixed partial derivative is a product of one-dimensional Hermite factors
//! and the Fourier transform is available in closed form.

use crate::error::{Error, Result};
use crate::numerics::{bracket, multi_indices};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Gaussian tail level the velocity box is sized for.
const TAIL_LEVEL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Maxwellian { sigma: f64 },
    /// Equal-weight Maxwellians centered at `±separation·e₁`.
    DoubleBump { separation: f64, sigma: f64 },
}

impl Family {
    pub fn sigma(&self) -> f64 {
        match *self {
            Family::Maxwellian { sigma } | Family::DoubleBump { sigma, .. } => sigma,
        }
    }

    pub fn separation(&self) -> f64 {
        match *self {
            Family::Maxwellian { .. } => 0.0,
            Family::DoubleBump { separation, .. } => separation,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Maxwellian { .. } => "maxwellian",
            Family::DoubleBump { .. } => "double_bump",
        }
    }
}

/// Stored bound `|∇ᵐμ(v)| ≤ C ⟨v⟩^{-M}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstant {
    pub order: usize,
    pub exponent: f64,
    pub constant: f64,
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    dim: usize,
    family: Family,
    normalization: f64,
    decay_constants: Vec<DecayConstant>,
    max_order: usize,
}

/// Result of [`Equilibrium::verify_decay_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub holds: bool,
    pub worst_constant: f64,
}

/// Tensor-product trapezoid rule on `[-L, L]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityQuadrature {
    pub half_width: f64,
    pub step: f64,
    pub points_per_axis: usize,
}

impl VelocityQuadrature {
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points_per_axis)
            .map(|i| -self.half_width + i as f64 * self.step)
            .collect()
    }
}

/// Default derivative order carried by the decay table (N + 2 with N = 2).
pub const DEFAULT_DECAY_ORDER: usize = 4;

/// Builds an equilibrium with the default decay table.
pub fn make_equilibrium(family: Family, dim: usize) -> Result<Equilibrium> {
    Equilibrium::new(family, dim, DEFAULT_DECAY_ORDER, None)
}

impl Equilibrium {
    /// `max_order` is the largest m stored in the decay table; `exponents`
    /// defaults to `{2, d+1, d+3}`.
    pub fn new(
        family: Family,
        dim: usize,
        max_order: usize,
        exponents: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        let sigma = family.sigma();
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        if let Family::DoubleBump { separation, .. } = family {
            if !(separation >= 0.0) || !separation.is_finite() {
                return Err(Error::param(
                    "u",
                    format!("separation must be non-negative, got {separation}"),
                ));
            }
        }
        let normalization = (2.0 * PI * sigma * sigma).powf(-(dim as f64) / 2.0);
        let mut eq = Self {
            dim,
            family,
            normalization,
            decay_constants: Vec::new(),
            max_order,
        };
        let d = dim as f64;
        let exponents = exponents.unwrap_or_else(|| vec![2.0, d + 1.0, d + 3.0]);
        let mut table = Vec::new();
        for m in 0..=max_order {
            let sups = eq.scan_sups(m, &exponents);
            for (&exponent, &worst) in exponents.iter().zip(&sups) {
                table.push(DecayConstant {
                    order: m,
                    exponent,
                    constant: 1.1 * worst,
                });
            }
        }
        eq.decay_constants = table;
        Ok(eq)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn decay_constants(&self) -> &[DecayConstant] {
        &self.decay_constants
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Rotation invariance about the origin.
    pub fn is_isotropic(&self) -> bool {
        self.family.separation() == 0.0
    }

    fn centers(&self) -> [(f64, f64); 2] {
        // (weight, first-axis shift)
        match self.family {
            Family::Maxwellian { .. } => [(1.0, 0.0), (0.0, 0.0)],
            Family::DoubleBump { separation, .. } => [(0.5, separation), (0.5, -separation)],
        }
    }

    /// `∂^α μ(v)`.
    pub fn partial(&self, alpha: &[usize], v: &[f64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.dim);
        let sigma = self.family.sigma();
        let mut total = 0.0;
        for (weight, shift) in self.centers() {
            if weight == 0.0 {
                continue;
            }
            let mut prod = weight;
            for (i, (&a, &vi)) in alpha.iter().zip(v).enumerate() {
                let y = if i == 0 { vi - shift } else { vi };
                prod *= gaussian_derivative(a, y, sigma);
            }
            total += prod;
        }
        self.normalization * total
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        self.partial(&vec![0; self.dim], v)
    }

    /// Frobenius norm of the order-`m` derivative tensor at `v`.
    pub fn derivative_norm(&self, m: usize, v: &[f64]) -> f64 {
        multi_indices(self.dim, m)
            .iter()
            .map(|(alpha, mult)| {
                let p = self.partial(alpha, v);
                mult * p * p
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `∇μ(v)` for `d ≤ 3`, padded with zeros.
    #[inline]
    pub fn gradient3(&self, v: [f64; 3]) -> [f64; 3] {
        let sigma = self.family.sigma();
        let s2 = sigma * sigma;
        let mut out = [0.0; 3];
        for (weight, shift) in self.centers() {
            if weight == 0.0 {
                continue;
            }
            let mut y = v;
            y[0] -= shift;
            let r2: f64 = y[..self.dim].iter().map(|c| c * c).sum();
            let g = weight * self.normalization * (-0.5 * r2 / s2).exp();
            for i in 0..self.dim {
                out[i] -= y[i] / s2 * g;
            }
        }
        out
    }

    /// Closed-form `μ̂(η) = ∫ μ(v) e^{-iv·η} dv`; real for both families.
    pub fn fourier(&self, eta: &[f64]) -> f64 {
        let sigma = self.family.sigma();
        let n2: f64 = eta.iter().map(|e| e * e).sum();
        let osc = (self.family.separation() * eta[0]).cos();
        osc * (-0.5 * sigma * sigma * n2).exp()
    }

    /// `∇̂μ(η) = iη μ̂(η)`.
    pub fn fourier_gradient(&self, eta: &[f64]) -> Vec<Complex64> {
        let m = self.fourier(eta);
        eta.iter().map(|&e| Complex64::new(0.0, e * m)).collect()
    }

    /// `∫ (ξ·v)² μ(v) dv`, the curvature of `μ̂` at the origin along ξ.
    pub fn second_moment_along(&self, xi: &[f64]) -> f64 {
        let sigma = self.family.sigma();
        let n2: f64 = xi.iter().map(|e| e * e).sum();
        let u = self.family.separation();
        sigma * sigma * n2 + u * u * xi[0] * xi[0]
    }

    /// Upper bound of `∫_T^∞ |K(t, ξ)| dt` from the Gaussian envelope
    /// `|μ̂(η)| ≤ exp(-σ²|η|²/2)` shared by both families.
    pub fn kernel_tail_bound(&self, xi_norm: f64, t_cut: f64) -> f64 {
        if xi_norm == 0.0 {
            return 0.0;
        }
        let sigma = self.family.sigma();
        (-0.5 * sigma * sigma * xi_norm * xi_norm * t_cut * t_cut).exp()
            / (sigma * sigma * (1.0 + xi_norm * xi_norm))
    }

    /// Trapezoid grid whose box leaves a Gaussian tail below 1e-12.
    pub fn velocity_quadrature(&self) -> VelocityQuadrature {
        let sigma = self.family.sigma();
        let reach = sigma * (2.0 * (1.0 / TAIL_LEVEL).ln()).sqrt() + self.family.separation();
        let step = sigma / 4.0;
        let half_steps = (reach / step).ceil() as usize;
        VelocityQuadrature {
            half_width: half_steps as f64 * step,
            step,
            points_per_axis: 2 * half_steps + 1,
        }
    }

    /// Trapezoid mass on the velocity grid, summed term by term through the
    /// separable structure.
    pub fn quadrature_mass(&self) -> f64 {
        let q = self.velocity_quadrature();
        let nodes = q.nodes();
        let sigma = self.family.sigma();
        let mut total = 0.0;
        for (weight, shift) in self.centers() {
            if weight == 0.0 {
                continue;
            }
            let mut prod = weight;
            for axis in 0..self.dim {
                let s = if axis == 0 { shift } else { 0.0 };
                let line: f64 = nodes
                    .iter()
                    .map(|&v| gaussian_derivative(0, v - s, sigma))
                    .sum::<f64>()
                    * q.step;
                prod *= line;
            }
            total += prod;
        }
        self.normalization * total
    }

    /// Checks `|∇ᵐμ(v)| ⟨v⟩^M ≤ C_{m,M}` on the given samples.
    pub fn verify_decay_bound(&self, m: usize, exponent: f64, samples: &[Vec<f64>]) -> Result<DecayCheck> {
        if m > self.max_order {
            return Err(Error::Capability(format!(
                "derivative order {m} exceeds stored order {}",
                self.max_order
            )));
        }
        let stored = self
            .decay_constants
            .iter()
            .find(|c| c.order == m && (c.exponent - exponent).abs() < 1e-12)
            .ok_or_else(|| {
                Error::Capability(format!("no decay constant stored for (m, M) = ({m}, {exponent})"))
            })?;
        let worst = samples
            .iter()
            .map(|v| {
                let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                self.derivative_norm(m, v) * bracket(r).powf(exponent)
            })
            .fold(0.0, f64::max);
        Ok(DecayCheck {
            holds: worst <= stored.constant,
            worst_constant: worst,
        })
    }

    /// Sup of `|∇ᵐμ| ⟨v⟩^M` over an axisymmetric scan `(v₁, |v_⊥|)`; the
    /// Frobenius norm is invariant under rotations about e₁.
    /// `sup_v |∇ᵐμ(v)|⟨v⟩^p` for each exponent p, over one shared scan.
    fn scan_sups(&self, m: usize, exponents: &[f64]) -> Vec<f64> {
        let sigma = self.family.sigma();
        let widest = exponents.iter().fold(1.0f64, |a, &p| a.max(p));
        let reach = 16.0 * sigma + self.family.separation() + widest * sigma;
        let n_par = 321;
        let n_perp = if self.dim > 1 { 161 } else { 1 };
        let indices = multi_indices(self.dim, m);
        let mut worst = vec![0.0f64; exponents.len()];
        let mut v = vec![0.0; self.dim];
        for i in 0..n_par {
            let v1 = -reach + 2.0 * reach * i as f64 / (n_par - 1) as f64;
            for j in 0..n_perp {
                let rho = if n_perp > 1 {
                    reach * j as f64 / (n_perp - 1) as f64
                } else {
                    0.0
                };
                v[0] = v1;
                if self.dim > 1 {
                    v[1] = rho;
                }
                let norm = indices
                    .iter()
                    .map(|(alpha, mult)| {
                        let p = self.partial(alpha, &v);
                        mult * p * p
                    })
                    .sum::<f64>()
                    .sqrt();
                let r = (v1 * v1 + rho * rho).sqrt();
                for (w, &p) in worst.iter_mut().zip(exponents) {
                    *w = w.max(norm * bracket(r).powf(p));
                }
            }
        }
        worst
    }

    /// Plain-text config lines (`key = value`).
    pub fn to_config(&self) -> String {
        let mut s = format!(
            "family = {}\nd = {}\nsigma = {}\n",
            self.family.name(),
            self.dim,
            self.family.sigma()
        );
        if let Family::DoubleBump { separation, .. } = self.family {
            s.push_str(&format!("u = {separation}\n"));
        }
        s
    }
}

/// `d^n/dy^n exp(-y²/(2σ²)) = (-1/σ)^n He_n(y/σ) exp(-y²/(2σ²))`.
#[inline]
pub fn gaussian_derivative(n: usize, y: f64, sigma: f64) -> f64 {
    let x = y / sigma;
    let g = (-0.5 * x * x).exp();
    if n == 0 {
        return g;
    }
    let mut h0 = 1.0;
    let mut h1 = x;
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * h1 * g / sigma.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn maxwell(d: usize) -> Equilibrium {
        make_equilibrium(Family::Maxwellian { sigma: 1.0 }, d).unwrap()
    }

    #[test]
    fn maxwellian_peak_value() {
        let eq = maxwell(3);
        assert_relative_eq!(eq.value(&[0.0; 3]), (2.0 * PI).powf(-1.5), epsilon = 1e-15);
        assert_relative_eq!(eq.value(&[0.0; 3]), 0.063_493_635_934_240_97, epsilon = 1e-12);
    }

    #[test]
    fn zero_separation_double_bump_is_maxwellian() {
        let a = maxwell(3);
        let b = make_equilibrium(Family::DoubleBump { separation: 0.0, sigma: 1.0 }, 3).unwrap();
        for v in [[0.3, -1.2, 0.5], [2.0, 0.0, 0.1], [-0.7, 0.7, -2.2]] {
            assert_relative_eq!(a.value(&v), b.value(&v), epsilon = 1e-15);
            assert_relative_eq!(a.derivative_norm(2, &v), b.derivative_norm(2, &v), epsilon = 1e-15);
        }
        assert!(b.is_isotropic());
    }

    #[test]
    fn quadrature_mass_is_one() {
        assert!((maxwell(3).quadrature_mass() - 1.0).abs() < 1e-8);
        let db = make_equilibrium(Family::DoubleBump { separation: 2.0, sigma: 0.7 }, 2).unwrap();
        assert!((db.quadrature_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fourier_gradient_examples() {
        let eq = maxwell(3);
        let z = eq.fourier_gradient(&[0.0; 3]);
        assert!(z.iter().all(|c| c.norm() == 0.0));
        let g = eq.fourier_gradient(&[1.0, 0.0, 0.0]);
        assert_relative_eq!(g[0].im, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(g[0].im, 0.60653, epsilon = 1e-5);
        assert_eq!(g[0].re, 0.0);
        let db = make_equilibrium(Family::DoubleBump { separation: 2.0, sigma: 1.0 }, 3).unwrap();
        let g = db.fourier_gradient(&[PI / 4.0, 0.0, 0.0]);
        assert!(g[0].norm() < 1e-15);
    }

    #[test]
    fn non_positive_sigma_rejected() {
        let err = make_equilibrium(Family::Maxwellian { sigma: 0.0 }, 3).unwrap_err();
        assert!(matches!(err, Error::Parameter { name: "sigma", .. }));
        let err = make_equilibrium(Family::Maxwellian { sigma: 1.0 }, 0).unwrap_err();
        assert!(matches!(err, Error::Parameter { name: "d", .. }));
        let err = make_equilibrium(Family::DoubleBump { separation: -1.0, sigma: 1.0 }, 3).unwrap_err();
        assert!(matches!(err, Error::Parameter { name: "u", .. }));
    }

    #[test]
    fn decay_bound_on_ball_samples() {
        let eq = maxwell(3);
        let samples: Vec<Vec<f64>> = (0..=60)
            .flat_map(|i| {
                let r = 0.1 * i as f64;
                [vec![r, 0.0, 0.0], vec![0.0, r / 2f64.sqrt(), -r / 2f64.sqrt()]]
            })
            .collect();
        let check = eq.verify_decay_bound(0, 2.0, &samples).unwrap();
        assert!(check.holds);
        assert!(check.worst_constant.is_finite() && check.worst_constant > 0.0);
        let empty = eq.verify_decay_bound(3, 6.0, &[]).unwrap();
        assert!(empty.holds);
        assert_eq!(empty.worst_constant, 0.0);
    }

    #[test]
    fn gradient_bound_peaks_away_from_origin() {
        let eq = maxwell(3);
        let weighted = |r: f64| eq.derivative_norm(1, &[r, 0.0, 0.0]) * bracket(r).powi(4);
        assert_eq!(eq.derivative_norm(1, &[0.0; 3]), 0.0);
        let (best_r, best) = (0..=600)
            .map(|i| 0.01 * i as f64)
            .map(|r| (r, weighted(r)))
            .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!(best_r > 0.5 && best_r < 5.0, "argmax {best_r}");
        assert!(best > weighted(0.0));
    }

    #[test]
    fn missing_order_is_capability_error() {
        let eq = maxwell(3);
        assert!(matches!(
            eq.verify_decay_bound(DEFAULT_DECAY_ORDER + 1, 2.0, &[]),
            Err(Error::Capability(_))
        ));
        assert!(matches!(eq.verify_decay_bound(1, 5.5, &[]), Err(Error::Capability(_))));
    }

    #[test]
    fn gradient3_matches_partials() {
        let db = make_equilibrium(Family::DoubleBump { separation: 1.3, sigma: 0.8 }, 3).unwrap();
        let v = [0.4, -0.2, 1.1];
        let g = db.gradient3(v);
        for i in 0..3 {
            let mut alpha = vec![0; 3];
            alpha[i] = 1;
            assert_relative_eq!(g[i], db.partial(&alpha, &v), epsilon = 1e-15);
        }
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let db = make_equilibrium(Family::DoubleBump { separation: 1.0, sigma: 1.0 }, 3).unwrap();
        let v = [0.3, 0.8, -0.4];
        let exact = db.gradient3(v);
        let err = |h: f64| {
            (0..3)
                .map(|i| {
                    let mut p = v;
                    let mut m = v;
                    p[i] += h;
                    m[i] -= h;
                    ((db.value(&p) - db.value(&m)) / (2.0 * h) - exact[i]).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn config_serialization_lists_keys() {
        let db = make_equilibrium(Family::DoubleBump { separation: 2.0, sigma: 1.0 }, 3).unwrap();
        let text = db.to_config();
        assert!(text.contains("family = double_bump"));
        assert!(text.contains("u = 2"));
        assert!(text.contains("sigma = 1"));
        assert!(text.contains("d = 3"));
    }
}
