//! Radial functions in three dimensions on a uniform grid `r_j = jΔr`,
//! `j < N`, with transform pairs
//!
//! ```text
//! F(k_m) = (4π/k_m) Σ_j Δr · r_j f(r_j) sin(k_m r_j),      k_m = mπ/(NΔr)
//! r f(r)  = (Δk/2π²) Σ_m k_m F(k_m) sin(k_m r)
//! ```
//!
//! Derivative norms are Frobenius norms of the full derivative tensor,
//! expressed through the radial profile `f(r)`.

use super::bessel::scaled_spherical_bessel_sc;
use super::fft::{CosineSums, SineTransform};
use std::f64::consts::PI;

/// Points next to the origin evaluated by direct Bessel sums, where the
/// divided-difference recursion loses precision.
const NEAR_ORIGIN: usize = 48;

pub const MAX_DERIVATIVE: usize = 3;

pub struct RadialGrid {
    n: usize,
    dr: f64,
    sine: SineTransform,
    cosine: CosineSums,
}

/// `f`, its radial derivatives and the two mixed quantities that enter the
/// tensor norms, sampled at `r_0 = 0, …, r_{N-1}`.
#[derive(Debug, Clone)]
pub struct RadialJet {
    pub f: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    /// `f'(r)/r`
    pub d1_over_r: Vec<f64>,
    /// `f''(r)/r - f'(r)/r²`
    pub mixed: Vec<f64>,
}

impl RadialJet {
    /// `|∇ᵏf|(r_j)` for `k ≤ 3`.
    pub fn tensor_norm(&self, k: usize, j: usize) -> f64 {
        match k {
            0 => self.f[j].abs(),
            1 => self.d1[j].abs(),
            2 => (self.d2[j].powi(2) + 2.0 * self.d1_over_r[j].powi(2)).sqrt(),
            3 => (self.d3[j].powi(2) + 6.0 * self.mixed[j].powi(2)).sqrt(),
            _ => panic!("derivative order {k} not supported"),
        }
    }
}

impl RadialGrid {
    pub fn new(n: usize, dr: f64) -> Self {
        assert!(n >= 4 && dr > 0.0);
        Self {
            n,
            dr,
            sine: SineTransform::new(n),
            cosine: CosineSums::new(n),
        }
    }

    /// Grid with spacing at most `dr` and outer radius at least `radius`,
    /// rounded up to an FFT-friendly size.
    pub fn covering(radius: f64, dr: f64) -> Self {
        let n = fft_friendly(((radius / dr).ceil() as usize).max(8));
        Self::new(n, dr)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn outer_radius(&self) -> f64 {
        self.n as f64 * self.dr
    }

    pub fn dk(&self) -> f64 {
        PI / self.outer_radius()
    }

    /// `r_0 = 0, …, r_{N-1}`.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.dr).collect()
    }

    /// `k_1, …, k_{N-1}`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (1..self.n).map(|m| m as f64 * self.dk()).collect()
    }

    /// Samples `f(r_j)`, `j < N`, to spectral values `F(k_m)`.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        let rf: Vec<f64> = (1..self.n).map(|j| j as f64 * self.dr * f[j]).collect();
        let s = self.sine.apply(&rf);
        self.wavenumbers()
            .iter()
            .zip(s)
            .map(|(&k, v)| 4.0 * PI * self.dr * v / k)
            .collect()
    }

    /// Spectral values to `f(r_j)`, `j < N`.
    pub fn inverse(&self, spec: &[f64]) -> Vec<f64> {
        assert_eq!(spec.len(), self.n - 1);
        let dk = self.dk();
        let ks = self.wavenumbers();
        let c: Vec<f64> = ks.iter().zip(spec).map(|(&k, &s)| dk * k * s / (2.0 * PI * PI)).collect();
        let g = self.sine.apply(&c);
        let mut f = Vec::with_capacity(self.n);
        f.push(ks.iter().zip(spec).map(|(&k, &s)| k * k * s).sum::<f64>() * dk / (2.0 * PI * PI));
        f.extend(g.iter().enumerate().map(|(j, v)| v / ((j + 1) as f64 * self.dr)));
        f
    }

    /// Radial derivatives up to third order from spectral values.
    pub fn jet(&self, spec: &[f64]) -> RadialJet {
        assert_eq!(spec.len(), self.n - 1);
        let n = self.n;
        let dk = self.dk();
        let ks = self.wavenumbers();
        let c: Vec<f64> = ks.iter().zip(spec).map(|(&k, &s)| dk * k * s / (2.0 * PI * PI)).collect();
        let ck: Vec<f64> = c.iter().zip(&ks).map(|(c, k)| c * k).collect();
        let ck2: Vec<f64> = ck.iter().zip(&ks).map(|(c, k)| -c * k).collect();
        let ck3: Vec<f64> = ck2.iter().zip(&ks).map(|(c, k)| c * k).collect();
        let g0 = self.sine.apply(&c);
        let g1 = self.cosine.apply(&ck);
        let g2 = self.sine.apply(&ck2);
        let g3 = self.cosine.apply(&ck3);

        let mut jet = RadialJet {
            f: vec![0.0; n],
            d1: vec![0.0; n],
            d2: vec![0.0; n],
            d3: vec![0.0; n],
            d1_over_r: vec![0.0; n],
            mixed: vec![0.0; n],
        };
        let near = NEAR_ORIGIN.min(n);
        for j in near..n {
            let r = j as f64 * self.dr;
            let i = j - 1;
            let f = g0[i] / r;
            let f1 = (g1[i] - f) / r;
            let f2 = (g2[i] - 2.0 * f1) / r;
            let f3 = (g3[i] - 3.0 * f2) / r;
            jet.f[j] = f;
            jet.d1[j] = f1;
            jet.d2[j] = f2;
            jet.d3[j] = f3;
            jet.d1_over_r[j] = f1 / r;
            jet.mixed[j] = (f2 - f1 / r) / r;
        }
        // near the origin: f = Σ a_m u₀(k_m r) with a_m = (Δk/2π²) k_m² F_m
        let a: Vec<f64> = ks.iter().zip(spec).map(|(&k, &s)| dk * k * k * s / (2.0 * PI * PI)).collect();
        for j in 0..near {
            let r = j as f64 * self.dr;
            let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
            for (m, &k) in ks.iter().enumerate() {
                let x = k * r;
                let (sn, cs) = x.sin_cos();
                let u = scaled_spherical_bessel_sc(x, sn, cs);
                let k2 = k * k;
                s0 += a[m] * u[0];
                s1 += a[m] * k2 * u[1];
                s2 += a[m] * k2 * k2 * u[2];
                s3 += a[m] * k2 * k2 * k2 * u[3];
            }
            jet.f[j] = s0;
            jet.d1[j] = -r * s1;
            jet.d2[j] = -s1 + r * r * s2;
            jet.d3[j] = 3.0 * r * s2 - r * r * r * s3;
            jet.d1_over_r[j] = -s1;
            jet.mixed[j] = r * s2;
        }
        jet
    }

    /// `(‖∇ᵏf‖_{L¹}, ‖∇ᵏf‖_{L^∞})` for each `k ≤ k_max`.
    pub fn norms(&self, spec: &[f64], k_max: usize) -> Vec<(f64, f64)> {
        assert!(k_max <= MAX_DERIVATIVE);
        let jet = self.jet(spec);
        (0..=k_max)
            .map(|k| {
                let mut l1 = 0.0;
                let mut linf = 0.0f64;
                for j in 0..self.n {
                    let v = jet.tensor_norm(k, j);
                    let r = j as f64 * self.dr;
                    l1 += 4.0 * PI * r * r * v * self.dr;
                    linf = linf.max(v);
                }
                (l1, linf)
            })
            .collect()
    }

    /// `(‖f‖_{L¹}, ‖f‖_{L^∞})` of physical samples.
    pub fn sample_norms(&self, f: &[f64]) -> (f64, f64) {
        let mut l1 = 0.0;
        let mut linf = 0.0f64;
        for (j, v) in f.iter().enumerate() {
            let r = j as f64 * self.dr;
            l1 += 4.0 * PI * r * r * v.abs() * self.dr;
            linf = linf.max(v.abs());
        }
        (l1, linf)
    }
}

/// Smallest `2^a 3^b 5^c ≥ n`.
pub fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::gaussian_derivative;
    use crate::numerics::multi_indices;

    fn gaussian_spec(grid: &RadialGrid, s: f64) -> Vec<f64> {
        // f = exp(-r²/(2s²)) ⇒ F(k) = (2π s²)^{3/2} exp(-s²k²/2)
        grid.wavenumbers()
            .iter()
            .map(|&k| (2.0 * PI * s * s).powf(1.5) * (-0.5 * s * s * k * k).exp())
            .collect()
    }

    /// Frobenius norm of the Cartesian derivative tensor of the separable
    /// Gaussian at `(r, 0, 0)` rotated onto a generic direction.
    fn cartesian_norm(k: usize, x: [f64; 3], s: f64) -> f64 {
        multi_indices(3, k)
            .iter()
            .map(|(alpha, mult)| {
                let p: f64 = (0..3).map(|i| gaussian_derivative(alpha[i], x[i], s)).product();
                mult * p * p
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn transform_pair_round_trip() {
        let grid = RadialGrid::new(256, 0.1);
        let f: Vec<f64> = grid.radii().iter().map(|r| (-r * r / 2.0).exp()).collect();
        let back = grid.inverse(&grid.forward(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_closed_form_gaussian() {
        let grid = RadialGrid::new(200, 0.1);
        let f: Vec<f64> = grid.radii().iter().map(|r| (-r * r / 2.0).exp()).collect();
        let spec = grid.forward(&f);
        for (k, v) in grid.wavenumbers().iter().zip(&spec).take(50) {
            let exact = (2.0 * PI).powf(1.5) * (-k * k / 2.0).exp();
            assert!((v - exact).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn tensor_norms_match_cartesian_oracle() {
        let s = 1.3;
        let grid = RadialGrid::new(400, 0.05);
        let jet = grid.jet(&gaussian_spec(&grid, s));
        let dir = [0.48f64, -0.6, 0.64];
        let len = (dir.iter().map(|d| d * d).sum::<f64>()).sqrt();
        for j in [0, 1, 5, 30, 47, 48, 60, 120] {
            let r = j as f64 * grid.dr();
            let x = [r * dir[0] / len, r * dir[1] / len, r * dir[2] / len];
            for k in 0..=3 {
                let exact = cartesian_norm(k, x, s);
                let got = jet.tensor_norm(k, j);
                assert!((got - exact).abs() < 1e-9, "j={j} k={k}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn l1_of_gaussian_is_its_mass() {
        let s = 0.7;
        let grid = RadialGrid::new(300, 0.05);
        let norms = grid.norms(&gaussian_spec(&grid, s), 0);
        assert!((norms[0].0 - (2.0 * PI * s * s).powf(1.5)).abs() < 1e-9);
        assert!((norms[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn friendly_sizes() {
        assert_eq!(fft_friendly(7), 8);
        assert_eq!(fft_friendly(121), 125);
        assert_eq!(fft_friendly(64), 64);
    }
}
