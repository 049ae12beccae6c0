//! Force fields `E(t, x)` driving the characteristics.

use crate::error::{Error, Result};
use crate::numerics::bracket;

/// A time-dependent vector field on `R^d`, `d ≤ 3`; unused components are 0.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64]) -> [f64; 3];
}

/// Analytic fields with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticField {
    Zero { dim: usize },
    Constant { dim: usize, e0: [f64; 3] },
    /// `e0 / (1 + t)^power`, uniform in space.
    PowerDecay { dim: usize, e0: [f64; 3], power: f64 },
    /// `ε log(2+t)/(1+t)^d · e(x/(1+t))` with `e(y) = −√e·y·exp(−|y|²/2)`,
    /// so `‖∇ᵏE(t)‖_{L^∞} = c_k ε log(2+t)/(1+t)^{d+k}` and `c_0 = 1`.
    Saturating { dim: usize, eps: f64 },
}

impl SyntheticField {
    pub fn saturating(dim: usize, eps: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::param("eps", "must be non-negative and finite"));
        }
        Ok(SyntheticField::Saturating { dim, eps })
    }

    /// `sup_x |E(t, x)|`.
    pub fn sup_norm(&self, t: f64) -> f64 {
        match *self {
            SyntheticField::Zero { .. } => 0.0,
            SyntheticField::Constant { e0, .. } => norm3(&e0),
            SyntheticField::PowerDecay { e0, power, .. } => norm3(&e0) / (1.0 + t).powf(power),
            SyntheticField::Saturating { dim, eps } => amplitude(dim, eps, t),
        }
    }

    /// `∂_l E^m` as `[m][l]`.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        if let SyntheticField::Saturating { dim, eps } = *self {
            let l = 1.0 + t;
            let a = amplitude(dim, eps, t) / l;
            let y: Vec<f64> = x.iter().map(|v| v / l).collect();
            let g = gauss(&y);
            for m in 0..dim {
                for n in 0..dim {
                    let delta = if m == n { 1.0 } else { 0.0 };
                    out[m][n] = -a * SQRT_E * (delta - y[m] * y[n]) * g;
                }
            }
        }
        out
    }

    /// `∂_l ∂_n E^m` as `[m][l][n]`.
    pub fn hessian(&self, t: f64, x: &[f64]) -> [[[f64; 3]; 3]; 3] {
        let mut out = [[[0.0; 3]; 3]; 3];
        if let SyntheticField::Saturating { dim, eps } = *self {
            let l = 1.0 + t;
            let a = amplitude(dim, eps, t) / (l * l);
            let y: Vec<f64> = x.iter().map(|v| v / l).collect();
            let g = gauss(&y);
            let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
            for m in 0..dim {
                for p in 0..dim {
                    for n in 0..dim {
                        out[m][p][n] = a
                            * SQRT_E
                            * (delta(m, n) * y[p] + delta(p, n) * y[m] + delta(m, p) * y[n] - y[m] * y[p] * y[n])
                            * g;
                    }
                }
            }
        }
        out
    }
}

const SQRT_E: f64 = 1.648_721_270_700_128_1;

fn amplitude(dim: usize, eps: f64, t: f64) -> f64 {
    eps * (2.0 + t).ln() / (1.0 + t).powi(dim as i32)
}

fn gauss(y: &[f64]) -> f64 {
    (-0.5 * y.iter().map(|v| v * v).sum::<f64>()).exp()
}

fn norm3(e: &[f64; 3]) -> f64 {
    e.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl VectorField for SyntheticField {
    fn dim(&self) -> usize {
        match *self {
            SyntheticField::Zero { dim }
            | SyntheticField::Constant { dim, .. }
            | SyntheticField::PowerDecay { dim, .. }
            | SyntheticField::Saturating { dim, .. } => dim,
        }
    }

    fn eval(&self, t: f64, x: &[f64]) -> [f64; 3] {
        match *self {
            SyntheticField::Zero { .. } => [0.0; 3],
            SyntheticField::Constant { e0, .. } => e0,
            SyntheticField::PowerDecay { e0, power, .. } => {
                let s = (1.0 + t).powf(-power);
                [e0[0] * s, e0[1] * s, e0[2] * s]
            }
            SyntheticField::Saturating { dim, eps } => {
                let l = 1.0 + t;
                let a = amplitude(dim, eps, t);
                let y: Vec<f64> = x.iter().map(|v| v / l).collect();
                let g = gauss(&y);
                let mut out = [0.0; 3];
                for m in 0..dim {
                    out[m] = -a * SQRT_E * y[m] * g;
                }
                out
            }
        }
    }
}

/// Sampled field: cubic Lagrange in `x` on a uniform box, linear in `t`.
/// Zero outside the box; clamped to the first/last sample in time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    dim: usize,
    t_grid: Vec<f64>,
    points: usize,
    half_width: f64,
    /// `samples[i][p]` at time `t_grid[i]` and flat node `p`, last axis fastest.
    samples: Vec<Vec<[f64; 3]>>,
}

impl FieldHistory {
    pub fn new(dim: usize, t_grid: Vec<f64>, points: usize, half_width: f64, samples: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("t_grid", "must be non-empty and strictly increasing"));
        }
        if points < 4 || !(half_width > 0.0) {
            return Err(Error::param("x_grid", "need at least 4 points per axis and a positive half-width"));
        }
        if samples.len() != t_grid.len() || samples.iter().any(|s| s.len() != points.pow(dim as u32)) {
            return Err(Error::param("samples", "shape does not match the grids"));
        }
        if samples.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("samples", "non-finite field value"));
        }
        Ok(Self {
            dim,
            t_grid,
            points,
            half_width,
            samples,
        })
    }

    /// Samples `field` on the given grids.
    pub fn from_field(field: &dyn VectorField, t_grid: Vec<f64>, points: usize, half_width: f64) -> Result<Self> {
        let dim = field.dim();
        let h = 2.0 * half_width / (points - 1).max(1) as f64;
        let total = points.pow(dim as u32);
        let samples = t_grid
            .iter()
            .map(|&t| {
                (0..total)
                    .map(|p| {
                        let mut rest = p;
                        let mut x = vec![0.0; dim];
                        for slot in x.iter_mut().rev() {
                            *slot = -half_width + (rest % points) as f64 * h;
                            rest /= points;
                        }
                        field.eval(t, &x)
                    })
                    .collect()
            })
            .collect();
        Self::new(dim, t_grid, points, half_width, samples)
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    fn spatial(&self, i: usize, x: &[f64]) -> [f64; 3] {
        let d = self.dim;
        let h = self.spacing();
        let n = self.points;
        let mut base = [0usize; 3];
        let mut weights = [[0.0; 4]; 3];
        for a in 0..d {
            let u = (x[a] + self.half_width) / h;
            if u < 0.0 || u > (n - 1) as f64 {
                return [0.0; 3];
            }
            let b = (u.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
            base[a] = b;
            let r = u - b as f64;
            // four-point Lagrange weights at nodes 0..3
            weights[a] = [
                -(r - 1.0) * (r - 2.0) * (r - 3.0) / 6.0,
                r * (r - 2.0) * (r - 3.0) / 2.0,
                -r * (r - 1.0) * (r - 3.0) / 2.0,
                r * (r - 1.0) * (r - 2.0) / 6.0,
            ];
        }
        let mut out = [0.0; 3];
        let stencil = 4usize.pow(d as u32);
        for q in 0..stencil {
            let mut rest = q;
            let mut flat = 0;
            let mut w = 1.0;
            for a in 0..d {
                let o = rest % 4;
                rest /= 4;
                w *= weights[a][o];
                flat = flat * n + base[a] + o;
            }
            let v = &self.samples[i][flat];
            for c in 0..3 {
                out[c] += w * v[c];
            }
        }
        out
    }

    /// `max_s ⟨s⟩^{d+k} ‖∇ᵏE(s)‖_{L^∞}` for `k ≤ order`, from grid
    /// differences of the samples (component-wise max, `k ≤ 2`).
    pub fn decay_ledger(&self, order: usize) -> Vec<f64> {
        let d = self.dim;
        let n = self.points;
        let h = self.spacing();
        (0..=order.min(2))
            .map(|k| {
                let mut best = 0.0f64;
                for (i, &t) in self.t_grid.iter().enumerate() {
                    let s = &self.samples[i];
                    let mut sup = 0.0f64;
                    for p in 0..s.len() {
                        let mut idx = [0usize; 3];
                        let mut rest = p;
                        for a in (0..d).rev() {
                            idx[a] = rest % n;
                            rest /= n;
                        }
                        if (0..d).any(|a| idx[a] == 0 || idx[a] == n - 1) && k > 0 {
                            continue;
                        }
                        for c in 0..d {
                            let v = match k {
                                0 => s[p][c].abs(),
                                1 => (0..d)
                                    .map(|a| {
                                        let step = n.pow((d - 1 - a) as u32);
                                        ((s[p + step][c] - s[p - step][c]) / (2.0 * h)).abs()
                                    })
                                    .fold(0.0, f64::max),
                                _ => (0..d)
                                    .map(|a| {
                                        let step = n.pow((d - 1 - a) as u32);
                                        ((s[p + step][c] - 2.0 * s[p][c] + s[p - step][c]) / (h * h)).abs()
                                    })
                                    .fold(0.0, f64::max),
                            };
                            sup = sup.max(v);
                        }
                    }
                    best = best.max(bracket(t).powi((d + k) as i32) * sup);
                }
                best
            })
            .collect()
    }
}

impl VectorField for FieldHistory {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64]) -> [f64; 3] {
        let g = &self.t_grid;
        if t <= g[0] || g.len() == 1 {
            return self.spatial(0, x);
        }
        let last = g.len() - 1;
        if t >= g[last] {
            return self.spatial(last, x);
        }
        let i = g.partition_point(|&s| s <= t) - 1;
        let r = (t - g[i]) / (g[i + 1] - g[i]);
        let a = self.spatial(i, x);
        let b = self.spatial(i + 1, x);
        [
            (1.0 - r) * a[0] + r * b[0],
            (1.0 - r) * a[1] + r * b[1],
            (1.0 - r) * a[2] + r * b[2],
        ]
    }
}
