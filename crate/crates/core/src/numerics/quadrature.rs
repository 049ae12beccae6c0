//! Gauss–Legendre rules and composite panels.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite rule: flattened nodes and weights over `[a, b]`.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// `panels` equal panels with `per_panel` Gauss–Legendre nodes each.
    pub fn uniform(a: f64, b: f64, panels: usize, per_panel: usize) -> Self {
        let (x, w) = gauss_legendre(per_panel);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Panels between consecutive `breaks`.
    pub fn with_breaks(breaks: &[f64], per_panel: usize) -> Self {
        let (x, w) = gauss_legendre(per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in breaks.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let h = hi - lo;
            if h <= 0.0 {
                continue;
            }
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Lagrange basis integrals for partial panels.
///
/// For reference nodes `x_m` on `[-1, 1]`, entry `[j][m]` is
/// `∫_{x_j}^{1} l_m(x) dx` where `l_m` is the Lagrange basis polynomial.
pub fn tail_integral_matrix(nodes: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let (gx, gw) = gauss_legendre(n + 2);
    let mut out = vec![vec![0.0; n]; n];
    for (j, &xj) in nodes.iter().enumerate() {
        let half = 0.5 * (1.0 - xj);
        for (m, entry) in out[j].iter_mut().enumerate() {
            *entry = gx
                .iter()
                .zip(&gw)
                .map(|(g, w)| w * half * lagrange(nodes, m, xj + half * (g + 1.0)))
                .sum();
        }
    }
    out
}

fn lagrange(nodes: &[f64], m: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != m)
        .map(|(_, &xi)| (x - xi) / (nodes[m] - xi))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p} q={q}");
            }
        }
    }

    #[test]
    fn composite_rule_integrates_gaussian() {
        let rule = CompositeRule::uniform(-10.0, 10.0, 20, 8);
        let q = rule.integrate(|x| (-0.5 * x * x).exp());
        assert!((q - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tail_matrix_reproduces_cubic_tail_integrals() {
        let (x, _) = gauss_legendre(4);
        let m = tail_integral_matrix(&x);
        for (j, &xj) in x.iter().enumerate() {
            let f = |y: f64| y * y * y - 2.0 * y + 0.5;
            let approx: f64 = (0..4).map(|k| m[j][k] * f(x[k])).sum();
            let anti = |y: f64| 0.25 * y.powi(4) - y * y + 0.5 * y;
            let exact = anti(1.0) - anti(xj);
            assert!((approx - exact).abs() < 1e-13);
        }
    }
}
