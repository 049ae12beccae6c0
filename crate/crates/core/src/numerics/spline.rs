//! Cubic splines on sorted abscissae.

/// Boundary condition at the left end; the right end is always natural.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeftBoundary {
    Natural,
    /// Zero slope, used for even functions sampled on `r >= 0`.
    ZeroSlope,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    uniform: Option<(f64, f64)>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>, left: LeftBoundary) -> Self {
        let n = x.len();
        assert_eq!(n, y.len());
        assert!(n >= 2, "spline needs two points");
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for second derivatives
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            match left {
                LeftBoundary::Natural => {
                    b[0] = 1.0;
                }
                LeftBoundary::ZeroSlope => {
                    let h0 = x[1] - x[0];
                    b[0] = h0 / 3.0;
                    c[0] = h0 / 6.0;
                    d[0] = (y[1] - y[0]) / h0;
                }
            }
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                a[i] = h0 / 6.0;
                b[i] = (h0 + h1) / 3.0;
                c[i] = h1 / 6.0;
                d[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            }
            b[n - 1] = 1.0;
            // Thomas algorithm
            for i in 1..n {
                let w = a[i] / b[i - 1];
                b[i] -= w * c[i - 1];
                d[i] -= w * d[i - 1];
            }
            m[n - 1] = d[n - 1] / b[n - 1];
            for i in (0..n - 1).rev() {
                m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
            }
        }
        let h = x[1] - x[0];
        let is_uniform = x
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0));
        let uniform = is_uniform.then_some((x[0], h));
        Self { x, y, m, uniform }
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        if let Some((x0, h)) = self.uniform {
            let i = ((t - x0) / h).floor();
            if i < 0.0 {
                0
            } else {
                (i as usize).min(n - 2)
            }
        } else {
            match self.x.partition_point(|&v| v <= t) {
                0 => 0,
                p => (p - 1).min(n - 2),
            }
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}
