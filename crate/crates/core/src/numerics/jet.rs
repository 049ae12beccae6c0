//! Truncated Taylor series arithmetic, used for exact derivatives of the
//! built-in one-dimensional profiles.

pub const MAX_ORDER: usize = 8;

/// Taylor coefficients `c[k] = f^{(k)}(x0) / k!` up to `order`.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    c: [f64; MAX_ORDER + 1],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = value;
        Self { c, order }
    }

    /// The identity map `x` expanded at `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Self::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in self.c.iter_mut().take(self.order + 1) {
            *v *= s;
        }
        self
    }

    pub fn add_const(mut self, a: f64) -> Self {
        self.c[0] += a;
        self
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            c[k] = (0..=k).map(|i| self.c[i] * other.c[k - i]).sum();
        }
        Jet { c, order }
    }

    pub fn recip(&self) -> Jet {
        let a0 = self.c[0];
        let mut r = [0.0; MAX_ORDER + 1];
        r[0] = 1.0 / a0;
        for k in 1..=self.order {
            let s: f64 = (1..=k).map(|i| self.c[i] * r[k - i]).sum();
            r[k] = -s / a0;
        }
        Jet {
            c: r,
            order: self.order,
        }
    }

    pub fn exp(&self) -> Jet {
        let mut e = [0.0; MAX_ORDER + 1];
        e[0] = self.c[0].exp();
        for k in 1..=self.order {
            let s: f64 = (1..=k).map(|i| i as f64 * self.c[i] * e[k - i]).sum();
            e[k] = s / k as f64;
        }
        Jet {
            c: e,
            order: self.order,
        }
    }

    /// `f^{(k)}(x0)`.
    pub fn derivative(&self, k: usize) -> f64 {
        if k > self.order {
            return f64::NAN;
        }
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k] * fact
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_square_matches_hermite_derivatives() {
        // d^k/dx^k exp(-x^2/2) = (-1)^k He_k(x) exp(-x^2/2)
        let x0 = 0.7;
        let y = Jet::variable(x0, 5);
        let g = y.mul(&y).scale(-0.5).exp();
        let base = (-0.5 * x0 * x0).exp();
        let he = [
            1.0,
            x0,
            x0 * x0 - 1.0,
            x0.powi(3) - 3.0 * x0,
            x0.powi(4) - 6.0 * x0 * x0 + 3.0,
            x0.powi(5) - 10.0 * x0.powi(3) + 15.0 * x0,
        ];
        for (k, h) in he.iter().enumerate() {
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 } * h * base;
            assert!((g.derivative(k) - expected).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn reciprocal_series() {
        // 1/(1-x) at 0 has all Taylor coefficients 1
        let j = Jet::variable(0.0, 6).scale(-1.0).add_const(1.0).recip();
        for k in 0..=6 {
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((j.derivative(k) - fact).abs() < 1e-12);
        }
    }
}
