//! FFT plumbing on top of `rustfft`: n-dimensional transforms over flat
//! row-major buffers and the type-I discrete sine transform used by the
//! radial grids.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward or inverse n-dimensional FFT of a cube with `n` points per axis.
/// The inverse is unnormalized, matching `rustfft`.
pub struct CubeFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CubeFft {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dim,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let n = self.n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + k * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (k, value) in line.iter().enumerate() {
                        data[start + k * stride] = *value;
                    }
                }
            }
        }
    }
}

/// Type-I DST: `X_m = Σ_{j=1}^{N-1} x_j sin(π j m / N)` for `m = 1..N-1`.
///
/// Input and output hold the `N-1` interior samples. Applying it twice
/// multiplies by `N/2`.
pub struct SineTransform {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut planner = FftPlanner::new();
        Self {
            n,
            plan: planner.plan_fft_forward(2 * n),
        }
    }

    pub fn interior_len(&self) -> usize {
        self.n - 1
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(input.len(), n - 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (j, &x) in input.iter().enumerate() {
            buf[j + 1] = Complex64::new(x, 0.0);
            buf[2 * n - (j + 1)] = Complex64::new(-x, 0.0);
        }
        self.plan.process(&mut buf);
        (1..n).map(|m| -0.5 * buf[m].im).collect()
    }
}

/// Cosine sums `C_j = Σ_{m=1}^{N-1} c_m cos(π j m / N)` for `j = 1..N-1`,
/// the companion of [`SineTransform`] for derivatives of sine series.
pub struct CosineSums {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl CosineSums {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut planner = FftPlanner::new();
        Self {
            n,
            plan: planner.plan_fft_forward(2 * n),
        }
    }

    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(coeffs.len(), n - 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (m, &c) in coeffs.iter().enumerate() {
            buf[m + 1] = Complex64::new(c, 0.0);
            buf[2 * n - (m + 1)] = Complex64::new(c, 0.0);
        }
        self.plan.process(&mut buf);
        (1..n).map(|j| 0.5 * buf[j].re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_transform_matches_direct_sum() {
        let n = 17;
        let x: Vec<f64> = (1..n).map(|j| ((j * j) as f64 * 0.37).sin()).collect();
        let fast = SineTransform::new(n).apply(&x);
        for m in 1..n {
            let direct: f64 = (1..n)
                .map(|j| x[j - 1] * (PI * (j * m) as f64 / n as f64).sin())
                .sum();
            assert!((fast[m - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_sums_match_direct_sum() {
        let n = 23;
        let c: Vec<f64> = (1..n).map(|m| 1.0 / (m as f64 + 0.5)).collect();
        let fast = CosineSums::new(n).apply(&c);
        for j in 1..n {
            let direct: f64 = (1..n)
                .map(|m| c[m - 1] * (PI * (j * m) as f64 / n as f64).cos())
                .sum();
            assert!((fast[j - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_transform_is_involutive_up_to_scale() {
        let n = 64;
        let t = SineTransform::new(n);
        let x: Vec<f64> = (1..n).map(|j| (j as f64).cos()).collect();
        let back = t.apply(&t.apply(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b * 2.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_fft_round_trip() {
        let fft = CubeFft::new(3, 8);
        let orig: Vec<Complex64> = (0..512)
            .map(|i| Complex64::new((i as f64 * 0.1).sin(), (i as f64 * 0.03).cos()))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in orig.iter().zip(&data) {
            assert!((a - b / 512.0).norm() < 1e-12);
        }
    }

    #[test]
    fn cube_fft_separable_plane_wave() {
        // exp(2πi (x + 2y)/n) in 2D lands on a single forward bin
        let n = 8;
        let fft = CubeFft::new(2, n);
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                Complex64::from_polar(1.0, 2.0 * PI * (i as f64 + 2.0 * j as f64) / n as f64)
            })
            .collect();
        fft.forward(&mut data);
        let peak = data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!((peak - 64.0).abs() < 1e-9);
        assert!((data[n + 2].norm() - 64.0).abs() < 1e-9);
    }
}
