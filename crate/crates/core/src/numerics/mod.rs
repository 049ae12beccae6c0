//! Shared numerical building blocks.

pub mod bessel;
pub mod fft;
pub mod jet;
pub mod quadrature;
pub mod radial;
pub mod spline;

/// `⟨t⟩ = sqrt(1 + t²)`.
#[inline]
pub fn bracket(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// All multi-indices of total order `order` in `dim` variables together
/// with their multinomial multiplicities `order! / Π α_i!`.
///
/// The multiplicity counts how many ordered index tuples map to the same
/// mixed partial, so `Σ mult · (∂^α f)²` is the squared Frobenius norm of
/// the full derivative tensor.
pub fn multi_indices(dim: usize, order: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut current = vec![0; dim];
    fill(dim, order, 0, &mut current, &mut out);
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    out.into_iter()
        .map(|alpha| {
            let denom: f64 = alpha.iter().map(|&a| fact(a)).product();
            let mult = fact(order) / denom;
            (alpha, mult)
        })
        .collect()
}

fn fill(dim: usize, remaining: usize, axis: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if dim == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if axis == dim - 1 {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for a in (0..=remaining).rev() {
        current[axis] = a;
        fill(dim, remaining - a, axis + 1, current, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities_sum_to_dim_power() {
        for dim in 1..=4 {
            for order in 0..=4 {
                let total: f64 = multi_indices(dim, order).iter().map(|(_, m)| m).sum();
                assert_eq!(total, (dim as f64).powi(order as i32));
            }
        }
    }

    #[test]
    fn count_of_second_order_indices_in_3d() {
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(3, 3).len(), 10);
    }
}
