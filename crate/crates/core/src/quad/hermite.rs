use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, Result};

/// Nodes and weights of the `n`-point Gauss–Hermite rule for
/// `∫ g(x) e^{−x²} dx`, nodes ascending.
///
/// Golub–Welsch starting values are polished by Newton steps on the
/// orthonormal recurrence; weights are the Christoffel numbers
/// `1 / Σ_{k<n} p_k(x)²`.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return domain("Gauss–Hermite rule needs at least one node");
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, pm1, _) = orthonormal(n, *x);
            let dp = (2.0 * n as f64).sqrt() * pm1;
            if dp == 0.0 {
                break;
            }
            *x -= p / dp;
        }
        let (_, _, sumsq) = orthonormal(n, *x);
        weights.push(1.0 / sumsq);
    }
    Ok((nodes, weights))
}

/// `(p_n(x), p_{n−1}(x), Σ_{k<n} p_k(x)²)` for the orthonormal Hermite
/// polynomials with respect to `e^{−x²}`.
fn orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut sumsq = 0.0;
    for k in 0..n {
        sumsq += cur * cur;
        let next = (2.0 / (k + 1) as f64).sqrt() * x * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev, sumsq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn moments_are_exact() {
        let (x, w) = gauss_hermite(20).unwrap();
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - PI.sqrt()).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - PI.sqrt() / 2.0).abs() < 1e-14);
        // ∫ x^{38} e^{−x²} = Γ(39/2)
        let gamma = (1..=19).fold(PI.sqrt(), |acc, k| acc * (k as f64 - 0.5));
        assert!(((m(38) - gamma) / gamma).abs() < 1e-12);
    }

    #[test]
    fn large_rule_is_symmetric() {
        let (x, w) = gauss_hermite(201).unwrap();
        for i in 0..201 {
            assert!((x[i] + x[200 - i]).abs() < 1e-11);
            assert!((w[i] - w[200 - i]).abs() <= 1e-12 * w[i].max(1e-300));
        }
        assert_eq!(x[100].abs() < 1e-12, true);
        let total: f64 = w.iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-13);
    }
}
