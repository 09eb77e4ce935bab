//! Gauss–Hermite quadrature for expectations against a standard normal.

use nalgebra::{DMatrix, SymmetricEigen};
use std::sync::OnceLock;

pub const DEFAULT_ORDER: usize = 64;

/// Nodes and weights for `E[g(Z)]`, `Z ~ N(0, 1)` (probabilists' weight).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut jac = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            jac[(k - 1, k)] = b;
            jac[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // Symmetrize to remove eigen-solver round-off.
        let m = pairs.len();
        for i in 0..m / 2 {
            let node = 0.5 * (pairs[m - 1 - i].0 - pairs[i].0);
            let w = 0.5 * (pairs[m - 1 - i].1 + pairs[i].1);
            pairs[i] = (-node, w);
            pairs[m - 1 - i] = (node, w);
        }
        if m % 2 == 1 {
            pairs[m / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Shared order-64 rule.
    pub fn standard() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_ORDER))
    }

    /// `E[g(mean + sd·Z)]`.
    pub fn expect<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, g: F) -> f64 {
        let mut acc = crate::rng::KahanSum::new();
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * g(mean + sd * z));
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments_are_exact() {
        let gh = GaussHermite::standard();
        assert!((gh.expect(0.0, 1.0, |_| 1.0) - 1.0).abs() < 1e-14);
        assert!((gh.expect(0.0, 1.0, |x| x * x) - 1.0).abs() < 1e-12);
        assert!((gh.expect(0.0, 1.0, |x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((gh.expect(1.0, 2.0, |x| x * x) - 5.0).abs() < 1e-11);
    }

    #[test]
    fn moment_generating_function() {
        let gh = GaussHermite::standard();
        let v = gh.expect(0.3, 0.7, |x| (0.8 * x).exp());
        let exact = (0.8 * 0.3 + 0.5 * 0.64 * 0.49f64).exp();
        assert!((v / exact - 1.0).abs() < 1e-12);
    }
}
