//! Gauss-Hermite quadrature with respect to the standard normal weight,
//! built by the Golub-Welsch eigenvalue method.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{jacobi_eigen, Matrix};
use crate::math;

/// Nodes and weights such that
/// integral f(z) phi(z) dz ~= sum_i w_i f(z_i)
/// with phi the standard normal density. Weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
    /// recentre at the per-panellist mode with matched curvature
    pub adaptive: bool,
}

impl QuadratureRule {
    pub fn gauss_hermite(order: usize, adaptive: bool) -> Self {
        assert!(order >= 1, "quadrature order must be at least 1");
        if order == 1 {
            return QuadratureRule {
                nodes: vec![0.0],
                weights: vec![1.0],
                order,
                adaptive,
            };
        }
        // Jacobi matrix of the probabilists' Hermite recurrence:
        // zero diagonal, off-diagonal sqrt(k)
        let mut jm = Matrix::zeros(order, order);
        for k in 1..order {
            let v = math::sqrt(k as f64);
            jm[(k - 1, k)] = v;
            jm[(k, k - 1)] = v;
        }
        let (vals, vecs) = jacobi_eigen(&jm, 400);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| (vals[i], vecs[(0, i)] * vecs[(0, i)]))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
            order,
            adaptive,
        }
    }
}
