//! Quasi-Newton (BFGS) minimiser with backtracking line search.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iter: 300,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: OptimStatus,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().cloned().map(math::abs).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimise `f` starting at `x0` using BFGS on the inverse Hessian
/// approximation. Convergence is declared on the infinity norm of the
/// gradient.
pub fn minimize<F, G>(f: F, grad: G, x0: &[f64], opts: &OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h_inv = Matrix::identity(n);

    for iter in 0..opts.max_iter {
        let gnorm = norm_inf(&g);
        if gnorm < opts.grad_tol {
            return OptimResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations: iter,
                status: OptimStatus::Converged,
            };
        }

        // direction d = -H g
        let mut d = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += h_inv[(i, j)] * g[j];
            }
            d[i] = -s;
        }
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            // curvature lost; restart from steepest descent
            h_inv = Matrix::identity(n);
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = dot(&d, &g);
        }

        // backtracking Armijo
        let mut step = 1.0;
        let c1 = 1e-4;
        let mut x_new = x.clone();
        let mut f_new = fx;
        let mut ok = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + c1 * step * slope {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            return OptimResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations: iter,
                status: OptimStatus::LineSearchFailed,
            };
        }

        let g_new = grad(&x_new);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            // BFGS inverse update: H <- (I - s y^T/sy) H (I - y s^T/sy) + s s^T/sy
            let rho = 1.0 / sy;
            let mut hy = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += h_inv[(i, j)] * y[j];
                }
                hy[i] = acc;
            }
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h_inv[(i, j)] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
        }

        x = x_new;
        fx = f_new;
        g = g_new;
    }

    OptimResult {
        grad_norm: norm_inf(&g),
        x,
        f: fx,
        iterations: opts.max_iter,
        status: OptimStatus::MaxIterations,
    }
}
