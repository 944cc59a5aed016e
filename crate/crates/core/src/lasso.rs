//! Cyclic coordinate descent for the quadratic lasso
//! `min_β ½ βᵀQβ − cᵀβ + λ‖β‖₁`.
//!
//! Both the glasso column updates and nodewise regression reduce to this
//! problem with `Q` a principal submatrix of a Gram or correlation matrix.

use nalgebra::{DMatrix, DVector};

#[inline]
pub(crate) fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOutcome {
    /// Full passes over the coordinates.
    pub iterations: usize,
    pub converged: bool,
}

/// Runs coordinate descent in place from the current `beta`.
///
/// Stops when the largest gradient change caused by a coordinate update,
/// `Q_kk |Δβ_k|`, is below `tol` for a whole pass.
pub fn coordinate_descent(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> LassoOutcome {
    let m = c.len();
    let mut qb = q * &*beta;
    for iter in 1..=max_iter {
        let mut max_step = 0.0_f64;
        for k in 0..m {
            let qkk = q[(k, k)];
            if qkk <= 0.0 {
                continue;
            }
            let old = beta[k];
            let partial = c[k] - (qb[k] - qkk * old);
            let new = soft_threshold(partial, lambda) / qkk;
            let delta = new - old;
            if delta != 0.0 {
                beta[k] = new;
                qb.axpy(delta, &q.column(k), 1.0);
                max_step = max_step.max(qkk * delta.abs());
            }
        }
        if max_step < tol {
            return LassoOutcome {
                iterations: iter,
                converged: true,
            };
        }
    }
    LassoOutcome {
        iterations: max_iter,
        converged: false,
    }
}

/// Largest violation of the lasso optimality conditions at `beta`:
/// `|Qβ − c|_k ≤ λ` where `β_k = 0`, and `(Qβ − c)_k = −λ sign(β_k)` elsewhere.
pub fn kkt_violation(q: &DMatrix<f64>, c: &DVector<f64>, lambda: f64, beta: &DVector<f64>) -> f64 {
    let grad = q * beta - c;
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn unpenalized_solves_linear_system() {
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.3, 0.1, 0.3, 1.0]);
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut beta = DVector::zeros(3);
        let out = coordinate_descent(&q, &c, 0.0, &mut beta, 1e-14, 10_000);
        assert!(out.converged);
        let exact = q.clone().cholesky().unwrap().solve(&c);
        assert!((beta - exact).amax() < 1e-12);
    }

    #[test]
    fn large_penalty_zeroes_everything() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let c = DVector::from_vec(vec![0.3, -0.4]);
        let mut beta = DVector::from_vec(vec![1.0, 1.0]);
        coordinate_descent(&q, &c, 0.4, &mut beta, 1e-12, 1000);
        assert_eq!(beta, DVector::zeros(2));
        assert_eq!(kkt_violation(&q, &c, 0.4, &beta), 0.0);
    }
}
