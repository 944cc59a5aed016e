//! Neighborhood selection by nodewise lasso regression, with the refit
//! precision reconstruction and its symmetric projection.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glasso::{SolverConfig, ZERO_TOL};
use crate::lasso;
use crate::matrix::{MatrixError, MatrixKind, SymMatrix};

#[derive(Debug, Error)]
pub enum NodewiseError {
    #[error("node index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid penalty {0}; penalties must be finite and nonnegative")]
    InvalidLambda(f64),
    #[error("invalid threshold {0}; thresholds must be finite and nonnegative")]
    InvalidThreshold(f64),
    #[error("lasso for node `{node}` did not converge")]
    NoConvergence { node: String },
    #[error("residual variance for node `{node}` is {value:e}; it must be positive")]
    SingularResidual { node: String, value: f64 },
    #[error("expected {expected} coefficient vectors of length {len}, got {got}")]
    BadCoefficients { expected: usize, len: usize, got: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T, E = NodewiseError> = std::result::Result<T, E>;

/// Coefficients of one node regressed on all others.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLasso {
    /// Length `dim − 1`; entry `k` belongs to the `k`-th other node in order.
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

/// `Γ^{(i)}` (drop row and column `i`) and `γ^{(i)}` (column `i` without its
/// diagonal entry).
pub fn node_problem(gamma: &SymMatrix, i: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = gamma.dim();
    let idx: Vec<usize> = (0..n).filter(|&k| k != i).collect();
    let q = DMatrix::from_fn(n - 1, n - 1, |a, b| gamma.get(idx[a], idx[b]));
    let c = DVector::from_iterator(n - 1, idx.iter().map(|&k| gamma.get(k, i)));
    (q, c)
}

/// Solves `min_β ½ βᵀΓ^{(i)}β − ⟨γ^{(i)}, β⟩ + λ‖β‖₁` by cyclic coordinate descent.
pub fn lasso_node(gamma: &SymMatrix, i: usize, lambda: f64, cfg: &SolverConfig) -> Result<NodeLasso> {
    let n = gamma.dim();
    if i >= n {
        return Err(NodewiseError::IndexOutOfRange { index: i, dim: n });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(NodewiseError::InvalidLambda(lambda));
    }
    let (q, c) = node_problem(gamma, i);
    let mut beta = DVector::zeros(n - 1);
    let out = lasso::coordinate_descent(&q, &c, lambda, &mut beta, cfg.inner_tol, cfg.inner_max_iter);
    let kkt_residual = lasso::kkt_violation(&q, &c, lambda, &beta);
    Ok(NodeLasso {
        beta,
        iterations: out.iterations,
        converged: out.converged,
        kkt_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodewiseFit {
    pub betas: Vec<DVector<f64>>,
    /// Column `j` is the refit from node `j`'s regression; not symmetric.
    pub theta_tilde: DMatrix<f64>,
    /// `(Θ̃ + Θ̃ᵀ) / 2`.
    pub theta: SymMatrix,
    pub lambda: f64,
    pub threshold: f64,
    /// Coordinate-descent passes per node; empty when betas were supplied.
    pub iterations: Vec<usize>,
    /// Nodes whose lasso hit the iteration limit.
    pub unconverged: Vec<String>,
}

impl NodewiseFit {
    pub fn report(&self) -> NodewiseReport {
        NodewiseReport {
            lambda: self.lambda,
            threshold: self.threshold,
            node_iterations: self
                .theta
                .labels()
                .iter()
                .cloned()
                .zip(self.iterations.iter().copied())
                .collect(),
            converged: self.unconverged.is_empty(),
        }
    }

    /// Turns a fit with unconverged nodes into `NoConvergence`.
    pub fn require_converged(self) -> Result<Self> {
        match self.unconverged.first() {
            None => Ok(self),
            Some(node) => Err(NodewiseError::NoConvergence { node: node.clone() }),
        }
    }

    /// `β^i_j`, the coefficient of node `j` in node `i`'s regression.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        let k = if j < i { j } else { j - 1 };
        self.betas[i][k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodewiseReport {
    pub lambda: f64,
    pub threshold: f64,
    pub node_iterations: Vec<(String, usize)>,
    pub converged: bool,
}

/// Builds `Θ̃` column by column,
/// `Θ̃_jj = (Γ_jj − Γ_{j,−j} β^j)⁻¹` and `Θ̃_{−j,j} = −Θ̃_jj β^j`,
/// then projects onto symmetric matrices.
pub fn reconstruct_theta(gamma: &SymMatrix, betas: &[DVector<f64>]) -> Result<NodewiseFit> {
    let n = gamma.dim();
    if betas.len() != n || betas.iter().any(|b| b.len() != n - 1) {
        return Err(NodewiseError::BadCoefficients {
            expected: n,
            len: n - 1,
            got: format!("{:?}", betas.iter().map(|b| b.len()).collect::<Vec<_>>()),
        });
    }
    let mut tilde = DMatrix::zeros(n, n);
    for (j, beta) in betas.iter().enumerate() {
        let idx = (0..n).filter(|&k| k != j);
        let explained: f64 = idx.clone().zip(beta.iter()).map(|(k, b)| gamma.get(j, k) * b).sum();
        let resid = gamma.get(j, j) - explained;
        if !(resid > 0.0) {
            return Err(NodewiseError::SingularResidual {
                node: gamma.labels()[j].clone(),
                value: resid,
            });
        }
        let tjj = 1.0 / resid;
        tilde[(j, j)] = tjj;
        for (k, b) in idx.zip(beta.iter()) {
            tilde[(k, j)] = -tjj * b;
        }
    }
    let theta = SymMatrix::symmetrized(gamma.labels().to_vec(), MatrixKind::Precision, tilde.clone())?;
    Ok(NodewiseFit {
        betas: betas.to_vec(),
        theta_tilde: tilde,
        theta,
        lambda: f64::NAN,
        threshold: 0.0,
        iterations: Vec::new(),
        unconverged: Vec::new(),
    })
}

/// Runs [`lasso_node`] for every node and reconstructs `Θ`.
pub fn nodewise(gamma: &SymMatrix, lambda: f64, cfg: &SolverConfig) -> Result<NodewiseFit> {
    let fits = (0..gamma.dim())
        .map(|i| lasso_node(gamma, i, lambda, cfg))
        .collect::<Result<Vec<_>>>()?;
    let betas: Vec<DVector<f64>> = fits.iter().map(|f| f.beta.clone()).collect();
    let mut fit = reconstruct_theta(gamma, &betas)?;
    fit.lambda = lambda;
    fit.iterations = fits.iter().map(|f| f.iterations).collect();
    fit.unconverged = fits
        .iter()
        .zip(gamma.labels())
        .filter(|(f, _)| !f.converged)
        .map(|(_, l)| l.clone())
        .collect();
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    /// Edge if either regression selects the other node.
    Or,
    /// Edge only if both regressions select each other.
    And,
}

/// Neighborhood-selection edges `(i, j)` with `i < j`. A coefficient counts
/// as selected when `|β| ≥ 1e-10`.
pub fn mb_edges(fit: &NodewiseFit, rule: EdgeRule) -> BTreeSet<(usize, usize)> {
    let n = fit.betas.len();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            let a = fit.coefficient(i, j).abs() >= ZERO_TOL;
            let b = fit.coefficient(j, i).abs() >= ZERO_TOL;
            let keep = match rule {
                EdgeRule::Or => a || b,
                EdgeRule::And => a && b,
            };
            if keep {
                edges.insert((i, j));
            }
        }
    }
    edges
}

/// Zero every off-diagonal entry with `|θ_ij| < τ`.
pub fn threshold_precision(theta: &SymMatrix, tau: f64) -> Result<SymMatrix> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(NodewiseError::InvalidThreshold(tau));
    }
    let mut m = theta.entries().clone();
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)].abs() < tau {
                m[(i, j)] = 0.0;
            }
        }
    }
    Ok(SymMatrix::new(theta.labels().to_vec(), theta.kind(), m)?)
}
