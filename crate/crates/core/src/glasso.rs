//! Graphical lasso by block coordinate descent.
//!
//! Minimizes `tr(ΓΘ) − log det Θ + λ Σ_{i≠j} |Θ_ij|` over positive definite
//! `Θ`. The diagonal is unpenalized unless [`SolverConfig::penalize_diagonal`]
//! is set, in which case `λ Σ_i Θ_ii` is added as well.
//!
//! The solver works on `W = Θ⁻¹` one row/column at a time. For column `j`,
//! with `W₁₁` the other rows and columns and `γ` the off-diagonal part of
//! column `j` of `Γ`, it solves the lasso
//! `min_β ½ βᵀW₁₁β − γᵀβ + λ‖β‖₁` and sets `w₁₂ = W₁₁β`.
//! `Θ` is recovered at the end from `W` and the column coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lasso;
use crate::matrix::{MatrixError, MatrixKind, SymMatrix};

/// Off-diagonal precision entries below this magnitude are structural zeros.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GlassoError {
    #[error("input is not positive definite; an unpenalized fit needs a strictly positive definite matrix")]
    NotPositiveDefinite,
    #[error("solver did not converge within {sweeps} sweeps (last change {last_change:e})")]
    NoConvergence { sweeps: usize, last_change: f64 },
    #[error("invalid penalty {0}; penalties must be finite and nonnegative")]
    InvalidLambda(f64),
    #[error("penalty path must be strictly descending")]
    PathNotDescending,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T, E = GlassoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Outer stopping rule: mean absolute change of the off-diagonal of `W`
    /// over one sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Inner lasso stopping rule (largest gradient change in a pass).
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Also penalize the diagonal of `Θ`.
    #[serde(default)]
    pub penalize_diagonal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 500,
            inner_tol: 1e-9,
            inner_max_iter: 10_000,
            penalize_diagonal: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(GlassoError::InvalidConfig("tolerances must be positive"));
        }
        if self.max_sweeps == 0 || self.inner_max_iter == 0 {
            return Err(GlassoError::InvalidConfig("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// A fitted precision matrix together with its solver certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub theta: SymMatrix,
    /// The fitted `W = Θ⁻¹`; has the kind of the input matrix.
    pub sigma: SymMatrix,
    pub lambda: f64,
    pub penalize_diagonal: bool,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mean absolute `W` change in the final sweep.
    pub last_change: f64,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl PrecisionEstimate {
    pub fn report(&self) -> SolverReport {
        SolverReport {
            lambda: self.lambda,
            objective: self.objective,
            kkt_residual: self.kkt_residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    /// Turns a non-converged estimate into `NoConvergence`.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(GlassoError::NoConvergence {
                sweeps: self.iterations,
                last_change: self.last_change,
            })
        }
    }

    /// Off-diagonal entries of `theta` at or above [`ZERO_TOL`].
    pub fn edge_count(&self) -> usize {
        count_nonzero_off_diagonal(self.theta.entries())
    }
}

pub(crate) fn count_nonzero_off_diagonal(m: &DMatrix<f64>) -> usize {
    let n = m.nrows();
    (0..n)
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .filter(|&(i, j)| m[(i, j)].abs() >= ZERO_TOL)
        .count()
}

/// Solver summary serialized next to the matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub lambda: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_input(gamma: &SymMatrix, lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(GlassoError::InvalidLambda(lambda));
    }
    if gamma.kind() == MatrixKind::Precision {
        return Err(MatrixError::WrongKind {
            expected: MatrixKind::Correlation,
            actual: MatrixKind::Precision,
        }
        .into());
    }
    if let Some(i) = (0..gamma.dim()).find(|&i| !(gamma.get(i, i) > 0.0)) {
        return Err(MatrixError::ZeroVariance(gamma.labels()[i].clone()).into());
    }
    if lambda == 0.0 && gamma.entries().clone().cholesky().is_none() {
        return Err(GlassoError::NotPositiveDefinite);
    }
    Ok(())
}

/// Working state carried between sweeps and along a penalty path.
#[derive(Debug, Clone)]
struct State {
    w: DMatrix<f64>,
    /// Column `j` holds the coefficients of node `j` on the others, with a
    /// zero at row `j`.
    beta: DMatrix<f64>,
}

impl State {
    fn cold(gamma: &DMatrix<f64>, lambda: f64, cfg: &SolverConfig) -> Self {
        let n = gamma.nrows();
        let mut w = gamma.clone();
        if cfg.penalize_diagonal {
            for i in 0..n {
                w[(i, i)] += lambda;
            }
        }
        Self {
            w,
            beta: DMatrix::zeros(n, n),
        }
    }

    fn reset_diagonal(&mut self, gamma: &DMatrix<f64>, lambda: f64, cfg: &SolverConfig) {
        let shift = if cfg.penalize_diagonal { lambda } else { 0.0 };
        for i in 0..gamma.nrows() {
            self.w[(i, i)] = gamma[(i, i)] + shift;
        }
    }
}

fn others(n: usize, j: usize) -> Vec<usize> {
    (0..n).filter(|&i| i != j).collect()
}

fn sub_block(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// One pass over all columns. Returns the mean absolute off-diagonal change.
fn sweep(gamma: &DMatrix<f64>, lambda: f64, cfg: &SolverConfig, st: &mut State) -> Result<f64> {
    let n = gamma.nrows();
    if n == 1 {
        return Ok(0.0);
    }
    let mut total_change = 0.0;
    for j in 0..n {
        let idx = others(n, j);
        let w11 = sub_block(&st.w, &idx);
        let target = DVector::from_iterator(n - 1, idx.iter().map(|&i| gamma[(i, j)]));
        let beta = if lambda == 0.0 {
            w11.clone().cholesky()
                .ok_or(GlassoError::NotPositiveDefinite)?
                .solve(&target)
        } else {
            let mut beta = DVector::from_iterator(n - 1, idx.iter().map(|&i| st.beta[(i, j)]));
            lasso::coordinate_descent(&w11, &target, lambda, &mut beta, cfg.inner_tol, cfg.inner_max_iter);
            beta
        };
        let w12 = &w11 * &beta;
        for (a, &i) in idx.iter().enumerate() {
            total_change += 2.0 * (w12[a] - st.w[(i, j)]).abs();
            st.w[(i, j)] = w12[a];
            st.w[(j, i)] = w12[a];
            st.beta[(i, j)] = beta[a];
        }
    }
    Ok(total_change / (n * (n - 1)) as f64)
}

/// `Θ` from the current `W` and column coefficients, symmetrized.
fn theta_from_state(st: &State) -> DMatrix<f64> {
    let n = st.w.nrows();
    let mut theta = DMatrix::zeros(n, n);
    for j in 0..n {
        let idx = others(n, j);
        let mut quad = 0.0;
        for &i in &idx {
            quad += st.w[(i, j)] * st.beta[(i, j)];
        }
        let tjj = 1.0 / (st.w[(j, j)] - quad);
        theta[(j, j)] = tjj;
        for &i in &idx {
            theta[(i, j)] = -st.beta[(i, j)] * tjj;
        }
    }
    (&theta + theta.transpose()) * 0.5
}

/// `tr(ΓΘ) − log det Θ + λ‖Θ‖₁,off` (plus `λ tr Θ` when the diagonal is
/// penalized); `+∞` when `Θ` is not positive definite.
pub fn objective(gamma: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64, penalize_diagonal: bool) -> f64 {
    let Some(chol) = theta.clone().cholesky() else {
        return f64::INFINITY;
    };
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let n = theta.nrows();
    let mut trace = 0.0;
    let mut l1 = 0.0;
    for j in 0..n {
        for i in 0..n {
            trace += gamma[(i, j)] * theta[(i, j)];
            if i != j || penalize_diagonal {
                l1 += theta[(i, j)].abs();
            }
        }
    }
    trace - log_det + lambda * l1
}

fn solve_from(
    gamma: &SymMatrix,
    lambda: f64,
    cfg: &SolverConfig,
    st: &mut State,
) -> Result<PrecisionEstimate> {
    let g = gamma.entries();
    st.reset_diagonal(g, lambda, cfg);
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        last_change = sweep(g, lambda, cfg, st)?;
        objective_trace.push(objective(g, &theta_from_state(st), lambda, cfg.penalize_diagonal));
        if last_change < cfg.tol {
            converged = true;
            break;
        }
    }
    let theta = theta_from_state(st);
    let obj = objective(g, &theta, lambda, cfg.penalize_diagonal);
    let labels = gamma.labels().to_vec();
    // A penalized diagonal moves W off the unit diagonal.
    let sigma_kind = if cfg.penalize_diagonal && lambda > 0.0 {
        MatrixKind::Covariance
    } else {
        gamma.kind()
    };
    let sigma = SymMatrix::symmetrized(labels.clone(), sigma_kind, st.w.clone())?;
    let theta = SymMatrix::new(labels, MatrixKind::Precision, theta)?;
    let mut est = PrecisionEstimate {
        theta,
        sigma,
        lambda,
        penalize_diagonal: cfg.penalize_diagonal,
        objective: obj,
        kkt_residual: 0.0,
        iterations: sweeps,
        converged,
        last_change,
        objective_trace,
    };
    est.kkt_residual = kkt_certificate(gamma, &est)?;
    Ok(est)
}

/// Fit a sparse precision matrix to a correlation (or covariance) matrix.
///
/// A run that hits `max_sweeps` still returns its last iterate, with
/// `converged == false`.
pub fn glasso(gamma: &SymMatrix, lambda: f64, cfg: &SolverConfig) -> Result<PrecisionEstimate> {
    cfg.validate()?;
    check_input(gamma, lambda)?;
    let mut st = State::cold(gamma.entries(), lambda, cfg);
    solve_from(gamma, lambda, cfg, &mut st)
}

/// Warm-started fits along a strictly descending penalty sequence.
pub fn glasso_path(gamma: &SymMatrix, lambdas: &[f64], cfg: &SolverConfig) -> Result<Vec<PrecisionEstimate>> {
    cfg.validate()?;
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(GlassoError::PathNotDescending);
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut state: Option<State> = None;
    for &lambda in lambdas {
        check_input(gamma, lambda)?;
        let st = state.get_or_insert_with(|| State::cold(gamma.entries(), lambda, cfg));
        out.push(solve_from(gamma, lambda, cfg, st)?);
    }
    Ok(out)
}

/// Places along a path where the edge count grew as the penalty increased.
/// Glasso paths need not be monotone, so these are diagnostics only.
pub fn path_monotonicity_violations(path: &[PrecisionEstimate]) -> Vec<(f64, f64)> {
    path.windows(2)
        .filter(|w| w[0].edge_count() > w[1].edge_count())
        .map(|w| (w[0].lambda, w[1].lambda))
        .collect()
}

/// Largest violation of the optimality conditions, evaluated at
/// `W = Θ⁻¹` computed afresh from the estimate's `theta`:
///
/// * diagonal: `W_ii = Γ_ii` (`Γ_ii + λ` with a penalized diagonal);
/// * `Θ_ij ≠ 0`: `W_ij − Γ_ij = λ sign(Θ_ij)`;
/// * `Θ_ij = 0`: `|W_ij − Γ_ij| ≤ λ`.
///
/// Returns `+∞` if `theta` is not positive definite.
pub fn kkt_certificate(gamma: &SymMatrix, est: &PrecisionEstimate) -> Result<f64> {
    let n = gamma.dim();
    if est.theta.dim() != n {
        return Err(GlassoError::DimensionMismatch(format!(
            "gamma is {n}x{n}, theta is {0}x{0}",
            est.theta.dim()
        )));
    }
    let Some(chol) = est.theta.entries().clone().cholesky() else {
        return Ok(f64::INFINITY);
    };
    let w = chol.inverse();
    let lambda = est.lambda;
    let diag_shift = if est.penalize_diagonal { lambda } else { 0.0 };
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let gap = w[(i, j)] - gamma.get(i, j);
            let t = est.theta.get(i, j);
            let v = if i == j {
                (gap - diag_shift).abs()
            } else if t.abs() < ZERO_TOL {
                (gap.abs() - lambda).max(0.0)
            } else {
                (gap - lambda * t.signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}
