//! Synthetic matrix-normal replicate data with known Kronecker factors, and
//! a brute-force glasso solver for small instances.
//!
//! Orientation: each slice `X` is `n_words × n_times`, `vec` stacks columns,
//! and `Cov(vec X) = A ⊗ B` with `A` the time factor and `B` the word factor.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, ReplicateTensor};
use crate::matrix::{MatrixError, MatrixKind, SymMatrix};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("factor is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid factor specification: {0}")]
    InvalidSpec(String),
    #[error("brute-force oracle supports dimension ≤ {max}, got {dim}")]
    DimTooLarge { dim: usize, max: usize },
    #[error("no candidate support satisfied the optimality conditions")]
    OracleFailed,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = SimulateError> = std::result::Result<T, E>;

/// Structure of a synthetic covariance factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorKind {
    Identity,
    /// `ρ^{|i−j|}`; its inverse is tridiagonal.
    Ar1 { rho: f64 },
    /// `decay^{|i−j|}` within `bandwidth` of the diagonal, zero beyond.
    Banded { bandwidth: usize, decay: f64 },
    /// Correlation matrix whose inverse is banded: the precision has unit
    /// diagonal and `−decay^{|i−j|}` within `bandwidth`, zero beyond.
    BandedPrecision { bandwidth: usize, decay: f64 },
    /// `within_corr` inside consecutive blocks of the given sizes, 0 across.
    Block { sizes: Vec<usize>, within_corr: f64 },
}

/// Parses `identity`, `ar1:RHO`, `banded:BW:DECAY`,
/// `banded-precision:BW:DECAY` and `block:S1,S2,...:CORR`.
impl std::str::FromStr for FactorKind {
    type Err = SimulateError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SimulateError::InvalidSpec(format!("cannot parse factor `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["identity"] => Ok(FactorKind::Identity),
            ["ar1", rho] => Ok(FactorKind::Ar1 { rho: num(rho)? }),
            ["banded", bw, decay] => Ok(FactorKind::Banded {
                bandwidth: int(bw)?,
                decay: num(decay)?,
            }),
            ["banded-precision", bw, decay] => Ok(FactorKind::BandedPrecision {
                bandwidth: int(bw)?,
                decay: num(decay)?,
            }),
            ["block", sizes, corr] => Ok(FactorKind::Block {
                sizes: sizes.split(',').map(int).collect::<Result<_>>()?,
                within_corr: num(corr)?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    #[serde(flatten)]
    pub kind: FactorKind,
    pub dim: usize,
}

impl FactorSpec {
    pub fn new(kind: FactorKind, dim: usize) -> Self {
        Self { kind, dim }
    }
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Build the covariance factor described by `spec`, labeled `x1..xn`.
pub fn make_factor(spec: &FactorSpec) -> Result<SymMatrix> {
    make_factor_labeled(spec, default_labels("x", spec.dim))
}

pub fn make_factor_labeled(spec: &FactorSpec, labels: Vec<String>) -> Result<SymMatrix> {
    let n = spec.dim;
    if n == 0 {
        return Err(SimulateError::InvalidSpec("dimension must be positive".into()));
    }
    let lag = |i: usize, j: usize| i.abs_diff(j);
    let m = match &spec.kind {
        FactorKind::Identity => DMatrix::identity(n, n),
        FactorKind::Ar1 { rho } => {
            if !(rho.abs() < 1.0) {
                return Err(SimulateError::InvalidSpec(format!("ar1 requires |rho| < 1, got {rho}")));
            }
            DMatrix::from_fn(n, n, |i, j| rho.powi(lag(i, j) as i32))
        }
        FactorKind::Banded { bandwidth, decay } => DMatrix::from_fn(n, n, |i, j| {
            if lag(i, j) <= *bandwidth {
                decay.powi(lag(i, j) as i32)
            } else {
                0.0
            }
        }),
        FactorKind::BandedPrecision { bandwidth, decay } => {
            let omega = DMatrix::from_fn(n, n, |i, j| match lag(i, j) {
                0 => 1.0,
                d if d <= *bandwidth => -decay.powi(d as i32),
                _ => 0.0,
            });
            let cov = omega
                .cholesky()
                .ok_or(SimulateError::NotPositiveDefinite)?
                .inverse();
            let sd: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else {
                    let v = cov[(i.min(j), i.max(j))];
                    v / (sd[i] * sd[j])
                }
            })
        }
        FactorKind::Block { sizes, within_corr } => {
            if sizes.iter().sum::<usize>() != n || sizes.contains(&0) {
                return Err(SimulateError::InvalidSpec(format!(
                    "block sizes {sizes:?} must be positive and sum to {n}"
                )));
            }
            let block_of: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
                .collect();
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else if block_of[i] == block_of[j] {
                    *within_corr
                } else {
                    0.0
                }
            })
        }
    };
    if m.clone().cholesky().is_none() {
        return Err(SimulateError::NotPositiveDefinite);
    }
    Ok(SymMatrix::new(labels, MatrixKind::Covariance, m)?)
}

/// Mean structure added to the zero-mean matrix-normal draws.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanOptions {
    /// Constant added to every value (e.g. a typical pitch in Hz).
    pub baseline: f64,
    /// Standard deviation of a per-speaker constant offset.
    pub speaker_offset_sd: f64,
}

/// Draw `n_speakers × n_trials` independent slices `X = L_B Z L_Aᵀ`, where
/// `L` are lower Cholesky factors and `Z` is iid standard normal.
///
/// Slice `(speaker, trial)` uses ChaCha8 stream `speaker · n_trials + trial`
/// of `seed`; speaker offsets use stream `n_speakers · n_trials + speaker`.
/// Output is independent of generation order.
pub fn sample_matrix_normal(
    time_factor: &SymMatrix,
    word_factor: &SymMatrix,
    n_speakers: usize,
    n_trials: usize,
    seed: u64,
    mean: MeanOptions,
) -> Result<ReplicateTensor> {
    if n_speakers == 0 || n_trials == 0 {
        return Err(SimulateError::InvalidSpec("need at least one speaker and trial".into()));
    }
    let la = time_factor
        .entries()
        .clone()
        .cholesky()
        .ok_or(SimulateError::NotPositiveDefinite)?
        .unpack();
    let lb = word_factor
        .entries()
        .clone()
        .cholesky()
        .ok_or(SimulateError::NotPositiveDefinite)?
        .unpack();
    let (n_w, n_t) = (word_factor.dim(), time_factor.dim());
    let mut values = vec![0.0; n_speakers * n_w * n_trials * n_t];
    for sp in 0..n_speakers {
        let offset = if mean.speaker_offset_sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((n_speakers * n_trials + sp) as u64);
            mean.speaker_offset_sd * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        for r in 0..n_trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((sp * n_trials + r) as u64);
            // Column-major fill of Z.
            let z = DMatrix::from_fn(n_w, n_t, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &lb * z * la.transpose();
            for w in 0..n_w {
                for t in 0..n_t {
                    values[((sp * n_w + w) * n_trials + r) * n_t + t] = x[(w, t)] + mean.baseline + offset;
                }
            }
        }
    }
    Ok(ReplicateTensor::new(
        default_labels("s", n_speakers),
        word_factor.labels().to_vec(),
        n_trials,
        n_t,
        values,
    )?)
}

/// Random correlation matrix from `2·dim + 5` Gaussian samples; strictly
/// positive definite with probability one.
pub fn random_correlation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymMatrix {
    let n = 2 * dim + 5;
    let x = DMatrix::from_fn(n, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = x.transpose() * x;
    let sd: Vec<f64> = s.diagonal().iter().map(|v| v.sqrt()).collect();
    let g = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            1.0
        } else {
            let (a, b) = (i.min(j), i.max(j));
            s[(a, b)] / (sd[a] * sd[b])
        }
    });
    SymMatrix::new(default_labels("v", dim), MatrixKind::Correlation, g)
        .expect("sample correlation is a valid correlation matrix")
}

/// Largest dimension accepted by [`oracle_glasso`].
pub const ORACLE_MAX_DIM: usize = 4;

/// Glasso by exhaustive enumeration, for testing the main solver.
///
/// For every assignment of `{−, 0, +}` to the off-diagonal pairs, minimizes
/// the smooth problem `tr((Γ + λ·sign)Θ) − log det Θ` over `Θ` supported on
/// the nonzero pairs by damped Newton, then keeps the candidates whose signs
/// and zero-pair subgradients satisfy the optimality conditions.
pub fn oracle_glasso(gamma: &SymMatrix, lambda: f64) -> Result<SymMatrix> {
    oracle_glasso_with(gamma, lambda, false)
}

pub fn oracle_glasso_with(gamma: &SymMatrix, lambda: f64, penalize_diagonal: bool) -> Result<SymMatrix> {
    let n = gamma.dim();
    if n > ORACLE_MAX_DIM {
        return Err(SimulateError::DimTooLarge {
            dim: n,
            max: ORACLE_MAX_DIM,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let g = gamma.entries();
    let diag_shift = if penalize_diagonal { lambda } else { 0.0 };
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for code in 0..3usize.pow(pairs.len() as u32) {
        let signs: Vec<f64> = (0..pairs.len())
            .map(|k| (code / 3usize.pow(k as u32) % 3) as f64 - 1.0)
            .collect();
        let mut shifted = g.clone();
        for i in 0..n {
            shifted[(i, i)] += diag_shift;
        }
        let mut free = Vec::new();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if signs[k] != 0.0 {
                shifted[(i, j)] += lambda * signs[k];
                shifted[(j, i)] += lambda * signs[k];
                free.push((i, j));
            }
        }
        let Some(theta) = restricted_newton(&shifted, &free) else {
            continue;
        };
        let Some(w) = theta.clone().cholesky().map(|c| c.inverse()) else {
            continue;
        };
        let valid = pairs.iter().enumerate().all(|(k, &(i, j))| {
            if signs[k] == 0.0 {
                (w[(i, j)] - g[(i, j)]).abs() <= lambda + 1e-9
            } else {
                theta[(i, j)] * signs[k] > 0.0
            }
        });
        if valid {
            let f = crate::glasso::objective(g, &theta, lambda, penalize_diagonal);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, theta));
            }
        }
    }
    let (_, theta) = best.ok_or(SimulateError::OracleFailed)?;
    Ok(SymMatrix::new(gamma.labels().to_vec(), MatrixKind::Precision, theta)?)
}

/// Minimizes `tr(SΘ) − log det Θ` over positive definite `Θ` whose
/// off-diagonal support is `free`. `None` if no minimizer was found.
fn restricted_newton(s: &DMatrix<f64>, free: &[(usize, usize)]) -> Option<DMatrix<f64>> {
    let n = s.nrows();
    // Parameters: the n diagonal entries, then the free off-diagonal pairs.
    let basis: Vec<DMatrix<f64>> = (0..n)
        .map(|i| {
            let mut e = DMatrix::zeros(n, n);
            e[(i, i)] = 1.0;
            e
        })
        .chain(free.iter().map(|&(i, j)| {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            e
        }))
        .collect();
    let p = basis.len();
    let f = |theta: &DMatrix<f64>| -> f64 {
        match theta.clone().cholesky() {
            Some(c) => {
                let log_det: f64 = c.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                s.component_mul(theta).sum() - log_det
            }
            None => f64::INFINITY,
        }
    };
    let mut theta = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|i| 1.0 / s[(i, i)])));
    let mut value = f(&theta);
    for _ in 0..200 {
        let w = theta.clone().cholesky()?.inverse();
        let resid = s - &w;
        let grad = DVector::from_iterator(p, basis.iter().map(|e| resid.component_mul(e).sum()));
        let we: Vec<DMatrix<f64>> = basis.iter().map(|e| &w * e).collect();
        let hess = DMatrix::from_fn(p, p, |a, b| (&we[a] * &we[b]).trace());
        let step = hess.cholesky()?.solve(&(-&grad));
        let decrement = -grad.dot(&step);
        if decrement < 1e-28 {
            return Some(theta);
        }
        let direction = basis
            .iter()
            .zip(step.iter())
            .fold(DMatrix::zeros(n, n), |acc, (e, &c)| acc + e * c);
        if decrement < 1e-6 {
            // Inside the quadratic convergence region function values no
            // longer resolve progress; take full steps.
            let candidate = &theta + &direction;
            candidate.clone().cholesky()?;
            let done = direction.amax() <= 1e-15 * candidate.amax();
            theta = candidate;
            value = f(&theta);
            if done {
                return Some(theta);
            }
            continue;
        }
        let mut t = 1.0;
        loop {
            let candidate = &theta + &direction * t;
            let cv = f(&candidate);
            if cv <= value - 0.25 * t * decrement {
                theta = candidate;
                value = cv;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::word_sample_cov;
    use crate::data::residualize;
    use crate::glasso::{glasso, SolverConfig};

    #[test]
    fn identity_and_ar1() {
        let id = make_factor(&FactorSpec::new(FactorKind::Identity, 5)).unwrap();
        assert_eq!(id.entries(), &DMatrix::identity(5, 5));
        let ar = make_factor(&FactorSpec::new(FactorKind::Ar1 { rho: 0.5 }, 3)).unwrap();
        assert_eq!(ar.get(0, 1), 0.5);
        assert_eq!(ar.get(0, 2), 0.25);
        assert!(make_factor(&FactorSpec::new(FactorKind::Ar1 { rho: 1.0 }, 3)).is_err());
    }

    #[test]
    fn factor_shorthand() {
        assert_eq!("identity".parse::<FactorKind>().unwrap(), FactorKind::Identity);
        assert_eq!("ar1:0.5".parse::<FactorKind>().unwrap(), FactorKind::Ar1 { rho: 0.5 });
        assert_eq!(
            "block:2,3:0.4".parse::<FactorKind>().unwrap(),
            FactorKind::Block {
                sizes: vec![2, 3],
                within_corr: 0.4
            }
        );
        assert_eq!(
            "banded-precision:1:0.3".parse::<FactorKind>().unwrap(),
            FactorKind::BandedPrecision {
                bandwidth: 1,
                decay: 0.3
            }
        );
        assert!("banded:x:0.3".parse::<FactorKind>().is_err());
        assert!("ar2:0.3".parse::<FactorKind>().is_err());
    }

    #[test]
    fn ar1_inverse_is_tridiagonal() {
        let ar = make_factor(&FactorSpec::new(FactorKind::Ar1 { rho: 0.7 }, 6)).unwrap();
        let inv = ar.entries().clone().try_inverse().unwrap();
        for i in 0..6usize {
            for j in 0..6 {
                if i.abs_diff(j) > 1 {
                    assert!(inv[(i, j)].abs() < 1e-12, "({i},{j}) = {}", inv[(i, j)]);
                } else {
                    assert!(inv[(i, j)].abs() > 0.1);
                }
            }
        }
    }

    #[test]
    fn banded_and_block_structure() {
        let b = make_factor(&FactorSpec::new(
            FactorKind::Banded {
                bandwidth: 1,
                decay: 0.4,
            },
            5,
        ))
        .unwrap();
        assert_eq!(b.get(0, 1), 0.4);
        assert_eq!(b.get(0, 2), 0.0);
        let bp = make_factor(&FactorSpec::new(
            FactorKind::BandedPrecision {
                bandwidth: 2,
                decay: 0.3,
            },
            7,
        ))
        .unwrap();
        let inv = bp.entries().clone().try_inverse().unwrap();
        assert!(inv[(0, 3)].abs() < 1e-12 && inv[(0, 2)].abs() > 1e-3);
        assert!((0..7).all(|i| bp.get(i, i) == 1.0));
        let blk = make_factor(&FactorSpec::new(
            FactorKind::Block {
                sizes: vec![2, 2],
                within_corr: 0.6,
            },
            4,
        ))
        .unwrap();
        assert_eq!(blk.get(0, 1), 0.6);
        assert_eq!(blk.get(1, 2), 0.0);
        assert!(make_factor(&FactorSpec::new(
            FactorKind::Block {
                sizes: vec![2, 1],
                within_corr: 0.6
            },
            4
        ))
        .is_err());
        // An equicorrelation block with ρ < −1/(n−1) is indefinite.
        assert!(matches!(
            make_factor(&FactorSpec::new(
                FactorKind::Block {
                    sizes: vec![3],
                    within_corr: -0.9
                },
                3
            )),
            Err(SimulateError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = make_factor(&FactorSpec::new(FactorKind::Ar1 { rho: 0.3 }, 4)).unwrap();
        let b = make_factor(&FactorSpec::new(FactorKind::Identity, 3)).unwrap();
        let x = sample_matrix_normal(&a, &b, 2, 3, 42, MeanOptions::default()).unwrap();
        let y = sample_matrix_normal(&a, &b, 2, 3, 42, MeanOptions::default()).unwrap();
        assert_eq!(x, y);
        let z = sample_matrix_normal(&a, &b, 2, 3, 43, MeanOptions::default()).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn unit_factors_give_unit_variance() {
        let a = make_factor(&FactorSpec::new(FactorKind::Identity, 2)).unwrap();
        let b = make_factor(&FactorSpec::new(FactorKind::Identity, 2)).unwrap();
        let x = sample_matrix_normal(&a, &b, 100, 100, 5, MeanOptions::default()).unwrap();
        let var = x.values().iter().map(|v| v * v).sum::<f64>() / x.values().len() as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn word_gram_tracks_word_factor() {
        // E[S_A] = B · tr(A) / n_t · (n_r − 1)/n_r after trial centering.
        let a = make_factor(&FactorSpec::new(FactorKind::Ar1 { rho: 0.5 }, 5)).unwrap();
        let b = make_factor(&FactorSpec::new(
            FactorKind::Block {
                sizes: vec![2, 1],
                within_corr: 0.5,
            },
            3,
        ))
        .unwrap();
        let x = sample_matrix_normal(&a, &b, 400, 4, 9, MeanOptions::default()).unwrap();
        let sa = word_sample_cov(&residualize(&x)).unwrap();
        let expect = b.entries() * (a.trace() / 5.0) * 0.75;
        assert!((sa.entries() - expect).amax() < 0.05, "{}", sa.entries());
    }

    #[test]
    fn speaker_offsets_are_removed_by_residualization() {
        let a = make_factor(&FactorSpec::new(FactorKind::Identity, 3)).unwrap();
        let b = make_factor(&FactorSpec::new(FactorKind::Identity, 2)).unwrap();
        let mean = MeanOptions {
            baseline: 150.0,
            speaker_offset_sd: 20.0,
        };
        let plain = sample_matrix_normal(&a, &b, 3, 4, 1, MeanOptions::default()).unwrap();
        let shifted = sample_matrix_normal(&a, &b, 3, 4, 1, mean).unwrap();
        let (rp, rs) = (residualize(&plain), residualize(&shifted));
        for (u, v) in rp.tensor().values().iter().zip(rs.tensor().values()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_closed_forms() {
        let g = SymMatrix::new(
            default_labels("v", 2),
            MatrixKind::Correlation,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        )
        .unwrap();
        let t = oracle_glasso(&g, 0.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0]);
        assert!((t.entries() - expect).amax() < 1e-10, "{}", t.entries());
        let sparse = oracle_glasso(&g, 0.6).unwrap();
        assert!((sparse.entries() - DMatrix::identity(2, 2)).amax() < 1e-10);
        let sparse_diag = oracle_glasso_with(&g, 0.6, true).unwrap();
        assert!((sparse_diag.entries() - DMatrix::identity(2, 2) / 1.6).amax() < 1e-10);
        let big = random_correlation(5, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(
            oracle_glasso(&big, 0.1),
            Err(SimulateError::DimTooLarge { dim: 5, .. })
        ));
    }

    #[test]
    fn oracle_agrees_with_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in [3, 4] {
            for lambda in [0.0, 0.05, 0.2] {
                let g = random_correlation(dim, &mut rng);
                let o = oracle_glasso(&g, lambda).unwrap();
                let e = glasso(&g, lambda, &SolverConfig::default()).unwrap();
                assert!((o.entries() - e.theta.entries()).amax() < 1e-6);
            }
        }
    }
}
