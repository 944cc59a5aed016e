//! Word-axis and time-axis Gram matrices of residual slices, their
//! correlation versions, theory-guided penalties, and Kronecker factor
//! reconstruction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::ResidualTensor;
use crate::matrix::{MatrixError, MatrixKind, Result, SymMatrix};

/// Which axis of the residual slices a Gram matrix is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Word,
    Time,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Word => "word",
            Axis::Time => "time",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "word" => Ok(Axis::Word),
            "time" => Ok(Axis::Time),
            other => Err(format!("unknown axis `{other}` (expected word or time)")),
        }
    }
}

/// `S_A = 1/(n_t n_s n_r) Σ_i Σ_r R(i,r) R(i,r)ᵀ` over residual slices `R`.
pub fn word_sample_cov(resid: &ResidualTensor) -> Result<SymMatrix> {
    sample_cov(resid, Axis::Word)
}

/// `S_B = 1/(n_w n_s n_r) Σ_i Σ_r R(i,r)ᵀ R(i,r)` over residual slices `R`.
pub fn time_sample_cov(resid: &ResidualTensor) -> Result<SymMatrix> {
    sample_cov(resid, Axis::Time)
}

pub fn sample_cov(resid: &ResidualTensor, axis: Axis) -> Result<SymMatrix> {
    let t = resid.tensor();
    let s = t.shape();
    let (dim, other, labels) = match axis {
        Axis::Word => (s.n_words, s.n_times, t.word_ids().to_vec()),
        Axis::Time => (
            s.n_times,
            s.n_words,
            (1..=s.n_times).map(|k| format!("t{k}")).collect(),
        ),
    };
    // Accumulate the upper triangle in (speaker, trial) order and mirror it,
    // so the result is exactly symmetric and reproducible.
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    for sp in 0..s.n_speakers {
        for r in 0..s.n_trials {
            let at = |a: usize, k: usize| match axis {
                Axis::Word => t.get(sp, a, r, k),
                Axis::Time => t.get(sp, k, r, a),
            };
            for j in 0..dim {
                for i in 0..=j {
                    let mut dot = 0.0;
                    for k in 0..other {
                        dot += at(i, k) * at(j, k);
                    }
                    acc[(i, j)] += dot;
                }
            }
        }
    }
    let divisor = (other * s.n_speakers * s.n_trials) as f64;
    for j in 0..dim {
        for i in 0..=j {
            let v = acc[(i, j)] / divisor;
            acc[(i, j)] = v;
            acc[(j, i)] = v;
        }
    }
    SymMatrix::new(labels, MatrixKind::Covariance, acc)
}

/// `Γ_ij = S_ij / sqrt(S_ii S_jj)`, with an exact unit diagonal.
pub fn to_correlation(cov: &SymMatrix) -> Result<SymMatrix> {
    cov.expect_kind(MatrixKind::Covariance)?;
    let n = cov.dim();
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let v = cov.get(i, i);
        if !(v > 0.0) {
            return Err(MatrixError::ZeroVariance(cov.labels()[i].clone()));
        }
        sd.push(v.sqrt());
    }
    let mut out = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = (cov.get(i, j) / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    SymMatrix::new(cov.labels().to_vec(), MatrixKind::Correlation, out)
}

/// Penalties `λ_A = sqrt(ln n_w / (n_s n_r n_w))` and
/// `λ_B = sqrt(ln n_w / (n_s n_r n_eff_t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub n_words: usize,
    pub n_speakers: usize,
    pub n_trials: usize,
    pub n_eff_times: usize,
}

/// Published rounded value of `λ_A` for the 93-word, 20-speaker, 4-trial
/// study design; the formula gives 0.02468 there.
pub const REFERENCE_LAMBDA_A: ((usize, usize, usize), f64) = ((93, 20, 4), 0.03);

impl PenaltySpec {
    /// The published rounded `λ_A` when the design matches the reference study.
    pub fn reference_lambda_a(&self) -> Option<f64> {
        let (design, value) = REFERENCE_LAMBDA_A;
        (design == (self.n_words, self.n_speakers, self.n_trials)).then_some(value)
    }
}

pub fn theoretical_penalties(
    n_words: usize,
    n_speakers: usize,
    n_trials: usize,
    n_eff_times: usize,
) -> Result<PenaltySpec> {
    if n_words == 0 || n_speakers == 0 || n_trials == 0 || n_eff_times == 0 {
        return Err(MatrixError::DimensionMismatch(
            "penalty inputs must all be at least 1".into(),
        ));
    }
    let log_w = (n_words as f64).ln();
    let reps = (n_speakers * n_trials) as f64;
    Ok(PenaltySpec {
        lambda_a: (log_w / (reps * n_words as f64)).sqrt(),
        lambda_b: (log_w / (reps * n_eff_times as f64)).sqrt(),
        n_words,
        n_speakers,
        n_trials,
        n_eff_times,
    })
}

/// Covariance-scale Kronecker factors with `Cov(vec X) = time ⊗ word`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerFactors {
    pub word: SymMatrix,
    pub time: SymMatrix,
}

impl KroneckerFactors {
    /// `time ⊗ word`, the covariance of a column-stacked slice.
    pub fn kron(&self) -> DMatrix<f64> {
        self.time.entries().kronecker(self.word.entries())
    }
}

fn rescale(corr: &SymMatrix, diag: &[f64], factor: f64) -> DMatrix<f64> {
    let n = corr.dim();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = corr.get(i, j) * (diag[i] * diag[j]).sqrt() * factor;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Rebuild covariance-scale factors from correlation-scale estimates.
///
/// Each factor is `D^{1/2} ρ D^{1/2}` with `D` the diagonal of the matching
/// sample covariance. Scale is identified by `tr(word) = tr(S_word)` and the
/// total variance `tr(word) · tr(time) = n_t · tr(S_word)`.
pub fn kronecker_reconstruct(
    word_corr: &SymMatrix,
    time_corr: &SymMatrix,
    word_cov: &SymMatrix,
    time_cov: &SymMatrix,
) -> Result<KroneckerFactors> {
    if word_corr.dim() != word_cov.dim() || time_corr.dim() != time_cov.dim() {
        return Err(MatrixError::DimensionMismatch(format!(
            "word {}/{}, time {}/{}",
            word_corr.dim(),
            word_cov.dim(),
            time_corr.dim(),
            time_cov.dim()
        )));
    }
    let word_diag: Vec<f64> = word_cov.entries().diagonal().iter().copied().collect();
    let time_diag: Vec<f64> = time_cov.entries().diagonal().iter().copied().collect();
    let word_raw = rescale(word_corr, &word_diag, 1.0);
    let time_raw = rescale(time_corr, &time_diag, 1.0);
    let target = word_cov.trace();
    let c = target / word_raw.trace();
    let word = word_raw * c;
    let total = time_cov.dim() as f64 * target;
    let time = &time_raw * (total / (target * time_raw.trace()));
    Ok(KroneckerFactors {
        word: SymMatrix::new(word_cov.labels().to_vec(), MatrixKind::Covariance, word)?,
        time: SymMatrix::new(time_cov.labels().to_vec(), MatrixKind::Covariance, time)?,
    })
}
