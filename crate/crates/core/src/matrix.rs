//! Dense labeled symmetric matrices and their file formats.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::fmt_f64;

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Unit-diagonal tolerance for correlation matrices.
pub const UNIT_DIAGONAL_TOL: f64 = 1e-12;
/// A covariance matrix may have eigenvalues down to `-PSD_TOL * max diagonal`.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("{labels} labels for a {dim}x{dim} matrix")]
    LabelCount { labels: usize, dim: usize },
    #[error("matrix has no rows")]
    Empty,
    #[error("matrix contains a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("correlation diagonal entry for `{label}` is {value}, expected 1")]
    NotUnitDiagonal { label: String, value: f64 },
    #[error("correlation entry ({i}, {j}) = {value} lies outside [-1, 1]")]
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("zero variance for `{0}`")]
    ZeroVariance(String),
    #[error("expected a {expected} matrix, got {actual}")]
    WrongKind {
        expected: MatrixKind,
        actual: MatrixKind,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed matrix file: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MatrixError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Covariance,
    Correlation,
    Precision,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Covariance => "covariance",
            MatrixKind::Correlation => "correlation",
            MatrixKind::Precision => "precision",
        })
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = MatrixError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariance" => Ok(MatrixKind::Covariance),
            "correlation" => Ok(MatrixKind::Correlation),
            "precision" => Ok(MatrixKind::Precision),
            other => Err(MatrixError::Parse(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// A labeled dense symmetric matrix tagged with what it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    labels: Vec<String>,
    kind: MatrixKind,
    entries: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates the invariants for `kind` and wraps `entries`.
    pub fn new(labels: Vec<String>, kind: MatrixKind, entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(MatrixError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(MatrixError::Empty);
        }
        if labels.len() != rows {
            return Err(MatrixError::LabelCount {
                labels: labels.len(),
                dim: rows,
            });
        }
        let scale = entries.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for j in 0..rows {
            for i in 0..rows {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(MatrixError::NonFinite(i, j));
                }
                if i < j {
                    let gap = (v - entries[(j, i)]).abs();
                    if gap > SYMMETRY_TOL * scale {
                        return Err(MatrixError::NotSymmetric { i, j, gap });
                    }
                }
            }
        }
        match kind {
            MatrixKind::Correlation => {
                for i in 0..rows {
                    let d = entries[(i, i)];
                    if (d - 1.0).abs() > UNIT_DIAGONAL_TOL {
                        return Err(MatrixError::NotUnitDiagonal {
                            label: labels[i].clone(),
                            value: d,
                        });
                    }
                    for j in 0..i {
                        let v = entries[(i, j)];
                        if v.abs() > 1.0 + UNIT_DIAGONAL_TOL {
                            return Err(MatrixError::CorrelationOutOfRange { i, j, value: v });
                        }
                    }
                }
            }
            MatrixKind::Covariance => {
                let max_diag = entries.diagonal().iter().fold(0.0_f64, |m, v| m.max(*v));
                let min_eigenvalue = min_eigenvalue(&entries);
                if min_eigenvalue < -PSD_TOL * max_diag.max(f64::MIN_POSITIVE) {
                    return Err(MatrixError::NotPositiveSemidefinite { min_eigenvalue });
                }
            }
            MatrixKind::Precision => {}
        }
        Ok(Self {
            labels,
            kind,
            entries,
        })
    }

    /// Replaces `entries` by its symmetric part before validating.
    pub fn symmetrized(labels: Vec<String>, kind: MatrixKind, entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(MatrixError::NotSquare { rows, cols });
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        Self::new(labels, kind, sym)
    }

    pub fn identity(labels: Vec<String>, kind: MatrixKind) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, kind, DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn expect_kind(&self, expected: MatrixKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(MatrixError::WrongKind {
                expected,
                actual: self.kind,
            })
        }
    }

    /// Largest absolute off-diagonal entry; zero for a 1x1 matrix.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut best = 0.0_f64;
        for j in 0..n {
            for i in 0..j {
                best = best.max(self.entries[(i, j)].abs());
            }
        }
        best
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    /// Simultaneously permute rows and columns: entry `(i, j)` of the result
    /// is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(MatrixError::DimensionMismatch(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        Ok(Self {
            labels: perm.iter().map(|&p| self.labels[p].clone()).collect(),
            kind: self.kind,
            entries: DMatrix::from_fn(n, n, |i, j| self.entries[(perm[i], perm[j])]),
        })
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            labels: self.labels.clone(),
            kind: self.kind,
            rows: self
                .entries
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }

    pub fn from_json(json: MatrixJson) -> Result<Self> {
        let n = json.rows.len();
        if let Some(bad) = json.rows.iter().find(|r| r.len() != n) {
            return Err(MatrixError::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        let entries = DMatrix::from_fn(n, n, |i, j| json.rows[i][j]);
        Self::new(json.labels, json.kind, entries)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.to_json())?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Self::from_json(serde_json::from_reader(reader)?)
    }

    /// Square CSV with a header row and a leading label column. The kind is
    /// written in the top-left cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![self.kind.to_string()];
        header.extend(self.labels.iter().cloned());
        wtr.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.entries.row(i).iter().map(|&v| fmt_f64(v)));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| MatrixError::Parse("empty file".into()))??;
        let kind: MatrixKind = header.get(0).unwrap_or("").parse()?;
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        let mut entries = DMatrix::zeros(n, n);
        let mut count = 0;
        for (i, record) in records.enumerate() {
            let record = record?;
            if i >= n || record.len() != n + 1 {
                return Err(MatrixError::Parse(format!("row {} has the wrong shape", i + 1)));
            }
            if record.get(0) != Some(labels[i].as_str()) {
                return Err(MatrixError::Parse(format!(
                    "row label `{}` does not match column label `{}`",
                    record.get(0).unwrap_or(""),
                    labels[i]
                )));
            }
            for j in 0..n {
                let raw = record.get(j + 1).unwrap_or("");
                entries[(i, j)] = raw
                    .parse()
                    .map_err(|_| MatrixError::Parse(format!("bad number `{raw}`")))?;
            }
            count += 1;
        }
        if count != n {
            return Err(MatrixError::Parse(format!("expected {n} rows, found {count}")));
        }
        Self::new(labels, kind, entries)
    }

    /// Load from `.json` or `.csv` according to the file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::read_csv(file),
            _ => Self::read_json(file),
        }
    }
}

/// JSON form `{labels, kind, rows}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub labels: Vec<String>,
    pub kind: MatrixKind,
    pub rows: Vec<Vec<f64>>,
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}
