//! Replicate pitch tensors, word metadata, and trial residualization.
//!
//! A [`ReplicateTensor`] holds `X(speaker, word, trial, time)` on a complete
//! grid. Each `(speaker, trial)` slice is an `n_words × n_times` matrix;
//! residualization subtracts the per-speaker mean over trials from every slice.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::fmt_f64;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing cell (speaker={speaker}, word={word}, trial={trial}, time={time})")]
    MissingCell {
        speaker: String,
        word: String,
        trial: usize,
        time: usize,
    },
    #[error("duplicate cell (speaker={speaker}, word={word}, trial={trial}, time={time}) on line {line}")]
    DuplicateCell {
        speaker: String,
        word: String,
        trial: usize,
        time: usize,
        line: u64,
    },
    #[error("non-numeric value {value:?} in column `{column}` on line {line}")]
    NonNumericValue {
        line: u64,
        column: String,
        value: String,
    },
    #[error("ragged time axis: {0}")]
    RaggedTimeAxis(String),
    #[error("invalid trial index {value:?} on line {line} (trials are 1-based)")]
    BadTrialIndex { line: u64, value: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate {axis} label `{label}`")]
    DuplicateLabel { axis: &'static str, label: String },
    #[error("invalid tensor shape: {0}")]
    InvalidShape(String),
    #[error("tensor words missing from metadata: {}", .0.join(", "))]
    MissingWord(Vec<String>),
    #[error("invalid value {value:?} for `{column}` on line {line}")]
    BadEnum {
        line: u64,
        column: String,
        value: String,
    },
    #[error("duplicate metadata row for word `{0}`")]
    DuplicateWord(String),
    #[error("unknown word attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid word filter `{0}` (expected attribute=value[,value...])")]
    BadFilter(String),
    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("word filter selected {selected} word(s); at least 2 are required")]
    TooFewWords { selected: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Axis lengths of a replicate tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub n_speakers: usize,
    pub n_words: usize,
    pub n_trials: usize,
    pub n_times: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.n_speakers * self.n_words * self.n_trials * self.n_times
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pitch measurements `X(speaker, word, trial, time)` in Hz.
///
/// Storage is row-major in `(speaker, word, trial, time)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateTensor {
    shape: Shape,
    speaker_ids: Vec<String>,
    word_ids: Vec<String>,
    values: Vec<f64>,
}

fn check_unique(axis: &'static str, labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(DataError::DuplicateLabel {
                axis,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

impl ReplicateTensor {
    pub fn new(
        speaker_ids: Vec<String>,
        word_ids: Vec<String>,
        n_trials: usize,
        n_times: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let shape = Shape {
            n_speakers: speaker_ids.len(),
            n_words: word_ids.len(),
            n_trials,
            n_times,
        };
        if shape.n_speakers == 0 || shape.n_words == 0 || n_trials == 0 || n_times == 0 {
            return Err(DataError::InvalidShape(format!(
                "all axis lengths must be at least 1, got {shape:?}"
            )));
        }
        if values.len() != shape.len() {
            return Err(DataError::InvalidShape(format!(
                "expected {} values for {shape:?}, got {}",
                shape.len(),
                values.len()
            )));
        }
        check_unique("speaker", &speaker_ids)?;
        check_unique("word", &word_ids)?;
        Ok(Self {
            shape,
            speaker_ids,
            word_ids,
            values,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn speaker_ids(&self) -> &[String] {
        &self.speaker_ids
    }

    pub fn word_ids(&self) -> &[String] {
        &self.word_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, speaker: usize, word: usize, trial: usize, time: usize) -> usize {
        let s = &self.shape;
        ((speaker * s.n_words + word) * s.n_trials + trial) * s.n_times + time
    }

    /// Value at zero-based `(speaker, word, trial, time)`.
    #[inline]
    pub fn get(&self, speaker: usize, word: usize, trial: usize, time: usize) -> f64 {
        self.values[self.offset(speaker, word, trial, time)]
    }

    /// The `n_words × n_times` matrix `X(i, r)` for one speaker and trial.
    pub fn slice(&self, speaker: usize, trial: usize) -> DMatrix<f64> {
        let s = self.shape;
        DMatrix::from_fn(s.n_words, s.n_times, |w, t| self.get(speaker, w, trial, t))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Restrict the word axis to `indices`, keeping their order.
    pub fn select_words(&self, indices: &[usize]) -> Result<Self> {
        let s = self.shape;
        if let Some(&bad) = indices.iter().find(|&&i| i >= s.n_words) {
            return Err(DataError::IndexOutOfRange {
                index: bad,
                len: s.n_words,
            });
        }
        let block = s.n_trials * s.n_times;
        let mut values = Vec::with_capacity(s.n_speakers * indices.len() * block);
        for sp in 0..s.n_speakers {
            for &w in indices {
                let start = self.offset(sp, w, 0, 0);
                values.extend_from_slice(&self.values[start..start + block]);
            }
        }
        let words = indices.iter().map(|&i| self.word_ids[i].clone()).collect();
        Self::new(
            self.speaker_ids.clone(),
            words,
            s.n_trials,
            s.n_times,
            values,
        )
    }

    /// Restrict to the words whose metadata satisfies `filter`.
    pub fn subset_words(&self, meta: &WordMetadata, filter: &WordFilter) -> Result<Self> {
        let indices = filter.select(meta, &self.word_ids)?;
        self.select_words(&indices)
    }
}

impl AsRef<ReplicateTensor> for ReplicateTensor {
    fn as_ref(&self) -> &ReplicateTensor {
        self
    }
}

/// A tensor whose trials have been centered at the per-speaker trial mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTensor(ReplicateTensor);

impl ResidualTensor {
    pub fn tensor(&self) -> &ReplicateTensor {
        &self.0
    }

    pub fn into_tensor(self) -> ReplicateTensor {
        self.0
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub fn word_ids(&self) -> &[String] {
        &self.0.word_ids
    }

    /// Restrict to the words whose metadata satisfies `filter`.
    pub fn subset_words(&self, meta: &WordMetadata, filter: &WordFilter) -> Result<Self> {
        self.0.subset_words(meta, filter).map(ResidualTensor)
    }
}

impl AsRef<ReplicateTensor> for ResidualTensor {
    fn as_ref(&self) -> &ReplicateTensor {
        &self.0
    }
}

/// Trial mean `X̄(i)` for one speaker, as an `n_words × n_times` matrix.
pub fn trial_mean(tensor: &ReplicateTensor, speaker: usize) -> Result<DMatrix<f64>> {
    let s = tensor.shape;
    if speaker >= s.n_speakers {
        return Err(DataError::IndexOutOfRange {
            index: speaker,
            len: s.n_speakers,
        });
    }
    let n = s.n_trials as f64;
    Ok(DMatrix::from_fn(s.n_words, s.n_times, |w, t| {
        (0..s.n_trials).fold(0.0, |acc, r| acc + tensor.get(speaker, w, r, t)) / n
    }))
}

/// Subtract the per-speaker trial mean from every trial.
///
/// The last trial of each `(speaker, word, time)` cell is stored as the
/// negated sum of the other residuals, so trial sums are exactly zero in
/// floating point and residualizing a residual tensor is the identity.
pub fn residualize<T: AsRef<ReplicateTensor>>(tensor: T) -> ResidualTensor {
    let tensor = tensor.as_ref();
    let s = tensor.shape;
    let n = s.n_trials as f64;
    let mut out = tensor.clone();
    for sp in 0..s.n_speakers {
        for w in 0..s.n_words {
            for t in 0..s.n_times {
                let mean = (0..s.n_trials).fold(0.0, |acc, r| acc + tensor.get(sp, w, r, t)) / n;
                let mut partial = 0.0;
                for r in 0..s.n_trials - 1 {
                    let resid = tensor.get(sp, w, r, t) - mean;
                    partial += resid;
                    let k = out.offset(sp, w, r, t);
                    out.values[k] = resid;
                }
                let k = out.offset(sp, w, s.n_trials - 1, t);
                out.values[k] = 0.0 - partial;
            }
        }
    }
    ResidualTensor(out)
}

/// Column names for long-format tensor CSV files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSchema {
    pub speaker: String,
    pub word: String,
    pub trial: String,
    pub time: String,
    pub value: String,
}

impl Default for TensorSchema {
    fn default() -> Self {
        Self {
            speaker: "speaker".into(),
            word: "word".into(),
            trial: "trial".into(),
            time: "time".into(),
            value: "value".into(),
        }
    }
}

struct LongRow {
    speaker: String,
    word: String,
    trial: usize,
    time: usize,
    value: f64,
    line: u64,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn parse_value(raw: &str, column: &str, line: u64) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DataError::NonNumericValue {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

fn parse_index(raw: &str, column: &str, line: u64) -> Result<i64> {
    raw.trim()
        .parse::<i64>()
        .map_err(|_| DataError::NonNumericValue {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

/// Read a long-format tensor CSV (`speaker,word,trial,time,value`).
pub fn load_tensor(path: impl AsRef<Path>, schema: &TensorSchema) -> Result<ReplicateTensor> {
    let file = std::fs::File::open(path)?;
    read_tensor(file, schema)
}

pub fn read_tensor<R: Read>(reader: R, schema: &TensorSchema) -> Result<ReplicateTensor> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = [
        column(&headers, &schema.speaker)?,
        column(&headers, &schema.word)?,
        column(&headers, &schema.trial)?,
        column(&headers, &schema.time)?,
        column(&headers, &schema.value)?,
    ];
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(cols[i]).unwrap_or("");
        let trial = parse_index(field(2), &schema.trial, line)?;
        if trial < 1 {
            return Err(DataError::BadTrialIndex {
                line,
                value: field(2).to_string(),
            });
        }
        let time = parse_index(field(3), &schema.time, line)?;
        if time < 1 {
            return Err(DataError::RaggedTimeAxis(format!(
                "time index {time} on line {line} is not 1-based"
            )));
        }
        rows.push(LongRow {
            speaker: field(0).to_string(),
            word: field(1).to_string(),
            trial: trial as usize,
            time: time as usize,
            value: parse_value(field(4), &schema.value, line)?,
            line,
        });
    }
    assemble(rows)
}

/// Read a wide-format tensor CSV: `speaker,word,trial` followed by one
/// column per time point in order. Rows are converted to long form first.
pub fn load_wide_tensor(path: impl AsRef<Path>) -> Result<ReplicateTensor> {
    let file = std::fs::File::open(path)?;
    read_wide_tensor(file)
}

pub fn read_wide_tensor<R: Read>(reader: R) -> Result<ReplicateTensor> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let sc = column(&headers, "speaker")?;
    let wc = column(&headers, "word")?;
    let rc = column(&headers, "trial")?;
    let time_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| ![sc, wc, rc].contains(i))
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    if time_cols.is_empty() {
        return Err(DataError::RaggedTimeAxis("no time columns".into()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let trial_raw = record.get(rc).unwrap_or("");
        let trial = parse_index(trial_raw, "trial", line)?;
        if trial < 1 {
            return Err(DataError::BadTrialIndex {
                line,
                value: trial_raw.to_string(),
            });
        }
        if record.len() != headers.len() {
            return Err(DataError::RaggedTimeAxis(format!(
                "line {line} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (k, (col, name)) in time_cols.iter().enumerate() {
            rows.push(LongRow {
                speaker: record.get(sc).unwrap_or("").to_string(),
                word: record.get(wc).unwrap_or("").to_string(),
                trial: trial as usize,
                time: k + 1,
                value: parse_value(record.get(*col).unwrap_or(""), name, line)?,
                line,
            });
        }
    }
    assemble(rows)
}

fn intern(labels: &mut Vec<String>, index: &mut HashMap<String, usize>, label: &str) -> usize {
    if let Some(&i) = index.get(label) {
        return i;
    }
    labels.push(label.to_string());
    index.insert(label.to_string(), labels.len() - 1);
    labels.len() - 1
}

fn assemble(rows: Vec<LongRow>) -> Result<ReplicateTensor> {
    if rows.is_empty() {
        return Err(DataError::InvalidShape("no data rows".into()));
    }
    let mut speakers = Vec::new();
    let mut speaker_index = HashMap::new();
    let mut words = Vec::new();
    let mut word_index = HashMap::new();
    let mut cells: HashMap<(usize, usize, usize, usize), f64> = HashMap::with_capacity(rows.len());
    let mut times_seen = BTreeSet::new();
    let (mut n_trials, mut n_times) = (0, 0);
    for row in &rows {
        let sp = intern(&mut speakers, &mut speaker_index, &row.speaker);
        let w = intern(&mut words, &mut word_index, &row.word);
        if cells
            .insert((sp, w, row.trial, row.time), row.value)
            .is_some()
        {
            return Err(DataError::DuplicateCell {
                speaker: row.speaker.clone(),
                word: row.word.clone(),
                trial: row.trial,
                time: row.time,
                line: row.line,
            });
        }
        times_seen.insert(row.time);
        n_trials = n_trials.max(row.trial);
        n_times = n_times.max(row.time);
    }
    if times_seen.len() != n_times {
        let gaps: Vec<String> = (1..=n_times)
            .filter(|t| !times_seen.contains(t))
            .map(|t| t.to_string())
            .collect();
        return Err(DataError::RaggedTimeAxis(format!(
            "time indices must cover 1..{n_times}; absent: {}",
            gaps.join(", ")
        )));
    }
    let mut values = Vec::with_capacity(speakers.len() * words.len() * n_trials * n_times);
    for (sp, speaker) in speakers.iter().enumerate() {
        for (w, word) in words.iter().enumerate() {
            for r in 1..=n_trials {
                for t in 1..=n_times {
                    match cells.get(&(sp, w, r, t)) {
                        Some(&v) => values.push(v),
                        None => {
                            return Err(DataError::MissingCell {
                                speaker: speaker.clone(),
                                word: word.clone(),
                                trial: r,
                                time: t,
                            })
                        }
                    }
                }
            }
        }
    }
    ReplicateTensor::new(speakers, words, n_trials, n_times, values)
}

/// Write a tensor in long format, rows ordered by `(speaker, word, trial, time)`.
pub fn write_tensor<W: Write>(tensor: &ReplicateTensor, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["speaker", "word", "trial", "time", "value"])?;
    let s = tensor.shape;
    for (sp, speaker) in tensor.speaker_ids.iter().enumerate() {
        for (w, word) in tensor.word_ids.iter().enumerate() {
            for r in 0..s.n_trials {
                for t in 0..s.n_times {
                    wtr.write_record([
                        speaker.as_str(),
                        word.as_str(),
                        &(r + 1).to_string(),
                        &(t + 1).to_string(),
                        &fmt_f64(tensor.get(sp, w, r, t)),
                    ])?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_tensor(tensor: &ReplicateTensor, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_tensor(tensor, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VowelLength {
    Long,
    Short,
}

impl VowelLength {
    pub fn as_str(&self) -> &'static str {
        match self {
            VowelLength::Long => "long",
            VowelLength::Short => "short",
        }
    }
}

impl FromStr for VowelLength {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "long" => Ok(VowelLength::Long),
            "short" => Ok(VowelLength::Short),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsonantClass {
    Labial,
    Alveolar,
    Nasal,
    Fricative,
}

impl ConsonantClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConsonantClass::Labial => "labial",
            ConsonantClass::Alveolar => "alveolar",
            ConsonantClass::Nasal => "nasal",
            ConsonantClass::Fricative => "fricative",
        }
    }
}

impl FromStr for ConsonantClass {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "labial" => Ok(ConsonantClass::Labial),
            "alveolar" => Ok(ConsonantClass::Alveolar),
            "nasal" => Ok(ConsonantClass::Nasal),
            "fricative" => Ok(ConsonantClass::Fricative),
            _ => Err(()),
        }
    }
}

/// Phonological attributes of one word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRecord {
    pub word: String,
    pub vowel: String,
    pub vowel_length: VowelLength,
    pub onset: String,
    pub coda_first: String,
    pub coda_last: String,
    pub consonant_class: ConsonantClass,
    /// Optional alias used to merge onsets (e.g. `m` and `n` into `m/n`).
    pub onset_group: Option<String>,
}

/// Word attribute usable for grouping and filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Vowel,
    VowelLength,
    Onset,
    OnsetGroup,
    CodaFirst,
    CodaLast,
    ConsonantClass,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::Vowel,
        Attribute::VowelLength,
        Attribute::Onset,
        Attribute::OnsetGroup,
        Attribute::CodaFirst,
        Attribute::CodaLast,
        Attribute::ConsonantClass,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::Vowel => "vowel",
            Attribute::VowelLength => "vowel_length",
            Attribute::Onset => "onset",
            Attribute::OnsetGroup => "onset_group",
            Attribute::CodaFirst => "coda_first",
            Attribute::CodaLast => "coda_last",
            Attribute::ConsonantClass => "consonant_class",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| DataError::UnknownAttribute(s.to_string()))
    }
}

impl WordRecord {
    pub fn attribute(&self, attr: Attribute) -> &str {
        match attr {
            Attribute::Vowel => &self.vowel,
            Attribute::VowelLength => self.vowel_length.as_str(),
            Attribute::Onset => &self.onset,
            Attribute::OnsetGroup => self.onset_group.as_deref().unwrap_or(&self.onset),
            Attribute::CodaFirst => &self.coda_first,
            Attribute::CodaLast => &self.coda_last,
            Attribute::ConsonantClass => self.consonant_class.as_str(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordMetadata {
    records: Vec<WordRecord>,
    index: HashMap<String, usize>,
}

const METADATA_COLUMNS: [&str; 7] = [
    "word",
    "vowel",
    "vowel_length",
    "onset",
    "coda_first",
    "coda_last",
    "consonant_class",
];

impl WordMetadata {
    pub fn from_records(records: Vec<WordRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            if index.insert(rec.word.clone(), i).is_some() {
                return Err(DataError::DuplicateWord(rec.word.clone()));
            }
        }
        Ok(Self { records, index })
    }

    pub fn records(&self) -> &[WordRecord] {
        &self.records
    }

    pub fn get(&self, word: &str) -> Option<&WordRecord> {
        self.index.get(word).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Attribute value for `word`, or `MissingWord`.
    pub fn attribute_of(&self, word: &str, attr: Attribute) -> Result<&str> {
        self.get(word)
            .map(|r| r.attribute(attr))
            .ok_or_else(|| DataError::MissingWord(vec![word.to_string()]))
    }

    /// Check that every tensor word has a metadata row. Returns the metadata
    /// words absent from the tensor, which callers may surface as warnings.
    pub fn check_coverage(&self, words: &[String]) -> Result<Vec<String>> {
        let missing: Vec<String> = words
            .iter()
            .filter(|w| !self.index.contains_key(*w))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(DataError::MissingWord(missing));
        }
        let present: HashSet<&str> = words.iter().map(String::as_str).collect();
        Ok(self
            .records
            .iter()
            .filter(|r| !present.contains(r.word.as_str()))
            .map(|r| r.word.clone())
            .collect())
    }
}

/// Read word metadata:
/// `word,vowel,vowel_length,onset,coda_first,coda_last,consonant_class[,onset_group]`.
pub fn load_metadata(path: impl AsRef<Path>) -> Result<WordMetadata> {
    let file = std::fs::File::open(path)?;
    read_metadata(file)
}

pub fn read_metadata<R: Read>(reader: R) -> Result<WordMetadata> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(METADATA_COLUMNS) {
        *slot = column(&headers, name)?;
    }
    let group_col = column(&headers, "onset_group").ok();
    let mut records = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(cols[i]).unwrap_or("").to_string();
        let vowel_length = field(2).parse().map_err(|_| DataError::BadEnum {
            line,
            column: "vowel_length".into(),
            value: field(2),
        })?;
        let consonant_class = field(6).parse().map_err(|_| DataError::BadEnum {
            line,
            column: "consonant_class".into(),
            value: field(6),
        })?;
        let onset_group = group_col
            .and_then(|c| record.get(c))
            .filter(|g| !g.is_empty())
            .map(str::to_string);
        records.push(WordRecord {
            word: field(0),
            vowel: field(1),
            vowel_length,
            onset: field(3),
            coda_first: field(4),
            coda_last: field(5),
            consonant_class,
            onset_group,
        });
    }
    WordMetadata::from_records(records)
}

/// Keeps words whose `attribute` takes one of `values`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordFilter {
    pub attribute: Attribute,
    pub values: BTreeSet<String>,
}

impl WordFilter {
    pub fn new<I, S>(attribute: Attribute, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            attribute,
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn matches(&self, record: &WordRecord) -> bool {
        self.values.contains(record.attribute(self.attribute))
    }

    /// Indices of `words` selected by the filter, in order.
    pub fn select(&self, meta: &WordMetadata, words: &[String]) -> Result<Vec<usize>> {
        meta.check_coverage(words)?;
        let indices: Vec<usize> = words
            .iter()
            .enumerate()
            .filter(|(_, w)| meta.get(w).is_some_and(|r| self.matches(r)))
            .map(|(i, _)| i)
            .collect();
        if indices.len() < 2 {
            return Err(DataError::TooFewWords {
                selected: indices.len(),
            });
        }
        Ok(indices)
    }
}

impl FromStr for WordFilter {
    type Err = DataError;

    /// Parses `attribute=value[,value...]`, e.g. `consonant_class=labial,alveolar`.
    fn from_str(s: &str) -> Result<Self> {
        let (attr, values) = s
            .split_once('=')
            .ok_or_else(|| DataError::BadFilter(s.to_string()))?;
        let values: BTreeSet<String> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_string)
            .collect();
        if values.is_empty() {
            return Err(DataError::BadFilter(s.to_string()));
        }
        Ok(Self {
            attribute: attr.trim().parse()?,
            values,
        })
    }
}
