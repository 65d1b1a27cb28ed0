//! Labeled datasets in libsvm text format.
//!
//! Feature indices are 1-based in files and 0-based in memory; the
//! conversion happens only in [`parse_libsvm`] and [`write_libsvm`].

use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: feature indices must be strictly increasing ({prev} then {next})")]
    NonIncreasingIndex { line: usize, prev: usize, next: usize },
    #[error("line {line}: label {label} is not a valid class label (expected -1/+1 or 0/1)")]
    InvalidLabel { line: usize, label: f64 },
    #[error("dataset contains no examples")]
    Empty,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("sparse vector has {indices} indices but {values} values")]
    LengthMismatch { indices: usize, values: usize },
    #[error("{examples} examples but {labels} labels")]
    LabelCountMismatch { examples: usize, labels: usize },
    #[error("feature index {index} exceeds dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("cannot shrink feature dimension from {from} to {to}")]
    DimensionShrink { from: usize, to: usize },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("split leaves the training set empty")]
    EmptyTrainSplit,
}

/// Learning task, which fixes the loss and the label domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Hinge loss, labels in {-1, +1}.
    Classification,
    /// epsilon-insensitive loss, real labels.
    Regression,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "classification" => Some(Task::Classification),
            "regression" => Some(Task::Regression),
            _ => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sparse vector with strictly increasing 0-based indices and finite values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector<T> {
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseVector<T> {
    pub fn new(indices: Vec<usize>, values: Vec<T>) -> Result<Self, DataError> {
        if indices.len() != values.len() {
            return Err(DataError::LengthMismatch {
                indices: indices.len(),
                values: values.len(),
            });
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DataError::NonIncreasingIndex {
                line: 0,
                prev: w[0] + 1,
                next: w[1] + 1,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite("sparse vector"));
        }
        Ok(Self { indices, values })
    }

    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Keeps the nonzero entries of `dense`.
    pub fn from_dense(dense: &[T]) -> Result<Self, DataError> {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| (i, v))
            .unzip();
        Self::new(indices, values)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Smallest dense dimension that holds every stored index.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i + 1)
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    /// Dot product with a dense vector; indices past its end contribute zero.
    pub fn dot_dense(&self, dense: &[T]) -> T {
        let mut sum = T::zero();
        for (i, v) in self.iter() {
            match dense.get(i) {
                Some(&w) => sum += v * w,
                None => break,
            }
        }
        sum
    }

    /// `‖self − other‖²` by merging the two index lists.
    ///
    /// Computed from coordinate differences, so the result is exactly zero
    /// for identical vectors and exactly symmetric in its arguments.
    pub fn squared_distance(&self, other: &Self) -> T {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j) = (0, 0);
        let mut sum = T::zero();
        while i < a.len() && j < b.len() {
            if a[i] == b[j] {
                let d = self.values[i] - other.values[j];
                sum += d * d;
                i += 1;
                j += 1;
            } else if a[i] < b[j] {
                sum += self.values[i] * self.values[i];
                i += 1;
            } else {
                sum += other.values[j] * other.values[j];
                j += 1;
            }
        }
        sum += self.values[i..].iter().fold(T::zero(), |acc, &v| acc + v * v);
        sum += other.values[j..].iter().fold(T::zero(), |acc, &v| acc + v * v);
        sum
    }

    pub fn to_dense(&self, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n.max(self.min_dim())];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Labeled examples plus the feature dimension and task kind.
///
/// Datasets read from files always hold at least one example; [`split`]
/// may produce empty validation or test parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    examples: Vec<SparseVector<T>>,
    labels: Vec<T>,
    n: usize,
    task: Task,
}

impl<T: Scalar> Dataset<T> {
    /// `n` defaults to the largest index present; an explicit value may only
    /// be larger.
    pub fn new(
        examples: Vec<SparseVector<T>>,
        labels: Vec<T>,
        task: Task,
        n: Option<usize>,
    ) -> Result<Self, DataError> {
        if examples.is_empty() {
            return Err(DataError::Empty);
        }
        Self::build(examples, labels, task, n)
    }

    fn build(
        examples: Vec<SparseVector<T>>,
        labels: Vec<T>,
        task: Task,
        n: Option<usize>,
    ) -> Result<Self, DataError> {
        if examples.len() != labels.len() {
            return Err(DataError::LabelCountMismatch {
                examples: examples.len(),
                labels: labels.len(),
            });
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(DataError::NonFinite("labels"));
        }
        if task == Task::Classification {
            if let Some(&y) = labels.iter().find(|&&y| y != T::one() && y != -T::one()) {
                return Err(DataError::InvalidLabel {
                    line: 0,
                    label: y.as_f64(),
                });
            }
        }
        let seen = examples.iter().map(SparseVector::min_dim).max().unwrap_or(0);
        let n = match n {
            Some(n) if n < seen => return Err(DataError::IndexOutOfRange { index: seen, n }),
            Some(n) => n,
            None => seen,
        };
        Ok(Self {
            examples,
            labels,
            n,
            task,
        })
    }

    /// Raises the feature dimension so that train and test sets agree.
    pub fn with_dimension(mut self, n: usize) -> Result<Self, DataError> {
        if n < self.n {
            return Err(DataError::DimensionShrink { from: self.n, to: n });
        }
        self.n = n;
        Ok(self)
    }

    pub fn examples(&self) -> &[SparseVector<T>] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &SparseVector<T> {
        &self.examples[i]
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> T {
        self.labels[i]
    }

    /// Feature dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of examples.
    pub fn m(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// `‖y‖_∞`
    pub fn max_abs_label(&self) -> T {
        self.labels.iter().fold(T::zero(), |acc, y| acc.max(y.abs()))
    }

    /// Examples at `indices`, in that order, keeping `n` and the task.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n: self.n,
            task: self.task,
        }
    }
}

/// One parsed line: raw label, features, and the 1-based source line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub line: usize,
    pub label: f64,
    pub features: SparseVector<T>,
}

/// Parses libsvm lines without interpreting labels. Blank and comment-only
/// lines are skipped; an empty stream yields no records.
pub fn parse_records<T: Scalar, R: BufRead>(source: R) -> Result<Vec<Record<T>>, DataError> {
    let mut records = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split([' ', '\t']).filter(|t| !t.is_empty());
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label = parse_real(label_tok, lineno)?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: lineno,
                msg: format!("expected index:value, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("invalid feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if let Some(&prev) = indices.last() {
                if idx - 1 <= prev {
                    return Err(DataError::NonIncreasingIndex {
                        line: lineno,
                        prev: prev + 1,
                        next: idx,
                    });
                }
            }
            indices.push(idx - 1);
            values.push(T::of(parse_real(val, lineno)?));
        }
        if values.iter().any(|v: &T| !v.is_finite()) {
            return Err(DataError::Parse {
                line: lineno,
                msg: "feature value overflows the scalar type".into(),
            });
        }
        records.push(Record {
            line: lineno,
            label,
            features: SparseVector { indices, values },
        });
    }
    Ok(records)
}

fn parse_real(tok: &str, line: usize) -> Result<f64, DataError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(DataError::Parse {
            line,
            msg: format!("non-finite number {tok:?}"),
        }),
        Err(_) => Err(DataError::Parse {
            line,
            msg: format!("invalid number {tok:?}"),
        }),
    }
}

/// Reads a dataset in libsvm format.
///
/// For classification, labels must be -1/+1; a file whose labels are
/// exactly the two values {0, 1} is accepted with 0 mapped to -1.
pub fn parse_libsvm<T: Scalar, R: BufRead>(source: R, task: Task) -> Result<Dataset<T>, DataError> {
    let records = parse_records::<T, _>(source)?;
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    let labels = match task {
        Task::Regression => records.iter().map(|r| T::of(r.label)).collect(),
        Task::Classification => class_labels(&records)?,
    };
    let examples = records.into_iter().map(|r| r.features).collect();
    Dataset::new(examples, labels, task, None)
}

fn class_labels<T: Scalar>(records: &[Record<T>]) -> Result<Vec<T>, DataError> {
    let signed = |y: f64| y == 1.0 || y == -1.0;
    if records.iter().all(|r| signed(r.label)) {
        return Ok(records.iter().map(|r| T::of(r.label)).collect());
    }
    let has_zero = records.iter().any(|r| r.label == 0.0);
    let has_one = records.iter().any(|r| r.label == 1.0);
    let binary = records.iter().all(|r| r.label == 0.0 || r.label == 1.0);
    if binary && has_zero && has_one {
        return Ok(records
            .iter()
            .map(|r| if r.label == 1.0 { T::one() } else { -T::one() })
            .collect());
    }
    let bad = records
        .iter()
        .find(|r| !signed(r.label))
        .expect("some label is not -1/+1");
    Err(DataError::InvalidLabel {
        line: bad.line,
        label: bad.label,
    })
}

/// Writes `data` in libsvm format; classification labels as `+1`/`-1`.
pub fn write_libsvm<T: Scalar, W: Write>(data: &Dataset<T>, mut sink: W) -> std::io::Result<()> {
    for (x, &y) in data.examples.iter().zip(&data.labels) {
        match data.task {
            Task::Classification if y > T::zero() => write!(sink, "+1")?,
            Task::Classification => write!(sink, "-1")?,
            Task::Regression => write!(sink, "{}", y.as_f64())?,
        }
        write_features(x, &mut sink)?;
        writeln!(sink)?;
    }
    Ok(())
}

/// Writes ` idx:val` pairs (1-based) for one vector, without a newline.
pub(crate) fn write_features<T: Scalar, W: Write>(x: &SparseVector<T>, sink: &mut W) -> std::io::Result<()> {
    for (i, v) in x.iter() {
        write!(sink, " {}:{}", i + 1, v.as_f64())?;
    }
    Ok(())
}

/// Seeded random partition into (train, valid, test).
///
/// Valid and test sizes are the rounded fractions of `m`; train takes the
/// remainder.
pub fn split<T: Scalar>(
    data: &Dataset<T>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>), DataError> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(DataError::InvalidFractions(format!("{fractions:?} has a negative entry")));
    }
    if (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidFractions(format!("{fractions:?} does not sum to 1")));
    }
    let m = data.m();
    let n_valid = (fv * m as f64).round() as usize;
    let n_test = (fs * m as f64).round() as usize;
    let n_train = m.saturating_sub(n_valid + n_test);
    if n_train == 0 {
        return Err(DataError::EmptyTrainSplit);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Split));
    let (train, rest) = order.split_at(n_train);
    let (valid, test) = rest.split_at(n_valid);
    Ok((data.subset(train), data.subset(valid), data.subset(test)))
}
