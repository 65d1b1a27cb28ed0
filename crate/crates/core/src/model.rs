//! Trained decision functions and the model file format.
//!
//! A Nyström model keeps the sample points and expansion coefficients
//! `α_S = Q·D^{-1/2}·γ`, so a prediction costs exactly `s` kernel
//! evaluations. A Fourier model keeps the frequencies and phases and
//! predicts with `φ(x)·γ + b`.

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::dataio::{write_features, DataError, SparseVector, Task};
use crate::kernelmap::{FeatureMap, FourierMap, GaussianKernel, KernelMapError, NystromMap};
use crate::linalg::DenseMatrix;
use crate::scalar::{dot, Scalar};

pub const MODEL_HEADER: &str = "ASSET-MODEL v1";
const HEADER_PREFIX: &str = "ASSET-MODEL ";
const TRAILER: &str = "end";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported model version {0:?}")]
    UnsupportedVersion(String),
    #[error("not a model file")]
    MissingHeader,
    #[error("model file is truncated (expected {0})")]
    Truncated(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    KernelMap(#[from] KernelMapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approx {
    Nystrom,
    Fourier,
}

impl Approx {
    pub fn name(self) -> &'static str {
        match self {
            Approx::Nystrom => "nystrom",
            Approx::Fourier => "fourier",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "nystrom" => Some(Approx::Nystrom),
            "fourier" => Some(Approx::Fourier),
            _ => None,
        }
    }
}

impl fmt::Display for Approx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel expansion over the Nyström sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromRecovery<T> {
    pub alpha_s: Vec<T>,
    pub support_points: Vec<SparseVector<T>>,
    pub kernel: GaussianKernel<T>,
}

impl<T: Scalar> NystromRecovery<T> {
    /// `Σ α_i k(t_i, x)`: exactly `s` kernel evaluations.
    pub fn expand(&self, x: &SparseVector<T>) -> T {
        self.alpha_s
            .iter()
            .zip(&self.support_points)
            .map(|(&a, t)| a * self.kernel.eval(t, x))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload<T> {
    Nystrom(NystromRecovery<T>),
    Fourier(FourierMap<T>),
}

/// `α_S = Q_{·,1..d̄} · D^{-1/2} · γ`.
pub fn recover_alpha<T: Scalar>(map: &NystromMap<T>, gamma: &[T]) -> NystromRecovery<T> {
    assert_eq!(gamma.len(), map.dim(), "gamma length must equal the map dimension");
    let scaled: Vec<T> = gamma.iter().zip(map.inv_sqrt_eigs()).map(|(&g, &w)| g * w).collect();
    NystromRecovery {
        alpha_s: map.basis().mul_vec(&scaled),
        support_points: map.sample_points().to_vec(),
        kernel: map.kernel(),
    }
}

/// Sign with ties going to +1.
pub fn classify<T: Scalar>(score: T) -> T {
    if score >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub task: Task,
    pub gamma: Vec<T>,
    pub b: T,
    pub include_bias: bool,
    pub lambda: T,
    pub epsilon: T,
    /// Input dimension seen in training.
    pub n: usize,
    pub payload: Payload<T>,
}

/// Training metadata carried into the model file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta<T> {
    pub task: Task,
    pub include_bias: bool,
    pub lambda: T,
    pub epsilon: T,
    pub n: usize,
}

impl<T: Scalar> Model<T> {
    pub fn from_solution(meta: ModelMeta<T>, map: &FeatureMap<T>, gamma: Vec<T>, b: T) -> Result<Self, ModelError> {
        if gamma.len() != map.dim() {
            return Err(ModelError::Inconsistent(format!(
                "gamma has length {}, map dimension is {}",
                gamma.len(),
                map.dim()
            )));
        }
        let payload = match map {
            FeatureMap::Nystrom(ny) => Payload::Nystrom(recover_alpha(ny, &gamma)),
            FeatureMap::Fourier(f) => Payload::Fourier(f.clone()),
        };
        let model = Self {
            task: meta.task,
            gamma,
            b: if meta.include_bias { b } else { T::zero() },
            include_bias: meta.include_bias,
            lambda: meta.lambda,
            epsilon: meta.epsilon,
            n: meta.n,
            payload,
        };
        model.check()?;
        Ok(model)
    }

    pub fn approx(&self) -> Approx {
        match self.payload {
            Payload::Nystrom(_) => Approx::Nystrom,
            Payload::Fourier(_) => Approx::Fourier,
        }
    }

    pub fn kernel(&self) -> GaussianKernel<T> {
        match &self.payload {
            Payload::Nystrom(r) => r.kernel,
            Payload::Fourier(f) => f.kernel(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn decide(&self, x: &SparseVector<T>) -> T {
        let f = match &self.payload {
            Payload::Nystrom(r) => r.expand(x),
            Payload::Fourier(map) => dot(&map.map(x), &self.gamma),
        };
        f + self.b
    }

    /// Predicted label for classification, the decision value otherwise.
    pub fn predict(&self, x: &SparseVector<T>) -> T {
        let f = self.decide(x);
        match self.task {
            Task::Classification => classify(f),
            Task::Regression => f,
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.gamma) || !self.b.is_finite() || !self.lambda.is_finite() || !self.epsilon.is_finite() {
            return Err(ModelError::Inconsistent("non-finite value".into()));
        }
        match &self.payload {
            Payload::Nystrom(r) => {
                if r.alpha_s.len() != r.support_points.len() || r.alpha_s.is_empty() {
                    return Err(ModelError::Inconsistent(format!(
                        "{} coefficients for {} support points",
                        r.alpha_s.len(),
                        r.support_points.len()
                    )));
                }
                if !finite(&r.alpha_s) {
                    return Err(ModelError::Inconsistent("non-finite coefficient".into()));
                }
                if let Some(p) = r.support_points.iter().find(|p| p.min_dim() > self.n) {
                    return Err(ModelError::Inconsistent(format!(
                        "support point index {} exceeds n = {}",
                        p.min_dim(),
                        self.n
                    )));
                }
            }
            Payload::Fourier(f) => {
                if f.dim() != self.gamma.len() || f.input_dim() != self.n {
                    return Err(ModelError::Inconsistent(format!(
                        "{}x{} frequencies for d = {}, n = {}",
                        f.dim(),
                        f.input_dim(),
                        self.gamma.len(),
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, sink: &mut W) -> Result<(), ModelError> {
        writeln!(sink, "{MODEL_HEADER}")?;
        writeln!(sink, "task {}", self.task.name())?;
        writeln!(sink, "approx {}", self.approx().name())?;
        writeln!(sink, "sigma {}", self.kernel().sigma().as_f64())?;
        writeln!(sink, "lambda {}", self.lambda.as_f64())?;
        writeln!(sink, "epsilon {}", self.epsilon.as_f64())?;
        writeln!(sink, "bias {}", self.include_bias)?;
        writeln!(sink, "n {}", self.n)?;
        writeln!(sink, "d {}", self.gamma.len())?;
        writeln!(sink, "b {}", self.b.as_f64())?;
        write_vector(sink, "gamma", &self.gamma)?;
        match &self.payload {
            Payload::Fourier(f) => {
                for k in 0..f.dim() {
                    write_vector(sink, "frequency", f.frequencies().row(k))?;
                }
                write_vector(sink, "offsets", f.offsets())?;
            }
            Payload::Nystrom(r) => {
                writeln!(sink, "s {}", r.alpha_s.len())?;
                for (a, p) in r.alpha_s.iter().zip(&r.support_points) {
                    write!(sink, "{}", a.as_f64())?;
                    write_features(p, sink)?;
                    writeln!(sink)?;
                }
            }
        }
        writeln!(sink, "{TRAILER}")?;
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, ModelError> {
        let mut lines = Lines::new(source);
        let header = lines.next("header")?;
        if header != MODEL_HEADER {
            return match header.strip_prefix(HEADER_PREFIX) {
                Some(version) => Err(ModelError::UnsupportedVersion(version.to_string())),
                None => Err(ModelError::MissingHeader),
            };
        }
        let task_name = lines.value("task")?;
        let task = Task::from_name(&task_name).ok_or_else(|| lines.error(format!("unknown task {task_name:?}")))?;
        let approx_name = lines.value("approx")?;
        let approx =
            Approx::from_name(&approx_name).ok_or_else(|| lines.error(format!("unknown approximation {approx_name:?}")))?;
        let sigma: T = lines.number("sigma")?;
        let lambda: T = lines.number("lambda")?;
        let epsilon: T = lines.number("epsilon")?;
        let include_bias = match lines.value("bias")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(lines.error(format!("invalid bias flag {other:?}"))),
        };
        let n: usize = lines.count("n")?;
        let d: usize = lines.count("d")?;
        let b: T = lines.number("b")?;
        let gamma: Vec<T> = lines.vector("gamma")?;
        if gamma.len() != d {
            return Err(ModelError::Inconsistent(format!("gamma has length {}, declared d = {d}", gamma.len())));
        }
        let kernel = GaussianKernel::new(sigma)?;
        let payload = match approx {
            Approx::Fourier => {
                let mut freqs = Vec::with_capacity(d * n);
                for _ in 0..d {
                    let row: Vec<T> = lines.vector("frequency")?;
                    if row.len() != n {
                        return Err(ModelError::Inconsistent(format!(
                            "frequency row has length {}, declared n = {n}",
                            row.len()
                        )));
                    }
                    freqs.extend(row);
                }
                let offsets: Vec<T> = lines.vector("offsets")?;
                Payload::Fourier(FourierMap::from_parts(kernel, DenseMatrix::from_row_major(d, n, freqs), offsets)?)
            }
            Approx::Nystrom => {
                let s: usize = lines.count("s")?;
                let mut alpha_s = Vec::with_capacity(s);
                let mut support_points = Vec::with_capacity(s);
                for _ in 0..s {
                    let line = lines.next("support point")?;
                    let lineno = lines.line;
                    let mut records = crate::dataio::parse_records::<T, _>(line.as_bytes()).map_err(|e| match e {
                        DataError::Parse { msg, .. } => ModelError::Parse { line: lineno, msg },
                        other => ModelError::Parse {
                            line: lineno,
                            msg: other.to_string(),
                        },
                    })?;
                    let record = records.pop().ok_or(ModelError::Truncated("support point"))?;
                    alpha_s.push(T::of(record.label));
                    support_points.push(record.features);
                }
                Payload::Nystrom(NystromRecovery {
                    alpha_s,
                    support_points,
                    kernel,
                })
            }
        };
        if lines.next("end marker")? != TRAILER {
            return Err(lines.error("expected end marker".into()));
        }
        let model = Self {
            task,
            gamma,
            b,
            include_bias,
            lambda,
            epsilon,
            n,
            payload,
        };
        model.check()?;
        Ok(model)
    }
}

fn write_vector<T: Scalar, W: Write>(sink: &mut W, key: &str, values: &[T]) -> std::io::Result<()> {
    write!(sink, "{key}")?;
    for v in values {
        write!(sink, " {}", v.as_f64())?;
    }
    writeln!(sink)
}

struct Lines<R> {
    source: R,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(source: R) -> Self {
        Self { source, line: 0 }
    }

    fn error(&self, msg: String) -> ModelError {
        ModelError::Parse { line: self.line, msg }
    }

    fn next(&mut self, what: &'static str) -> Result<String, ModelError> {
        let mut buf = String::new();
        if self.source.read_line(&mut buf)? == 0 {
            return Err(ModelError::Truncated(what));
        }
        self.line += 1;
        Ok(buf.trim_end_matches(['\n', '\r']).to_string())
    }

    /// Rest of a `key value...` line.
    fn value(&mut self, key: &'static str) -> Result<String, ModelError> {
        let line = self.next(key)?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            _ if line == key => Ok(String::new()),
            _ => Err(self.error(format!("expected {key:?}, found {line:?}"))),
        }
    }

    fn number<T: Scalar>(&mut self, key: &'static str) -> Result<T, ModelError> {
        let v = self.value(key)?;
        parse_number(&v).ok_or_else(|| self.error(format!("invalid {key} value {v:?}")))
    }

    fn count(&mut self, key: &'static str) -> Result<usize, ModelError> {
        let v = self.value(key)?;
        v.parse().map_err(|_| self.error(format!("invalid {key} value {v:?}")))
    }

    fn vector<T: Scalar>(&mut self, key: &'static str) -> Result<Vec<T>, ModelError> {
        let v = self.value(key)?;
        v.split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| parse_number(t).ok_or_else(|| self.error(format!("invalid number {t:?} in {key}"))))
            .collect()
    }
}

fn parse_number<T: Scalar>(token: &str) -> Option<T> {
    token.parse::<f64>().ok().filter(|v| v.is_finite()).map(T::of)
}
