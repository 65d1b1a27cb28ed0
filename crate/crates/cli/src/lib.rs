//! `asset` command-line driver: `train`, `predict` and `eval`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or file
//! error, 3 numerical failure. Every configuration check runs before any
//! file is written.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use asset_core::kernelmap::DEFAULT_EPS_D;
use asset_core::oracle::loss;
use asset_core::rng::{sample_indices, Stream};
use asset_core::solver::default_intercept_bound;
use asset_core::{
    build_fourier, build_nystrom, classify, feasible_region, objective_pl_sample, parse_libsvm, Asset, DataError,
    Dataset, FeatureMap, GaussianKernel, KernelMapError, MappedRows, Model, ModelError, ModelMeta, SolverError,
    SolverParams, SparseVector, Task, Variant,
};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Examples used for the objective estimate in the metrics file.
pub const OBJECTIVE_SAMPLE: usize = 1000;
pub const METRICS_HEADER: &str = "iteration,seconds,objective,eval_error";

#[derive(Debug, Parser)]
#[command(name = "asset", version, about = "Approximate kernel SVM training with averaged stochastic subgradients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a feature map, train, and write a model file.
    Train(TrainArgs),
    /// Write decision values (and labels) for each example.
    Predict(PredictArgs),
    /// Print the error rate of a model or a predictions file.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    #[value(name = "class", alias = "classification")]
    Class,
    #[value(name = "regress", alias = "regression")]
    Regress,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Class => Task::Classification,
            TaskArg::Regress => Task::Regression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproxArg {
    Nystrom,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Averaged,
    Strong,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training data in libsvm format.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Class)]
    pub task: TaskArg,
    #[arg(long, value_enum, default_value_t = ApproxArg::Nystrom)]
    pub approx: ApproxArg,
    /// Nyström sample size.
    #[arg(long, default_value_t = 500)]
    pub s: usize,
    /// Feature dimension: rank cap for Nyström (default s), feature count
    /// for Fourier (default 500).
    #[arg(long)]
    pub d: Option<usize>,
    /// Smallest eigenvalue kept by the Nyström map.
    #[arg(long = "eps-d", default_value_t = DEFAULT_EPS_D)]
    pub eps_d: f64,
    /// Kernel width in exp(-sigma·|s-t|²).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    /// Tube half-width for regression.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Iteration budget N.
    #[arg(long, conflicts_with = "epochs")]
    pub iters: Option<usize>,
    /// Iteration budget in passes over the data (N = epochs·m); default 10.
    #[arg(long)]
    pub epochs: Option<f64>,
    /// First averaged iteration (default N − 100).
    #[arg(long)]
    pub nbar: Option<usize>,
    #[arg(long, value_enum, default_value_t = VariantArg::Averaged)]
    pub variant: VariantArg,
    /// Train without an intercept.
    #[arg(long = "no-bias")]
    pub no_bias: bool,
    /// Intercept bound (default 10·max(1, max|y|)).
    #[arg(long = "B")]
    pub intercept_bound: Option<f64>,
    /// Examples drawn to estimate the subgradient norm bound.
    #[arg(long = "dg-sample")]
    pub dg_sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Held-out data evaluated at each checkpoint.
    #[arg(long = "eval-data")]
    pub eval_data: Option<PathBuf>,
    /// CSV file receiving one row per checkpoint.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long = "checks-per-epoch", default_value_t = 10)]
    pub checks_per_epoch: usize,
    /// Write 0 in the seconds column so metrics files are reproducible.
    #[arg(long = "no-timing")]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Examples in libsvm format; labels are ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Output file (default standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "predictions"])))]
pub struct EvalArgs {
    /// Labeled data in libsvm format.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output of `predict`, one line per example.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Task when scoring a predictions file (default class).
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Tube half-width for regression (default: the model's).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(format!("model file: {e}"))
    }
}

impl From<KernelMapError> for CliError {
    fn from(e: KernelMapError) -> Self {
        match e {
            KernelMapError::Degenerate { .. } | KernelMapError::Linalg(_) | KernelMapError::Inconsistent(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::EmptyData => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "asset: {e}");
            e.code()
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path, task: Task) -> Result<Dataset<f64>, CliError> {
    parse_libsvm(open(path)?, task).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Flag checks that need no data.
fn check_train_flags(a: &TrainArgs) -> Result<(), CliError> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(usage(format!("--{name} must be positive, got {v}")))
        }
    };
    positive("sigma", a.sigma)?;
    positive("lambda", a.lambda)?;
    positive("eps-d", a.eps_d)?;
    if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
        return Err(usage(format!("--epsilon must be nonnegative, got {}", a.epsilon)));
    }
    if a.approx == ApproxArg::Nystrom && a.s == 0 {
        return Err(usage("--s must be at least 1"));
    }
    if a.d == Some(0) {
        return Err(usage("--d must be at least 1"));
    }
    if a.iters == Some(0) {
        return Err(usage("--iters must be at least 1"));
    }
    if let Some(e) = a.epochs {
        positive("epochs", e)?;
    }
    if a.nbar == Some(0) {
        return Err(usage("--nbar must be at least 1"));
    }
    if a.checks_per_epoch == 0 {
        return Err(usage("--checks-per-epoch must be at least 1"));
    }
    if a.dg_sample == Some(0) {
        return Err(usage("--dg-sample must be at least 1"));
    }
    if let Some(b) = a.intercept_bound {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(usage(format!("--B must be nonnegative, got {b}")));
        }
    }
    if a.variant == VariantArg::Strong && !a.no_bias {
        return Err(usage("--variant strong requires --no-bias"));
    }
    if a.metrics.is_none() && a.eval_data.is_some() {
        return Err(usage("--eval-data needs --metrics to report into"));
    }
    Ok(())
}

/// Classification error rate or mean ε-insensitive loss.
pub fn error_rate(task: Task, decisions: &[f64], labels: &[f64], epsilon: f64) -> f64 {
    let total: f64 = decisions
        .iter()
        .zip(labels)
        .map(|(&f, &y)| match task {
            Task::Classification => f64::from(classify(f) != y),
            Task::Regression => loss(task, f, y, epsilon),
        })
        .sum();
    total / decisions.len().max(1) as f64
}

/// Iterations at which metrics are recorded: every `max(1, m/checks)`
/// iterations, plus the last one.
pub fn checkpoints(m: usize, checks_per_epoch: usize, iterations: usize) -> Vec<usize> {
    let every = (m / checks_per_epoch).max(1);
    let mut at: Vec<usize> = (1..=iterations / every).map(|k| k * every).collect();
    if at.last() != Some(&iterations) {
        at.push(iterations);
    }
    at
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    check_train_flags(a)?;
    let task = Task::from(a.task);
    let data = read_dataset(&a.data, task)?;
    let eval = match &a.eval_data {
        Some(path) => {
            let e = read_dataset(path, task)?;
            if e.n() > data.n() {
                return Err(CliError::Data(format!(
                    "{}: feature index {} exceeds training dimension {}",
                    path.display(),
                    e.n(),
                    data.n()
                )));
            }
            Some(e)
        }
        None => None,
    };
    let m = data.m();
    let iterations = match (a.iters, a.epochs) {
        (Some(n), _) => n,
        (None, e) => ((e.unwrap_or(10.0) * m as f64).round() as usize).max(1),
    };
    let epsilon = match task {
        Task::Classification => 0.0,
        Task::Regression => a.epsilon,
    };
    let mut params = SolverParams::new(a.lambda, iterations)
        .with_epsilon(epsilon)
        .with_seed(a.seed)
        .with_variant(match a.variant {
            VariantArg::Averaged => Variant::Averaged,
            VariantArg::Strong => Variant::StronglyConvex,
        });
    if let Some(nbar) = a.nbar {
        params = params.with_averaging_start(nbar);
    }
    if let Some(k) = a.dg_sample {
        params = params.with_dg_sample(k);
    }
    let bound = a.intercept_bound.unwrap_or_else(|| default_intercept_bound(data.labels()));
    let region = feasible_region(task, a.lambda, data.labels(), epsilon, bound, !a.no_bias)?;
    params.validate(&region)?;
    if a.approx == ApproxArg::Nystrom && a.s > m {
        return Err(usage(format!("--s {} exceeds the number of training examples {m}", a.s)));
    }

    let kernel = GaussianKernel::new(a.sigma)?;
    let map: FeatureMap<f64> = match a.approx {
        ApproxArg::Nystrom => build_nystrom(&data, kernel, a.s, a.d.unwrap_or(a.s), a.eps_d, a.seed)?.into(),
        ApproxArg::Fourier => build_fourier(data.n().max(1), a.d.unwrap_or(500), kernel, a.seed)?.into(),
    };
    let rows = MappedRows::new(&map, &data);
    let mut asset = Asset::new(&rows, params, region)?;

    let mut metrics = String::new();
    if a.metrics.is_some() {
        metrics.push_str(METRICS_HEADER);
        metrics.push('\n');
        let objective_sample = sample_indices(a.seed, Stream::ObjectiveSample, m, OBJECTIVE_SAMPLE);
        let eval_rows = eval.as_ref().map(|e| MappedRows::new(&map, e));
        let mut elapsed = Duration::ZERO;
        for at in checkpoints(m, a.checks_per_epoch, iterations) {
            let started = Instant::now();
            while asset.state().j < at && asset.step() {}
            elapsed += started.elapsed();
            let sol = asset.solution();
            let objective = objective_pl_sample(&sol.gamma, sol.b, &rows, &objective_sample, a.lambda, epsilon);
            let eval_error = eval_rows.as_ref().map(|er| {
                let decisions: Vec<f64> = (0..er.len()).map(|i| sol.score(er.row(i))).collect();
                error_rate(task, &decisions, er.data().labels(), epsilon)
            });
            let seconds = if a.no_timing { 0.0 } else { elapsed.as_secs_f64() };
            metrics.push_str(&format!(
                "{at},{seconds},{objective},{}\n",
                eval_error.map_or(String::new(), |e| e.to_string())
            ));
        }
    } else {
        asset.run();
    }

    let sol = asset.solution();
    let meta = ModelMeta {
        task,
        include_bias: !a.no_bias,
        lambda: a.lambda,
        epsilon,
        n: match &map {
            FeatureMap::Fourier(f) => f.input_dim(),
            FeatureMap::Nystrom(_) => data.n(),
        },
    };
    let model = Model::from_solution(meta, &map, sol.gamma, sol.b).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut bytes = Vec::new();
    model.save(&mut bytes)?;
    write_file(&a.model, &bytes)?;
    if let Some(path) = &a.metrics {
        write_file(path, metrics.as_bytes())?;
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model<f64>, CliError> {
    Model::load(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Unlabeled examples, checked against the model's input dimension.
fn read_examples(path: &Path, model: &Model<f64>) -> Result<Vec<SparseVector<f64>>, CliError> {
    let records = asset_core::dataio::parse_records::<f64, _>(open(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    records
        .into_iter()
        .map(|r| {
            if r.features.min_dim() > model.n {
                Err(CliError::Data(format!(
                    "{}: line {}: feature index {} exceeds model dimension {}",
                    path.display(),
                    r.line,
                    r.features.min_dim(),
                    model.n
                )))
            } else {
                Ok(r.features)
            }
        })
        .collect()
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let examples = read_examples(&a.data, &model)?;
    let mut text = String::new();
    for x in &examples {
        let f = model.decide(x);
        match model.task {
            Task::Classification => text.push_str(&format!("{f} {}\n", classify(f))),
            Task::Regression => text.push_str(&format!("{f}\n")),
        }
    }
    match &a.output {
        Some(path) => write_file(path, text.as_bytes()),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("standard output: {e}"))),
    }
}

/// Decision values from a predictions file; a second column on a
/// classification line is taken as the label.
fn read_predictions(path: &Path, task: Task) -> Result<Vec<f64>, CliError> {
    let mut decisions = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let parse = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Data(format!("{}: line {}: invalid number {t:?}", path.display(), i + 1)))
        };
        let f = parse(first)?;
        let f = match (task, tokens.next()) {
            (Task::Classification, Some(label)) => parse(label)?,
            _ => f,
        };
        decisions.push(f);
    }
    Ok(decisions)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(e) = a.epsilon {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(usage(format!("--epsilon must be nonnegative, got {e}")));
        }
    }
    let model = a.model.as_deref().map(load_model).transpose()?;
    let task = match (&model, a.task) {
        (Some(m), Some(t)) if m.task != Task::from(t) => {
            return Err(usage(format!("--task {} disagrees with the model's task {}", Task::from(t), m.task)))
        }
        (Some(m), _) => m.task,
        (None, t) => t.map_or(Task::Classification, Task::from),
    };
    let data = read_dataset(&a.data, task)?;
    let decisions = match (&model, &a.predictions) {
        (Some(model), _) => {
            if data.n() > model.n {
                return Err(CliError::Data(format!(
                    "{}: feature index {} exceeds model dimension {}",
                    a.data.display(),
                    data.n(),
                    model.n
                )));
            }
            data.examples().iter().map(|x| model.decide(x)).collect()
        }
        (None, Some(path)) => read_predictions(path, task)?,
        (None, None) => return Err(usage("eval needs --model or --predictions")),
    };
    if decisions.len() != data.m() {
        return Err(CliError::Data(format!(
            "{} predictions for {} labeled examples",
            decisions.len(),
            data.m()
        )));
    }
    let epsilon = a.epsilon.or(model.as_ref().map(|m| m.epsilon)).unwrap_or(0.0);
    let rate = error_rate(task, &decisions, data.labels(), epsilon);
    writeln!(out, "{rate:?}").map_err(|e| CliError::Data(format!("standard output: {e}")))
}
