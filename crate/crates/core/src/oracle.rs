//! Objective evaluators and an exact solver for small problems.
//!
//! [`objective_pl`] scores a linear solution over mapped rows,
//! [`objective_p2`] scores a kernel expansion against the exact Gram matrix,
//! and [`solve_exact`] minimizes the latter to certified accuracy. These are
//! the references the stochastic solver is tested against.

use thiserror::Error;

use crate::dataio::{Dataset, Task};
use crate::kernelmap::{GaussianKernel, MappedRows};
use crate::linalg::DenseMatrix;
use crate::scalar::{dot, Scalar};

/// Largest example count for which the exact Gram matrix is formed.
pub const MAX_EXACT_EXAMPLES: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("exact evaluation needs m <= {MAX_EXACT_EXAMPLES}, got m = {0}")]
    TooLarge(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("no convergence within {iterations} updates (violation {violation:e}, gap {gap:e})")]
    NotConverged {
        iterations: usize,
        violation: f64,
        gap: f64,
    },
    #[error("training set is empty")]
    EmptyData,
}

/// `max{1 − y·f, 0}` or `max{|y − f| − ε, 0}`.
#[inline]
pub fn loss<T: Scalar>(task: Task, score: T, y: T, epsilon: T) -> T {
    match task {
        Task::Classification => (T::one() - y * score).max(T::zero()),
        Task::Regression => ((y - score).abs() - epsilon).max(T::zero()),
    }
}

/// `(λ/2)‖γ‖² + (1/m)Σ ℓ(V_i·γ + b, y_i)` over the mapped rows.
pub fn objective_pl<T: Scalar>(gamma: &[T], b: T, rows: &MappedRows<'_, T>, lambda: T, epsilon: T) -> T {
    let all: Vec<usize> = (0..rows.len()).collect();
    objective_pl_sample(gamma, b, rows, &all, lambda, epsilon)
}

/// [`objective_pl`] with the loss averaged over the listed rows only.
pub fn objective_pl_sample<T: Scalar>(
    gamma: &[T],
    b: T,
    rows: &MappedRows<'_, T>,
    sample: &[usize],
    lambda: T,
    epsilon: T,
) -> T {
    let task = rows.data().task();
    let total: T = sample
        .iter()
        .map(|&i| loss(task, dot(rows.row(i), gamma) + b, rows.label(i), epsilon))
        .sum();
    lambda / T::of(2.0) * dot(gamma, gamma) + total / T::of(sample.len().max(1) as f64)
}

/// Exact Gram matrix `[k(t_i, t_j)]` of a small dataset.
pub fn gram_matrix<T: Scalar>(data: &Dataset<T>, kernel: &GaussianKernel<T>) -> Result<DenseMatrix<T>, OracleError> {
    let m = data.m();
    if m > MAX_EXACT_EXAMPLES {
        return Err(OracleError::TooLarge(m));
    }
    let mut g = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = kernel.eval(data.example(i), data.example(j));
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    Ok(g)
}

/// A small kernel SVM problem with its Gram matrix formed once.
pub struct ExactProblem<'a, T> {
    data: &'a Dataset<T>,
    gram: DenseMatrix<T>,
    lambda: T,
    epsilon: T,
}

impl<'a, T: Scalar> ExactProblem<'a, T> {
    pub fn new(data: &'a Dataset<T>, kernel: &GaussianKernel<T>, lambda: T, epsilon: T) -> Result<Self, OracleError> {
        if data.is_empty() {
            return Err(OracleError::EmptyData);
        }
        if !(lambda > T::zero()) {
            return Err(OracleError::InvalidLambda(lambda.as_f64()));
        }
        Ok(Self {
            data,
            gram: gram_matrix(data, kernel)?,
            lambda,
            epsilon,
        })
    }

    pub fn gram(&self) -> &DenseMatrix<T> {
        &self.gram
    }

    /// `(λ/2)αᵀKα + (1/m)Σ ℓ((Kα)_i + b, y_i)`
    pub fn objective(&self, alpha: &[T], b: T) -> Result<T, OracleError> {
        let m = self.data.m();
        if alpha.len() != m {
            return Err(OracleError::DimensionMismatch {
                expected: m,
                got: alpha.len(),
            });
        }
        let scores = self.gram.mul_vec(alpha);
        Ok(self.objective_from_scores(alpha, &scores, b))
    }

    fn objective_from_scores(&self, alpha: &[T], scores: &[T], b: T) -> T {
        let task = self.data.task();
        let m = T::of(self.data.m() as f64);
        let total: T = scores
            .iter()
            .zip(self.data.labels())
            .map(|(&f, &y)| loss(task, f + b, y, self.epsilon))
            .sum();
        self.lambda / T::of(2.0) * dot(alpha, scores) + total / m
    }

    /// Intercept minimizing the loss for fixed kernel scores. The loss sum
    /// is convex and piecewise linear in `b`, so its minimum is attained at
    /// a breakpoint; ties resolve to the middle of the minimizing interval.
    pub fn best_intercept(&self, scores: &[T]) -> T {
        let task = self.data.task();
        let labels = self.data.labels();
        let mut breakpoints: Vec<T> = Vec::with_capacity(2 * scores.len());
        for (&f, &y) in scores.iter().zip(labels) {
            match task {
                Task::Classification => breakpoints.push(y - f),
                Task::Regression => {
                    breakpoints.push(y - f - self.epsilon);
                    breakpoints.push(y - f + self.epsilon);
                }
            }
        }
        let total = |b: T| -> T {
            scores
                .iter()
                .zip(labels)
                .map(|(&f, &y)| loss(task, f + b, y, self.epsilon))
                .sum()
        };
        let values: Vec<T> = breakpoints.iter().map(|&b| total(b)).collect();
        let best = values.iter().copied().fold(T::infinity(), T::min);
        let slack = T::of(1e-12) * T::one().max(best.abs());
        let (lo, hi) = breakpoints
            .iter()
            .zip(&values)
            .filter(|(_, &v)| v <= best + slack)
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), (&b, _)| (lo.min(b), hi.max(b)));
        (lo + hi) / T::of(2.0)
    }
}

/// `(λ/2)αᵀΨα + (1/m)Σ ℓ(Ψ_i·α + b, y_i)` with the exact Gram matrix `Ψ`.
pub fn objective_p2<T: Scalar>(
    alpha: &[T],
    b: T,
    data: &Dataset<T>,
    kernel: &GaussianKernel<T>,
    lambda: T,
    epsilon: T,
) -> Result<T, OracleError> {
    ExactProblem::new(data, kernel, lambda, epsilon)?.objective(alpha, b)
}

/// Options for [`solve_exact`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactConfig<T> {
    pub lambda: T,
    /// Regression tube half-width; ignored for classification.
    pub epsilon: T,
    pub include_bias: bool,
    /// Budget of coordinate updates.
    pub max_iterations: usize,
}

impl<T: Scalar> ExactConfig<T> {
    pub fn new(lambda: T) -> Self {
        Self {
            lambda,
            epsilon: T::zero(),
            include_bias: true,
            max_iterations: 2_000_000,
        }
    }
}

/// Minimizer of [`objective_p2`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution<T> {
    pub alpha: Vec<T>,
    pub b: T,
    pub objective: T,
    /// Certified bound on `objective − optimum`.
    pub duality_gap: T,
}

/// Stationarity tolerance on the dual directional derivatives.
const DUAL_TOL: f64 = 1e-10;
/// Required relative duality gap at termination.
const GAP_TOL: f64 = 1e-9;

/// Solves the kernel SVM exactly (to a certified duality gap) on a dataset
/// of at most [`MAX_EXACT_EXAMPLES`] examples.
///
/// Works on the dual of `½‖w‖² + C·Σℓ_i` with `C = 1/(λm)` and
/// `w = Σ α_i φ(t_i)`: maximize `Σ(y_i α_i − ε|α_i|) − ½αᵀKα` over the box
/// (`y_i α_i ∈ [0, C]` for hinge, `α_i ∈ [−C, C]` for ε-insensitive), plus
/// `Σα_i = 0` when an intercept is present. Each update moves the most
/// violating coordinate, or pair of coordinates with an intercept, to the
/// exact maximizer along that direction. The intercept is then chosen by
/// exact one-dimensional minimization.
pub fn solve_exact<T: Scalar>(
    data: &Dataset<T>,
    kernel: &GaussianKernel<T>,
    config: &ExactConfig<T>,
) -> Result<ExactSolution<T>, OracleError> {
    let problem = ExactProblem::new(data, kernel, config.lambda, config.epsilon)?;
    let m = data.m();
    let task = data.task();
    let c = T::one() / (config.lambda * T::of(m as f64));
    let eps = match task {
        Task::Classification => T::zero(),
        Task::Regression => config.epsilon,
    };
    let (lower, upper): (Vec<T>, Vec<T>) = data
        .labels()
        .iter()
        .map(|&y| match task {
            Task::Classification if y > T::zero() => (T::zero(), c),
            Task::Classification => (-c, T::zero()),
            Task::Regression => (-c, c),
        })
        .unzip();

    let mut dual = DualState {
        k: problem.gram(),
        y: data.labels(),
        lower: &lower,
        upper: &upper,
        eps,
        alpha: vec![T::zero(); m],
        k_alpha: vec![T::zero(); m],
    };
    let tol = T::of(DUAL_TOL);
    let check_every = 10 * m;
    let mut iterations = 0;
    loop {
        let violation = if config.include_bias {
            dual.pair_step(tol)
        } else {
            dual.single_step(tol)
        };
        iterations += 1;
        let stationary = violation <= tol;
        if stationary || iterations % check_every == 0 || iterations >= config.max_iterations {
            // drop accumulated rounding in Kα before certifying
            dual.refresh();
            let candidate = certify(&problem, &dual, config);
            if candidate.duality_gap <= T::of(GAP_TOL) * T::one().max(candidate.objective.abs()) {
                return Ok(candidate);
            }
            if iterations >= config.max_iterations || (stationary && dual_violation(&dual, config) <= tol) {
                return Err(OracleError::NotConverged {
                    iterations,
                    violation: violation.as_f64(),
                    gap: candidate.duality_gap.as_f64(),
                });
            }
        }
    }
}

fn dual_violation<T: Scalar>(dual: &DualState<'_, T>, config: &ExactConfig<T>) -> T {
    if config.include_bias {
        dual.max_pair_violation()
    } else {
        dual.max_single_violation()
    }
}

/// Primal point induced by the current dual iterate, with its gap.
fn certify<T: Scalar>(problem: &ExactProblem<'_, T>, dual: &DualState<'_, T>, config: &ExactConfig<T>) -> ExactSolution<T> {
    let alpha = dual.alpha.clone();
    let scores = &dual.k_alpha;
    let b = if config.include_bias {
        problem.best_intercept(scores)
    } else {
        T::zero()
    };
    let objective = problem.objective_from_scores(&alpha, scores, b);
    let duality_gap = (objective - config.lambda * dual.value()).max(T::zero());
    ExactSolution {
        alpha,
        b,
        objective,
        duality_gap,
    }
}

struct DualState<'p, T> {
    k: &'p DenseMatrix<T>,
    y: &'p [T],
    lower: &'p [T],
    upper: &'p [T],
    eps: T,
    alpha: Vec<T>,
    k_alpha: Vec<T>,
}

impl<T: Scalar> DualState<'_, T> {
    fn gradient(&self, i: usize) -> T {
        self.y[i] - self.k_alpha[i]
    }

    /// Directional derivative for increasing `α_i`, if room remains.
    fn up(&self, i: usize) -> Option<T> {
        (self.alpha[i] < self.upper[i]).then(|| {
            let sign = if self.alpha[i] >= T::zero() { T::one() } else { -T::one() };
            self.gradient(i) - self.eps * sign
        })
    }

    /// Directional derivative for decreasing `α_i`, if room remains.
    fn down(&self, i: usize) -> Option<T> {
        (self.alpha[i] > self.lower[i]).then(|| {
            let sign = if self.alpha[i] > T::zero() { T::one() } else { -T::one() };
            -self.gradient(i) + self.eps * sign
        })
    }

    fn value(&self) -> T {
        let linear: T = (0..self.alpha.len())
            .map(|i| self.y[i] * self.alpha[i] - self.eps * self.alpha[i].abs())
            .sum();
        linear - dot(&self.alpha, &self.k_alpha) / T::of(2.0)
    }

    fn refresh(&mut self) {
        self.k_alpha = self.k.mul_vec(&self.alpha);
    }

    fn apply(&mut self, i: usize, delta: T) {
        let old = self.alpha[i];
        let new = (old + delta).max(self.lower[i]).min(self.upper[i]);
        self.alpha[i] = new;
        let change = new - old;
        for (r, ka) in self.k_alpha.iter_mut().enumerate() {
            *ka += change * self.k.get(r, i);
        }
    }

    fn best_up(&self, skip: Option<usize>) -> Option<(usize, T)> {
        (0..self.alpha.len())
            .filter(|&i| Some(i) != skip)
            .filter_map(|i| self.up(i).map(|v| (i, v)))
            .fold(None, |best, cand| match best {
                Some((_, v)) if v >= cand.1 => best,
                _ => Some(cand),
            })
    }

    fn best_down(&self, skip: Option<usize>) -> Option<(usize, T)> {
        (0..self.alpha.len())
            .filter(|&i| Some(i) != skip)
            .filter_map(|i| self.down(i).map(|v| (i, v)))
            .fold(None, |best, cand| match best {
                Some((_, v)) if v >= cand.1 => best,
                _ => Some(cand),
            })
    }

    fn max_single_violation(&self) -> T {
        let up = self.best_up(None).map_or(T::neg_infinity(), |(_, v)| v);
        let down = self.best_down(None).map_or(T::neg_infinity(), |(_, v)| v);
        up.max(down).max(T::zero())
    }

    fn max_pair_violation(&self) -> T {
        self.select_pair().map_or(T::zero(), |(_, _, v)| v.max(T::zero()))
    }

    fn select_pair(&self) -> Option<(usize, usize, T)> {
        let (i, up) = self.best_up(None)?;
        let (j, down) = self.best_down(Some(i))?;
        // the best partner for j might beat i as well
        let (i2, up2) = self.best_up(Some(j)).unwrap_or((i, up));
        let ((i, up), (j, down)) = if up2 + down > up + down { ((i2, up2), (j, down)) } else { ((i, up), (j, down)) };
        Some((i, j, up + down))
    }

    /// Moves the best single coordinate; returns the violation before the move.
    fn single_step(&mut self, tol: T) -> T {
        let up = self.best_up(None);
        let down = self.best_down(None);
        let (i, dir, viol) = match (up, down) {
            (Some((_, u)), Some((j, d))) if d > u => (j, -T::one(), d),
            (Some((i, u)), _) => (i, T::one(), u),
            (None, Some((j, d))) => (j, -T::one(), d),
            (None, None) => return T::zero(),
        };
        if viol <= tol {
            return viol;
        }
        let room = if dir > T::zero() {
            self.upper[i] - self.alpha[i]
        } else {
            self.alpha[i] - self.lower[i]
        };
        let a = self.alpha[i];
        let g = self.gradient(i);
        let q = self.k.get(i, i);
        let eps = self.eps;
        // φ(δ) = dir·δ·g − ε(|a + dir·δ| − |a|) − ½qδ²
        let phi = |d: T| dir * d * g - eps * ((a + dir * d).abs() - a.abs()) - q * d * d / T::of(2.0);
        let kinks = [-dir * a];
        let slope = |mid: T| dir * g - eps * dir * sign(a + dir * mid);
        let delta = maximize_piecewise(room, &kinks, q, slope, phi);
        self.apply(i, dir * delta);
        viol
    }

    /// Moves the most violating pair `α_i += δ`, `α_j −= δ`; returns the
    /// violation before the move.
    fn pair_step(&mut self, tol: T) -> T {
        let Some((i, j, viol)) = self.select_pair() else {
            return T::zero();
        };
        if viol <= tol {
            return viol;
        }
        let room = (self.upper[i] - self.alpha[i]).min(self.alpha[j] - self.lower[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let gdiff = self.gradient(i) - self.gradient(j);
        let q = self.k.get(i, i) + self.k.get(j, j) - T::of(2.0) * self.k.get(i, j);
        let eps = self.eps;
        let phi = |d: T| {
            d * gdiff - eps * ((ai + d).abs() - ai.abs()) - eps * ((aj - d).abs() - aj.abs()) - q * d * d / T::of(2.0)
        };
        let kinks = [-ai, aj];
        let slope = |mid: T| gdiff - eps * sign(ai + mid) + eps * sign(aj - mid);
        let delta = maximize_piecewise(room, &kinks, q, slope, phi);
        if delta > T::zero() {
            self.apply(i, delta);
            self.apply(j, -delta);
        }
        viol
    }
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Maximizes a concave function on `[0, room]` that is quadratic with
/// curvature `−q` between the given kinks. `slope(mid)` is the derivative
/// at 0 of the quadratic piece containing `mid`.
fn maximize_piecewise<T: Scalar>(
    room: T,
    kinks: &[T],
    q: T,
    slope: impl Fn(T) -> T,
    phi: impl Fn(T) -> T,
) -> T {
    let mut points: Vec<T> = kinks.iter().copied().filter(|&k| k > T::zero() && k < room).collect();
    points.push(T::zero());
    points.push(room);
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut best = (T::zero(), T::zero());
    for seg in points.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let mid = (lo + hi) / T::of(2.0);
        let s = slope(mid);
        let cand = if q > T::zero() {
            (s / q).max(lo).min(hi)
        } else if s > T::zero() {
            hi
        } else {
            lo
        };
        for d in [cand, lo, hi] {
            let v = phi(d);
            if v > best.1 {
                best = (d, v);
            }
        }
    }
    best.0
}
