//! Projected stochastic subgradient training over mapped rows.
//!
//! Each iteration draws one example uniformly (with replacement), takes a
//! subgradient step on `(λ/2)‖γ‖² + ℓ(row·γ + b)` and projects back onto the
//! feasible region `{‖γ‖ ≤ r} × [−B, B]`. The averaged variant uses steps
//! `D_X/(D_G·√j)` and reports the step-weighted mean of iterates `N̄..N`; the
//! strongly convex variant drops the intercept, uses `1/(λj)` and reports
//! the last iterate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataio::Task;
use crate::kernelmap::MappedRows;
use crate::linalg::{clamp_interval, project_ball_in_place};
use crate::rng::{stream_rng, Stream};
use crate::scalar::{axpy, dot, norm_sq, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    /// `ε ≥ ‖y‖_∞`: every label sits inside the tube, so `(γ, b) = (0, 0)`
    /// is optimal and there is nothing to train.
    #[error("epsilon {epsilon} >= max |y| = {max_abs_label}; the zero model is optimal")]
    TrivialSolution { epsilon: f64, max_abs_label: f64 },
    #[error("training set is empty")]
    EmptyData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `D_X/(D_G√j)` steps with iterate averaging; intercept optional.
    Averaged,
    /// `1/(λj)` steps, last iterate, no intercept.
    StronglyConvex,
}

/// Ball of radius `gamma_radius` on `γ` times `[−B, B]` on `b` (or `{0}`
/// when the intercept is excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleRegion<T> {
    pub gamma_radius: T,
    pub intercept_bound: T,
    pub include_bias: bool,
}

impl<T: Scalar> FeasibleRegion<T> {
    /// `D_X = max ‖x‖` over the region.
    pub fn d_x(&self) -> T {
        if self.include_bias {
            self.gamma_radius.hypot(self.intercept_bound)
        } else {
            self.gamma_radius
        }
    }

    /// Euclidean projection; the product structure lets each block be
    /// projected separately.
    pub fn project(&self, gamma: &mut [T], b: &mut T) {
        project_ball_in_place(gamma, self.gamma_radius);
        *b = if self.include_bias {
            clamp_interval(*b, self.intercept_bound)
        } else {
            T::zero()
        };
    }

    pub fn contains(&self, gamma: &[T], b: T, rel_tol: T) -> bool {
        let slack = T::one() + rel_tol;
        let b_ok = if self.include_bias {
            b.abs() <= self.intercept_bound * slack
        } else {
            b.is_zero()
        };
        norm_sq(gamma).sqrt() <= self.gamma_radius * slack && b_ok
    }
}

/// Default intercept bound `10·max(1, ‖y‖_∞)`.
pub fn default_intercept_bound<T: Scalar>(labels: &[T]) -> T {
    let max_abs = labels.iter().fold(T::zero(), |acc, y| acc.max(y.abs()));
    T::of(10.0) * T::one().max(max_abs)
}

/// Feasible region whose `γ`-ball contains the optimum: radius `1/√λ` for
/// classification and `sqrt(2(‖y‖_∞ − ε)/λ)` for regression.
pub fn feasible_region<T: Scalar>(
    task: Task,
    lambda: T,
    labels: &[T],
    epsilon: T,
    intercept_bound: T,
    include_bias: bool,
) -> Result<FeasibleRegion<T>, SolverError> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(SolverError::InvalidParams(format!("lambda must be positive, got {lambda}")));
    }
    if !(intercept_bound >= T::zero() && intercept_bound.is_finite()) {
        return Err(SolverError::InvalidParams(format!(
            "intercept bound must be nonnegative, got {intercept_bound}"
        )));
    }
    let gamma_radius = match task {
        Task::Classification => lambda.sqrt().recip(),
        Task::Regression => {
            if !(epsilon >= T::zero() && epsilon.is_finite()) {
                return Err(SolverError::InvalidParams(format!(
                    "epsilon must be nonnegative, got {epsilon}"
                )));
            }
            let max_abs = labels.iter().fold(T::zero(), |acc, y| acc.max(y.abs()));
            if epsilon >= max_abs {
                return Err(SolverError::TrivialSolution {
                    epsilon: epsilon.as_f64(),
                    max_abs_label: max_abs.as_f64(),
                });
            }
            (T::of(2.0) * (max_abs - epsilon) / lambda).sqrt()
        }
    };
    Ok(FeasibleRegion {
        gamma_radius,
        intercept_bound,
        include_bias,
    })
}

/// Solver settings; see [`SolverParams::new`] for defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams<T> {
    pub lambda: T,
    /// Total iterations `N`.
    pub iterations: usize,
    /// First averaged iteration `N̄` (1-based).
    pub averaging_start: usize,
    pub variant: Variant,
    /// Examples drawn to estimate `D_G`; `None` means `min(1000, m)`.
    pub dg_sample: Option<usize>,
    /// Regression tube half-width; ignored for classification.
    pub epsilon: T,
    pub seed: u64,
}

impl<T: Scalar> SolverParams<T> {
    /// Averaged variant, averaging over the final 100 iterations.
    pub fn new(lambda: T, iterations: usize) -> Self {
        Self {
            lambda,
            iterations,
            averaging_start: iterations.saturating_sub(100).max(1),
            variant: Variant::Averaged,
            dg_sample: None,
            epsilon: T::zero(),
            seed: 0,
        }
    }

    pub fn with_averaging_start(mut self, start: usize) -> Self {
        self.averaging_start = start;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dg_sample(mut self, m: usize) -> Self {
        self.dg_sample = Some(m);
        self
    }

    pub fn validate(&self, region: &FeasibleRegion<T>) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidParams(msg));
        if !(self.lambda > T::zero() && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.iterations == 0 {
            return bad("iteration count must be positive".into());
        }
        if self.averaging_start == 0 || self.averaging_start > self.iterations {
            return bad(format!(
                "averaging start {} must lie in 1..={}",
                self.averaging_start, self.iterations
            ));
        }
        if self.dg_sample == Some(0) {
            return bad("D_G sample size must be positive".into());
        }
        if !(self.epsilon >= T::zero() && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.variant == Variant::StronglyConvex && region.include_bias {
            return bad("the strongly convex variant requires the intercept to be excluded".into());
        }
        Ok(())
    }
}

/// Step length at iteration `j ≥ 1`.
pub fn steplength<T: Scalar>(j: usize, variant: Variant, d_x: T, d_g: T, lambda: T) -> T {
    debug_assert!(j >= 1);
    let j = T::of(j as f64);
    match variant {
        Variant::Averaged => d_x / (d_g * j.sqrt()),
        Variant::StronglyConvex => (lambda * j).recip(),
    }
}

/// Hinge-loss multiplier `d`: `−y` when `y·score < 1`, else 0.
#[inline]
pub fn hinge_coefficient<T: Scalar>(score: T, y: T) -> T {
    if y * score < T::one() {
        -y
    } else {
        T::zero()
    }
}

/// epsilon-insensitive multiplier `d`: −1 above the tube, +1 below, else 0.
#[inline]
pub fn eps_insensitive_coefficient<T: Scalar>(score: T, y: T, epsilon: T) -> T {
    if y > score + epsilon {
        -T::one()
    } else if y < score - epsilon {
        T::one()
    } else {
        T::zero()
    }
}

/// Loss multiplier for `task` at prediction `score` and label `y`.
#[inline]
pub fn loss_coefficient<T: Scalar>(task: Task, score: T, y: T, epsilon: T) -> T {
    match task {
        Task::Classification => hinge_coefficient(score, y),
        Task::Regression => eps_insensitive_coefficient(score, y, epsilon),
    }
}

fn single_subgradient<T: Scalar>(gamma: &[T], row: &[T], lambda: T, d: T) -> (Vec<T>, T) {
    let mut g: Vec<T> = gamma.iter().map(|&v| lambda * v).collect();
    axpy(d, row, &mut g);
    (g, d)
}

/// Stochastic subgradient `(λγ + d·row, d)` of the hinge-loss term.
pub fn hinge_subgradient<T: Scalar>(gamma: &[T], b: T, row: &[T], y: T, lambda: T) -> (Vec<T>, T) {
    let d = hinge_coefficient(dot(row, gamma) + b, y);
    single_subgradient(gamma, row, lambda, d)
}

/// Stochastic subgradient `(λγ + d·row, d)` of the epsilon-insensitive term.
pub fn eps_insensitive_subgradient<T: Scalar>(
    gamma: &[T],
    b: T,
    row: &[T],
    y: T,
    lambda: T,
    epsilon: T,
) -> (Vec<T>, T) {
    let d = eps_insensitive_coefficient(dot(row, gamma) + b, y, epsilon);
    single_subgradient(gamma, row, lambda, d)
}

/// Subgradient of the full objective `(λ/2)‖γ‖² + (1/m)Σ ℓ_i`, the mean of
/// the per-example terms. The `b` component is 0 without an intercept.
pub fn full_subgradient<T: Scalar>(
    rows: &MappedRows<'_, T>,
    gamma: &[T],
    b: T,
    lambda: T,
    epsilon: T,
    include_bias: bool,
) -> (Vec<T>, T) {
    let task = rows.data().task();
    let m = T::of(rows.len() as f64);
    let mut g = vec![T::zero(); gamma.len()];
    let mut gb = T::zero();
    for i in 0..rows.len() {
        let row = rows.row(i);
        let d = loss_coefficient(task, dot(row, gamma) + b, rows.label(i), epsilon);
        if !d.is_zero() {
            axpy(d / m, row, &mut g);
            gb += d / m;
        }
    }
    axpy(lambda, gamma, &mut g);
    (g, if include_bias { gb } else { T::zero() })
}

/// Root-mean-square subgradient norm estimate used in the step length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientStats<T> {
    pub d_g: T,
    /// Whether the sample estimate was zero and the fallback was used.
    pub fallback: bool,
}

/// Estimates `D_G² ≈ (1/M)Σ d_l²(‖row_l‖² + 1)` at `(γ, b) = (0, 0)` from
/// `M` examples drawn with replacement (the `+1` only with an intercept).
///
/// This is a heuristic scale for the step length, not a proven bound. If
/// every sampled multiplier vanishes, `D_G = √λ·r` is used instead.
pub fn estimate_dg<T: Scalar>(
    rows: &MappedRows<'_, T>,
    region: &FeasibleRegion<T>,
    params: &SolverParams<T>,
) -> Result<GradientStats<T>, SolverError> {
    let m = rows.len();
    if m == 0 {
        return Err(SolverError::EmptyData);
    }
    let samples = params.dg_sample.unwrap_or(m.min(1000));
    if samples == 0 {
        return Err(SolverError::InvalidParams("D_G sample size must be positive".into()));
    }
    let task = rows.data().task();
    let mut rng = stream_rng(params.seed, Stream::GradientSample);
    let bias_term = if region.include_bias { T::one() } else { T::zero() };
    let mut sum = T::zero();
    for _ in 0..samples {
        let i = rng.random_range(0..m as u64) as usize;
        let d = loss_coefficient(task, T::zero(), rows.label(i), params.epsilon);
        if !d.is_zero() {
            sum += d * d * (norm_sq(rows.row(i)) + bias_term);
        }
    }
    let d_g = (sum / T::of(samples as f64)).sqrt();
    if d_g > T::zero() && d_g.is_finite() {
        Ok(GradientStats { d_g, fallback: false })
    } else {
        Ok(GradientStats {
            d_g: params.lambda.sqrt() * region.gamma_radius,
            fallback: true,
        })
    }
}

/// Iterate `(γ^j, b^j)` and the running step-weighted average.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T> {
    /// Completed iterations.
    pub j: usize,
    pub gamma: Vec<T>,
    pub b: T,
    pub avg_gamma: Vec<T>,
    pub avg_b: T,
    /// Sum of the step lengths folded into the average so far.
    pub eta_tilde: T,
}

impl<T: Scalar> SolverState<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            j: 0,
            gamma: vec![T::zero(); dim],
            b: T::zero(),
            avg_gamma: vec![T::zero(); dim],
            avg_b: T::zero(),
            eta_tilde: T::zero(),
        }
    }

    /// One iteration on the given example: step, project, and fold the new
    /// iterate into the average when `j ≥ N̄` (averaged variant only).
    pub fn advance(
        &mut self,
        row: &[T],
        y: T,
        task: Task,
        region: &FeasibleRegion<T>,
        params: &SolverParams<T>,
        stats: &GradientStats<T>,
    ) {
        self.j += 1;
        let eta = steplength(self.j, params.variant, region.d_x(), stats.d_g, params.lambda);
        let score = dot(row, &self.gamma) + self.b;
        let d = loss_coefficient(task, score, y, params.epsilon);

        let shrink = T::one() - eta * params.lambda;
        for g in self.gamma.iter_mut() {
            *g *= shrink;
        }
        if !d.is_zero() {
            axpy(-eta * d, row, &mut self.gamma);
            if region.include_bias {
                self.b -= eta * d;
            }
        }
        region.project(&mut self.gamma, &mut self.b);
        debug_assert!(
            region.contains(&self.gamma, self.b, T::of(1e-6)),
            "iterate left the feasible region at j = {}",
            self.j
        );

        if params.variant == Variant::Averaged && self.j >= params.averaging_start {
            self.accumulate(eta);
        }
    }

    /// Folds the current iterate into the average with weight `eta`.
    pub fn accumulate(&mut self, eta: T) {
        let total = self.eta_tilde + eta;
        let keep = self.eta_tilde / total;
        let take = eta / total;
        for (a, &g) in self.avg_gamma.iter_mut().zip(&self.gamma) {
            *a = keep * *a + take * g;
        }
        self.avg_b = keep * self.avg_b + take * self.b;
        self.eta_tilde = total;
    }
}

/// Linear decision function `row·γ + b` over the mapped features.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub gamma: Vec<T>,
    pub b: T,
}

impl<T: Scalar> Solution<T> {
    pub fn score(&self, row: &[T]) -> T {
        dot(row, &self.gamma) + self.b
    }
}

/// Stepwise driver, for callers that inspect progress between iterations.
pub struct Asset<'r, 'a, T> {
    rows: &'r MappedRows<'a, T>,
    region: FeasibleRegion<T>,
    params: SolverParams<T>,
    stats: GradientStats<T>,
    state: SolverState<T>,
    rng: ChaCha8Rng,
}

impl<'r, 'a, T: Scalar> Asset<'r, 'a, T> {
    pub fn new(
        rows: &'r MappedRows<'a, T>,
        params: SolverParams<T>,
        region: FeasibleRegion<T>,
    ) -> Result<Self, SolverError> {
        params.validate(&region)?;
        if rows.is_empty() {
            return Err(SolverError::EmptyData);
        }
        let stats = estimate_dg(rows, &region, &params)?;
        Ok(Self {
            rows,
            region,
            stats,
            state: SolverState::zeros(rows.dim()),
            rng: stream_rng(params.seed, Stream::SolverDraws),
            params,
        })
    }

    /// Runs one iteration; returns false once `N` iterations are done.
    pub fn step(&mut self) -> bool {
        if self.state.j >= self.params.iterations {
            return false;
        }
        let i = self.rng.random_range(0..self.rows.len() as u64) as usize;
        let task = self.rows.data().task();
        self.state.advance(
            self.rows.row(i),
            self.rows.label(i),
            task,
            &self.region,
            &self.params,
            &self.stats,
        );
        true
    }

    /// Runs until `N` iterations are done.
    pub fn run(&mut self) {
        while self.step() {}
    }

    pub fn state(&self) -> &SolverState<T> {
        &self.state
    }

    pub fn stats(&self) -> &GradientStats<T> {
        &self.stats
    }

    pub fn region(&self) -> &FeasibleRegion<T> {
        &self.region
    }

    pub fn params(&self) -> &SolverParams<T> {
        &self.params
    }

    /// Reported solution at the current iteration: the running average
    /// once it has started, otherwise the current iterate; the last iterate
    /// for the strongly convex variant.
    pub fn solution(&self) -> Solution<T> {
        let s = &self.state;
        match self.params.variant {
            Variant::Averaged if s.eta_tilde > T::zero() => Solution {
                gamma: s.avg_gamma.clone(),
                b: s.avg_b,
            },
            Variant::Averaged => Solution {
                gamma: s.gamma.clone(),
                b: s.b,
            },
            Variant::StronglyConvex => Solution {
                gamma: s.gamma.clone(),
                b: T::zero(),
            },
        }
    }
}

/// Runs all `N` iterations and returns the reported solution.
pub fn asset_train<T: Scalar>(
    rows: &MappedRows<'_, T>,
    params: &SolverParams<T>,
    region: &FeasibleRegion<T>,
) -> Result<Solution<T>, SolverError> {
    let mut asset = Asset::new(rows, params.clone(), *region)?;
    asset.run();
    Ok(asset.solution())
}
