//! Dense symmetric eigendecomposition and the Euclidean projections used by
//! the solver's feasible region.

use thiserror::Error;

use crate::scalar::{norm_sq, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix data has {len} entries, expected {order}x{order}")]
    NotSquare { order: usize, len: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("projection radius must be positive, got {0}")]
    InvalidRadius(f64),
}

/// Cyclic Jacobi sweep budget.
pub const MAX_SWEEPS: usize = 60;
/// Relative off-diagonal Frobenius tolerance for `f64`; scaled up for
/// coarser scalar types.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order, order);
        for i in 0..order {
            m.data[i * order + i] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k <= self.cols);
        let mut out = Self::zeros(self.rows, k);
        for r in 0..self.rows {
            out.data[r * k..(r + 1) * k].copy_from_slice(&self.row(r)[..k]);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `xᵀ·self` for a row vector `x` of length `rows`.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr.is_zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += xr * a;
            }
        }
        out
    }

    /// `self·x` for a column vector `x` of length `cols`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        norm_sq(&self.data).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

/// Square matrix checked for symmetry and finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<T> {
    inner: DenseMatrix<T>,
}

impl<T: Scalar> SymmetricMatrix<T> {
    pub fn new(order: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != order * order {
            return Err(LinalgError::NotSquare {
                order,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let inner = DenseMatrix::from_row_major(order, order, data);
        let tol = symmetry_tol::<T>() * T::one().max(inner.max_abs());
        for r in 0..order {
            for c in r + 1..order {
                if (inner.get(r, c) - inner.get(c, r)).abs() > tol {
                    return Err(LinalgError::NotSymmetric { row: r, col: c });
                }
            }
        }
        Ok(Self { inner })
    }

    /// Builds the matrix from its upper triangle, mirroring each entry.
    pub fn from_fn(order: usize, mut entry: impl FnMut(usize, usize) -> T) -> Result<Self, LinalgError> {
        let mut data = vec![T::zero(); order * order];
        for r in 0..order {
            for c in r..order {
                let v = entry(r, c);
                data[r * order + c] = v;
                data[c * order + r] = v;
            }
        }
        Self::new(order, data)
    }

    pub fn order(&self) -> usize {
        self.inner.rows
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.inner.get(r, c)
    }

    pub fn as_dense(&self) -> &DenseMatrix<T> {
        &self.inner
    }

    pub fn trace(&self) -> T {
        (0..self.order()).map(|i| self.get(i, i)).sum()
    }
}

fn symmetry_tol<T: Scalar>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(4.0))
}

/// `A = Q·diag(eigvals)·Qᵀ` with eigenvalues nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    /// Eigenvectors as columns.
    pub q: DenseMatrix<T>,
    pub eigvals: Vec<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    /// `Q·diag(eigvals)·Qᵀ`
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let s = self.eigvals.len();
        let mut scaled = self.q.clone();
        for r in 0..s {
            for c in 0..s {
                scaled.set(r, c, scaled.get(r, c) * self.eigvals[c]);
            }
        }
        scaled.matmul(&self.q.transpose())
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `OFF_DIAGONAL_TOL·‖A‖_F` (floored at `order·ε` of the scalar type),
/// failing after [`MAX_SWEEPS`]. Equal eigenvalues keep their diagonal
/// order.
pub fn sym_eig<T: Scalar>(matrix: &SymmetricMatrix<T>) -> Result<EigenDecomposition<T>, LinalgError> {
    let n = matrix.order();
    let mut a = matrix.inner.data.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = matrix.inner.frobenius_norm();
    let tol = T::of(OFF_DIAGONAL_TOL).max(T::epsilon() * T::of(n as f64)) * scale;

    let off_norm = |a: &[T]| {
        let mut sum = T::zero();
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    sum += a[r * n + c] * a[r * n + c];
                }
            }
        }
        sum.sqrt()
    };

    let mut converged = false;
    for _ in 0..=MAX_SWEEPS {
        if off_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.is_zero() {
                    continue;
                }
                let (c, s) = rotation(a[p * n + p], a[q * n + q], apq);
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let diag: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep original index order
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite eigenvalues"));
    let eigvals = order.iter().map(|&i| diag[i]).collect();
    let mut q = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            q.set(r, dst, v.get(r, src));
        }
    }
    Ok(EigenDecomposition { q, eigvals })
}

/// Rotation `(c, s)` annihilating the `(p, q)` entry of a symmetric 2x2 block.
fn rotation<T: Scalar>(app: T, aqq: T, apq: T) -> (T, T) {
    let two = T::of(2.0);
    let tau = (aqq - app) / (two * apq);
    let t = if tau.abs() > T::one() / T::epsilon() {
        // tau² would overflow; t ≈ 1/(2τ)
        T::one() / (two * tau)
    } else {
        let t = T::one() / (tau.abs() + (T::one() + tau * tau).sqrt());
        if tau < T::zero() {
            -t
        } else {
            t
        }
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    (c, t * c)
}

/// Euclidean projection onto the ball of radius `radius` centred at 0.
pub fn project_ball<T: Scalar>(v: &[T], radius: T) -> Result<Vec<T>, LinalgError> {
    if !(radius > T::zero()) {
        return Err(LinalgError::InvalidRadius(radius.as_f64()));
    }
    let mut out = v.to_vec();
    project_ball_in_place(&mut out, radius);
    Ok(out)
}

/// In-place [`project_ball`]; `radius` must be positive. Returns whether
/// the vector was rescaled.
#[inline]
pub fn project_ball_in_place<T: Scalar>(v: &mut [T], radius: T) -> bool {
    debug_assert!(radius > T::zero());
    let norm = norm_sq(v).sqrt();
    if norm <= radius {
        return false;
    }
    let scale = radius / norm;
    for x in v.iter_mut() {
        *x *= scale;
    }
    true
}

/// Projection of `b` onto `[-bound, bound]`.
#[inline]
pub fn clamp_interval<T: Scalar>(b: T, bound: T) -> T {
    assert!(bound >= T::zero(), "interval bound must be nonnegative");
    b.max(-bound).min(bound)
}
