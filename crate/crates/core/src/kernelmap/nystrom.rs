use super::{GaussianKernel, KernelMapError};
use crate::dataio::{Dataset, SparseVector};
use crate::linalg::{sym_eig, DenseMatrix, SymmetricMatrix};
use crate::rng::{sample_indices, Stream};
use crate::scalar::Scalar;

/// Default absolute eigenvalue cutoff.
pub const DEFAULT_EPS_D: f64 = 1e-16;

/// Nyström feature map built from `s` sampled landmark points.
///
/// With `K_SS = Q·D·Qᵀ` the kernel block on the sample, a point `x` maps to
/// `[k(x, t_j)]_{j∈S} · Q_{·,1..d̄} · D_{1..d̄}^{-1/2}`, where `d̄` counts the
/// eigenvalues at or above `eps_d` (at most `d`).
#[derive(Debug, Clone, PartialEq)]
pub struct NystromMap<T> {
    kernel: GaussianKernel<T>,
    sample_points: Vec<SparseVector<T>>,
    sample_indices: Vec<usize>,
    basis: DenseMatrix<T>,
    eigvals: Vec<T>,
    inv_sqrt_eigs: Vec<T>,
    eps_d: T,
}

/// Samples `s` of the `m` examples uniformly without replacement and
/// factorizes their kernel block, keeping at most `d` eigenpairs.
pub fn build_nystrom<T: Scalar>(
    data: &Dataset<T>,
    kernel: GaussianKernel<T>,
    s: usize,
    d: usize,
    eps_d: T,
    seed: u64,
) -> Result<NystromMap<T>, KernelMapError> {
    let m = data.m();
    if s > m {
        return Err(KernelMapError::SampleTooLarge { s, m });
    }
    if d == 0 || d > s {
        return Err(KernelMapError::InvalidDimension(format!(
            "need 0 < d <= s, got d = {d}, s = {s}"
        )));
    }
    if !(eps_d > T::zero()) {
        return Err(KernelMapError::InvalidThreshold(eps_d.as_f64()));
    }

    let sample_indices = sample_indices(seed, Stream::NystromSample, m, s);
    let sample_points: Vec<_> = sample_indices.iter().map(|&i| data.example(i).clone()).collect();

    let block = SymmetricMatrix::from_fn(s, |r, c| kernel.eval(&sample_points[r], &sample_points[c]))?;
    let eig = sym_eig(&block)?;
    let kept = eig.eigvals.iter().take(d).take_while(|&&v| v >= eps_d).count();
    if kept == 0 {
        return Err(KernelMapError::Degenerate {
            eps_d: eps_d.as_f64(),
            largest: eig.eigvals.first().map_or(0.0, |v| v.as_f64()),
        });
    }
    let eigvals: Vec<T> = eig.eigvals[..kept].to_vec();
    Ok(NystromMap {
        kernel,
        sample_points,
        sample_indices,
        basis: eig.q.leading_columns(kept),
        inv_sqrt_eigs: eigvals.iter().map(|v| v.sqrt().recip()).collect(),
        eigvals,
        eps_d,
    })
}

impl<T: Scalar> NystromMap<T> {
    pub fn kernel(&self) -> GaussianKernel<T> {
        self.kernel
    }

    /// Effective dimension `d̄`.
    pub fn dim(&self) -> usize {
        self.inv_sqrt_eigs.len()
    }

    /// Sample size `s`.
    pub fn sample_size(&self) -> usize {
        self.sample_points.len()
    }

    pub fn sample_points(&self) -> &[SparseVector<T>] {
        &self.sample_points
    }

    /// Dataset indices of the sample, ascending.
    pub fn sample_indices(&self) -> &[usize] {
        &self.sample_indices
    }

    /// Leading `d̄` eigenvectors of the sample block, as an `s × d̄` matrix.
    pub fn basis(&self) -> &DenseMatrix<T> {
        &self.basis
    }

    /// Retained eigenvalues, nonincreasing.
    pub fn eigvals(&self) -> &[T] {
        &self.eigvals
    }

    pub fn inv_sqrt_eigs(&self) -> &[T] {
        &self.inv_sqrt_eigs
    }

    pub fn eps_d(&self) -> T {
        self.eps_d
    }

    /// `[k(x, t_j)]_{j∈S}`: exactly `s` kernel evaluations.
    pub fn kernel_column(&self, x: &SparseVector<T>) -> Vec<T> {
        self.sample_points.iter().map(|t| self.kernel.eval(x, t)).collect()
    }

    /// Mapped row of `x`, length `d̄`.
    pub fn row(&self, x: &SparseVector<T>) -> Vec<T> {
        let mut row = self.basis.vec_mul(&self.kernel_column(x));
        for (v, &w) in row.iter_mut().zip(&self.inv_sqrt_eigs) {
            *v *= w;
        }
        row
    }
}
