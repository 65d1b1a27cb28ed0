//! Gaussian kernel and its two low-dimensional feature maps.
//!
//! Both maps turn an input point into a dense row of length `dim()` whose
//! inner products approximate kernel values, so the SVM over kernel
//! expansions becomes a linear SVM over these rows.

mod fourier;
mod nystrom;

use std::sync::OnceLock;

use thiserror::Error;

use crate::dataio::{Dataset, SparseVector};
use crate::instrument;
use crate::linalg::LinalgError;
use crate::scalar::Scalar;

pub use fourier::{build_fourier, FourierMap};
pub use nystrom::{build_nystrom, NystromMap, DEFAULT_EPS_D};

#[derive(Debug, Error)]
pub enum KernelMapError {
    #[error("kernel width sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("sample size s = {s} exceeds the number of examples m = {m}")]
    SampleTooLarge { s: usize, m: usize },
    #[error("every eigenvalue of the sampled kernel block is below eps_d = {eps_d} (largest {largest})")]
    Degenerate { eps_d: f64, largest: f64 },
    #[error("eigenvalue threshold eps_d must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("inconsistent map: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `k(s, t) = exp(−σ‖s − t‖²)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel<T> {
    sigma: T,
}

impl<T: Scalar> GaussianKernel<T> {
    pub fn new(sigma: T) -> Result<Self, KernelMapError> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(KernelMapError::InvalidSigma(sigma.as_f64()));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    #[inline]
    pub fn eval(&self, s: &SparseVector<T>, t: &SparseVector<T>) -> T {
        instrument::add_kernel(1);
        (-self.sigma * s.squared_distance(t)).exp()
    }
}

/// Either approximate feature map.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap<T> {
    Nystrom(NystromMap<T>),
    Fourier(FourierMap<T>),
}

impl<T: Scalar> FeatureMap<T> {
    /// Length of every mapped row (`d̄` for Nyström, `d` for Fourier).
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Nystrom(m) => m.dim(),
            FeatureMap::Fourier(m) => m.dim(),
        }
    }

    pub fn map_point(&self, x: &SparseVector<T>) -> Vec<T> {
        match self {
            FeatureMap::Nystrom(m) => m.row(x),
            FeatureMap::Fourier(m) => m.map(x),
        }
    }

    pub fn kernel(&self) -> GaussianKernel<T> {
        match self {
            FeatureMap::Nystrom(m) => m.kernel(),
            FeatureMap::Fourier(m) => m.kernel(),
        }
    }
}

impl<T> From<NystromMap<T>> for FeatureMap<T> {
    fn from(m: NystromMap<T>) -> Self {
        FeatureMap::Nystrom(m)
    }
}

impl<T> From<FourierMap<T>> for FeatureMap<T> {
    fn from(m: FourierMap<T>) -> Self {
        FeatureMap::Fourier(m)
    }
}

/// Mapped rows of a dataset, computed on first access and cached.
///
/// Concurrent readers may race to fill the same row; one computation wins
/// and every reader observes a complete row.
pub struct MappedRows<'a, T> {
    map: &'a FeatureMap<T>,
    data: &'a Dataset<T>,
    cache: Vec<OnceLock<Box<[T]>>>,
}

impl<'a, T: Scalar> MappedRows<'a, T> {
    pub fn new(map: &'a FeatureMap<T>, data: &'a Dataset<T>) -> Self {
        Self {
            map,
            data,
            cache: (0..data.m()).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Mapped row of example `i`.
    pub fn row(&self, i: usize) -> &[T] {
        self.cache[i].get_or_init(|| self.map.map_point(self.data.example(i)).into_boxed_slice())
    }

    pub fn label(&self, i: usize) -> T {
        self.data.label(i)
    }

    pub fn len(&self) -> usize {
        self.data.m()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn map(&self) -> &'a FeatureMap<T> {
        self.map
    }

    pub fn data(&self) -> &'a Dataset<T> {
        self.data
    }

    /// Number of rows filled so far.
    pub fn cached(&self) -> usize {
        self.cache.iter().filter(|c| c.get().is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(dense: &[f64]) -> SparseVector<f64> {
        SparseVector::from_dense(dense).unwrap()
    }

    #[test]
    fn kernel_closed_forms() {
        let k = GaussianKernel::new(1.0).unwrap();
        assert_eq!(k.eval(&sv(&[1.0, 2.0]), &sv(&[1.0, 2.0])), 1.0);
        let v = k.eval(&sv(&[0.0, 0.0]), &sv(&[1.0, 0.0]));
        assert!((v - 0.3678794412).abs() < 1e-10);
        let k = GaussianKernel::new(0.5).unwrap();
        let v = k.eval(&sv(&[1.0, 2.0]), &sv(&[3.0, 4.0]));
        assert!((v - 0.0183156389).abs() < 1e-10);
        assert!(GaussianKernel::new(0.0).is_err());
        assert!(GaussianKernel::new(f64::NAN).is_err());
    }

    #[test]
    fn rows_are_cached_once() {
        let data = Dataset::new(
            vec![sv(&[1.0]), sv(&[2.0]), sv(&[3.0])],
            vec![1.0, -1.0, 1.0],
            crate::Task::Classification,
            None,
        )
        .unwrap();
        let kernel = GaussianKernel::new(1.0).unwrap();
        let map: FeatureMap<f64> = build_nystrom(&data, kernel, 3, 3, 1e-12, 0).unwrap().into();
        let rows = MappedRows::new(&map, &data);
        assert_eq!(rows.cached(), 0);
        let first = rows.row(1).to_vec();
        instrument::reset();
        assert_eq!(rows.row(1), &first[..]);
        assert_eq!(instrument::kernel_evaluations(), 0);
        assert_eq!(rows.cached(), 1);

        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| {
                    for i in 0..3 {
                        assert_eq!(rows.row(i), &map.map_point(data.example(i))[..]);
                    }
                });
            }
        });
        assert_eq!(rows.cached(), 3);
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_psd(a in prop::collection::vec(-3.0..3.0f64, 3),
                                    b in prop::collection::vec(-3.0..3.0f64, 3),
                                    sigma in 0.01..1.0f64) {
            let k = GaussianKernel::new(sigma).unwrap();
            let (s, t) = (sv(&a), sv(&b));
            let kst = k.eval(&s, &t);
            prop_assert_eq!(kst, k.eval(&t, &s));
            prop_assert!(kst > 0.0 && kst <= 1.0);
            let det = k.eval(&s, &s) * k.eval(&t, &t) - kst * kst;
            prop_assert!(det >= -1e-12);
        }
    }
}
