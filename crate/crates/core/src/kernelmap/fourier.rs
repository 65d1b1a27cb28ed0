use rand::Rng;
use rand_distr::StandardNormal;

use super::{GaussianKernel, KernelMapError};
use crate::dataio::SparseVector;
use crate::instrument;
use crate::linalg::DenseMatrix;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

/// Random Fourier feature map `x ↦ sqrt(2/d)·[cos(ν_kᵀx + ω_k)]_k`.
///
/// For `k(s,t) = exp(−σ‖s−t‖²)` the frequencies `ν_k` are Gaussian with
/// per-coordinate variance `2σ` and the phases `ω_k` uniform on `[0, 2π)`,
/// so that `E[φ(s)ᵀφ(t)] = k(s,t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMap<T> {
    kernel: GaussianKernel<T>,
    /// `d × n`, one frequency per row.
    frequencies: DenseMatrix<T>,
    offsets: Vec<T>,
}

/// Draws a `d`-dimensional map over inputs in `R^n`.
///
/// Frequencies and phases are drawn feature by feature, so a map with a
/// larger `d` under the same seed extends a smaller one.
pub fn build_fourier<T: Scalar>(
    n: usize,
    d: usize,
    kernel: GaussianKernel<T>,
    seed: u64,
) -> Result<FourierMap<T>, KernelMapError> {
    if n == 0 || d == 0 {
        return Err(KernelMapError::InvalidDimension(format!(
            "need n >= 1 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let mut rng = stream_rng(seed, Stream::FourierFeatures);
    let std_dev = (2.0 * kernel.sigma().as_f64()).sqrt();
    let mut freqs = Vec::with_capacity(d * n);
    let mut offsets = Vec::with_capacity(d);
    for _ in 0..d {
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            freqs.push(T::of(z * std_dev));
        }
        let u: f64 = rng.random();
        offsets.push(wrap_phase(T::of(u * std::f64::consts::TAU)));
    }
    Ok(FourierMap {
        kernel,
        frequencies: DenseMatrix::from_row_major(d, n, freqs),
        offsets,
    })
}

/// `u·2π` can round up to `2π` itself; map that back to 0.
fn wrap_phase<T: Scalar>(w: T) -> T {
    if w >= T::TAU() {
        T::zero()
    } else {
        w
    }
}

impl<T: Scalar> FourierMap<T> {
    /// Reassembles a map from stored parts, e.g. a model file.
    pub fn from_parts(
        kernel: GaussianKernel<T>,
        frequencies: DenseMatrix<T>,
        offsets: Vec<T>,
    ) -> Result<Self, KernelMapError> {
        if frequencies.rows() != offsets.len() || offsets.is_empty() || frequencies.cols() == 0 {
            return Err(KernelMapError::Inconsistent(format!(
                "{}x{} frequencies with {} offsets",
                frequencies.rows(),
                frequencies.cols(),
                offsets.len()
            )));
        }
        if frequencies.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(KernelMapError::Inconsistent("non-finite frequency".into()));
        }
        if offsets.iter().any(|&w| !(w >= T::zero() && w < T::TAU())) {
            return Err(KernelMapError::Inconsistent("phase offset outside [0, 2pi)".into()));
        }
        Ok(Self {
            kernel,
            frequencies,
            offsets,
        })
    }

    pub fn kernel(&self) -> GaussianKernel<T> {
        self.kernel
    }

    /// Feature count `d`.
    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    /// Input dimension `n`.
    pub fn input_dim(&self) -> usize {
        self.frequencies.cols()
    }

    pub fn frequencies(&self) -> &DenseMatrix<T> {
        &self.frequencies
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    /// Mapped row of `x`: exactly `d` cosine evaluations. Features with an
    /// index of `n` or more are ignored.
    pub fn map(&self, x: &SparseVector<T>) -> Vec<T> {
        let scale = (T::of(2.0) / T::of(self.dim() as f64)).sqrt();
        instrument::add_cosine(self.dim() as u64);
        self.offsets
            .iter()
            .enumerate()
            .map(|(k, &w)| scale * (x.dot_dense(self.frequencies.row(k)) + w).cos())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pairs(count: usize, n: usize, seed: u64) -> Vec<(SparseVector<f64>, SparseVector<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut point = || {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            SparseVector::from_dense(&v).unwrap()
        };
        (0..count).map(|_| (point(), point())).collect()
    }

    #[test]
    fn frequency_variance_matches_kernel_width() {
        let kernel = GaussianKernel::new(0.5).unwrap();
        let map = build_fourier::<f64>(1, 100_000, kernel, 3).unwrap();
        let f = map.frequencies().as_slice();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (f.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.03, "sample variance {var}");
    }

    #[test]
    fn seeded_and_in_range() {
        let kernel = GaussianKernel::new(1.3).unwrap();
        let a = build_fourier::<f64>(4, 500, kernel, 11).unwrap();
        let b = build_fourier::<f64>(4, 500, kernel, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.offsets().iter().all(|&w| (0.0..std::f64::consts::TAU).contains(&w)));
        let longer = build_fourier::<f64>(4, 800, kernel, 11).unwrap();
        assert_eq!(&longer.offsets()[..500], a.offsets());
        assert_ne!(build_fourier::<f64>(4, 500, kernel, 12).unwrap(), a);
        assert_eq!(wrap_phase(std::f64::consts::TAU), 0.0);
    }

    #[test]
    fn zero_frequency_gives_constant_feature() {
        let kernel = GaussianKernel::new(1.0).unwrap();
        let map = FourierMap::from_parts(kernel, DenseMatrix::zeros(1, 3), vec![0.0]).unwrap();
        for x in [vec![0.0, 0.0, 0.0], vec![1.0, -2.0, 3.0]] {
            let row = map.map(&SparseVector::from_dense(&x).unwrap());
            assert!((row[0] - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_are_bounded_and_counted() {
        let kernel = GaussianKernel::new(0.5).unwrap();
        let map = build_fourier::<f64>(5, 64, kernel, 0).unwrap();
        for (s, _) in random_pairs(50, 5, 1) {
            crate::instrument::reset();
            let row = map.map(&s);
            assert_eq!(crate::instrument::cosine_evaluations(), 64);
            assert!(dot(&row, &row) <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn from_parts_validates() {
        let kernel = GaussianKernel::new(1.0).unwrap();
        assert!(FourierMap::from_parts(kernel, DenseMatrix::zeros(2, 3), vec![0.0]).is_err());
        assert!(FourierMap::from_parts(kernel, DenseMatrix::zeros(1, 3), vec![7.0]).is_err());
        assert!(FourierMap::from_parts(kernel, DenseMatrix::zeros(1, 3), vec![-0.1]).is_err());
        assert!(build_fourier::<f64>(0, 3, kernel, 0).is_err());
        assert!(build_fourier::<f64>(3, 0, kernel, 0).is_err());
    }

    #[test]
    fn inner_products_are_unbiased() {
        // Mean over 50 independent maps against the exact kernel; the
        // standard error comes from the spread across maps.
        let kernel = GaussianKernel::new(0.5).unwrap();
        let pairs = random_pairs(100, 5, 21);
        let maps = 50;
        let mut estimates = vec![Vec::with_capacity(maps); pairs.len()];
        for seed in 0..maps as u64 {
            let map = build_fourier::<f64>(5, 4096, kernel, 1000 + seed).unwrap();
            for (est, (s, t)) in estimates.iter_mut().zip(&pairs) {
                est.push(dot(&map.map(s), &map.map(t)));
            }
        }
        let mut within = 0;
        for (est, (s, t)) in estimates.iter().zip(&pairs) {
            let mean = est.iter().sum::<f64>() / maps as f64;
            let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (maps - 1) as f64;
            let se = (var / maps as f64).sqrt();
            if (mean - kernel.eval(s, t)).abs() <= 3.0 * se {
                within += 1;
            }
        }
        assert!(within >= 95, "{within} of 100 pairs within 3 standard errors");
    }

    #[test]
    fn error_shrinks_with_dimension() {
        let kernel = GaussianKernel::new(0.5).unwrap();
        let pairs = random_pairs(200, 5, 4);
        let median_err = |d: usize| {
            let map = build_fourier::<f64>(5, d, kernel, 99).unwrap();
            let mut errs: Vec<f64> = pairs
                .iter()
                .map(|(s, t)| (dot(&map.map(s), &map.map(t)) - kernel.eval(s, t)).abs())
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[errs.len() / 2]
        };
        let errs: Vec<f64> = (6..=12).map(|p| median_err(1 << p)).collect();
        // expected ratio per doubling is 1/sqrt(2); allow sampling noise
        for w in errs.windows(2) {
            assert!(w[1] <= 1.2 * w[0], "{errs:?}");
        }
        assert!(errs[6] <= 0.3 * errs[0], "{errs:?}");
    }
}
