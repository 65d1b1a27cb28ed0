#![allow(dead_code)]

use std::path::Path;

use asset_core::{write_libsvm, Dataset, SparseVector, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Two interleaved half circles with Gaussian jitter; the upper moon is +1.
pub fn two_moons(m: usize, noise: f64, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).unwrap();
    let mut examples = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let upper = i % 2 == 0;
        let (x, y) = if upper { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        let p = [x + jitter.sample(&mut rng), y + jitter.sample(&mut rng)];
        examples.push(SparseVector::from_dense(&p).unwrap());
        labels.push(if upper { 1.0 } else { -1.0 });
    }
    Dataset::new(examples, labels, Task::Classification, Some(2)).unwrap()
}

/// `y = sin(x) + noise` with `x` uniform on `[0, 2π)`.
pub fn sinusoid(m: usize, noise: f64, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).unwrap();
    let mut examples = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x = rng.random_range(0.0..std::f64::consts::TAU);
        examples.push(SparseVector::from_dense(&[x]).unwrap());
        labels.push(x.sin() + jitter.sample(&mut rng));
    }
    Dataset::new(examples, labels, Task::Regression, Some(1)).unwrap()
}

/// Gaussian points labeled by a random hyperplane, with 10% label flips.
pub fn planted(m: usize, n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let w: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let mut examples = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let flip = rng.random_bool(0.1);
        labels.push(if (score >= 0.0) != flip { 1.0 } else { -1.0 });
        examples.push(SparseVector::from_dense(&x).unwrap());
    }
    Dataset::new(examples, labels, Task::Classification, Some(n)).unwrap()
}

pub fn save(data: &Dataset<f64>, path: &Path) {
    write_libsvm(data, std::fs::File::create(path).unwrap()).unwrap();
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn asset(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("asset").chain(args.iter().copied());
    let code = asset_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
