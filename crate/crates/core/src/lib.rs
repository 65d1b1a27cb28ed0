//! # asset-core
//!
//! Nonlinear (Gaussian-kernel) support vector machines trained as linear
//! SVMs over a low-dimensional approximate feature map, using an averaged
//! projected stochastic subgradient method.
//!
//! - [`kernelmap`] builds the feature map: Nyström sampling of the kernel
//!   matrix or random Fourier features.
//! - [`solver`] runs the stochastic subgradient iteration over the mapped
//!   rows, in the averaged form (intercept allowed) or the strongly convex
//!   form (no intercept, `1/(λj)` steps).
//! - [`model`] turns a solution into a decision function whose cost does not
//!   depend on the number of support vectors, and reads/writes model files.
//! - [`oracle`] holds exact small-scale solvers and objective evaluators
//!   used to check the above.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common double-precision case.

pub mod dataio;
pub mod instrument;
pub mod kernelmap;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use dataio::{parse_libsvm, split, write_libsvm, DataError, Dataset, SparseVector, Task};
pub use kernelmap::{build_fourier, build_nystrom, FeatureMap, FourierMap, GaussianKernel, KernelMapError, MappedRows, NystromMap};
pub use model::{classify, recover_alpha, Approx, Model, ModelError, ModelMeta, NystromRecovery, Payload};
pub use oracle::{objective_p2, objective_pl, objective_pl_sample, solve_exact, ExactConfig, ExactSolution, OracleError};
pub use scalar::Scalar;
pub use solver::{asset_train, feasible_region, Asset, FeasibleRegion, Solution, SolverError, SolverParams, Variant};

pub type Dataset64 = Dataset<f64>;
pub type SparseVector64 = SparseVector<f64>;
pub type FeatureMap64 = FeatureMap<f64>;
pub type NystromMap64 = NystromMap<f64>;
pub type FourierMap64 = FourierMap<f64>;
pub type SolverParams64 = SolverParams<f64>;
pub type Solution64 = Solution<f64>;
pub type Model64 = Model<f64>;
