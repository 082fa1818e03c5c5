//! # kf-core
//!
//! Evolves non-linear combinations of precomputed base kernels with genetic
//! programming. A chromosome is an expression tree over the base Gram
//! matrices `K1..Kn` with entrywise `+` and `*` as internal nodes; its
//! fitness is the accuracy of a one-vs-one SVM trained on the combined
//! kernel.
//!
//! Modules, bottom-up:
//!
//! - [`kernel`]: Gram matrices, Gaussian base kernels, kernel algebra, PSD check.
//! - [`expr`]: expression trees, prefix text form, evaluation over a [`KernelBank`].
//! - [`svm`]: SMO solver on precomputed kernels and one-vs-one voting.
//! - [`gp`]: tree generation, variation operators, fitness and the evolution loop.
//! - [`harness`]: repeated stratified splits and the addition / best-single /
//!   evolved comparison.
//! - [`retrieval`]: similarity index over a combined kernel and top-k queries.
//! - [`synthetic`]: generated multi-view datasets.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} != {b} (tol {})", $tol);
    }};
}

pub mod error;
pub mod expr;
pub mod gp;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod matrix;
pub mod retrieval;
pub mod seed;
pub mod svm;
pub mod synthetic;

/// Integer class id as it appears in the feature files.
pub type Label = i64;

pub use error::{Error, Result};
pub use expr::{KernelExpr, Op};
pub use gp::{evolve, fitness, EvolutionResult, FitnessMode, GpParams};
pub use harness::{
    addition_kernel, best_single_kernel, make_splits, run_comparison, summarize,
    ComparisonReport, DatasetSplit, ProtocolConfig, SplitProtocol,
};
pub use kernel::{
    add, check_psd, gaussian_bank, gaussian_gram, median_heuristic_gamma, multiply, normalize,
    slice, FeatureMatrix, GramMatrix, KernelBank, PSD_TOL,
};
pub use retrieval::{build_index, QueryOrder, SimilarityIndex};
pub use matrix::Matrix;
pub use svm::{accuracy, train_binary, train_multiclass, MulticlassModel, SvmModel, SvmParams};
