//! Kernel SVM on precomputed Gram matrices: a binary SMO solver and
//! one-vs-one multiclass voting on top of it.

mod multiclass;
mod smo;

pub use multiclass::{accuracy, train_multiclass, MulticlassModel, PairAccuracy, PairModel};
pub use smo::{dual_objective, train_binary, SvmModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    /// Stopping tolerance on the dual optimality gap.
    pub kkt_tol: f64,
    /// Iteration budget, in units of the training-set size.
    pub max_passes: usize,
    /// Threshold below which a dual coefficient counts as zero.
    pub eps: f64,
    /// Seeds the partner choice in SMO; each class pair derives its own stream.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            kkt_tol: 1e-3,
            max_passes: 1000,
            eps: 1e-12,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Parameter(format!("svm C must be positive, got {}", self.c)));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "svm kkt_tol must be positive, got {}",
                self.kkt_tol
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Parameter(format!("svm eps must be non-negative, got {}", self.eps)));
        }
        Ok(())
    }
}
