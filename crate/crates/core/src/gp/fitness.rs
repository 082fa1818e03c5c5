use std::collections::BTreeSet;

use super::FitnessMode;
use crate::error::{Error, Result};
use crate::expr::KernelExpr;
use crate::harness::DatasetSplit;
use crate::kernel::KernelBank;
use crate::matrix::Matrix;
use crate::svm::{accuracy, train_multiclass, SvmParams};
use crate::Label;

/// Everything a fitness evaluation may see: the bank and labels restricted
/// to the training and validation items. Test items are dropped on
/// construction, so no chromosome can ever be scored against them.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    bank: KernelBank,
    labels: Vec<Label>,
    train: Vec<usize>,
    val: Vec<usize>,
    svm: SvmParams,
    mode: FitnessMode,
}

impl FitnessContext {
    pub fn new(
        bank: &KernelBank,
        labels: &[Label],
        split: &DatasetSplit,
        svm: &SvmParams,
        mode: FitnessMode,
    ) -> Result<Self> {
        svm.validate()?;
        split.validate(labels.len())?;
        if bank.items() != labels.len() {
            return Err(Error::Shape(format!(
                "bank covers {} items but there are {} labels",
                bank.items(),
                labels.len()
            )));
        }
        if split.train_idx.is_empty() {
            return Err(Error::Input("fitness needs a non-empty training set".into()));
        }
        match mode {
            FitnessMode::Validation if split.val_idx.is_empty() => {
                return Err(Error::Input("validation fitness needs validation items".into()))
            }
            FitnessMode::KFold(k) if k < 2 || k > split.train_idx.len() => {
                return Err(Error::Parameter(format!(
                    "k_fold({k}) needs 2 <= k <= {} training items",
                    split.train_idx.len()
                )))
            }
            FitnessMode::LeaveOneOut if split.train_idx.len() < 2 => {
                return Err(Error::Input("leave-one-out needs at least 2 training items".into()))
            }
            _ => {}
        }
        let pool: Vec<usize> = split.train_idx.iter().chain(&split.val_idx).copied().collect();
        let t = split.train_idx.len();
        Ok(Self {
            bank: bank.restrict(&pool)?,
            labels: pool.iter().map(|&i| labels[i]).collect(),
            train: (0..t).collect(),
            val: (t..pool.len()).collect(),
            svm: svm.clone(),
            mode,
        })
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn mode(&self) -> FitnessMode {
        self.mode
    }

    /// Fitness in [0, 1]. Solver failures and non-convergence score 0.
    pub fn evaluate(&self, expr: &KernelExpr) -> f64 {
        match self.try_evaluate(expr) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("fitness of {expr} set to 0: {e}");
                0.0
            }
        }
    }

    pub fn try_evaluate(&self, expr: &KernelExpr) -> Result<f64> {
        let gram = expr.evaluate(&self.bank)?;
        let gram = gram.as_matrix();
        match self.mode {
            FitnessMode::Validation => self.holdout(gram, &self.train, &self.val),
            FitnessMode::KFold(k) => self.cross_validate(gram, k),
            FitnessMode::LeaveOneOut => self.cross_validate(gram, self.train.len()),
        }
    }

    fn holdout(&self, gram: &Matrix, train: &[usize], query: &[usize]) -> Result<f64> {
        let predicted = self.fit_predict(gram, train, query)?;
        let actual: Vec<Label> = query.iter().map(|&i| self.labels[i]).collect();
        accuracy(&predicted, &actual)
    }

    fn fit_predict(&self, gram: &Matrix, train: &[usize], query: &[usize]) -> Result<Vec<Label>> {
        let classes: BTreeSet<Label> = train.iter().map(|&i| self.labels[i]).collect();
        if classes.len() == 1 {
            let only = *classes.iter().next().expect("one class");
            return Ok(vec![only; query.len()]);
        }
        let model = train_multiclass(gram, &self.labels, train, &self.svm)?;
        if model.any_non_converged() {
            return Err(Error::Numerical("SMO hit its iteration budget".into()));
        }
        model.predict_items(gram, query)
    }

    /// Item at training position `p` belongs to fold `p mod k`.
    fn cross_validate(&self, gram: &Matrix, k: usize) -> Result<f64> {
        let mut correct = 0usize;
        for fold in 0..k {
            let (held, kept): (Vec<usize>, Vec<usize>) =
                self.train.iter().partition(|&&p| p % k == fold);
            if held.is_empty() {
                continue;
            }
            let predicted = self.fit_predict(gram, &kept, &held)?;
            correct += held
                .iter()
                .zip(&predicted)
                .filter(|(&i, &p)| self.labels[i] == p)
                .count();
        }
        Ok(correct as f64 / self.train.len() as f64)
    }
}

/// One-off fitness of `expr`. Prefer a shared [`FitnessContext`] inside loops.
pub fn fitness(
    expr: &KernelExpr,
    bank: &KernelBank,
    labels: &[Label],
    split: &DatasetSplit,
    svm: &SvmParams,
    mode: FitnessMode,
) -> Result<f64> {
    Ok(FitnessContext::new(bank, labels, split, svm, mode)?.evaluate(expr))
}
