use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{seed, Label};

/// Disjoint train / validation / test item indices for one repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Checks every index is below `m` and the three sets are pairwise disjoint.
    pub fn validate(&self, m: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for &i in self.train_idx.iter().chain(&self.val_idx).chain(&self.test_idx) {
            if i >= m {
                return Err(Error::Index { index: i, len: m });
            }
            if !seen.insert(i) {
                return Err(Error::Input(format!("item {i} appears in more than one split set")));
            }
        }
        Ok(())
    }

    /// Training followed by validation indices.
    pub fn fit_pool(&self) -> Vec<usize> {
        self.train_idx.iter().chain(&self.val_idx).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitProtocol {
    /// Items per class used for fitting, validation included.
    pub per_class_train: usize,
    /// Of those, items per class held out for validation.
    pub per_class_val: usize,
    /// Cap on test items per class; all remaining items when unset.
    pub per_class_test: Option<usize>,
    pub repeats: usize,
}

impl Default for SplitProtocol {
    fn default() -> Self {
        Self {
            per_class_train: 30,
            per_class_val: 10,
            per_class_test: None,
            repeats: 10,
        }
    }
}

impl SplitProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Parameter("protocol.repeats must be at least 1".into()));
        }
        if self.per_class_val == 0 || self.per_class_val >= self.per_class_train {
            return Err(Error::Parameter(format!(
                "need 0 < per_class_val < per_class_train, got {} and {}",
                self.per_class_val, self.per_class_train
            )));
        }
        if self.per_class_test == Some(0) {
            return Err(Error::Parameter("protocol.per_class_test must be positive".into()));
        }
        Ok(())
    }
}

/// Stratified random splits. For each class, `per_class_train` items go to
/// fitting (the last `per_class_val` of them to validation) and the rest to
/// test. Repeat `r` shuffles with a seed derived from `seed` and `r`.
pub fn make_splits(
    labels: &[Label],
    per_class_train: usize,
    per_class_val: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<DatasetSplit>> {
    let protocol = SplitProtocol {
        per_class_train,
        per_class_val,
        per_class_test: None,
        repeats,
    };
    make_splits_with(labels, &protocol, seed)
}

pub fn make_splits_with(
    labels: &[Label],
    protocol: &SplitProtocol,
    seed: u64,
) -> Result<Vec<DatasetSplit>> {
    protocol.validate()?;
    let mut classes: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    if classes.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 classes, found {}",
            classes.len()
        )));
    }
    for (class, members) in &classes {
        if members.len() <= protocol.per_class_train {
            return Err(Error::Input(format!(
                "class {class} has {} items, needs more than per_class_train = {}",
                members.len(),
                protocol.per_class_train
            )));
        }
    }

    let fit_only = protocol.per_class_train - protocol.per_class_val;
    Ok((0..protocol.repeats)
        .map(|r| {
            let repeat_seed = seed::derive(seed, &[r as u64]);
            let mut rng = seed::rng(repeat_seed);
            let mut split = DatasetSplit {
                train_idx: Vec::new(),
                val_idx: Vec::new(),
                test_idx: Vec::new(),
                seed: repeat_seed,
            };
            for members in classes.values() {
                let mut members = members.clone();
                members.shuffle(&mut rng);
                let test_end = protocol
                    .per_class_test
                    .map_or(members.len(), |t| (protocol.per_class_train + t).min(members.len()));
                split.train_idx.extend_from_slice(&members[..fit_only]);
                split
                    .val_idx
                    .extend_from_slice(&members[fit_only..protocol.per_class_train]);
                split
                    .test_idx
                    .extend_from_slice(&members[protocol.per_class_train..test_end]);
            }
            split
        })
        .collect())
}
