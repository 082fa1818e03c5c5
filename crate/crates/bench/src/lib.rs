//! Shared fixtures for the benchmarks.

use kf_core::synthetic::modular_views;
use kf_core::{gaussian_bank, make_splits, DatasetSplit, KernelBank, Label};

pub struct Fixture {
    pub bank: KernelBank,
    pub labels: Vec<Label>,
    pub split: DatasetSplit,
}

/// Two-view, three-class dataset with `per_class` items per class.
pub fn fixture(per_class: usize) -> Fixture {
    let data = modular_views(per_class, 0.25, 7).expect("valid generator settings");
    let (bank, _) = gaussian_bank(&data.views, None).expect("finite features");
    let train = per_class / 2;
    let split = make_splits(&data.labels, train, train / 3, 1, 7)
        .expect("classes large enough")
        .remove(0);
    Fixture {
        bank,
        labels: data.labels,
        split,
    }
}
