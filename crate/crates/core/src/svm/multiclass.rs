use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smo::{train_binary, SvmModel};
use super::SvmParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::{seed, Label};

/// One binary problem of the one-vs-one scheme. `negative < positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub negative: Label,
    pub positive: Label,
    /// Item indices (into the full gram) the pair was trained on.
    pub train_idx: Vec<usize>,
    pub model: SvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub class_labels: Vec<Label>,
    pub pairs: Vec<PairModel>,
    /// Side of the gram the model was trained against.
    pub n_items: usize,
    pub params: SvmParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAccuracy {
    pub negative: Label,
    pub positive: Label,
    /// Query points belonging to either class.
    pub count: usize,
    pub accuracy: Option<f64>,
}

/// Trains one binary SVM per unordered class pair over the items in
/// `train_idx`. The smaller class id of each pair is the `-1` side.
pub fn train_multiclass(
    gram: &Matrix,
    labels: &[Label],
    train_idx: &[usize],
    params: &SvmParams,
) -> Result<MulticlassModel> {
    params.validate()?;
    if !gram.is_square() || gram.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "gram is {}x{} but there are {} labels",
            gram.rows(),
            gram.cols(),
            labels.len()
        )));
    }
    if let Some(&bad) = train_idx.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::Index {
            index: bad,
            len: labels.len(),
        });
    }
    let classes: Vec<Label> = train_idx
        .iter()
        .map(|&i| labels[i])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 classes among the training points, found {}",
            classes.len()
        )));
    }

    let pair_list: Vec<(Label, Label)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &ca)| classes[a + 1..].iter().map(move |&cb| (ca, cb)))
        .collect();

    let pairs = pair_list
        .par_iter()
        .enumerate()
        .map(|(k, &(negative, positive))| {
            let idx: Vec<usize> = train_idx
                .iter()
                .copied()
                .filter(|&i| labels[i] == negative || labels[i] == positive)
                .collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == negative { -1.0 } else { 1.0 })
                .collect();
            let sub = gram.select(&idx, &idx)?;
            let mut rng = seed::stream(params.seed, &[k as u64]);
            let model = train_binary(&sub, &y, params, &mut rng)?;
            Ok(PairModel {
                negative,
                positive,
                train_idx: idx,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MulticlassModel {
        class_labels: classes,
        pairs,
        n_items: labels.len(),
        params: params.clone(),
    })
}

impl MulticlassModel {
    pub fn any_non_converged(&self) -> bool {
        self.pairs.iter().any(|p| p.model.non_converged)
    }

    /// Per-pair decision values for each query row (`rows` is q x n_items).
    pub fn pair_decisions(&self, rows: &Matrix) -> Result<Vec<Vec<f64>>> {
        if rows.cols() != self.n_items {
            return Err(Error::Shape(format!(
                "query rows have {} columns, model expects {}",
                rows.cols(),
                self.n_items
            )));
        }
        let all_rows: Vec<usize> = (0..rows.rows()).collect();
        self.pairs
            .iter()
            .map(|p| {
                let cross = rows.select(&all_rows, &p.train_idx)?;
                p.model.decision(&cross)
            })
            .collect()
    }

    /// Majority vote over the pair models. Ties go to the class with the
    /// larger summed |decision| among its winning votes, then the smaller id.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<Label>> {
        let decisions = self.pair_decisions(rows)?;
        let c = self.class_labels.len();
        let slot = |label: Label| self.class_labels.binary_search(&label).unwrap_or(0);
        let mut out = Vec::with_capacity(rows.rows());
        for q in 0..rows.rows() {
            let mut votes = vec![0usize; c];
            let mut margin = vec![0.0f64; c];
            for (p, d) in self.pairs.iter().zip(&decisions) {
                let f = d[q];
                let winner = if f > 0.0 { p.positive } else { p.negative };
                let s = slot(winner);
                votes[s] += 1;
                margin[s] += f.abs();
            }
            let mut best = 0;
            for s in 1..c {
                if votes[s] > votes[best] || (votes[s] == votes[best] && margin[s] > margin[best]) {
                    best = s;
                }
            }
            out.push(self.class_labels[best]);
        }
        Ok(out)
    }

    /// Predicts items of the gram the model was trained on.
    pub fn predict_items(&self, gram: &Matrix, query_idx: &[usize]) -> Result<Vec<Label>> {
        let cols: Vec<usize> = (0..gram.cols()).collect();
        self.predict(&gram.select(query_idx, &cols)?)
    }

    /// Accuracy of each pair model alone on the query items of its two classes.
    pub fn pairwise_accuracy(
        &self,
        gram: &Matrix,
        labels: &[Label],
        query_idx: &[usize],
    ) -> Result<Vec<PairAccuracy>> {
        self.pairs
            .iter()
            .map(|p| {
                let idx: Vec<usize> = query_idx
                    .iter()
                    .copied()
                    .filter(|&i| labels[i] == p.negative || labels[i] == p.positive)
                    .collect();
                let accuracy = if idx.is_empty() {
                    None
                } else {
                    let f = p.model.decision(&gram.select(&idx, &p.train_idx)?)?;
                    let correct = idx
                        .iter()
                        .zip(&f)
                        .filter(|(&i, &v)| (v > 0.0) == (labels[i] == p.positive))
                        .count();
                    Some(correct as f64 / idx.len() as f64)
                };
                Ok(PairAccuracy {
                    negative: p.negative,
                    positive: p.positive,
                    count: idx.len(),
                    accuracy,
                })
            })
            .collect()
    }
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[Label], actual: &[Label]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Input("accuracy of an empty prediction set".into()));
    }
    let hits = predicted.iter().zip(actual).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}
