//! Item-to-item similarity search over a combined, cosine-normalised kernel.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::KernelExpr;
use crate::io::{read_kernel, read_lines, write_kernel, write_lines};
use crate::kernel::{normalize, GramMatrix, KernelBank};

/// Ranking direction for [`SimilarityIndex::query`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryOrder {
    /// Highest score first.
    #[default]
    Similarity,
    /// Lowest score first.
    PaperMin,
}

impl fmt::Display for QueryOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryOrder::Similarity => "similarity",
            QueryOrder::PaperMin => "paper-min",
        })
    }
}

impl FromStr for QueryOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similarity" => Ok(QueryOrder::Similarity),
            "paper-min" => Ok(QueryOrder::PaperMin),
            other => Err(Error::Parameter(format!(
                "unknown order '{other}' (expected similarity or paper-min)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityIndex {
    matrix: GramMatrix,
    item_ids: Vec<String>,
    expr: KernelExpr,
}

/// Evaluates `expr` over the bank and normalises it to a unit diagonal.
pub fn build_index(expr: &KernelExpr, bank: &KernelBank, item_ids: Vec<String>) -> Result<SimilarityIndex> {
    if item_ids.len() != bank.items() {
        return Err(Error::Shape(format!(
            "{} item ids for {} items",
            item_ids.len(),
            bank.items()
        )));
    }
    let matrix = normalize(&expr.evaluate(bank)?)?.with_tag(expr.canonical_string());
    Ok(SimilarityIndex {
        matrix,
        item_ids,
        expr: expr.clone(),
    })
}

impl SimilarityIndex {
    /// Wraps an already built similarity matrix.
    pub fn from_parts(matrix: GramMatrix, item_ids: Vec<String>, expr: KernelExpr) -> Result<Self> {
        if item_ids.len() != matrix.size() {
            return Err(Error::Shape(format!(
                "{} item ids for a {}x{} matrix",
                item_ids.len(),
                matrix.size(),
                matrix.size()
            )));
        }
        Ok(Self {
            matrix,
            item_ids,
            expr,
        })
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn matrix(&self) -> &GramMatrix {
        &self.matrix
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn expr(&self) -> &KernelExpr {
        &self.expr
    }

    /// Index of the item with this id, if any.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|x| x == id)
    }

    /// The `k` items other than `i`, ranked by `M[i, j]`; ties go to the smaller index.
    pub fn query(&self, i: usize, k: usize, order: QueryOrder) -> Result<Vec<(usize, f64)>> {
        let m = self.len();
        if i >= m {
            return Err(Error::Index { index: i, len: m });
        }
        if k == 0 || k >= m {
            return Err(Error::Parameter(format!(
                "k must be in 1..={}, got {k}",
                m.saturating_sub(1)
            )));
        }
        let row = self.matrix.row(i);
        let mut hits: Vec<(usize, f64)> = (0..m).filter(|&j| j != i).map(|j| (j, row[j])).collect();
        hits.sort_by(|a, b| {
            let by_score = match order {
                QueryOrder::Similarity => b.1.total_cmp(&a.1),
                QueryOrder::PaperMin => a.1.total_cmp(&b.1),
            };
            by_score.then(a.0.cmp(&b.0))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Writes the matrix in the binary kernel format and the ids next to it
    /// with an `.ids` extension. The matrix tag stores the expression.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tagged = self.matrix.clone().with_tag(self.expr.canonical_string());
        write_kernel(BufWriter::new(File::create(path)?), &tagged)?;
        write_lines(BufWriter::new(File::create(ids_path(path))?), &self.item_ids)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let matrix = read_kernel(BufReader::new(File::open(path)?))?;
        let expr = KernelExpr::parse(matrix.tag()).map_err(|e| {
            Error::Format(format!("index tag '{}' is not an expression: {e}", matrix.tag()))
        })?;
        let ids = read_lines(BufReader::new(File::open(ids_path(path))?))?;
        Self::from_parts(matrix, ids, expr)
    }
}

/// Sidecar path holding one item id per line.
pub fn ids_path(index_path: &Path) -> PathBuf {
    index_path.with_extension("ids")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::addition_kernel;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn ids(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("item{i}")).collect()
    }

    fn index_of(matrix: Matrix) -> SimilarityIndex {
        let m = matrix.rows();
        SimilarityIndex::from_parts(GramMatrix::new(matrix, "K1").unwrap(), ids(m), KernelExpr::leaf(0))
            .unwrap()
    }

    fn example_row() -> SimilarityIndex {
        let row = [1.0, 0.9, 0.2, 0.7];
        index_of(Matrix::from_fn(4, 4, |i, j| match (i, j) {
            (0, j) => row[j],
            (i, 0) => row[i],
            (i, j) if i == j => 1.0,
            _ => 0.1,
        }))
    }

    #[test]
    fn ordering_examples() {
        let idx = example_row();
        let sim: Vec<usize> = idx.query(0, 2, QueryOrder::Similarity).unwrap().iter().map(|h| h.0).collect();
        assert_eq!(sim, vec![1, 3]);
        let min: Vec<usize> = idx.query(0, 2, QueryOrder::PaperMin).unwrap().iter().map(|h| h.0).collect();
        assert_eq!(min, vec![2, 3]);
    }

    #[test]
    fn identity_ties_go_to_smallest() {
        let idx = index_of(Matrix::identity(5));
        assert_eq!(idx.query(0, 1, QueryOrder::Similarity).unwrap(), vec![(1, 0.0)]);
        assert_eq!(idx.query(3, 1, QueryOrder::Similarity).unwrap(), vec![(0, 0.0)]);
    }

    #[test]
    fn k_out_of_range() {
        let idx = index_of(Matrix::identity(3));
        for k in [0, 3] {
            assert!(matches!(idx.query(0, k, QueryOrder::Similarity), Err(Error::Parameter(_))));
        }
        assert!(matches!(idx.query(3, 1, QueryOrder::Similarity), Err(Error::Index { .. })));
    }

    #[test]
    fn build_examples() {
        let m = 6;
        let grams: Vec<GramMatrix> = (0..5)
            .map(|k| {
                let g = Matrix::from_fn(m, m, |i, j| {
                    (-((i as f64 - j as f64).powi(2)) / (k as f64 + 1.0)).exp()
                });
                GramMatrix::new(g, format!("G{k}")).unwrap()
            })
            .collect();
        let bank = KernelBank::new(grams).unwrap();
        let idx = build_index(&KernelExpr::sum_of_leaves(5), &bank, ids(m)).unwrap();
        let expected = normalize(&addition_kernel(&bank).unwrap()).unwrap();
        assert_eq!(idx.matrix().as_matrix(), expected.as_matrix());

        let eye = KernelBank::new(vec![GramMatrix::new(Matrix::identity(4), "I").unwrap()]).unwrap();
        let idx = build_index(&KernelExpr::leaf(0), &eye, ids(4)).unwrap();
        assert_eq!(idx.matrix().as_matrix(), &Matrix::identity(4));
        assert!(build_index(&KernelExpr::leaf(0), &eye, ids(3)).is_err());
        assert!(build_index(&KernelExpr::leaf(1), &eye, ids(4)).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = std::env::temp_dir().join(format!("kf-index-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("index.kgm");
        let idx = SimilarityIndex::from_parts(
            GramMatrix::new(Matrix::identity(3), "x").unwrap(),
            ids(3),
            KernelExpr::parse("(* K2 K1)").unwrap(),
        )
        .unwrap();
        idx.save(&path).unwrap();
        let back = SimilarityIndex::load(&path).unwrap();
        assert_eq!(back.item_ids(), idx.item_ids());
        assert_eq!(back.matrix().as_matrix(), idx.matrix().as_matrix());
        assert_eq!(back.expr(), &KernelExpr::parse("(* K1 K2)").unwrap());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    fn symmetric(m: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-1.0f64..1.0, m * m).prop_map(move |v| {
            Matrix::from_fn(m, m, |i, j| if i <= j { v[i * m + j] } else { v[j * m + i] })
        })
    }

    proptest! {
        #[test]
        fn query_properties(g in symmetric(7), i in 0usize..7, k in 1usize..7, scale in 0.01f64..100.0) {
            let idx = index_of(g.clone());
            let hits = idx.query(i, k, QueryOrder::Similarity).unwrap();
            prop_assert_eq!(hits.len(), k);
            prop_assert!(hits.iter().all(|h| h.0 != i));

            let scaled = index_of(g.map(|v| v * scale));
            let a: Vec<usize> = hits.iter().map(|h| h.0).collect();
            let b: Vec<usize> = scaled.query(i, k, QueryOrder::Similarity).unwrap().iter().map(|h| h.0).collect();
            prop_assert_eq!(a, b);

            let all_sim: Vec<usize> = idx.query(i, 6, QueryOrder::Similarity).unwrap().iter().map(|h| h.0).collect();
            let mut all_min: Vec<usize> = idx.query(i, 6, QueryOrder::PaperMin).unwrap().iter().map(|h| h.0).collect();
            let row = g.row(i);
            let mut scores: Vec<f64> = (0..7).filter(|&j| j != i).map(|j| row[j]).collect();
            scores.sort_by(f64::total_cmp);
            scores.dedup();
            if scores.len() == 6 {
                all_min.reverse();
                prop_assert_eq!(all_sim, all_min);
            }
        }
    }
}
