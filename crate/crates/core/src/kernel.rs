//! Gram matrices, base-kernel construction and the kernel algebra.
//!
//! `+` and `*` act entrywise, so both preserve symmetry and positive
//! semi-definiteness (the latter by the Schur product theorem).

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Absolute symmetry tolerance for a [`GramMatrix`], scaled by `max(1, max|G|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Default tolerance for [`check_psd`], relative to the largest diagonal entry.
pub const PSD_TOL: f64 = 1e-8;

/// Asymmetry above which [`check_psd`] rejects its input.
const PSD_SYMMETRY_LIMIT: f64 = 1e-8;

/// One descriptor: `rows` images, each a `cols`-dimensional feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 rows, got {}",
                values.rows()
            )));
        }
        if values.cols() < 1 {
            return Err(Error::Input("feature rows have no columns".into()));
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite feature value at row {}, column {}",
                pos / values.cols(),
                pos % values.cols()
            )));
        }
        Ok(Self(values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Symmetric `m x m` similarity matrix tagged with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    matrix: Matrix,
    tag: String,
}

impl GramMatrix {
    pub fn new(matrix: Matrix, tag: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!(
                "gram matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.all_finite() {
            return Err(Error::Input("gram matrix has non-finite entries".into()));
        }
        let scale = matrix
            .as_slice()
            .iter()
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        let asym = matrix.max_asymmetry();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Shape(format!(
                "gram matrix is not symmetric (max |G[i,j]-G[j,i]| = {asym:e})"
            )));
        }
        Ok(Self {
            matrix,
            tag: tag.into(),
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// Gram matrix over a subset of items, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> Result<GramMatrix> {
        Ok(GramMatrix {
            matrix: self.matrix.select(idx, idx)?,
            tag: self.tag.clone(),
        })
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        // A GramMatrix is symmetric by construction, so this cannot fail.
        check_psd(&self.matrix, tol).unwrap_or(false)
    }
}

impl Deref for GramMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.matrix
    }
}

/// The terminal set: `n` base kernels over the same `m` items.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    kernels: Vec<GramMatrix>,
}

impl KernelBank {
    pub fn new(kernels: Vec<GramMatrix>) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::Input("kernel bank is empty".into()))?;
        let m = first.size();
        if let Some(bad) = kernels.iter().find(|k| k.size() != m) {
            return Err(Error::Shape(format!(
                "kernel '{}' is {}x{}, expected {m}x{m}",
                bad.tag(),
                bad.size(),
                bad.size()
            )));
        }
        Ok(Self { kernels })
    }

    /// Number of base kernels.
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Number of items each kernel covers.
    pub fn items(&self) -> usize {
        self.kernels[0].size()
    }

    pub fn get(&self, i: usize) -> Option<&GramMatrix> {
        self.kernels.get(i)
    }

    pub fn kernels(&self) -> &[GramMatrix] {
        &self.kernels
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.kernels.iter().map(GramMatrix::tag)
    }

    /// The same bank over a subset of items.
    pub fn restrict(&self, idx: &[usize]) -> Result<KernelBank> {
        let kernels = self
            .kernels
            .iter()
            .map(|k| k.restrict(idx))
            .collect::<Result<_>>()?;
        Ok(KernelBank { kernels })
    }
}

/// `G[i,j] = exp(-gamma * |x_i - x_j|^2)`, with an exact unit diagonal.
pub fn gaussian_gram(features: &FeatureMatrix, gamma: f64) -> Result<GramMatrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    let m = features.len();
    let mut g = Matrix::identity(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = (-gamma * features.squared_distance(i, j)).exp();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramMatrix::new(g, "gaussian")
}

/// `1 / median` of the nonzero pairwise squared distances.
pub fn median_heuristic_gamma(features: &FeatureMatrix) -> Result<f64> {
    let m = features.len();
    let mut d2: Vec<f64> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .map(|(i, j)| features.squared_distance(i, j))
        .filter(|&d| d > 0.0)
        .collect();
    if d2.is_empty() {
        return Err(Error::DegenerateInput(
            "all pairwise distances are zero".into(),
        ));
    }
    d2.sort_by(f64::total_cmp);
    let mid = d2.len() / 2;
    let median = if d2.len() % 2 == 1 {
        d2[mid]
    } else {
        0.5 * (d2[mid - 1] + d2[mid])
    };
    Ok(1.0 / median)
}

/// One Gaussian kernel per feature view, each with its median-heuristic
/// width (or `gamma` when given) and tagged with the view's name.
pub fn gaussian_bank(views: &[(String, FeatureMatrix)], gamma: Option<f64>) -> Result<(KernelBank, Vec<f64>)> {
    let mut kernels = Vec::with_capacity(views.len());
    let mut gammas = Vec::with_capacity(views.len());
    for (name, features) in views {
        let g = match gamma {
            Some(g) => g,
            None => median_heuristic_gamma(features)?,
        };
        kernels.push(gaussian_gram(features, g)?.with_tag(name.clone()));
        gammas.push(g);
    }
    Ok((KernelBank::new(kernels)?, gammas))
}

/// Entrywise sum.
pub fn add(a: &GramMatrix, b: &GramMatrix) -> Result<GramMatrix> {
    let matrix = a.matrix.zip_with(&b.matrix, |x, y| x + y)?;
    Ok(GramMatrix {
        matrix,
        tag: format!("(+ {} {})", a.tag, b.tag),
    })
}

/// Entrywise (Schur) product.
pub fn multiply(a: &GramMatrix, b: &GramMatrix) -> Result<GramMatrix> {
    let matrix = a.matrix.zip_with(&b.matrix, |x, y| x * y)?;
    Ok(GramMatrix {
        matrix,
        tag: format!("(* {} {})", a.tag, b.tag),
    })
}

/// Cosine normalization `G[i,j] / sqrt(G[i,i] G[j,j])`; the result has an exact unit diagonal.
pub fn normalize(g: &GramMatrix) -> Result<GramMatrix> {
    let m = g.size();
    let inv: Vec<f64> = g
        .diagonal()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d.sqrt())
            } else {
                Err(Error::DegenerateKernel(format!(
                    "diagonal entry {i} is {d}, must be positive"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let mut out = Matrix::identity(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = g[(i, j)] * inv[i] * inv[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        matrix: out,
        tag: g.tag.clone(),
    })
}

/// Whether the smallest eigenvalue of `g` is at least `-tol * max(diag)`.
///
/// Runs a Cholesky factorization of `g + tol * max(diag) * I`, which
/// succeeds exactly when every eigenvalue of `g` exceeds that bound.
pub fn check_psd(g: &Matrix, tol: f64) -> Result<bool> {
    if !g.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let asym = g.max_asymmetry();
    if asym > PSD_SYMMETRY_LIMIT {
        return Err(Error::Shape(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let n = g.rows();
    let max_diag = g.diagonal().fold(0.0f64, f64::max);
    let scale = if max_diag > 0.0 { max_diag } else { 1.0 };
    let shift = tol * scale;

    // Lower-triangular factor, row-major.
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let mut d = g[(j, j)] + shift;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return Ok(false);
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = 0.5 * (g[(i, j)] + g[(j, i)]);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(true)
}

/// Sub-matrix `G[row_idx x col_idx]`; used to build train x train and query x train blocks.
pub fn slice(g: &GramMatrix, row_idx: &[usize], col_idx: &[usize]) -> Result<Matrix> {
    g.matrix.select(row_idx, col_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    fn gram(rows: &[[f64; 2]]) -> GramMatrix {
        GramMatrix::new(Matrix::from_rows(rows).unwrap(), "t").unwrap()
    }

    fn eye(n: usize) -> GramMatrix {
        GramMatrix::new(Matrix::identity(n), "I").unwrap()
    }

    #[test]
    fn gaussian_identical_rows_is_all_ones() {
        let f = FeatureMatrix::from_rows(&[[0.3, -1.0], [0.3, -1.0]]).unwrap();
        let g = gaussian_gram(&f, 5.0).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn gaussian_unit_distance() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let g = gaussian_gram(&f, 1.0).unwrap();
        assert_close!(g[(0, 1)], (-1.0f64).exp(), 1e-15);
        assert_close!(g[(0, 1)], 0.367879, 1e-6);
        assert_eq!(g[(0, 0)], 1.0);
    }

    #[test]
    fn gaussian_small_gamma_tends_to_ones() {
        let f = FeatureMatrix::from_rows(&[[0.0, 4.0], [3.0, -2.0], [10.0, 1.0]]).unwrap();
        let g = gaussian_gram(&f, 1e-12).unwrap();
        assert!(g.as_slice().iter().all(|v| (v - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn gaussian_rejects_bad_parameters() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(gaussian_gram(&f, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(gaussian_gram(&f, -1.0), Err(Error::Parameter(_))));
        assert!(matches!(
            FeatureMatrix::from_rows(&[[0.0], [f64::NAN]]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            FeatureMatrix::from_rows(&[[0.0]]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn median_heuristic_examples() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert_eq!(median_heuristic_gamma(&f).unwrap(), 1.0);
        let f = FeatureMatrix::from_rows(&[[0.0], [2.0]]).unwrap();
        assert_eq!(median_heuristic_gamma(&f).unwrap(), 0.25);
        let f = FeatureMatrix::from_rows(&[[1.0], [1.0], [4.0], [4.0]]).unwrap();
        // Distinct pairs are all at d^2 = 9; the two duplicate pairs are dropped.
        assert_eq!(median_heuristic_gamma(&f).unwrap(), 1.0 / 9.0);
        let f = FeatureMatrix::from_rows(&[[2.0], [2.0]]).unwrap();
        assert!(matches!(
            median_heuristic_gamma(&f),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn add_examples() {
        assert_eq!(add(&eye(2), &eye(2)).unwrap().as_slice(), &[2.0, 0.0, 0.0, 2.0]);
        let g = gram(&[[1.0, 0.5], [0.5, 1.0]]);
        let z = gram(&[[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(add(&g, &z).unwrap().as_matrix(), g.as_matrix());
        let h = gram(&[[1.0, 0.2], [0.2, 1.0]]);
        let s = add(&g, &h).unwrap();
        assert_close!(s[(0, 1)], 0.7, 1e-15);
        assert_eq!(s[(0, 0)], 2.0);
        assert!(matches!(add(&eye(2), &eye(3)), Err(Error::Shape(_))));
    }

    #[test]
    fn multiply_examples() {
        let g = gram(&[[1.0, 0.5], [0.5, 1.0]]);
        let ones = gram(&[[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(multiply(&g, &ones).unwrap().as_matrix(), g.as_matrix());
        let h = gram(&[[1.0, 0.2], [0.2, 1.0]]);
        let p = multiply(&g, &h).unwrap();
        assert_close!(p[(0, 1)], 0.1, 1e-15);
        assert_eq!(p[(1, 1)], 1.0);
        assert_eq!(multiply(&g, &g).unwrap().as_slice(), &[1.0, 0.25, 0.25, 1.0]);
        assert!(matches!(multiply(&eye(2), &eye(3)), Err(Error::Shape(_))));
    }

    #[test]
    fn normalize_examples() {
        let f = FeatureMatrix::from_rows(&[[0.0], [0.7], [2.0]]).unwrap();
        let g = gaussian_gram(&f, 0.5).unwrap();
        let n = normalize(&g).unwrap();
        for (a, b) in n.as_slice().iter().zip(g.as_slice()) {
            assert_close!(*a, *b, 1e-12);
        }
        let n = normalize(&gram(&[[4.0, 2.0], [2.0, 1.0]])).unwrap();
        assert_eq!(n.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        let n = normalize(&gram(&[[2.0, 0.0], [0.0, 8.0]])).unwrap();
        assert_eq!(n.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            normalize(&gram(&[[0.0, 0.0], [0.0, 1.0]])),
            Err(Error::DegenerateKernel(_))
        ));
    }

    #[test]
    fn psd_examples() {
        assert!(check_psd(&Matrix::identity(4), PSD_TOL).unwrap());
        let indefinite = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(!check_psd(&indefinite, PSD_TOL).unwrap());
        let f = FeatureMatrix::from_rows(&[[0.0, 1.0], [0.1, 1.0], [3.0, 0.0], [3.0, 0.2]]).unwrap();
        assert!(gaussian_gram(&f, 0.3).unwrap().is_psd(PSD_TOL));
        assert!(check_psd(&Matrix::zeros(3, 3), PSD_TOL).unwrap());
        // Rank-one, eigenvalues {3, 0, 0}.
        assert!(check_psd(&Matrix::filled(3, 3, 1.0), PSD_TOL).unwrap());
        let asym = Matrix::from_rows(&[[1.0, 0.0], [1e-6, 1.0]]).unwrap();
        assert!(matches!(check_psd(&asym, PSD_TOL), Err(Error::Shape(_))));
    }

    #[test]
    fn slice_examples() {
        let g = gram(&[[1.0, 0.5], [0.5, 1.0]]);
        assert_eq!(&slice(&g, &[0, 1], &[0, 1]).unwrap(), g.as_matrix());
        let i3 = eye(3);
        assert_eq!(slice(&i3, &[0], &[2]).unwrap().as_slice(), &[0.0]);
        assert_eq!(slice(&g, &[1], &[0, 1]).unwrap().as_slice(), &[0.5, 1.0]);
        assert!(matches!(slice(&g, &[2], &[0]), Err(Error::Index { .. })));
    }

    #[test]
    fn bank_requires_equal_sizes() {
        assert!(matches!(KernelBank::new(vec![]), Err(Error::Input(_))));
        assert!(matches!(
            KernelBank::new(vec![eye(2), eye(3)]),
            Err(Error::Shape(_))
        ));
        let bank = KernelBank::new(vec![eye(3), eye(3)]).unwrap();
        assert_eq!((bank.len(), bank.items()), (2, 3));
    }

    #[test]
    fn asymmetric_gram_is_rejected() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.4, 1.0]]).unwrap();
        assert!(matches!(GramMatrix::new(m, "x"), Err(Error::Shape(_))));
    }
}
