//! Small generated multi-view datasets for tests, benchmarks and demos.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernel::FeatureMatrix;
use crate::{seed, Label};

#[derive(Debug, Clone)]
pub struct MultiView {
    /// `(name, features)` per view; every view has one row per item.
    pub views: Vec<(String, FeatureMatrix)>,
    pub labels: Vec<Label>,
}

/// Center `k` of `count` points spaced evenly on the unit circle.
fn circle_point(k: usize, count: usize) -> [f64; 2] {
    let t = TAU * k as f64 / count as f64;
    [t.cos(), t.sin()]
}

fn noisy<R: Rng>(center: [f64; 2], noise: &Normal<f64>, rng: &mut R) -> Vec<f64> {
    vec![center[0] + noise.sample(rng), center[1] + noise.sample(rng)]
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::Parameter(format!("noise level {sd}: {e}")))
}

/// Three classes over two 2-D views. Each item has a hidden value `a` in view
/// one and `b` in view two, both in `{0, 1, 2}`, drawn as noisy points around
/// three centers; its class is `(a + b) mod 3`.
///
/// Neither view alone says anything about the class, and no function of the
/// form `g(view1) + h(view2)` separates any two classes, so a sum of
/// per-view kernels cannot either. A product of the two view kernels sees
/// the joint cell `(a, b)` and does.
pub fn modular_views(per_class: usize, noise: f64, seed: u64) -> Result<MultiView> {
    if per_class == 0 {
        return Err(Error::Parameter("per_class must be positive".into()));
    }
    let dist = normal(noise)?;
    let mut rng = seed::rng(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut labels = Vec::new();
    for class in 0..3usize {
        for p in 0..per_class {
            let a = p % 3;
            let b = (class + 3 - a) % 3;
            first.push(noisy(circle_point(a, 3), &dist, &mut rng));
            second.push(noisy(circle_point(b, 3), &dist, &mut rng));
            labels.push(class as Label);
        }
    }
    Ok(MultiView {
        views: vec![
            ("view1".into(), FeatureMatrix::from_rows(&first)?),
            ("view2".into(), FeatureMatrix::from_rows(&second)?),
        ],
        labels,
    })
}

/// `classes` classes over `n_views` 2-D views. View `informative` places each
/// class around its own center; every other view is pure noise.
pub fn one_informative_view(
    classes: usize,
    per_class: usize,
    n_views: usize,
    informative: usize,
    noise: f64,
    seed: u64,
) -> Result<MultiView> {
    if classes < 2 || per_class == 0 || informative >= n_views {
        return Err(Error::Parameter(format!(
            "need classes >= 2, per_class >= 1 and informative < n_views, got {classes}, {per_class}, {informative}/{n_views}"
        )));
    }
    let dist = normal(noise)?;
    let unit = normal(1.0)?;
    let mut rng = seed::rng(seed);
    let m = classes * per_class;
    let labels: Vec<Label> = (0..m).map(|i| (i / per_class) as Label).collect();
    let views = (0..n_views)
        .map(|v| {
            let rows: Vec<Vec<f64>> = labels
                .iter()
                .map(|&c| {
                    if v == informative {
                        noisy(circle_point(c as usize, classes), &dist, &mut rng)
                    } else {
                        vec![unit.sample(&mut rng), unit.sample(&mut rng)]
                    }
                })
                .collect();
            Ok((format!("view{}", v + 1), FeatureMatrix::from_rows(&rows)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiView { views, labels })
}
