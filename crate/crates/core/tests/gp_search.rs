use std::collections::BTreeMap;

use kf_core::gp::{FitnessContext, GenerationStats};
use kf_core::harness::best_single_kernel;
use kf_core::synthetic::one_informative_view;
use kf_core::{
    evolve, gaussian_bank, make_splits, seed, FitnessMode, GpParams, KernelExpr, SvmParams,
};
use rand::Rng;

/// All trees over `n` leaves up to `depth`, keyed by canonical form.
fn enumerate(n: usize, depth: usize) -> Vec<KernelExpr> {
    let mut levels: Vec<Vec<KernelExpr>> = vec![(0..n).map(KernelExpr::leaf).collect()];
    for _ in 1..depth {
        let below = levels.last().unwrap();
        let mut next: Vec<KernelExpr> = (0..n).map(KernelExpr::leaf).collect();
        for a in below {
            for b in below {
                next.push(KernelExpr::add(a.clone(), b.clone()));
                next.push(KernelExpr::mul(a.clone(), b.clone()));
            }
        }
        levels.push(next);
    }
    let unique: BTreeMap<String, KernelExpr> = levels
        .pop()
        .unwrap()
        .into_iter()
        .map(|e| (e.canonical_string(), e.canonicalize()))
        .collect();
    unique.into_values().collect()
}

#[test]
fn enumeration_size() {
    // 2 leaves, then 2 + 2 * 10 * 10 ordered trees at depth 3.
    let mut count = 2;
    for _ in 1..3 {
        count = 2 + 2 * count * count;
    }
    assert_eq!(count, 202);
    let trees = enumerate(2, 3);
    assert!(trees.len() < 202);
    assert!(trees.iter().all(|t| t.depth() <= 3));
    assert!(trees.contains(&KernelExpr::parse("(* K1 K2)").unwrap()));
}

#[test]
fn evolution_matches_exhaustive_optimum() {
    for trial in 0..3u64 {
        let data = one_informative_view(3, 12, 2, (trial % 2) as usize, 0.6, trial).unwrap();
        let (bank, _) = gaussian_bank(&data.views, None).unwrap();
        let split = &make_splits(&data.labels, 6, 3, 1, trial).unwrap()[0];
        let svm = SvmParams::default();
        let ctx = FitnessContext::new(&bank, &data.labels, split, &svm, FitnessMode::Validation).unwrap();
        let optimum = enumerate(2, 3)
            .iter()
            .map(|e| ctx.evaluate(e))
            .fold(f64::MIN, f64::max);
        let gp = GpParams {
            population_size: 60,
            max_generations: 40,
            max_depth: 3,
            init_depth_max: 3,
            stagnation_limit: 40,
            rng_seed: trial,
            ..Default::default()
        };
        let r = evolve(&bank, &data.labels, split, &gp, &svm).unwrap();
        assert_eq!(r.best_fitness, optimum, "trial {trial}");
    }
}

#[test]
fn evolved_never_below_best_single() {
    let mut rng = seed::rng(21);
    for trial in 0..4u64 {
        let views = rng.gen_range(2..5);
        let data = one_informative_view(3, 10, views, rng.gen_range(0..views), 0.8, trial).unwrap();
        let (bank, _) = gaussian_bank(&data.views, None).unwrap();
        let split = &make_splits(&data.labels, 6, 3, 1, trial).unwrap()[0];
        let svm = SvmParams::default();
        let (_, single) = best_single_kernel(&bank, &data.labels, split, &svm).unwrap();
        let gp = GpParams {
            population_size: 10,
            max_generations: 3,
            rng_seed: trial,
            ..Default::default()
        };
        let r = evolve(&bank, &data.labels, split, &gp, &svm).unwrap();
        assert!(r.best_fitness >= single);
        let first: &GenerationStats = &r.per_generation[0];
        assert!(first.best_fitness >= single);
    }
}

#[test]
fn informative_view_is_picked() {
    let data = one_informative_view(3, 15, 4, 1, 0.1, 4).unwrap();
    let (bank, _) = gaussian_bank(&data.views, None).unwrap();
    let split = &make_splits(&data.labels, 8, 3, 1, 4).unwrap()[0];
    let svm = SvmParams::default();
    let ctx = FitnessContext::new(&bank, &data.labels, split, &svm, FitnessMode::Validation).unwrap();
    let scores: Vec<f64> = (0..4).map(|i| ctx.evaluate(&KernelExpr::leaf(i))).collect();
    let argmax = (0..4).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
    assert_eq!(argmax, 1, "{scores:?}");
    assert_eq!(best_single_kernel(&bank, &data.labels, split, &svm).unwrap().0, 1);
}
