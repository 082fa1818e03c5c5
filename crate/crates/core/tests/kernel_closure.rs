mod support;

use kf_core::gp::random_tree;
use kf_core::{add, check_psd, multiply, seed, GpParams, GramMatrix, KernelBank, KernelExpr, Matrix, Op};
use rand::Rng;
use support::{min_eigenvalue, random_normalized_bank, random_psd};

fn fold(expr: &KernelExpr, bank: &KernelBank) -> GramMatrix {
    match expr {
        KernelExpr::Leaf(i) => bank.kernels()[*i].clone(),
        KernelExpr::Node(op, a, b) => {
            let (a, b) = (fold(a, bank), fold(b, bank));
            match op {
                Op::Add => add(&a, &b).unwrap(),
                Op::Mul => multiply(&a, &b).unwrap(),
            }
        }
    }
}

#[test]
fn check_psd_matches_eigenvalues() {
    let mut rng = seed::rng(3);
    for trial in 0..200 {
        let m = rng.gen_range(2..9);
        let mut g = random_psd(m, rng.gen_range(1..=m), &mut rng);
        if trial % 2 == 1 {
            // Push one eigen-direction clearly negative.
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let scale = 2.0 + rng.gen_range(0.0..5.0) * (0..m).map(|i| g[(i, i)]).fold(0.0, f64::max);
            g = Matrix::from_fn(m, m, |i, j| g[(i, j)] - scale * v[i] * v[j]);
        }
        let maxdiag = (0..m).map(|i| g[(i, i)]).fold(f64::MIN, f64::max).max(1e-300);
        let lambda = min_eigenvalue(&g);
        let expected = lambda >= -1e-8 * maxdiag.abs();
        // Skip the knife edge where the shift and the eigenvalue nearly cancel.
        if (lambda + 1e-8 * maxdiag.abs()).abs() < 1e-10 * maxdiag.abs() {
            continue;
        }
        assert_eq!(check_psd(&g, 1e-8).unwrap(), expected, "trial {trial}: lambda_min {lambda}");
    }
}

#[test]
fn random_trees_stay_psd_and_consistent() {
    let mut rng = seed::rng(8);
    let params = GpParams {
        init_depth_min: 1,
        init_depth_max: 6,
        max_depth: 6,
        ..Default::default()
    };
    for _ in 0..300 {
        let n = rng.gen_range(1..5);
        let m = rng.gen_range(3..10);
        let bank = random_normalized_bank(n, m, &mut rng);
        let expr = random_tree(&params, n, &mut rng).unwrap();
        let g = expr.evaluate(&bank).unwrap();
        assert!(g.is_psd(1e-8), "{expr}");
        let scale = (0..m).map(|i| g[(i, i)]).fold(0.0, f64::max);
        assert!(min_eigenvalue(g.as_matrix()) >= -1e-8 * scale, "{expr}");
        assert_eq!(g.as_matrix(), fold(&expr, &bank).as_matrix(), "{expr}");
    }
}
