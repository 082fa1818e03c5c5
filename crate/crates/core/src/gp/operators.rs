//! Tree generation, selection and variation.

use rand::seq::index;
use rand::Rng;

use super::GpParams;
use crate::error::{Error, Result};
use crate::expr::{KernelExpr, Op};
use crate::seed;

fn random_op<R: Rng + ?Sized>(rng: &mut R) -> Op {
    if rng.gen_bool(0.5) {
        Op::Add
    } else {
        Op::Mul
    }
}

fn random_leaf<R: Rng + ?Sized>(n: usize, rng: &mut R) -> KernelExpr {
    KernelExpr::Leaf(rng.gen_range(0..n))
}

/// Every branch reaches exactly `depth`.
pub fn full_tree<R: Rng + ?Sized>(depth: usize, n: usize, rng: &mut R) -> KernelExpr {
    if depth <= 1 {
        return random_leaf(n, rng);
    }
    let op = random_op(rng);
    let a = full_tree(depth - 1, n, rng);
    let b = full_tree(depth - 1, n, rng);
    KernelExpr::Node(op, Box::new(a), Box::new(b))
}

/// Nodes above `min_depth` are functions; below it each node is drawn from
/// the whole primitive set (`n` terminals, two functions) until `max_depth`.
pub fn grow_tree<R: Rng + ?Sized>(
    min_depth: usize,
    max_depth: usize,
    n: usize,
    rng: &mut R,
) -> KernelExpr {
    if max_depth <= 1 {
        return random_leaf(n, rng);
    }
    let pick_leaf = min_depth <= 1 && rng.gen_range(0..n + 2) < n;
    if pick_leaf {
        return random_leaf(n, rng);
    }
    let op = random_op(rng);
    let next_min = min_depth.saturating_sub(1);
    let a = grow_tree(next_min, max_depth - 1, n, rng);
    let b = grow_tree(next_min, max_depth - 1, n, rng);
    KernelExpr::Node(op, Box::new(a), Box::new(b))
}

fn check_init(params: &GpParams, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("need at least one base kernel".into()));
    }
    if params.init_depth_min == 0
        || params.init_depth_min > params.init_depth_max
        || params.init_depth_max > params.max_depth
    {
        return Err(Error::Parameter(format!(
            "init depth range ({}, {}) must lie within 1..={}",
            params.init_depth_min, params.init_depth_max, params.max_depth
        )));
    }
    Ok(())
}

/// One tree from the ramped half-and-half distribution: a depth drawn from
/// the init range, then "full" or "grow" with equal probability.
pub fn random_tree<R: Rng + ?Sized>(params: &GpParams, n: usize, rng: &mut R) -> Result<KernelExpr> {
    check_init(params, n)?;
    let depth = rng.gen_range(params.init_depth_min..=params.init_depth_max);
    Ok(if rng.gen_bool(0.5) {
        full_tree(depth, n, rng)
    } else {
        grow_tree(params.init_depth_min, depth, n, rng)
    })
}

/// Initial population: depths cycle through the init range and methods
/// alternate full/grow. Slot `s` draws from its own stream of `seed`.
pub fn ramped_population(params: &GpParams, n: usize, seed: u64) -> Result<Vec<KernelExpr>> {
    check_init(params, n)?;
    let depths = params.init_depth_max - params.init_depth_min + 1;
    Ok((0..params.population_size)
        .map(|s| {
            let mut rng = seed::stream(seed, &[s as u64]);
            let depth = params.init_depth_min + (s / 2) % depths;
            if s % 2 == 0 {
                full_tree(depth, n, &mut rng)
            } else {
                grow_tree(params.init_depth_min, depth, n, &mut rng)
            }
        })
        .collect())
}

/// `true` if candidate `a` beats `b`: higher fitness, then fewer nodes, then lower index.
fn beats(fitness: &[f64], sizes: &[usize], a: usize, b: usize) -> bool {
    let (fa, fb) = (fitness[a], fitness[b]);
    if fa != fb {
        return fa > fb || fb.is_nan();
    }
    if sizes[a] != sizes[b] {
        return sizes[a] < sizes[b];
    }
    a < b
}

/// Best of `k` distinct individuals drawn uniformly from the population.
pub fn tournament_select<R: Rng + ?Sized>(
    fitness: &[f64],
    sizes: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<usize> {
    let pop = fitness.len();
    if pop == 0 {
        return Err(Error::Parameter("tournament over an empty population".into()));
    }
    if sizes.len() != pop {
        return Err(Error::Shape(format!("{} sizes for {pop} fitness values", sizes.len())));
    }
    if k == 0 || k > pop {
        return Err(Error::Parameter(format!(
            "tournament size {k} must be in 1..={pop}"
        )));
    }
    let mut best = None;
    for c in index::sample(rng, pop, k).iter() {
        best = match best {
            Some(b) if !beats(fitness, sizes, c, b) => Some(b),
            _ => Some(c),
        };
    }
    Ok(best.expect("k >= 1"))
}

/// Swaps a uniformly chosen subtree of `a` with one of `b`. A child deeper
/// than `max_depth` is replaced by its own parent.
pub fn crossover<R: Rng + ?Sized>(
    a: &KernelExpr,
    b: &KernelExpr,
    rng: &mut R,
    max_depth: usize,
) -> (KernelExpr, KernelExpr) {
    let pa = rng.gen_range(0..a.node_count());
    let pb = rng.gen_range(0..b.node_count());
    let sa = a.subtree(pa).expect("position within tree");
    let sb = b.subtree(pb).expect("position within tree");
    let ca = a.replace(pa, sb);
    let cb = b.replace(pb, sa);
    let ca = if ca.depth() > max_depth { a.clone() } else { ca };
    let cb = if cb.depth() > max_depth { b.clone() } else { cb };
    (ca, cb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    /// Re-point one leaf at a different base kernel.
    Point,
    /// Flip one internal node between `+` and `*`.
    OperatorSwap,
    /// Replace a subtree by a fresh random one that fits the depth budget.
    Subtree,
}

/// Applies one of the three mutation kinds, chosen with equal probability.
pub fn mutate<R: Rng + ?Sized>(
    expr: &KernelExpr,
    rng: &mut R,
    params: &GpParams,
    n: usize,
) -> KernelExpr {
    let kind = match rng.gen_range(0..3) {
        0 => MutationKind::Point,
        1 => MutationKind::OperatorSwap,
        _ => MutationKind::Subtree,
    };
    mutate_with(expr, kind, rng, params, n)
}

pub fn mutate_with<R: Rng + ?Sized>(
    expr: &KernelExpr,
    kind: MutationKind,
    rng: &mut R,
    params: &GpParams,
    n: usize,
) -> KernelExpr {
    match kind {
        MutationKind::Point => {
            let leaves = expr.positions(true);
            let pos = leaves[rng.gen_range(0..leaves.len())];
            let current = match expr.subtree(pos) {
                Some(KernelExpr::Leaf(i)) => *i,
                _ => unreachable!("leaf position"),
            };
            if n <= 1 {
                return expr.clone();
            }
            // Uniform over the other n - 1 kernels.
            let mut new = rng.gen_range(0..n - 1);
            if new >= current {
                new += 1;
            }
            expr.replace(pos, &KernelExpr::Leaf(new))
        }
        MutationKind::OperatorSwap => {
            let internal = expr.positions(false);
            if internal.is_empty() {
                return mutate_with(expr, MutationKind::Subtree, rng, params, n);
            }
            let pos = internal[rng.gen_range(0..internal.len())];
            match expr.subtree(pos) {
                Some(KernelExpr::Node(op, a, b)) => {
                    let swapped = KernelExpr::Node(op.flipped(), a.clone(), b.clone());
                    expr.replace(pos, &swapped)
                }
                _ => unreachable!("internal position"),
            }
        }
        MutationKind::Subtree => {
            let pos = rng.gen_range(0..expr.node_count());
            let level = expr.depth_of(pos).expect("position within tree");
            let budget = params.max_depth.saturating_sub(level) + 1;
            let limit = budget.min(params.init_depth_max).max(1);
            let fresh = grow_tree(1, limit, n, rng);
            let out = expr.replace(pos, &fresh);
            debug_assert!(out.depth() <= params.max_depth.max(expr.depth()));
            out
        }
    }
}
