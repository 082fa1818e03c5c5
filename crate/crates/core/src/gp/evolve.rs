use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitness::FitnessContext;
use super::operators::{crossover, mutate, ramped_population, tournament_select};
use super::{GpParams, IMPROVEMENT_EPS};
use crate::error::{Error, Result};
use crate::expr::KernelExpr;
use crate::harness::DatasetSplit;
use crate::kernel::KernelBank;
use crate::svm::{accuracy, train_multiclass, MulticlassModel, SvmParams};
use crate::{seed, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Canonical form of the generation's best tree.
    pub best_expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub best_expr: KernelExpr,
    pub best_fitness: f64,
    /// Generation 0 is the initial population.
    pub per_generation: Vec<GenerationStats>,
    /// Accuracy on the split's test items of the best tree retrained on
    /// train and validation; `None` when the split has no test items.
    pub final_test_accuracy: Option<f64>,
    /// Distinct trees whose fitness was computed.
    pub evaluations: usize,
    #[serde(skip)]
    pub final_model: Option<MulticlassModel>,
}

/// Evolves a kernel expression over `bank`. Fitness only ever sees the
/// split's training and validation items.
pub fn evolve(
    bank: &KernelBank,
    labels: &[Label],
    split: &DatasetSplit,
    gp: &GpParams,
    svm: &SvmParams,
) -> Result<EvolutionResult> {
    evolve_seeded(bank, labels, split, gp, svm, &[])
}

/// Like [`evolve`], with extra trees placed in the initial population after
/// the single-kernel leaves.
pub fn evolve_seeded(
    bank: &KernelBank,
    labels: &[Label],
    split: &DatasetSplit,
    gp: &GpParams,
    svm: &SvmParams,
    seeds: &[KernelExpr],
) -> Result<EvolutionResult> {
    gp.validate()?;
    let n = bank.len();
    for s in seeds {
        s.validate(n)?;
        if s.depth() > gp.max_depth {
            return Err(Error::Parameter(format!(
                "seed tree {s} is deeper than max_depth {}",
                gp.max_depth
            )));
        }
    }
    let ctx = FitnessContext::new(bank, labels, split, svm, gp.fitness_mode)?;
    let mut scorer = Scorer::new(&ctx);

    let mut population = ramped_population(gp, n, seed::derive_named(gp.rng_seed, "init"))?;
    let injected: Vec<KernelExpr> = gp
        .seed_leaves
        .then(|| (0..n).map(KernelExpr::leaf).collect::<Vec<_>>())
        .unwrap_or_default()
        .into_iter()
        .chain(seeds.iter().cloned())
        .collect();
    for (slot, tree) in population.iter_mut().zip(injected) {
        *slot = tree;
    }

    let mut fitness = scorer.score(&population);
    let mut history = vec![stats(0, &population, &fitness)];
    let mut best = Ranked::best_of(&population, &fitness);
    let mut stagnant = 0usize;

    for generation in 1..=gp.max_generations {
        if stagnant >= gp.stagnation_limit {
            break;
        }
        let sizes: Vec<usize> = population.iter().map(KernelExpr::node_count).collect();
        let order = ranking(&fitness, &sizes);
        let elites: Vec<KernelExpr> = order[..gp.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        let offspring = (gp.elitism..gp.population_size)
            .into_par_iter()
            .map(|slot| {
                let mut rng = seed::stream(gp.rng_seed, &[generation as u64, slot as u64]);
                breed(&population, &fitness, &sizes, gp, n, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        population = elites.into_iter().chain(offspring).collect();
        fitness = scorer.score(&population);
        history.push(stats(generation, &population, &fitness));

        let current = Ranked::best_of(&population, &fitness);
        if current.fitness > best.fitness + IMPROVEMENT_EPS {
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if current.beats(&best) {
            best = current;
        }
    }

    let pool: Vec<usize> = split.train_idx.iter().chain(&split.val_idx).copied().collect();
    let gram = best.expr.evaluate(bank)?;
    let model = train_multiclass(gram.as_matrix(), labels, &pool, svm)?;
    let final_test_accuracy = if split.test_idx.is_empty() {
        None
    } else {
        let predicted = model.predict_items(gram.as_matrix(), &split.test_idx)?;
        let actual: Vec<Label> = split.test_idx.iter().map(|&i| labels[i]).collect();
        Some(accuracy(&predicted, &actual)?)
    };

    Ok(EvolutionResult {
        best_expr: best.expr,
        best_fitness: best.fitness,
        per_generation: history,
        final_test_accuracy,
        evaluations: scorer.cache.len(),
        final_model: Some(model),
    })
}

/// One offspring: tournament parent(s), then crossover and/or mutation.
fn breed<R: Rng + ?Sized>(
    population: &[KernelExpr],
    fitness: &[f64],
    sizes: &[usize],
    gp: &GpParams,
    n: usize,
    rng: &mut R,
) -> Result<KernelExpr> {
    let first = tournament_select(fitness, sizes, gp.tournament_size, rng)?;
    let mut child = population[first].clone();
    if rng.gen_bool(gp.crossover_rate) {
        let second = tournament_select(fitness, sizes, gp.tournament_size, rng)?;
        child = crossover(&child, &population[second], rng, gp.max_depth).0;
    }
    if rng.gen_bool(gp.mutation_rate) {
        child = mutate(&child, rng, gp, n);
    }
    Ok(child)
}

/// Indices sorted best first: fitness descending, node count ascending, index ascending.
fn ranking(fitness: &[f64], sizes: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| {
        fitness[b]
            .total_cmp(&fitness[a])
            .then(sizes[a].cmp(&sizes[b]))
            .then(a.cmp(&b))
    });
    order
}

fn stats(generation: usize, population: &[KernelExpr], fitness: &[f64]) -> GenerationStats {
    let best = Ranked::best_of(population, fitness);
    GenerationStats {
        generation,
        best_fitness: best.fitness,
        mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
        best_expr: best.expr.canonical_string(),
    }
}

struct Ranked {
    expr: KernelExpr,
    fitness: f64,
    size: usize,
}

impl Ranked {
    fn best_of(population: &[KernelExpr], fitness: &[f64]) -> Self {
        let sizes: Vec<usize> = population.iter().map(KernelExpr::node_count).collect();
        let i = ranking(fitness, &sizes)[0];
        Self {
            expr: population[i].clone(),
            fitness: fitness[i],
            size: sizes[i],
        }
    }

    fn beats(&self, other: &Ranked) -> bool {
        self.fitness > other.fitness || (self.fitness == other.fitness && self.size < other.size)
    }
}

/// Fitness memoised by canonical form; new trees are scored in parallel.
struct Scorer<'a> {
    ctx: &'a FitnessContext,
    cache: HashMap<String, f64>,
}

impl<'a> Scorer<'a> {
    fn new(ctx: &'a FitnessContext) -> Self {
        Self {
            ctx,
            cache: HashMap::new(),
        }
    }

    fn score(&mut self, population: &[KernelExpr]) -> Vec<f64> {
        let keys: Vec<String> = population.iter().map(KernelExpr::canonical_string).collect();
        let mut seen = HashSet::new();
        let fresh: Vec<(&String, &KernelExpr)> = keys
            .iter()
            .zip(population)
            .filter(|(k, _)| !self.cache.contains_key(*k) && seen.insert(*k))
            .collect();
        let ctx = self.ctx;
        let scored: Vec<f64> = fresh.par_iter().map(|(_, e)| ctx.evaluate(e)).collect();
        for ((k, _), f) in fresh.into_iter().zip(scored) {
            self.cache.insert(k.clone(), f);
        }
        keys.iter().map(|k| self.cache[k]).collect()
    }
}
