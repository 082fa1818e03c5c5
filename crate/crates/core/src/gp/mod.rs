//! Genetic programming over kernel-combination trees.
//!
//! Terminals are the base kernels `K1..Kn`, functions are entrywise `+` and
//! `*`, and fitness is the accuracy of a one-vs-one SVM trained on the
//! evaluated kernel.

mod evolve;
mod fitness;
mod operators;

pub use evolve::{evolve, evolve_seeded, EvolutionResult, GenerationStats};
pub use fitness::{fitness, FitnessContext};
pub use operators::{
    crossover, full_tree, grow_tree, mutate, mutate_with, ramped_population, random_tree,
    tournament_select, MutationKind,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// How a chromosome's fitness is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitnessMode {
    /// Train on the training indices, score on the validation indices.
    Validation,
    /// k-fold cross-validation over the training indices.
    KFold(usize),
    /// Leave-one-out cross-validation over the training indices.
    LeaveOneOut,
}

impl fmt::Display for FitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitnessMode::Validation => f.write_str("validation"),
            FitnessMode::KFold(k) => write!(f, "k_fold({k})"),
            FitnessMode::LeaveOneOut => f.write_str("leave_one_out"),
        }
    }
}

impl FromStr for FitnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "validation" => return Ok(FitnessMode::Validation),
            "leave_one_out" | "loo" => return Ok(FitnessMode::LeaveOneOut),
            _ => {}
        }
        let k = s
            .strip_prefix("k_fold(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|k| k.trim().parse::<usize>().ok())
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown fitness mode '{s}' (expected validation, k_fold(k) or leave_one_out)"
                ))
            })?;
        Ok(FitnessMode::KFold(k))
    }
}

impl Serialize for FitnessMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FitnessMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpParams {
    pub population_size: usize,
    /// Generations bred after the initial population.
    pub max_generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub max_depth: usize,
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    /// Stop after this many generations without a best-fitness gain above 1e-6.
    pub stagnation_limit: usize,
    pub elitism: usize,
    pub rng_seed: u64,
    pub fitness_mode: FitnessMode,
    /// Put every single-kernel tree `K1..Kn` into the initial population.
    pub seed_leaves: bool,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 30,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament_size: 3,
            max_depth: 6,
            init_depth_min: 2,
            init_depth_max: 4,
            stagnation_limit: 5,
            elitism: 1,
            rng_seed: 0,
            fitness_mode: FitnessMode::Validation,
            seed_leaves: true,
        }
    }
}

/// Minimum best-fitness gain that resets the stagnation counter.
pub const IMPROVEMENT_EPS: f64 = 1e-6;

impl GpParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Parameter(msg));
        if self.population_size == 0 {
            return fail("gp.population_size must be at least 1".into());
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("gp.{name} must be in [0, 1], got {rate}"));
            }
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return fail(format!(
                "gp.tournament_size must be in 1..={}, got {}",
                self.population_size, self.tournament_size
            ));
        }
        if self.elitism >= self.population_size {
            return fail(format!(
                "gp.elitism ({}) must be below the population size ({})",
                self.elitism, self.population_size
            ));
        }
        if self.max_depth == 0 {
            return fail("gp.max_depth must be at least 1".into());
        }
        if self.init_depth_min == 0 || self.init_depth_min > self.init_depth_max {
            return fail(format!(
                "gp init depth range ({}, {}) is empty",
                self.init_depth_min, self.init_depth_max
            ));
        }
        if self.init_depth_max > self.max_depth {
            return fail(format!(
                "gp.init_depth_max ({}) exceeds gp.max_depth ({})",
                self.init_depth_max, self.max_depth
            ));
        }
        if let FitnessMode::KFold(k) = self.fitness_mode {
            if k < 2 {
                return fail(format!("k_fold needs k >= 2, got {k}"));
            }
        }
        Ok(())
    }
}
