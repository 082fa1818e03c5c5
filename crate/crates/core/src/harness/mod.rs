//! Repeated-split comparison of three kernels: the plain sum of all base
//! kernels, the best single base kernel, and the evolved combination.

mod split;

pub use split::{make_splits, make_splits_with, DatasetSplit, SplitProtocol};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::KernelExpr;
use crate::gp::{evolve, FitnessContext, FitnessMode, GenerationStats, GpParams};
use crate::kernel::{GramMatrix, KernelBank};
use crate::svm::{accuracy, train_multiclass, PairAccuracy, SvmParams};
use crate::{seed, Label};

pub const REPORT_SCHEMA: &str = "kf-report-1";

/// Candidate box constraints tried when C is tuned on validation.
pub const C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

pub const METHODS: [&str; 3] = ["addition", "best_single", "evolved"];

/// Entrywise sum of every kernel in the bank, folded left to right.
pub fn addition_kernel(bank: &KernelBank) -> Result<GramMatrix> {
    KernelExpr::sum_of_leaves(bank.len()).evaluate(bank)
}

/// Base kernel with the highest validation accuracy; ties go to the smaller index.
/// Scored exactly as the single-leaf chromosome would be.
pub fn best_single_kernel(
    bank: &KernelBank,
    labels: &[Label],
    split: &DatasetSplit,
    svm: &SvmParams,
) -> Result<(usize, f64)> {
    let ctx = FitnessContext::new(bank, labels, split, svm, FitnessMode::Validation)?;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..bank.len() {
        let score = ctx.try_evaluate(&KernelExpr::leaf(i))?;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: SplitProtocol,
    pub gp: GpParams,
    pub svm: SvmParams,
    /// Tune C over [`C_GRID`] on validation for each method's final model.
    pub grid_search_c: bool,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: SplitProtocol::default(),
            gp: GpParams::default(),
            svm: SvmParams::default(),
            grid_search_c: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    /// Canonical expression of the kernel used.
    pub expr: String,
    pub c: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub pairwise: Vec<PairAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub split_seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub addition: MethodOutcome,
    pub best_single: MethodOutcome,
    pub evolved: MethodOutcome,
    pub evolved_fitness: f64,
    pub generations: Vec<GenerationStats>,
}

impl RepeatRecord {
    pub fn outcome(&self, method: &str) -> Option<&MethodOutcome> {
        match method {
            "addition" => Some(&self.addition),
            "best_single" => Some(&self.best_single),
            "evolved" => Some(&self.evolved),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub per_repeat: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repeat.
    pub std: f64,
}

impl MethodSummary {
    pub fn from_values(method: &str, per_repeat: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_repeat);
        Self {
            method: method.to_string(),
            per_repeat,
            mean,
            std,
        }
    }
}

/// Mean and sample (n - 1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: String,
    pub config: ProtocolConfig,
    pub kernels: Vec<String>,
    pub items: usize,
    pub methods: Vec<MethodSummary>,
    pub repeats: Vec<RepeatRecord>,
}

impl ComparisonReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Runs the full protocol: stratified splits, then per repeat the two
/// baselines and one evolution run. Every final model is fitted on train and
/// validation together and scored on the test items only.
pub fn run_comparison(
    bank: &KernelBank,
    labels: &[Label],
    config: &ProtocolConfig,
) -> Result<ComparisonReport> {
    config.gp.validate()?;
    config.svm.validate()?;
    if bank.items() != labels.len() {
        return Err(Error::Shape(format!(
            "bank covers {} items but there are {} labels",
            bank.items(),
            labels.len()
        )));
    }
    let splits = make_splits_with(labels, &config.protocol, config.seed)?;
    let repeats = splits
        .par_iter()
        .enumerate()
        .map(|(r, split)| {
            run_repeat(bank, labels, config, r, split).map_err(|e| Error::Repeat {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let methods = METHODS
        .iter()
        .map(|&m| {
            let values = repeats
                .iter()
                .map(|r| r.outcome(m).expect("known method").test_accuracy)
                .collect();
            MethodSummary::from_values(m, values)
        })
        .collect();

    Ok(ComparisonReport {
        schema: REPORT_SCHEMA.to_string(),
        config: config.clone(),
        kernels: bank.names().map(str::to_string).collect(),
        items: labels.len(),
        methods,
        repeats,
    })
}

fn run_repeat(
    bank: &KernelBank,
    labels: &[Label],
    config: &ProtocolConfig,
    r: usize,
    split: &DatasetSplit,
) -> Result<RepeatRecord> {
    split.validate(labels.len())?;
    let svm = SvmParams {
        seed: seed::derive(config.seed, &[r as u64, 1]),
        ..config.svm.clone()
    };
    let gp = GpParams {
        rng_seed: seed::derive(config.seed, &[r as u64, 2]),
        ..config.gp.clone()
    };
    let grid: Vec<f64> = if config.grid_search_c {
        C_GRID.to_vec()
    } else {
        vec![svm.c]
    };
    let contexts = grid
        .iter()
        .map(|&c| {
            let svm_c = SvmParams { c, ..svm.clone() };
            FitnessContext::new(bank, labels, split, &svm_c, FitnessMode::Validation)
        })
        .collect::<Result<Vec<_>>>()?;

    let sum = KernelExpr::sum_of_leaves(bank.len());
    let (c, val) = tune(&sum, &grid, &contexts);
    let addition = finish(bank, labels, split, &svm, &sum, c, val)?;

    let mut single = (KernelExpr::leaf(0), grid[0], f64::NEG_INFINITY);
    for i in 0..bank.len() {
        let leaf = KernelExpr::leaf(i);
        let (c, val) = tune(&leaf, &grid, &contexts);
        if val > single.2 {
            single = (leaf, c, val);
        }
    }
    let best_single = finish(bank, labels, split, &svm, &single.0, single.1, single.2)?;

    let evo = evolve(bank, labels, split, &gp, &svm)?;
    let (c, val) = tune(&evo.best_expr, &grid, &contexts);
    let evolved = finish(bank, labels, split, &svm, &evo.best_expr, c, val)?;

    Ok(RepeatRecord {
        repeat: r,
        split_seed: split.seed,
        train_size: split.train_idx.len(),
        val_size: split.val_idx.len(),
        test_size: split.test_idx.len(),
        addition,
        best_single,
        evolved,
        evolved_fitness: evo.best_fitness,
        generations: evo.per_generation,
    })
}

/// Best validation accuracy over the C grid; ties keep the earlier C.
fn tune(expr: &KernelExpr, grid: &[f64], contexts: &[FitnessContext]) -> (f64, f64) {
    let mut best = (grid[0], f64::NEG_INFINITY);
    for (&c, ctx) in grid.iter().zip(contexts) {
        let v = ctx.evaluate(expr);
        if v > best.1 {
            best = (c, v);
        }
    }
    best
}

fn finish(
    bank: &KernelBank,
    labels: &[Label],
    split: &DatasetSplit,
    svm: &SvmParams,
    expr: &KernelExpr,
    c: f64,
    validation_accuracy: f64,
) -> Result<MethodOutcome> {
    if split.test_idx.is_empty() {
        return Err(Error::Input("comparison needs test items in every split".into()));
    }
    let pool = split.fit_pool();
    debug_assert!(pool.iter().all(|i| !split.test_idx.contains(i)));
    let gram = expr.evaluate(bank)?;
    let gram = gram.as_matrix();
    let svm = SvmParams { c, ..svm.clone() };
    let model = train_multiclass(gram, labels, &pool, &svm)?;
    let predicted = model.predict_items(gram, &split.test_idx)?;
    let actual: Vec<Label> = split.test_idx.iter().map(|&i| labels[i]).collect();
    Ok(MethodOutcome {
        expr: expr.canonical_string(),
        c,
        validation_accuracy,
        test_accuracy: accuracy(&predicted, &actual)?,
        pairwise: model.pairwise_accuracy(gram, labels, &split.test_idx)?,
    })
}

/// Text and CSV renderings of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Percentage accuracy table, one row per method.
    pub table: String,
    /// `method,repeat,accuracy`.
    pub accuracy_csv: String,
    /// Running mean test accuracy per method after each repeat.
    pub iterations_csv: String,
    /// Best and mean fitness per GP generation, per repeat.
    pub generations_csv: String,
    /// Mean test accuracy of each binary problem per method.
    pub binary_csv: String,
}

pub fn summarize(report: &ComparisonReport) -> Result<Summary> {
    let mut table = format!("{:<14}{}\n", "kernel", "accuracy (%)");
    for m in &report.methods {
        table.push_str(&format!(
            "{:<14}{:.2}±{:.2}\n",
            m.method,
            m.mean * 100.0,
            m.std * 100.0
        ));
    }

    let mut acc = csv::Writer::from_writer(Vec::new());
    acc.write_record(["method", "repeat", "accuracy"])?;
    for m in &report.methods {
        for (r, v) in m.per_repeat.iter().enumerate() {
            acc.write_record([m.method.clone(), r.to_string(), v.to_string()])?;
        }
    }

    let mut iters = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["repeat".to_string()];
    header.extend(METHODS.iter().map(|m| m.to_string()));
    iters.write_record(&header)?;
    for r in 0..report.repeats.len() {
        let mut row = vec![(r + 1).to_string()];
        for m in &report.methods {
            let (mean, _) = mean_std(&m.per_repeat[..=r]);
            row.push(mean.to_string());
        }
        iters.write_record(&row)?;
    }

    let mut gens = csv::Writer::from_writer(Vec::new());
    gens.write_record(["repeat", "generation", "best_fitness", "mean_fitness", "best_expr"])?;
    for rec in &report.repeats {
        for g in &rec.generations {
            gens.write_record([
                rec.repeat.to_string(),
                g.generation.to_string(),
                g.best_fitness.to_string(),
                g.mean_fitness.to_string(),
                g.best_expr.clone(),
            ])?;
        }
    }

    let mut binary = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["problem", "negative", "positive"];
    header.extend(METHODS);
    binary.write_record(&header)?;
    if let Some(first) = report.repeats.first() {
        for (k, pair) in first.addition.pairwise.iter().enumerate() {
            let mut row = vec![
                (k + 1).to_string(),
                pair.negative.to_string(),
                pair.positive.to_string(),
            ];
            for m in METHODS {
                let values: Vec<f64> = report
                    .repeats
                    .iter()
                    .filter_map(|r| r.outcome(m)?.pairwise.get(k)?.accuracy)
                    .collect();
                row.push(if values.is_empty() {
                    String::new()
                } else {
                    mean_std(&values).0.to_string()
                });
            }
            binary.write_record(&row)?;
        }
    }

    let text = |w: csv::Writer<Vec<u8>>| -> Result<String> {
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Format(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    };
    Ok(Summary {
        table,
        accuracy_csv: text(acc)?,
        iterations_csv: text(iters)?,
        generations_csv: text(gens)?,
        binary_csv: text(binary)?,
    })
}
