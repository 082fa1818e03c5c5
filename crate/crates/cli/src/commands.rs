use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use kf_core::gp::EvolutionResult;
use kf_core::io::{load_features, load_kernel, read_labels, read_lines, save_kernel, write_features, write_lines};
use kf_core::retrieval::ids_path;
use kf_core::synthetic::{modular_views, one_informative_view};
use kf_core::{
    build_index, evolve, gaussian_bank, run_comparison, seed, summarize, FeatureMatrix, KernelBank,
    KernelExpr, Label, ProtocolConfig, QueryOrder, SimilarityIndex, SplitProtocol, SvmParams,
};
use kf_core::harness::make_splits_with;
use kf_core::GpParams;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub const MANIFEST_SCHEMA: &str = "kf-kernels-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub items: usize,
    pub kernels: Vec<KernelEntry>,
    pub labels: String,
    pub ids: Option<String>,
}

pub struct Dataset {
    pub bank: KernelBank,
    pub labels: Vec<Label>,
    pub ids: Vec<String>,
}

fn view_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Reads every descriptor CSV; all must agree on row count and labels.
fn load_views(config: &RunConfig) -> Result<(Vec<(String, FeatureMatrix)>, Vec<Label>)> {
    let mut views: Vec<(String, FeatureMatrix)> = Vec::new();
    let mut labels: Option<(PathBuf, Vec<Label>)> = None;
    let mut names = BTreeSet::new();
    for path in &config.input.features {
        let (features, file_labels) =
            load_features(path, config.input.header).map_err(CliError::data(path.display().to_string()))?;
        let name = view_name(path);
        if !names.insert(name.clone()) {
            return Err(CliError::Config(format!("two descriptor files are named '{name}'")));
        }
        if let Some((first, expected)) = &labels {
            if expected.len() != file_labels.len() {
                return Err(CliError::Data {
                    context: format!(
                        "row count mismatch: {} has {} rows, {} has {}",
                        first.display(),
                        expected.len(),
                        path.display(),
                        file_labels.len()
                    ),
                    source: kf_core::Error::Shape("descriptor files disagree".into()),
                });
            }
            if let Some(row) = expected.iter().zip(&file_labels).position(|(a, b)| a != b) {
                return Err(CliError::Data {
                    context: format!(
                        "label mismatch at row {row} between {} and {}",
                        first.display(),
                        path.display()
                    ),
                    source: kf_core::Error::Input("descriptor files disagree".into()),
                });
            }
        } else {
            labels = Some((path.clone(), file_labels));
        }
        views.push((name, features));
    }
    let (_, labels) = labels.ok_or_else(|| CliError::Config("input.features is empty".into()))?;
    Ok((views, labels))
}

fn read_label_file(path: &Path) -> Result<Vec<Label>> {
    read_labels(BufReader::new(File::open(path)?)).map_err(CliError::data(path.display().to_string()))
}

fn read_id_file(path: &Path) -> Result<Vec<String>> {
    read_lines(BufReader::new(File::open(path)?)).map_err(CliError::data(path.display().to_string()))
}

/// Kernel bank, labels and item ids from whichever input the config names.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    config.require_input()?;
    let (bank, mut labels, mut ids) = if let Some(dir) = &config.input.kernels {
        let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join("manifest.json"))?))?;
        let kernels = manifest
            .kernels
            .iter()
            .map(|k| {
                let path = dir.join(&k.file);
                load_kernel(&path)
                    .map(|g| g.with_tag(k.name.clone()))
                    .map_err(CliError::data(path.display().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = read_label_file(&dir.join(&manifest.labels))?;
        let ids = manifest.ids.as_ref().map(|f| read_id_file(&dir.join(f))).transpose()?;
        (KernelBank::new(kernels)?, labels, ids)
    } else {
        let (views, labels) = load_views(config)?;
        let (bank, _) = gaussian_bank(&views, config.kernel.gamma)?;
        (bank, labels, None)
    };
    if let Some(path) = &config.input.labels {
        labels = read_label_file(path)?;
    }
    if let Some(path) = &config.input.ids {
        ids = Some(read_id_file(path)?);
    }
    let m = bank.items();
    let ids = ids.unwrap_or_else(|| (0..m).map(|i| i.to_string()).collect());
    if labels.len() != m || ids.len() != m {
        return Err(CliError::Data {
            context: format!("{} labels and {} ids for {m} items", labels.len(), ids.len()),
            source: kf_core::Error::Shape("input sizes disagree".into()),
        });
    }
    Ok(Dataset { bank, labels, ids })
}

/// Fresh `run-<utc timestamp>-seed<seed>` directory under `out`.
fn run_dir(out: &Path, seed: u64) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("run-{stamp}-seed{seed}");
    let mut dir = out.join(&base);
    let mut n = 1;
    while dir.exists() {
        dir = out.join(format!("{base}-{n}"));
        n += 1;
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn gram(config: &RunConfig) -> Result<()> {
    config.validate()?;
    if config.input.features.is_empty() {
        return Err(CliError::Config("gram needs input.features".into()));
    }
    let (views, labels) = load_views(config)?;
    let (bank, gammas) = gaussian_bank(&views, config.kernel.gamma)?;
    let kernel_dir = config.out.join("kernels");
    fs::create_dir_all(&kernel_dir)?;
    let mut entries = Vec::new();
    for (g, gamma) in bank.kernels().iter().zip(gammas) {
        let file = format!("kernels/{}.kgm", g.tag());
        save_kernel(&config.out.join(&file), g)?;
        entries.push(KernelEntry {
            name: g.tag().to_string(),
            file,
            rows: g.size(),
            cols: g.size(),
            gamma,
        });
    }
    let label_lines: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    write_lines(BufWriter::new(File::create(config.out.join("labels.txt"))?), &label_lines)?;
    let ids = match &config.input.ids {
        Some(path) => {
            let ids = read_id_file(path)?;
            if ids.len() != labels.len() {
                return Err(CliError::Data {
                    context: format!("{} has {} ids for {} items", path.display(), ids.len(), labels.len()),
                    source: kf_core::Error::Shape("id count mismatch".into()),
                });
            }
            write_lines(BufWriter::new(File::create(config.out.join("ids.txt"))?), &ids)?;
            Some("ids.txt".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        items: labels.len(),
        kernels: entries,
        labels: "labels.txt".into(),
        ids,
    };
    write_json(&config.out.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} kernels ({}x{}) to {}",
        manifest.kernels.len(),
        manifest.items,
        manifest.items,
        config.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    best_expr: String,
    best_fitness: f64,
    final_test_accuracy: Option<f64>,
    evaluations: usize,
    generations: usize,
    kernels: Vec<&'a str>,
    train_size: usize,
    val_size: usize,
    test_size: usize,
}

pub fn evolve_cmd(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let master = config.seed()?;
    let data = load_dataset(config)?;
    let protocol = SplitProtocol {
        repeats: 1,
        ..config.protocol.clone()
    };
    let split = make_splits_with(&data.labels, &protocol, seed::derive_named(master, "split"))?
        .remove(0);
    let gp = GpParams {
        rng_seed: seed::derive_named(master, "gp"),
        ..config.gp.clone()
    };
    let svm = SvmParams {
        seed: seed::derive_named(master, "svm"),
        ..config.svm.clone()
    };
    let result: EvolutionResult = evolve(&data.bank, &data.labels, &split, &gp, &svm)?;

    let dir = run_dir(&config.out, master)?;
    let best = result.best_expr.canonical_string();
    write_text(&dir.join("best_expr.txt"), &format!("{best}\n"))?;
    let mut log = String::from("generation,best_fitness,mean_fitness,best_expr\n");
    for g in &result.per_generation {
        log.push_str(&format!(
            "{},{},{},{}\n",
            g.generation, g.best_fitness, g.mean_fitness, g.best_expr
        ));
    }
    write_text(&dir.join("evolution.csv"), &log)?;
    write_json(&dir.join("split.json"), &split)?;
    write_json(&dir.join("config.json"), config)?;
    if let Some(model) = &result.final_model {
        write_json(&dir.join("model.json"), model)?;
    }
    write_json(
        &dir.join("result.json"),
        &EvolveSummary {
            best_expr: best.clone(),
            best_fitness: result.best_fitness,
            final_test_accuracy: result.final_test_accuracy,
            evaluations: result.evaluations,
            generations: result.per_generation.len() - 1,
            kernels: data.bank.names().collect(),
            train_size: split.train_idx.len(),
            val_size: split.val_idx.len(),
            test_size: split.test_idx.len(),
        },
    )?;
    println!("best expression: {best}");
    println!("validation fitness: {:.4}", result.best_fitness);
    if let Some(acc) = result.final_test_accuracy {
        println!("test accuracy: {:.4}", acc);
    }
    println!("run directory: {}", dir.display());
    Ok(())
}

pub fn compare(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let master = config.seed()?;
    let data = load_dataset(config)?;
    let protocol = ProtocolConfig {
        protocol: config.protocol.clone(),
        gp: config.gp.clone(),
        svm: config.svm.clone(),
        grid_search_c: config.compare.grid_search_c,
        seed: master,
    };
    let report = run_comparison(&data.bank, &data.labels, &protocol)?;
    let summary = summarize(&report)?;

    let dir = run_dir(&config.out, master)?;
    write_json(&dir.join("report.json"), &report)?;
    write_text(&dir.join("summary.txt"), &summary.table)?;
    write_text(&dir.join("accuracy.csv"), &summary.accuracy_csv)?;
    write_text(&dir.join("iterations.csv"), &summary.iterations_csv)?;
    write_text(&dir.join("generations.csv"), &summary.generations_csv)?;
    write_text(&dir.join("binary.csv"), &summary.binary_csv)?;
    let logs = dir.join("evolution");
    fs::create_dir_all(&logs)?;
    for rec in &report.repeats {
        let mut log = String::from("generation,best_fitness,mean_fitness,best_expr\n");
        for g in &rec.generations {
            log.push_str(&format!(
                "{},{},{},{}\n",
                g.generation, g.best_fitness, g.mean_fitness, g.best_expr
            ));
        }
        write_text(&logs.join(format!("repeat-{:02}.csv", rec.repeat)), &log)?;
    }
    print!("{}", summary.table);
    println!("run directory: {}", dir.display());
    Ok(())
}

pub fn index(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let data = load_dataset(config)?;
    let expr = match &config.index.expr {
        Some(text) => KernelExpr::parse(text)?,
        None => KernelExpr::sum_of_leaves(data.bank.len()),
    };
    let idx = build_index(&expr, &data.bank, data.ids)?;
    fs::create_dir_all(&config.out)?;
    let path = config.out.join("index.kgm");
    idx.save(&path)?;
    println!(
        "index of {} items over {} written to {} (ids in {})",
        idx.len(),
        expr.canonical_string(),
        path.display(),
        ids_path(&path).display()
    );
    Ok(())
}

/// Exact id, then a numeric index, else a lookup error with the closest ids.
pub fn resolve_item(idx: &SimilarityIndex, item: &str) -> Result<usize> {
    if let Some(i) = idx.position(item) {
        return Ok(i);
    }
    if let Ok(i) = item.parse::<usize>() {
        if i < idx.len() {
            return Ok(i);
        }
    }
    let mut scored: Vec<(usize, &String)> = idx
        .item_ids()
        .iter()
        .map(|id| (strsim::levenshtein(item, id), id))
        .collect();
    scored.sort_by_key(|(d, _)| *d);
    Err(CliError::Lookup {
        item: item.to_string(),
        suggestions: scored.into_iter().take(3).map(|(_, id)| id.clone()).collect(),
    })
}

pub fn retrieve(index: &Path, item: &str, k: usize, order: QueryOrder) -> Result<()> {
    let idx = SimilarityIndex::load(index).map_err(CliError::data(index.display().to_string()))?;
    let i = resolve_item(&idx, item)?;
    let hits = idx.query(i, k, order)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "rank,item_id,score")?;
    for (rank, (j, score)) in hits.iter().enumerate() {
        writeln!(out, "{},{},{}", rank + 1, idx.item_ids()[*j], score)?;
    }
    Ok(())
}

fn draw(expr: &KernelExpr, prefix: &str, last: bool, root: bool, out: &mut String) {
    let (branch, next) = if root {
        ("", String::new())
    } else if last {
        ("└── ", format!("{prefix}    "))
    } else {
        ("├── ", format!("{prefix}│   "))
    };
    match expr {
        KernelExpr::Leaf(i) => out.push_str(&format!("{prefix}{branch}K{}\n", i + 1)),
        KernelExpr::Node(op, a, b) => {
            out.push_str(&format!("{prefix}{branch}{}\n", op.symbol()));
            draw(a, &next, false, false, out);
            draw(b, &next, true, false, out);
        }
    }
}

pub fn render(expr: &KernelExpr) -> String {
    let used: BTreeSet<usize> = expr.leaves().into_iter().collect();
    let used: Vec<String> = used.iter().map(|i| format!("K{}", i + 1)).collect();
    let mut out = format!(
        "expression  {}\ncanonical   {}\ndepth       {}\nnodes       {}\nkernels     {}\n\n",
        expr.to_prefix(),
        expr.canonical_string(),
        expr.depth(),
        expr.node_count(),
        used.join(", ")
    );
    draw(expr, "", true, true, &mut out);
    out
}

pub fn inspect(file: Option<&Path>, text: Option<&str>) -> Result<()> {
    let source = match (file, text) {
        (Some(path), None) => fs::read_to_string(path)?,
        (None, Some(t)) => t.to_string(),
        _ => return Err(CliError::Config("give either an expression file or --expr".into())),
    };
    let expr = KernelExpr::parse(source.trim()).map_err(CliError::data("expression"))?;
    print!("{}", render(&expr));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    /// Class depends on both views jointly; only a product kernel separates it.
    Modular,
    /// One view carries the class, the others are noise.
    Informative,
}

pub struct SynthOptions {
    pub kind: SynthKind,
    pub per_class: usize,
    pub noise: f64,
    pub views: usize,
    pub informative: usize,
    pub classes: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn synth(opts: &SynthOptions) -> Result<()> {
    let data = match opts.kind {
        SynthKind::Modular => modular_views(opts.per_class, opts.noise, opts.seed)?,
        SynthKind::Informative => one_informative_view(
            opts.classes,
            opts.per_class,
            opts.views,
            opts.informative,
            opts.noise,
            opts.seed,
        )?,
    };
    fs::create_dir_all(&opts.out)?;
    let mut files = Vec::new();
    for (name, features) in &data.views {
        let path = opts.out.join(format!("{name}.csv"));
        write_features(BufWriter::new(File::create(&path)?), features, &data.labels)?;
        files.push(format!("\"{name}.csv\""));
    }
    let ids: Vec<String> = (0..data.labels.len()).map(|i| format!("item{i:04}")).collect();
    write_lines(BufWriter::new(File::create(opts.out.join("ids.txt"))?), &ids)?;
    let config = format!(
        "seed = {}\n\n[input]\nfeatures = [{}]\nids = \"ids.txt\"\n",
        opts.seed,
        files.join(", ")
    );
    write_text(&opts.out.join("run.toml"), &config)?;
    println!(
        "wrote {} views of {} items to {}",
        data.views.len(),
        data.labels.len(),
        opts.out.display()
    );
    Ok(())
}
