//! Run configuration: a TOML file of flat dotted keys, `--set key=value`
//! overrides and dedicated flags, applied in that order over the defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kf_core::{GpParams, SplitProtocol, SvmParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Required; every subsystem seed is derived from it.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub input: InputConfig,
    pub kernel: KernelConfig,
    pub gp: GpParams,
    pub svm: SvmParams,
    pub protocol: SplitProtocol,
    pub compare: CompareConfig,
    pub index: IndexConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: PathBuf::from("kf-out"),
            threads: None,
            input: InputConfig::default(),
            kernel: KernelConfig::default(),
            gp: GpParams::default(),
            svm: SvmParams::default(),
            protocol: SplitProtocol::default(),
            compare: CompareConfig::default(),
            index: IndexConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// One CSV per descriptor; rows are items, the last column is the class.
    pub features: Vec<PathBuf>,
    /// Feature CSVs start with a header row.
    pub header: bool,
    /// Directory written by `kf gram`.
    pub kernels: Option<PathBuf>,
    /// One integer class per line; overrides labels from other sources.
    pub labels: Option<PathBuf>,
    /// One item id per line.
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Fixed Gaussian width for every descriptor instead of the median heuristic.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub grid_search_c: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// Prefix expression for the similarity matrix; all kernels summed when unset.
    pub expr: Option<String>,
}

/// Flag-level overrides, highest precedence.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Flattens nested tables into `a.b.c` keys; arrays stay leaves.
fn flatten(prefix: &str, value: toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match value {
        toml::Value::Table(table) => {
            for (k, v) in table {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf);
        }
    }
}

/// Input paths written in a config file are relative to that file.
fn resolve_inputs(base: &Path, flat: &mut BTreeMap<String, toml::Value>) {
    let rebase = |v: &mut toml::Value| {
        if let toml::Value::String(s) = v {
            let p = Path::new(s.as_str());
            if p.is_relative() {
                *s = base.join(p).to_string_lossy().into_owned();
            }
        }
    };
    for key in ["input.kernels", "input.labels", "input.ids"] {
        if let Some(v) = flat.get_mut(key) {
            rebase(v);
        }
    }
    if let Some(toml::Value::Array(items)) = flat.get_mut("input.features") {
        items.iter_mut().for_each(rebase);
    }
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string.
fn parse_override(text: &str) -> Result<(String, toml::Value), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{text}'")))?;
    let key = key.trim().to_string();
    if key.is_empty() {
        return Err(CliError::Config(format!("--set has an empty key in '{text}'")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

fn nest(flat: BTreeMap<String, toml::Value>) -> Result<Value, CliError> {
    let mut root = Map::new();
    for (key, value) in flat {
        let value = serde_json::to_value(&value)
            .map_err(|e| CliError::Config(format!("{key}: {e}")))?;
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("split yields at least one part");
        let mut node = &mut root;
        for part in parts {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            node = entry.as_object_mut().ok_or_else(|| {
                CliError::Config(format!("key '{key}' nests under a value that is not a table"))
            })?;
        }
        node.insert(last.to_string(), value);
    }
    Ok(Value::Object(root))
}

impl RunConfig {
    /// Merges defaults, the optional file, `--set` pairs and flags.
    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut flat = BTreeMap::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let table: toml::Table = toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            flatten("", toml::Value::Table(table), &mut flat);
            if let Some(base) = path.parent() {
                resolve_inputs(base, &mut flat);
            }
        }
        for set in &overrides.sets {
            let (k, v) = parse_override(set)?;
            flat.insert(k, v);
        }
        let mut config: RunConfig = serde_json::from_value(nest(flat)?)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(seed) = overrides.seed {
            config.seed = Some(seed);
        }
        if let Some(out) = &overrides.out {
            config.out = out.clone();
        }
        if overrides.threads.is_some() {
            config.threads = overrides.threads;
        }
        Ok(config)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("a master seed is required (seed = <n> or --seed)".into()))
    }

    /// Checks parameters and that every referenced input exists.
    pub fn validate(&self) -> Result<(), CliError> {
        self.seed()?;
        self.gp.validate()?;
        self.svm.validate()?;
        self.protocol.validate()?;
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if let Some(g) = self.kernel.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CliError::Config(format!("kernel.gamma must be positive, got {g}")));
            }
        }
        let input = &self.input;
        let paths = input
            .features
            .iter()
            .chain(&input.kernels)
            .chain(&input.labels)
            .chain(&input.ids);
        for p in paths {
            if !p.exists() {
                return Err(CliError::Config(format!("input path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Checks that some data source is configured.
    pub fn require_input(&self) -> Result<(), CliError> {
        match (&self.input.kernels, self.input.features.is_empty()) {
            (Some(_), true) | (None, false) => Ok(()),
            (Some(_), false) => Err(CliError::Config(
                "set either input.kernels or input.features, not both".into(),
            )),
            (None, true) => Err(CliError::Config(
                "no input: set input.kernels or input.features".into(),
            )),
        }
    }
}
