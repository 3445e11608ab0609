//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by `--set section.key=value` flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use grab_core::experiment::{
    ErrorStudyConfig, GraphSpec, KernelSpec, LearnerConfig, ObservationConfig, RunConfig, SelectorConfig,
};
use grab_core::ExperimentConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Varies the BA attachment count.
    Topology,
    /// Varies the source count as a fraction of the node count.
    Sparsity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub kind: StudyKind,
    /// BA attachment counts or `T0 / N` ratios.
    pub values: Vec<f64>,
    pub observability: Vec<f64>,
    pub noise_vars: Vec<f64>,
    pub t0: usize,
    pub k: usize,
    pub mu: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub realizations: usize,
    pub graph: GraphSpec,
    pub kernel: KernelSpec,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            kind: StudyKind::Topology,
            values: vec![1.0, 3.0, 5.0],
            observability: vec![1.0, 0.4],
            noise_vars: vec![1e-2],
            t0: 25,
            k: 10,
            mu: 0.01,
            n_train: 300,
            n_test: 100,
            realizations: 50,
            graph: GraphSpec::Ba { n: 200, m0: 10, m: 1 },
            kernel: KernelSpec::Diffusion { tau: 5.0 },
        }
    }
}

impl StudySection {
    pub fn base(&self) -> ErrorStudyConfig {
        ErrorStudyConfig {
            graph: self.graph.clone(),
            kernel: self.kernel.clone(),
            mask_fraction: self.observability.first().copied().unwrap_or(1.0),
            noise_var: self.noise_vars.first().copied().unwrap_or(0.0),
            k: self.k,
            mu: self.mu,
            t0: self.t0,
            n_train: self.n_train,
            n_test: self.n_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Vec<usize>,
    /// Optimistic rounds played before the timed selection.
    pub warmup_rounds: usize,
    pub repetitions: usize,
    /// Fast selections are repeated until a timed batch lasts this long.
    pub min_batch_ms: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200, 400],
            warmup_rounds: 10,
            repetitions: 3,
            min_batch_ms: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write per-realization process, learner and selector traces.
    pub traces: bool,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            traces: false,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub graph: GraphSpec,
    pub kernel: KernelSpec,
    pub observation: ObservationConfig,
    pub learner: LearnerConfig,
    pub selector: SelectorConfig,
    pub run: RunConfig,
    pub study: StudySection,
    pub bench: BenchSection,
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            graph: e.graph,
            kernel: e.kernel,
            observation: e.observation,
            learner: e.learner,
            selector: e.selector,
            run: e.run,
            study: StudySection::default(),
            bench: BenchSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Config {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            graph: self.graph.clone(),
            kernel: self.kernel.clone(),
            observation: self.observation.clone(),
            learner: self.learner.clone(),
            selector: self.selector.clone(),
            run: self.run.clone(),
        }
    }

    /// Builds the configuration from defaults, an optional file and overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut merged = Value::try_from(Config::default()).context("serializing defaults")?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let user: Table =
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut merged, Value::Table(user), None);
        }
        for item in overrides {
            apply_override(&mut merged, item)?;
        }
        merged.try_into().context("invalid configuration")
    }
}

/// Recursively overlays `top` onto `base`. Tables merge key by key; a graph
/// or kernel table carrying a different `model` or `kind` tag replaces the
/// base outright so that fields of another variant do not leak through.
fn merge(base: &mut Value, top: Value, key: Option<&str>) {
    match (base, top) {
        (Value::Table(b), Value::Table(t)) => {
            let variant = matches!(key, Some("graph" | "kernel"));
            let retagged = variant
                && ["model", "kind"]
                    .iter()
                    .any(|tag| t.get(*tag).is_some_and(|v| b.get(*tag).is_some_and(|old| old != v)));
            if retagged {
                *b = t;
                return;
            }
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v, Some(&k)),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

fn apply_override(root: &mut Value, item: &str) -> Result<()> {
    let Some((path, raw)) = item.split_once('=') else {
        bail!("override `{item}` must look like section.key=value");
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override `{item}` has an empty key");
    }
    let raw = raw.trim();
    // Bare words such as `walk` are taken as strings.
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let table = node
            .as_table_mut()
            .with_context(|| format!("override `{item}`: `{key}` is not a section"))?;
        node = table
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
    }
    let table = node
        .as_table_mut()
        .with_context(|| format!("override `{item}`: parent is not a section"))?;
    let last = keys[keys.len() - 1];
    let mut patch = Table::new();
    patch.insert(last.to_string(), value);
    let mut current = Value::Table(std::mem::take(table));
    let parent = keys.len().checked_sub(2).map(|i| keys[i]);
    merge(&mut current, Value::Table(patch), parent);
    if let Value::Table(t) = current {
        *table = t;
    }
    Ok(())
}
