//! Scenario files: INI-style sections of `key = value` pairs.
//!
//! ```text
//! [software]
//! target_files = interp.toy.xml
//! ingredient_files = intrinsics.toy.xml diffs.toy.xml
//! mode = toy                 # or external
//! suite = fixture.suite       # toy mode; default is the built-in fixture
//!
//! [search]
//! budget = 2000
//! warmup = 3
//! jobs = 1
//!
//! [edits]                    # kinds and weights; default all ten, weight 1
//! SrcmlNumericSetting = 2
//!
//! [params]                   # first value is the default
//! width = 8 16 32
//!
//! [harness]
//! counter = model            # auto, hw or model
//! timeout = 30
//! max_instructions = 100000000
//! sandbox = emulated         # or a path to the sandbox executable
//!
//! [external]
//! build_debug = cc -O0 -o {artifact} {src_dir}/main.c
//! build_opt = cc -O3 -o {artifact} {src_dir}/main.c
//! run = {artifact} {suite}
//! artifact = main
//! ```
//!
//! Relative paths are resolved against the scenario file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ini::{Ini, ParseOption};
use thiserror::Error;

use crate::harness::{CounterChoice, DEFAULT_TIMEOUT, MAX_INSTRUCTIONS};
use crate::lgp::DivisionTable;
use crate::testgen::{fixture, TestSuite};

use super::edit::{EditKind, Trees};
use super::mutate::EditWeights;
use super::pipeline::{Evaluator, ExternalPipeline, Pipeline, SandboxMode, ToyPipeline};
use super::search::{SearchConfig, DEFAULT_BUDGET, WARMUP};
use super::tree::{SourceTree, TreeError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("[{section}] {key}: {msg}")]
    Value { section: String, key: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("suite {path}: {msg}")]
    Suite { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Toy,
    External,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub dir: PathBuf,
    pub targets: Vec<PathBuf>,
    pub ingredients: Vec<PathBuf>,
    pub mode: Mode,
    pub suite: Option<PathBuf>,
    pub search: SearchConfig,
    /// Default parameter values (first listed choice).
    pub params: BTreeMap<String, String>,
    pub counter: CounterChoice,
    pub timeout: Duration,
    pub max_instructions: u64,
    pub sandbox: SandboxMode,
    pub external: Option<ExternalPipeline>,
}

fn value_err(section: &str, key: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Value { section: section.into(), key: key.into(), msg: msg.into() }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scenario::parse(&read(path)?, &dir)
    }

    pub fn parse(text: &str, dir: &Path) -> Result<Scenario, ScenarioError> {
        let opt = ParseOption { enabled_quote: false, enabled_escape: false, ..ParseOption::default() };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        let get = |section: &str, key: &str| ini.section(Some(section)).and_then(|p| p.get(key)).map(|v| strip_comment(v));
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                dir.join(p)
            }
        };
        let files = |key: &str| -> Vec<PathBuf> { get("software", key).map(|v| v.split_whitespace().map(resolve).collect()).unwrap_or_default() };
        fn num<T: std::str::FromStr>(v: Option<&str>, default: T, section: &str, key: &str) -> Result<T, ScenarioError>
        where
            T::Err: std::fmt::Display,
        {
            match v {
                None => Ok(default),
                Some(s) => s.parse().map_err(|e: T::Err| value_err(section, key, e.to_string())),
            }
        }

        let targets = files("target_files");
        if targets.is_empty() {
            return Err(value_err("software", "target_files", "at least one target file is required"));
        }
        let mode = match get("software", "mode").unwrap_or("toy") {
            "toy" => Mode::Toy,
            "external" => Mode::External,
            other => return Err(value_err("software", "mode", format!("expected toy or external, got {other:?}"))),
        };

        let mut search = SearchConfig {
            budget: num(get("search", "budget"), DEFAULT_BUDGET, "search", "budget")?,
            warmup: num(get("search", "warmup"), WARMUP, "search", "warmup")?,
            jobs: num(get("search", "jobs"), 1, "search", "jobs")?,
            ..SearchConfig::default()
        };
        if let Some(edits) = ini.section(Some("edits")) {
            let mut weights = Vec::new();
            for (k, v) in edits.iter() {
                let kind = EditKind::from_name(k.trim()).ok_or_else(|| value_err("edits", k, "unknown edit kind"))?;
                let w: f64 = strip_comment(v).parse().map_err(|e: std::num::ParseFloatError| value_err("edits", k, e.to_string()))?;
                weights.push((kind, w));
            }
            search.weights = EditWeights(weights);
        }
        let mut params = BTreeMap::new();
        if let Some(ps) = ini.section(Some("params")) {
            for (k, v) in ps.iter() {
                let choices: Vec<String> = strip_comment(v).split_whitespace().map(str::to_string).collect();
                let Some(first) = choices.first() else {
                    return Err(value_err("params", k, "needs at least one value"));
                };
                params.insert(k.to_string(), first.clone());
                search.param_choices.insert(k.to_string(), choices);
            }
        }

        let counter = match get("harness", "counter") {
            None => CounterChoice::Auto,
            Some(v) => CounterChoice::parse(v).ok_or_else(|| value_err("harness", "counter", "expected auto, hw or model"))?,
        };
        let timeout = Duration::from_secs_f64(num(get("harness", "timeout"), DEFAULT_TIMEOUT.as_secs_f64(), "harness", "timeout")?);
        let max_instructions = num(get("harness", "max_instructions"), MAX_INSTRUCTIONS, "harness", "max_instructions")?;
        let sandbox = match get("harness", "sandbox") {
            None | Some("emulated") => SandboxMode::Emulated,
            Some(p) => SandboxMode::Process(resolve(p)),
        };

        let external = match mode {
            Mode::Toy => None,
            Mode::External => {
                let need = |key: &str| get("external", key).map(str::to_string).ok_or_else(|| value_err("external", key, "required in external mode"));
                Some(ExternalPipeline {
                    build_debug: need("build_debug")?,
                    build_opt: need("build_opt")?,
                    run: need("run")?,
                    artifact: need("artifact")?,
                    suite: get("software", "suite").map(resolve),
                    timeout,
                    counter,
                })
            }
        };

        Ok(Scenario {
            dir: dir.to_path_buf(),
            targets,
            ingredients: files("ingredient_files"),
            mode,
            suite: get("software", "suite").map(resolve),
            search,
            params,
            counter,
            timeout,
            max_instructions,
            sandbox,
            external,
        })
    }

    /// Loads target and ingredient trees. `.xml` files are read as XML;
    /// anything else is parsed as toy-language source.
    pub fn load_trees(&self) -> Result<Trees, ScenarioError> {
        let load = |p: &PathBuf| -> Result<SourceTree, ScenarioError> {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let text = read(p)?;
            Ok(if name.ends_with(".xml") { SourceTree::from_xml(&name, &text)? } else { SourceTree::from_toy_source(&name, &text)? })
        };
        let targets = self.targets.iter().map(load).collect::<Result<Vec<_>, _>>()?;
        let ingredients = self.ingredients.iter().map(load).collect::<Result<Vec<_>, _>>()?;
        Ok(Trees::new(targets, ingredients))
    }

    pub fn load_suite(&self) -> Result<TestSuite, ScenarioError> {
        let table = DivisionTable::shared();
        match &self.suite {
            None => Ok(fixture::suite(table)),
            Some(p) => TestSuite::parse(&read(p)?, table).map_err(|e| ScenarioError::Suite { path: p.clone(), msg: e.to_string() }),
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline, ScenarioError> {
        Ok(match &self.external {
            Some(ext) => Pipeline::External(ext.clone()),
            None => Pipeline::Toy(ToyPipeline {
                suite: self.load_suite()?,
                sandbox: self.sandbox.clone(),
                counter: self.counter,
                max_instructions: self.max_instructions,
                timeout: self.timeout,
            }),
        })
    }

    pub fn evaluator(&self) -> Result<Evaluator, ScenarioError> {
        let trees = self.load_trees()?;
        Evaluator::new(trees, self.pipeline()?, self.params.clone()).map_err(|source| ScenarioError::Io { path: std::env::temp_dir(), source })
    }
}

/// Drops a trailing `# comment`.
fn strip_comment(v: &str) -> &str {
    v.split_once(" #").map_or(v, |(a, _)| a).trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s = Scenario::parse("[software]\ntarget_files = a.toy b.toy\n", Path::new("/x")).unwrap();
        assert_eq!(s.targets, [PathBuf::from("/x/a.toy"), PathBuf::from("/x/b.toy")]);
        assert_eq!(s.search.budget, DEFAULT_BUDGET);
        assert_eq!(s.search.warmup, WARMUP);
        assert_eq!(s.timeout, DEFAULT_TIMEOUT);
        assert_eq!(s.search.weights, EditWeights::default());
        assert_eq!(s.mode, Mode::Toy);

        let s = Scenario::parse(
            "[software]\ntarget_files = a.toy\n[search]\nbudget = 10  # short\n[edits]\nSrcmlNumericSetting = 2\nXmlNodeReplacement<number> = 1\n[params]\nwidth = 8 16 32\n[harness]\ncounter = model\ntimeout = 2.5\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(s.search.budget, 10);
        assert_eq!(s.search.weights.0.len(), 2);
        assert_eq!(s.search.weights.0[1].0, EditKind::NodeReplacement("number".into()));
        assert_eq!(s.params["width"], "8");
        assert_eq!(s.search.param_choices["width"].len(), 3);
        assert_eq!(s.counter, CounterChoice::Require(crate::harness::Provider::Model));
        assert_eq!(s.timeout, Duration::from_millis(2500));
    }

    #[test]
    fn errors() {
        assert!(Scenario::parse("[software]\n", Path::new(".")).is_err());
        assert!(Scenario::parse("[software]\ntarget_files = a\nmode = gcc\n", Path::new(".")).is_err());
        assert!(Scenario::parse("[software]\ntarget_files = a\n[edits]\nBogus = 1\n", Path::new(".")).is_err());
        assert!(Scenario::parse("[software]\ntarget_files = a\nmode = external\n", Path::new(".")).is_err());
        assert!(Scenario::parse("[software]\ntarget_files = a\n[search]\nbudget = lots\n", Path::new(".")).is_err());
    }
}
