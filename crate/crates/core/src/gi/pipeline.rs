//! Turning a patch into a fitness: apply, render, unoptimized build and
//! run, optimized build, comparison with the unpatched artifact, sandboxed
//! run. Results are cached by the patch's canonical text.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{OnceLock, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::harness::{
    run_emulated, run_mutant, wait_with_timeout, Candidate, CounterChoice, FitnessRecord, Limits, StatusCode,
    DEFAULT_TIMEOUT, MAX_INSTRUCTIONS,
};
use crate::lgp::DivisionTable;
use crate::testgen::TestSuite;
use crate::toy::{self, Stage};

use super::edit::{Patch, Trees};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Cache,
    CompileError,
    ObjectUnchanged,
    RuntimeError,
    AllTestsPassed,
    Timeout,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Cache,
        Outcome::CompileError,
        Outcome::ObjectUnchanged,
        Outcome::RuntimeError,
        Outcome::AllTestsPassed,
        Outcome::Timeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Cache => "cache",
            Outcome::CompileError => "compile_error",
            Outcome::ObjectUnchanged => "object_unchanged",
            Outcome::RuntimeError => "runtime_error",
            Outcome::AllTestsPassed => "all_tests_passed",
            Outcome::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of one fresh evaluation. `outcome` is never [`Outcome::Cache`];
/// cache hits are reported beside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub outcome: Outcome,
    /// Present whenever a run happened.
    pub record: Option<FitnessRecord>,
    pub applied: Vec<bool>,
    /// Build diagnostic or run detail.
    pub diagnostic: String,
}

impl Evaluation {
    fn new(outcome: Outcome, record: Option<FitnessRecord>, applied: Vec<bool>, diagnostic: impl Into<String>) -> Evaluation {
        Evaluation { outcome, record, applied, diagnostic: diagnostic.into() }
    }

    /// Fitness for acceptance; `u64::MAX` when nothing ran to completion.
    pub fn fitness(&self) -> u64 {
        self.record.as_ref().map_or(u64::MAX, |r| r.fitness)
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::AllTestsPassed
    }

    pub fn status(&self) -> Option<StatusCode> {
        self.record.as_ref().map(|r| r.status.code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SandboxMode {
    /// In-process, software-checked arena.
    Emulated,
    /// A child process of the given sandbox executable.
    Process(PathBuf),
}

/// Built-in pipeline: target trees render to one toy-language unit that is
/// compiled in-process and run against `suite`.
#[derive(Debug, Clone)]
pub struct ToyPipeline {
    pub suite: TestSuite,
    pub sandbox: SandboxMode,
    pub counter: CounterChoice,
    pub max_instructions: u64,
    pub timeout: Duration,
}

impl ToyPipeline {
    pub fn new(suite: TestSuite) -> ToyPipeline {
        ToyPipeline {
            suite,
            sandbox: SandboxMode::Emulated,
            counter: CounterChoice::Auto,
            max_instructions: MAX_INSTRUCTIONS,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// Shell-command pipeline. Templates may use `{src_dir}`, `{out_dir}`,
/// `{artifact}`, `{suite}` and `{<param>}` for each patch parameter.
#[derive(Debug, Clone)]
pub struct ExternalPipeline {
    pub build_debug: String,
    pub build_opt: String,
    pub run: String,
    /// File name of the build output inside `{out_dir}`.
    pub artifact: String,
    pub suite: Option<PathBuf>,
    pub timeout: Duration,
    pub counter: CounterChoice,
}

#[derive(Debug, Clone)]
pub enum Pipeline {
    Toy(ToyPipeline),
    External(ExternalPipeline),
}

enum Build {
    Ok(Vec<u8>),
    Failed(String),
    TimedOut,
}

/// Evaluates patches against fixed trees. Safe to share between threads.
pub struct Evaluator {
    trees: Trees,
    pipeline: Pipeline,
    defaults: BTreeMap<String, String>,
    cache: RwLock<HashMap<String, Evaluation>>,
    caching: bool,
    builds: AtomicU64,
    seq: AtomicU64,
    baseline: OnceLock<Result<Vec<u8>, String>>,
    workdir: tempfile::TempDir,
    suite_file: Option<PathBuf>,
}

impl Evaluator {
    pub fn new(trees: Trees, pipeline: Pipeline, defaults: BTreeMap<String, String>) -> std::io::Result<Evaluator> {
        let workdir = tempfile::tempdir()?;
        let suite_file = match &pipeline {
            Pipeline::Toy(t) => {
                let p = workdir.path().join("suite.txt");
                std::fs::write(&p, t.suite.to_text())?;
                Some(p)
            }
            Pipeline::External(e) => e.suite.clone(),
        };
        Ok(Evaluator {
            trees,
            pipeline,
            defaults,
            cache: RwLock::new(HashMap::new()),
            caching: true,
            builds: AtomicU64::new(0),
            seq: AtomicU64::new(0),
            baseline: OnceLock::new(),
            workdir,
            suite_file,
        })
    }

    /// Disables the cache (every evaluation is fresh).
    pub fn without_cache(mut self) -> Evaluator {
        self.caching = false;
        self
    }

    pub fn trees(&self) -> &Trees {
        &self.trees
    }

    pub fn defaults(&self) -> &BTreeMap<String, String> {
        &self.defaults
    }

    /// Build invocations so far (both stages count).
    pub fn builds(&self) -> u64 {
        self.builds.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// Cached or fresh evaluation; the flag is true on a cache hit.
    pub fn evaluate(&self, patch: &Patch) -> (Evaluation, bool) {
        let key = patch.to_text();
        if self.caching {
            if let Some(e) = self.cache.read().expect("cache lock").get(&key) {
                return (e.clone(), true);
            }
        }
        let e = self.evaluate_fresh(patch, true);
        if self.caching {
            self.cache.write().expect("cache lock").entry(key).or_insert_with(|| e.clone());
        }
        (e, false)
    }

    /// Fresh evaluation of the unpatched sources, skipping the artifact
    /// comparison.
    pub fn evaluate_baseline(&self) -> Evaluation {
        self.evaluate_fresh(&Patch::default(), false)
    }

    /// Renders `patch` onto the target trees; returns the patched trees and
    /// the per-edit applied flags.
    pub fn apply(&self, patch: &Patch) -> (Trees, Vec<bool>) {
        let mut trees = self.trees.clone();
        let applied = trees.apply_patch(patch);
        (trees, applied)
    }

    fn params(&self, patch: &Patch) -> BTreeMap<String, String> {
        let mut p = self.defaults.clone();
        p.extend(patch.params.clone());
        p
    }

    fn baseline_artifact(&self) -> &Result<Vec<u8>, String> {
        self.baseline.get_or_init(|| {
            let trees = self.trees.clone();
            match self.build(&trees, &self.defaults, Stage::Optimized, "baseline") {
                Build::Ok(b) => Ok(b),
                Build::Failed(d) => Err(d),
                Build::TimedOut => Err("baseline build timed out".into()),
            }
        })
    }

    fn evaluate_fresh(&self, patch: &Patch, compare: bool) -> Evaluation {
        let tag = format!("e{}", self.seq.fetch_add(1, Ordering::Relaxed));
        let e = self.evaluate_in(patch, compare, &tag);
        let _ = std::fs::remove_dir_all(self.workdir.path().join(&tag));
        e
    }

    fn evaluate_in(&self, patch: &Patch, compare: bool, tag: &str) -> Evaluation {
        let (trees, applied) = self.apply(patch);
        let params = self.params(patch);
        let tag = tag.to_string();

        let debug = match self.build(&trees, &params, Stage::Debug, &tag) {
            Build::Ok(a) => a,
            Build::Failed(d) => return Evaluation::new(Outcome::CompileError, None, applied, d),
            Build::TimedOut => return Evaluation::new(Outcome::Timeout, None, applied, "unoptimized build timed out"),
        };
        let first = self.run(&debug, &params, Stage::Debug, &tag);
        if !first.passed() {
            let outcome = if first.status.code == StatusCode::Timeout { Outcome::Timeout } else { Outcome::RuntimeError };
            let d = first.status.detail.clone();
            return Evaluation::new(outcome, Some(first), applied, d);
        }
        let opt = match self.build(&trees, &params, Stage::Optimized, &tag) {
            Build::Ok(a) => a,
            Build::Failed(d) => return Evaluation::new(Outcome::CompileError, None, applied, d),
            Build::TimedOut => return Evaluation::new(Outcome::Timeout, None, applied, "optimized build timed out"),
        };
        if compare {
            if let Ok(base) = self.baseline_artifact() {
                if *base == opt {
                    return Evaluation::new(Outcome::ObjectUnchanged, None, applied, "");
                }
            }
        }
        let record = self.run(&opt, &params, Stage::Optimized, &tag);
        let outcome = match record.status.code {
            StatusCode::Ok => Outcome::AllTestsPassed,
            StatusCode::Timeout => Outcome::Timeout,
            _ => Outcome::RuntimeError,
        };
        let d = record.status.detail.clone();
        Evaluation::new(outcome, Some(record), applied, d)
    }

    fn build(&self, trees: &Trees, params: &BTreeMap<String, String>, stage: Stage, tag: &str) -> Build {
        self.builds.fetch_add(1, Ordering::Relaxed);
        match &self.pipeline {
            Pipeline::Toy(_) => {
                let src: String = trees.targets.iter().map(|t| t.render()).collect::<Vec<_>>().join("\n");
                let width = match params.get("width").map(|w| w.parse::<u32>()) {
                    None => 8,
                    Some(Ok(w)) => w,
                    Some(Err(_)) => return Build::Failed(format!("bad width parameter {:?}", params["width"])),
                };
                match toy::compile(&src, stage, width) {
                    Ok(a) => Build::Ok(a.to_bytes()),
                    Err(e) => Build::Failed(e.render(&src)),
                }
            }
            Pipeline::External(ext) => self.build_external(ext, trees, params, stage, tag),
        }
    }

    fn stage_dir(&self, tag: &str, stage: Stage) -> PathBuf {
        let name = match stage {
            Stage::Debug => "debug",
            Stage::Optimized => "opt",
        };
        self.workdir.path().join(tag).join(name)
    }

    fn substitute(&self, template: &str, params: &BTreeMap<String, String>, src_dir: &Path, out_dir: &Path, artifact: &Path) -> String {
        let mut s = template
            .replace("{src_dir}", &src_dir.display().to_string())
            .replace("{out_dir}", &out_dir.display().to_string())
            .replace("{artifact}", &artifact.display().to_string());
        if let Some(suite) = &self.suite_file {
            s = s.replace("{suite}", &suite.display().to_string());
        }
        for (k, v) in params {
            s = s.replace(&format!("{{{k}}}"), v);
        }
        s
    }

    fn build_external(&self, ext: &ExternalPipeline, trees: &Trees, params: &BTreeMap<String, String>, stage: Stage, tag: &str) -> Build {
        let src_dir = self.workdir.path().join(tag).join("src");
        let out_dir = self.stage_dir(tag, stage);
        let setup = || -> std::io::Result<()> {
            std::fs::create_dir_all(&src_dir)?;
            std::fs::create_dir_all(&out_dir)?;
            for t in &trees.targets {
                std::fs::write(src_dir.join(t.file.trim_end_matches(".xml")), t.render())?;
            }
            Ok(())
        };
        if let Err(e) = setup() {
            return Build::Failed(format!("preparing sources: {e}"));
        }
        let artifact = out_dir.join(&ext.artifact);
        let template = match stage {
            Stage::Debug => &ext.build_debug,
            Stage::Optimized => &ext.build_opt,
        };
        let cmd = self.substitute(template, params, &src_dir, &out_dir, &artifact);
        let mut child = match Command::new("/bin/sh").arg("-c").arg(&cmd).stdin(Stdio::null()).stdout(Stdio::null()).stderr(Stdio::piped()).spawn() {
            Ok(c) => c,
            Err(e) => return Build::Failed(format!("spawn build: {e}")),
        };
        let mut stderr = child.stderr.take().expect("piped stderr");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let status = wait_with_timeout(&mut child, ext.timeout);
        let diag = reader.join().unwrap_or_default();
        match status {
            Ok(Some(s)) if s.success() => match std::fs::read(&artifact) {
                Ok(bytes) => Build::Ok(bytes),
                Err(e) => Build::Failed(format!("{}: {e}", artifact.display())),
            },
            Ok(Some(s)) => Build::Failed(format!("{s}: {}", diag.trim())),
            Ok(None) => Build::TimedOut,
            Err(e) => Build::Failed(format!("wait for build: {e}")),
        }
    }

    fn run(&self, artifact: &[u8], params: &BTreeMap<String, String>, stage: Stage, tag: &str) -> FitnessRecord {
        match &self.pipeline {
            Pipeline::Toy(toy) => {
                let art = match toy::Artifact::from_bytes(artifact) {
                    Ok(a) => a,
                    Err(e) => return FitnessRecord::failure(StatusCode::MeasurementFailure, e.to_string()),
                };
                match &toy.sandbox {
                    SandboxMode::Emulated => {
                        run_emulated(&toy.suite, &Candidate::Toy(art), toy.counter, DivisionTable::shared(), toy.max_instructions)
                    }
                    SandboxMode::Process(exe) => {
                        let dir = self.stage_dir(tag, stage);
                        let path = dir.join("artifact.json");
                        if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&path, artifact)) {
                            return FitnessRecord::failure(StatusCode::MeasurementFailure, e.to_string());
                        }
                        let suite = self.suite_file.as_ref().expect("toy pipeline writes its suite");
                        let args: Vec<OsString> = vec![
                            "run".into(),
                            "--suite".into(),
                            suite.into(),
                            "--artifact".into(),
                            path.into(),
                            "--max-instructions".into(),
                            toy.max_instructions.to_string().into(),
                        ];
                        run_mutant(exe, &args, &Limits { timeout: toy.timeout, counter: toy.counter })
                    }
                }
            }
            Pipeline::External(ext) => {
                let src_dir = self.workdir.path().join(tag).join("src");
                let out_dir = self.stage_dir(tag, stage);
                let cmd = self.substitute(&ext.run, params, &src_dir, &out_dir, &out_dir.join(&ext.artifact));
                run_mutant(Path::new("/bin/sh"), &["-c".into(), cmd.into()], &Limits { timeout: ext.timeout, counter: ext.counter })
            }
        }
    }
}

