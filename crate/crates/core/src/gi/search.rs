//! Local search over patches: warmup on the unpatched code, then one
//! neighbor per step (append, delete or replace an edit, or re-draw a
//! parameter), accepted when no worse than the current patch.

use std::collections::BTreeMap;

use rand::Rng;

use crate::harness::StatusCode;
use crate::par::{self, Execution};

use super::edit::{Edit, Patch, Payload};
use super::mutate::{EditSampler, EditWeights};
use super::pipeline::{Evaluation, Evaluator, Outcome};

pub const WARMUP: usize = 3;
pub const DEFAULT_BUDGET: usize = 100_000;
/// Neighbor draws that may be rejected by the tabu before giving up.
const TABU_TRIES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Search steps after warmup.
    pub budget: usize,
    pub warmup: usize,
    pub weights: EditWeights,
    /// Neighbors evaluated concurrently per round; acceptance stays sequential.
    pub jobs: usize,
    /// Parameters the search may change, with their allowed values.
    pub param_choices: BTreeMap<String, Vec<String>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: DEFAULT_BUDGET, warmup: WARMUP, weights: EditWeights::default(), jobs: 1, param_choices: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Warmup,
    Append,
    Delete,
    Replace,
    Param,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Warmup, Move::Append, Move::Delete, Move::Replace, Move::Param];

    pub fn name(self) -> &'static str {
        match self {
            Move::Warmup => "warmup",
            Move::Append => "append",
            Move::Delete => "delete",
            Move::Replace => "replace",
            Move::Param => "param",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub mv: Move,
    pub patch_len: usize,
    pub cache_hit: bool,
    /// [`Outcome::Cache`] on a hit, otherwise the evaluation outcome.
    pub outcome: Outcome,
    /// The evaluation outcome, also for cache hits.
    pub evaluated: Outcome,
    pub status: Option<StatusCode>,
    pub fitness: Option<u64>,
    pub best: u64,
    pub accepted: bool,
    /// (target file, donor file) of the edit this step introduced.
    pub source: Option<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchLog {
    pub steps: Vec<StepRecord>,
}

impl SearchLog {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.steps.iter().filter(|s| s.outcome == outcome).count()
    }

    pub fn cache_hit_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.cache_hit).count() as f64 / self.steps.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub best: Patch,
    pub best_fitness: u64,
    pub baseline: u64,
    pub log: SearchLog,
}

struct Proposal {
    patch: Patch,
    mv: Move,
    removed: Option<Edit>,
    source: Option<(String, String)>,
}

fn source_of(e: &Edit) -> (String, String) {
    let donor = match &e.payload {
        Payload::Node(r) => r.file.clone(),
        _ => e.target.file.clone(),
    };
    (e.target.file.clone(), donor)
}

fn draw<R: Rng + ?Sized>(sampler: &EditSampler, rng: &mut R, avoid: &[&Edit]) -> Option<Edit> {
    (0..TABU_TRIES).filter_map(|_| sampler.sample(rng)).find(|e| !avoid.contains(&e))
}

fn propose<R: Rng + ?Sized>(
    current: &Patch,
    sampler: &EditSampler,
    config: &SearchConfig,
    defaults: &BTreeMap<String, String>,
    tabu: Option<&Edit>,
    rng: &mut R,
) -> Proposal {
    let tunable: Vec<&String> = config.param_choices.iter().filter(|(_, v)| v.len() > 1).map(|(k, _)| k).collect();
    let mut moves = vec![Move::Append];
    if !current.is_empty() {
        moves.extend([Move::Delete, Move::Replace]);
    }
    if !tunable.is_empty() {
        moves.push(Move::Param);
    }
    let mut patch = current.clone();
    let avoid: Vec<&Edit> = tabu.into_iter().collect();
    match moves[rng.gen_range(0..moves.len())] {
        Move::Append => {
            if let Some(e) = draw(sampler, rng, &avoid) {
                let source = Some(source_of(&e));
                patch.edits.push(e);
                return Proposal { patch, mv: Move::Append, removed: None, source };
            }
        }
        Move::Delete => {
            let i = rng.gen_range(0..patch.len());
            let removed = patch.edits.remove(i);
            return Proposal { patch, mv: Move::Delete, removed: Some(removed), source: None };
        }
        Move::Replace => {
            let i = rng.gen_range(0..patch.len());
            let old = patch.edits[i].clone();
            let mut avoid = avoid.clone();
            avoid.push(&old);
            if let Some(e) = draw(sampler, rng, &avoid) {
                let source = Some(source_of(&e));
                patch.edits[i] = e;
                return Proposal { patch, mv: Move::Replace, removed: Some(old), source };
            }
        }
        Move::Param => {
            let key = tunable[rng.gen_range(0..tunable.len())];
            let choices = &config.param_choices[key];
            let now = patch.params.get(key).or_else(|| defaults.get(key)).unwrap_or(&choices[0]).clone();
            let others: Vec<&String> = choices.iter().filter(|c| **c != now).collect();
            let v = others[rng.gen_range(0..others.len())].clone();
            if defaults.get(key) == Some(&v) {
                patch.params.remove(key);
            } else {
                patch.params.insert(key.clone(), v);
            }
            return Proposal { patch, mv: Move::Param, removed: None, source: Some(("params".into(), "params".into())) };
        }
        Move::Warmup => unreachable!(),
    }
    // nothing could be drawn: re-propose the current patch
    Proposal { patch, mv: Move::Append, removed: None, source: None }
}

fn record(step: usize, mv: Move, patch: &Patch, e: &Evaluation, hit: bool, source: Option<(String, String)>) -> StepRecord {
    StepRecord {
        step,
        mv,
        patch_len: patch.len(),
        cache_hit: hit,
        outcome: if hit { Outcome::Cache } else { e.outcome },
        evaluated: e.outcome,
        status: e.status(),
        fitness: e.record.as_ref().map(|r| r.fitness),
        best: 0,
        accepted: false,
        source,
    }
}

/// Runs warmup plus `config.budget` steps. Deterministic for a given rng
/// state and configuration, whatever `jobs` parallelism is available.
pub fn local_search<R: Rng + ?Sized>(evaluator: &Evaluator, config: &SearchConfig, rng: &mut R) -> SearchResult {
    let mut log = SearchLog::default();
    let mut fits = Vec::new();
    for step in 0..config.warmup.max(1) {
        let e = evaluator.evaluate_baseline();
        fits.push(e.fitness());
        if step < config.warmup {
            let mut r = record(step, Move::Warmup, &Patch::default(), &e, false, None);
            r.accepted = true;
            log.steps.push(r);
        }
    }
    fits.sort_unstable();
    let baseline = fits[fits.len() / 2];
    for s in &mut log.steps {
        s.best = baseline;
    }

    let sampler = EditSampler::new(evaluator.trees(), &config.weights);
    let defaults = evaluator.defaults();
    let (mut current, mut current_fit) = (Patch::default(), baseline);
    let (mut best, mut best_fit) = (Patch::default(), baseline);
    let mut tabu: Option<Edit> = None;
    let jobs = config.jobs.max(1);
    let exec = if jobs > 1 { Execution::available() } else { Execution::Sequential };

    let mut done = 0;
    while done < config.budget {
        let n = jobs.min(config.budget - done);
        let proposals: Vec<Proposal> = (0..n).map(|_| propose(&current, &sampler, config, defaults, tabu.as_ref(), rng)).collect();
        let results = par::map(exec, &proposals, |p| evaluator.evaluate(&p.patch));
        let base = log.steps.len();
        for (p, (e, hit)) in proposals.iter().zip(&results) {
            log.steps.push(record(log.steps.len(), p.mv, &p.patch, e, *hit, p.source.clone()));
        }
        // the first of the fittest neighbors, if it is no worse than current
        let pick = (0..n).min_by_key(|&i| (results[i].0.fitness(), i)).filter(|&i| results[i].0.fitness() <= current_fit);
        if let Some(i) = pick {
            let p = &proposals[i];
            current = p.patch.clone();
            current_fit = results[i].0.fitness();
            if let Some(r) = &p.removed {
                tabu = Some(r.clone());
            }
            log.steps[base + i].accepted = true;
            if current_fit < best_fit {
                best = current.clone();
                best_fit = current_fit;
            }
        }
        for s in &mut log.steps[base..] {
            s.best = best_fit;
        }
        done += n;
    }
    SearchResult { best, best_fitness: best_fit, baseline, log }
}
