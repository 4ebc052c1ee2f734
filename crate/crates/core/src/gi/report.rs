//! CSV summaries of a search log.

use std::collections::BTreeMap;
use std::path::Path;

use crate::harness::StatusCode;

use super::pipeline::Outcome;
use thiserror::Error;

use super::search::{Move, SearchLog, SearchResult, StepRecord};

pub const LENGTH_WINDOW: usize = 5000;

fn to_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn writer(header: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    w
}

/// Steps per outcome class. Header only for an empty log.
pub fn outcomes_csv(log: &SearchLog) -> String {
    let mut w = writer(&["outcome", "count"]);
    if !log.steps.is_empty() {
        for o in Outcome::ALL {
            w.write_record([o.name(), &log.count(o).to_string()]).expect("in-memory write");
        }
    }
    to_string(w)
}

pub fn best_fitness_csv(log: &SearchLog) -> String {
    let mut w = writer(&["step", "move", "fitness", "best"]);
    for s in &log.steps {
        let fit = s.fitness.map(|f| f.to_string()).unwrap_or_default();
        w.write_record([s.step.to_string(), s.mv.name().to_string(), fit, s.best.to_string()]).expect("in-memory write");
    }
    to_string(w)
}

/// Mean patch length of passing and failing mutants per window of search
/// steps (warmup excluded), and the difference fail mean minus pass mean.
pub fn lengths_csv(log: &SearchLog, window: usize) -> String {
    let mut w = writer(&["window_start", "window_end", "pass_mean", "fail_mean", "diff"]);
    let steps: Vec<_> = log.steps.iter().filter(|s| s.mv != Move::Warmup).collect();
    for (k, chunk) in steps.chunks(window.max(1)).enumerate() {
        let mean = |pass: bool| {
            let v: Vec<usize> = chunk.iter().filter(|s| (s.evaluated == Outcome::AllTestsPassed) == pass).map(|s| s.patch_len).collect();
            (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64)
        };
        let (p, f) = (mean(true), mean(false));
        let fmt = |x: Option<f64>| x.map(|x| format!("{x:.4}")).unwrap_or_default();
        let diff = match (p, f) {
            (Some(p), Some(f)) => Some(f - p),
            _ => None,
        };
        let start = k * window;
        w.write_record([start.to_string(), (start + chunk.len()).to_string(), fmt(p), fmt(f), fmt(diff)]).expect("in-memory write");
    }
    to_string(w)
}

/// Run statuses of freshly evaluated steps.
pub fn runtime_status_csv(log: &SearchLog) -> String {
    let mut w = writer(&["status", "exit_status", "count"]);
    let mut counts: BTreeMap<StatusCode, usize> = BTreeMap::new();
    for s in log.steps.iter().filter(|s| !s.cache_hit) {
        if let Some(st) = s.status {
            *counts.entry(st).or_default() += 1;
        }
    }
    for (st, n) in counts {
        let code = st.shell_status().map(|c| c.to_string()).unwrap_or_default();
        w.write_record([st.name().to_string(), code, n.to_string()]).expect("in-memory write");
    }
    to_string(w)
}

/// Where freshly evaluated edits came from: target file, ok/err, donor
/// file, count and percentage of all such steps.
pub fn provenance_csv(log: &SearchLog) -> String {
    let mut w = writer(&["target", "result", "source", "count", "percent"]);
    let mut counts: BTreeMap<(String, &str, String), usize> = BTreeMap::new();
    for s in log.steps.iter().filter(|s| !s.cache_hit) {
        if let Some((t, d)) = &s.source {
            let result = if s.evaluated == Outcome::AllTestsPassed { "ok" } else { "err" };
            *counts.entry((t.clone(), result, d.clone())).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    for ((t, r, d), n) in counts {
        let pct = 100.0 * n as f64 / total as f64;
        w.write_record([t, r.to_string(), d, n.to_string(), format!("{pct:.2}")]).expect("in-memory write");
    }
    to_string(w)
}

const STEP_HEADER: [&str; 12] =
    ["step", "move", "patch_len", "cache_hit", "outcome", "evaluated", "status", "fitness", "best", "accepted", "target", "donor"];

/// The full step log, one row per step; [`parse_steps_csv`] reads it back.
pub fn steps_csv(log: &SearchLog) -> String {
    let mut w = writer(&STEP_HEADER);
    for s in &log.steps {
        let (t, d) = s.source.clone().unwrap_or_default();
        w.write_record([
            s.step.to_string(),
            s.mv.name().to_string(),
            s.patch_len.to_string(),
            s.cache_hit.to_string(),
            s.outcome.name().to_string(),
            s.evaluated.name().to_string(),
            s.status.map(|c| c.name().to_string()).unwrap_or_default(),
            s.fitness.map(|f| f.to_string()).unwrap_or_default(),
            s.best.to_string(),
            s.accepted.to_string(),
            t,
            d,
        ])
        .expect("in-memory write");
    }
    to_string(w)
}

#[derive(Debug, Error)]
pub enum StepsCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: bad {column} {value:?}")]
    Field { row: usize, column: &'static str, value: String },
}

pub fn parse_steps_csv(text: &str) -> Result<SearchLog, StepsCsvError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut steps = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| StepsCsvError::Field { row: row + 1, column: STEP_HEADER[i], value: field(i).to_string() };
        let num = |i: usize| field(i).parse::<u64>().map_err(|_| bad(i));
        let flag = |i: usize| field(i).parse::<bool>().map_err(|_| bad(i));
        let outcome = |i: usize| Outcome::ALL.into_iter().find(|o| o.name() == field(i)).ok_or_else(|| bad(i));
        let opt = |i: usize| (!field(i).is_empty()).then(|| field(i));
        steps.push(StepRecord {
            step: num(0)? as usize,
            mv: Move::ALL.into_iter().find(|m| m.name() == field(1)).ok_or_else(|| bad(1))?,
            patch_len: num(2)? as usize,
            cache_hit: flag(3)?,
            outcome: outcome(4)?,
            evaluated: outcome(5)?,
            status: match opt(6) {
                None => None,
                Some(v) => Some(StatusCode::ALL.into_iter().find(|c| c.name() == v).ok_or_else(|| bad(6))?),
            },
            fitness: opt(7).map(|_| num(7)).transpose()?,
            best: num(8)?,
            accepted: flag(9)?,
            source: opt(10).map(|t| (t.to_string(), field(11).to_string())),
        });
    }
    Ok(SearchLog { steps })
}

pub fn summary_csv(result: &SearchResult, warmup: usize, budget: usize) -> String {
    let mut w = writer(&["key", "value"]);
    let rows = [
        ("baseline", result.baseline.to_string()),
        ("best_fitness", result.best_fitness.to_string()),
        ("warmup", warmup.to_string()),
        ("budget", budget.to_string()),
        ("steps", result.log.steps.len().to_string()),
        ("cache_hit_fraction", format!("{:.4}", result.log.cache_hit_fraction())),
        ("best_patch", result.best.edits_text()),
    ];
    for (k, v) in rows {
        w.write_record([k, &v]).expect("in-memory write");
    }
    to_string(w)
}

/// All report files, by file name.
pub fn bundle(result: &SearchResult, warmup: usize, budget: usize) -> Vec<(&'static str, String)> {
    let log = &result.log;
    vec![
        ("outcomes.csv", outcomes_csv(log)),
        ("best_fitness.csv", best_fitness_csv(log)),
        ("lengths.csv", lengths_csv(log, LENGTH_WINDOW)),
        ("runtime_status.csv", runtime_status_csv(log)),
        ("provenance.csv", provenance_csv(log)),
        ("summary.csv", summary_csv(result, warmup, budget)),
        ("steps.csv", steps_csv(log)),
    ]
}

pub fn write_bundle(dir: &Path, result: &SearchResult, warmup: usize, budget: usize) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in bundle(result, warmup, budget) {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
