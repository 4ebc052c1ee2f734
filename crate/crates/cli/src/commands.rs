use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lgpgi::batch::{interpret_batch, interpret_batch_with, BatchOptions, CostMeter, LaneWidth, LANES};
use lgpgi::gi::{local_search, report, Outcome, Patch, Scenario};
use lgpgi::harness::{hardware_counter_available, run_emulated, Candidate, CounterChoice, Provider, MAX_INSTRUCTIONS};
use lgpgi::lgp::{expected_registers, DivisionTable, NUM_REGS};
use lgpgi::par::{self, Execution};
use lgpgi::testgen::{self, fixture, rng_from_seed, ProgramShape, TestSuite};
use lgpgi::toy;

use crate::{ApplyPatchArgs, BenchArgs, GenSuiteArgs, Impl, InterpretArgs, ReportArgs, SearchArgs, StageArg, SuiteArg, ToycArgs, VerifyArgs};

/// Failure caused by the machine rather than the input.
#[derive(Debug)]
pub struct EnvError(pub String);

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for EnvError {}

pub fn exit_code_of(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<EnvError>()) {
        3
    } else {
        2
    }
}

fn env_err(msg: impl Into<String>) -> anyhow::Error {
    EnvError(msg.into()).into()
}

fn write_file(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| env_err(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| env_err(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_suite(arg: &SuiteArg, table: &DivisionTable) -> Result<TestSuite> {
    match &arg.suite {
        None => Ok(fixture::suite(table)),
        Some(p) => TestSuite::parse(&read_file(p)?, table).with_context(|| format!("parsing suite {}", p.display())),
    }
}

fn width(bits: u32) -> LaneWidth {
    LaneWidth::from_bits(bits).expect("validated by the argument parser")
}

fn check_counter(choice: CounterChoice) -> Result<()> {
    if choice == CounterChoice::Require(Provider::Hardware) && !hardware_counter_available() {
        return Err(env_err("hardware instruction counter unavailable (perf_event_open failed)"));
    }
    Ok(())
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let mut s = Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))?;
    if std::env::var_os(lgpgi::harness::COUNTER_ENV).is_some() {
        let choice = CounterChoice::from_env().map_err(anyhow::Error::msg)?;
        s.counter = choice;
        if let Some(ext) = &mut s.external {
            ext.counter = choice;
        }
    }
    check_counter(s.counter)?;
    Ok(s)
}

pub fn gen_suite(a: GenSuiteArgs) -> Result<ExitCode> {
    let shape = ProgramShape { programs: a.programs, length: a.length };
    let suite = testgen::gen_suite(a.seed, &shape, a.cases, DivisionTable::shared())?;
    let text = suite.to_text();
    match &a.out {
        Some(p) => write_file(p, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn interpret(a: InterpretArgs) -> Result<ExitCode> {
    let table = DivisionTable::shared();
    let suite = load_suite(&a.suite, table)?;
    let needs_batch = a.implementation == Impl::Batch || a.compare;
    let mut mismatches = 0usize;
    for (i, (p, cases)) in suite.programs.iter().zip(&suite.inputs).enumerate() {
        if needs_batch && cases.len() != LANES {
            bail!("program {}: the batch interpreter takes exactly {LANES} cases, suite has {}", i + 1, cases.len());
        }
        let scalar: Vec<[u8; NUM_REGS]> = expected_registers(p, cases, table).iter().map(|s| s.regs).collect();
        let batch: Option<Vec<[u8; NUM_REGS]>> = needs_batch.then(|| {
            let b = interpret_batch(p, cases, table, width(a.width));
            (0..cases.len()).map(|c| b.column(c)).collect()
        });
        let shown = match a.implementation {
            Impl::Scalar => &scalar,
            Impl::Batch => batch.as_ref().expect("batch computed"),
        };
        let out: Vec<String> = shown.iter().map(|r| r[p.output.index()].to_string()).collect();
        println!("program {} output {}: {}", i + 1, p.output, out.join(" "));
        if let (true, Some(b)) = (a.compare, &batch) {
            mismatches += scalar.iter().zip(b).filter(|(s, b)| s != b).count();
        }
    }
    if let Some(path) = &a.trace {
        write_file(path, testgen::trace_csv(&testgen::trace_suite(&suite, table)))?;
    }
    if a.compare {
        println!("compare scalar vs batch W{}: {mismatches} mismatching cases", a.width);
        if mismatches > 0 {
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn bench(a: BenchArgs) -> Result<ExitCode> {
    let table = DivisionTable::shared();
    let suite = load_suite(&a.suite, table)?;
    if suite.inputs.iter().any(|c| c.len() != LANES) {
        bail!("bench needs exactly {LANES} cases per program");
    }
    let choice = match &a.counter {
        Some(c) => CounterChoice::parse(c).with_context(|| format!("--counter {c:?}: expected auto, hw or model"))?,
        None => CounterChoice::from_env().map_err(anyhow::Error::msg)?,
    };
    check_counter(choice)?;
    let opts = BatchOptions::with_width(width(a.width));
    let ops_per_pass: u64 = suite.programs.iter().zip(&suite.inputs).map(|(p, c)| (p.len() * c.len()) as u64).sum();

    let exec = if a.parallel { Execution::available() } else { Execution::Sequential };
    let start = Instant::now();
    let checks = par::map_range(exec, a.iterations as usize, |_| {
        let mut meter = CostMeter::default();
        suite.programs.iter().zip(&suite.inputs).map(|(p, c)| interpret_batch_with(p, c, table, &opts, &mut meter).cells()[0] as u64).sum::<u64>()
    });
    let secs = start.elapsed().as_secs_f64();
    std::hint::black_box(checks);
    let total_ops = ops_per_pass * a.iterations;
    println!("wall clock: {} passes in {secs:.3} s, {:.3e} GP operations/s ({})", a.iterations, total_ops as f64 / secs, if exec == Execution::Parallel { "parallel" } else { "sequential" });

    let record = run_emulated(&suite, &Candidate::Native(opts), choice, table, MAX_INSTRUCTIONS);
    if !record.passed() {
        return Err(env_err(format!("measurement run failed: {} {}", record.status.code.name(), record.status.detail)));
    }
    let provider = record.provider.map(|p| p.name()).unwrap_or("none");
    let clock = a.clock_ghz * 1e9;
    println!(
        "instruction count: {} per pass ({provider}), {:.3e} GP operations/s at {} GHz",
        record.instruction_count,
        ops_per_pass as f64 * clock / record.instruction_count as f64,
        a.clock_ghz
    );
    Ok(ExitCode::SUCCESS)
}

pub fn search(a: SearchArgs) -> Result<ExitCode> {
    let mut scenario = load_scenario(&a.scenario.scenario)?;
    if let Some(b) = a.budget {
        scenario.search.budget = b;
    }
    if let Some(j) = a.jobs {
        scenario.search.jobs = j;
    }
    let evaluator = scenario.evaluator().map_err(|e| env_err(e.to_string()))?;
    let result = local_search(&evaluator, &scenario.search, &mut rng_from_seed(a.seed));
    let (warmup, budget) = (scenario.search.warmup, scenario.search.budget);
    report::write_bundle(&a.out, &result, warmup, budget).map_err(|e| env_err(format!("{}: {e}", a.out.display())))?;
    write_file(&a.out.join("best.patch"), result.best.to_text())?;
    let delta = result.best_fitness as i128 - result.baseline as i128;
    println!("baseline {}", result.baseline);
    println!("best {} (delta {delta})", result.best_fitness);
    println!("steps {} (warmup {warmup}, budget {budget})", result.log.steps.len());
    println!("cache hits {:.1}%", 100.0 * result.log.cache_hit_fraction());
    for o in Outcome::ALL {
        println!("  {:<18} {}", o.name(), result.log.count(o));
    }
    println!("best patch: {}", result.best.edits_text());
    Ok(ExitCode::SUCCESS)
}

fn load_patch(path: &Path) -> Result<Patch> {
    Patch::parse(&read_file(path)?).with_context(|| format!("parsing patch {}", path.display()))
}

pub fn apply_patch(a: ApplyPatchArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&a.scenario.scenario).with_context(|| format!("loading scenario {}", a.scenario.scenario.display()))?;
    let patch = load_patch(&a.patch)?;
    let mut trees = scenario.load_trees()?;
    let applied = trees.apply_patch(&patch);
    for t in &trees.targets {
        let path: PathBuf = a.out.join(t.file.trim_end_matches(".xml"));
        write_file(&path, t.render())?;
        println!("wrote {}", path.display());
    }
    for (e, ok) in patch.edits.iter().zip(&applied) {
        println!("{} {e}", if *ok { "applied" } else { "skipped" });
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let scenario = load_scenario(&a.scenario.scenario)?;
    let patch = load_patch(&a.patch)?;
    let evaluator = scenario.evaluator().map_err(|e| env_err(e.to_string()))?;
    let baseline = evaluator.evaluate_baseline();
    if !baseline.passed() {
        println!("baseline fails: {} {}", baseline.outcome, baseline.diagnostic);
        return Ok(ExitCode::from(1));
    }
    let base_fit = baseline.fitness();
    let e = if patch.is_empty() && patch.params.is_empty() { baseline.clone() } else { evaluator.evaluate(&patch).0 };
    let (passed, fitness) = match e.outcome {
        // same optimized artifact as the unpatched code
        Outcome::ObjectUnchanged => (true, base_fit),
        _ => (e.passed(), e.fitness()),
    };
    println!("outcome {}", e.outcome);
    if let Some(r) = &e.record {
        println!("status {} {}", r.status.code.name(), r.status.detail);
    } else if !e.diagnostic.is_empty() {
        println!("diagnostic {}", e.diagnostic.trim());
    }
    let applied = e.applied.iter().filter(|b| **b).count();
    println!("applied {applied}/{}", e.applied.len());
    if passed {
        println!("fitness {fitness} baseline {base_fit} delta {}", fitness as i128 - base_fit as i128);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("fitness {} baseline {base_fit}", e.fitness());
        Ok(ExitCode::from(1))
    }
}

pub fn report(a: ReportArgs) -> Result<ExitCode> {
    let log = report::parse_steps_csv(&read_file(&a.log)?).with_context(|| format!("parsing {}", a.log.display()))?;
    let files = [
        ("outcomes.csv", report::outcomes_csv(&log)),
        ("best_fitness.csv", report::best_fitness_csv(&log)),
        ("lengths.csv", report::lengths_csv(&log, a.window)),
        ("runtime_status.csv", report::runtime_status_csv(&log)),
        ("provenance.csv", report::provenance_csv(&log)),
    ];
    for (name, text) in files {
        write_file(&a.out.join(name), text)?;
    }
    println!("{} steps, reports in {}", log.steps.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn toyc(a: ToycArgs) -> Result<ExitCode> {
    let src = a.sources.iter().map(|p| read_file(p)).collect::<Result<Vec<_>>>()?.join("\n");
    let stage = match a.stage {
        StageArg::Debug => toy::Stage::Debug,
        StageArg::Opt => toy::Stage::Optimized,
    };
    match toy::compile(&src, stage, a.width) {
        Ok(art) => {
            write_file(&a.out, art.to_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("{}", e.render(&src));
            Ok(ExitCode::from(1))
        }
    }
}
