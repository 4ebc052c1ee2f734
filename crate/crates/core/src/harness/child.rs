//! The sandbox side: load each suite program into the arena, run the
//! candidate, check padding and unused registers, score the outputs. Also
//! the entry point of the sandbox child process.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::batch::{execute_in_place, BatchOptions, CostMeter, DispatchCompare, LaneWidth, LANES, MATRIX_BYTES};
use crate::lgp::{DivisionTable, Instruction, Program, PADDING};
use crate::testgen::TestSuite;
use crate::toy::{self, Artifact, Trap, VmLimits};

use super::arena::{Arrays, Block, GuardedArena, Memory};
use super::counter::{CounterChoice, HwCounter, Provider};
use super::{RunStatus, StatusCode, COUNTER_FILE_ENV, MAX_INSTRUCTIONS};

/// Code under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidate {
    /// The built-in batch interpreter.
    Native(BatchOptions),
    /// A compiled toy interpreter; its `interpret(len)` is called per program.
    Toy(Artifact),
}

/// Deliberate misbehaviour for testing the sandbox. Memory probes happen
/// before the first program runs; the others after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Write the byte just below the register page (register index -1).
    RegisterMinusOne,
    /// Write the byte just past the register page.
    RegistersPastEnd,
    WriteTable,
    WriteProgram,
    /// Read the first byte outside block boundary `k` (0..6).
    ReadBoundary(usize),
    /// Overwrite one padding byte of the register page.
    Padding,
    /// Overwrite a row the program never writes.
    UnusedRegister,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown probe {0:?}")]
pub struct ProbeError(String);

impl std::str::FromStr for Probe {
    type Err = ProbeError;
    fn from_str(s: &str) -> Result<Probe, ProbeError> {
        Ok(match s {
            "regs-minus-one" => Probe::RegisterMinusOne,
            "regs-past-end" => Probe::RegistersPastEnd,
            "write-lut" => Probe::WriteTable,
            "write-prog" => Probe::WriteProgram,
            "padding" => Probe::Padding,
            "unused-register" => Probe::UnusedRegister,
            other => match other.strip_prefix("read-boundary-").and_then(|k| k.parse().ok()) {
                Some(k) if k < 6 => Probe::ReadBoundary(k),
                _ => return Err(ProbeError(s.to_string())),
            },
        })
    }
}

impl Probe {
    pub fn name(self) -> String {
        match self {
            Probe::RegisterMinusOne => "regs-minus-one".into(),
            Probe::RegistersPastEnd => "regs-past-end".into(),
            Probe::WriteTable => "write-lut".into(),
            Probe::WriteProgram => "write-prog".into(),
            Probe::ReadBoundary(k) => format!("read-boundary-{k}"),
            Probe::Padding => "padding".into(),
            Probe::UnusedRegister => "unused-register".into(),
        }
    }

    fn before_run<M: Memory>(self, mem: &mut M) -> Result<(), Trap> {
        let l = *mem.layout();
        match self {
            Probe::RegisterMinusOne => mem.write_byte(l.registers as i64 - 1, 0),
            Probe::RegistersPastEnd => mem.write_byte(l.block(Block::Registers).end as i64, 0),
            Probe::WriteTable => mem.write_byte(l.table as i64, 0),
            Probe::WriteProgram => mem.write_byte(l.program as i64, 0),
            Probe::ReadBoundary(k) => mem.read_byte(l.boundaries()[k].1).map(drop),
            Probe::Padding | Probe::UnusedRegister => Ok(()),
        }
    }

    fn after_run<M: Memory>(self, mem: &mut M, program: &Program) {
        match self {
            Probe::Padding => mem.registers()[MATRIX_BYTES + 100] = PADDING + 1,
            Probe::UnusedRegister => {
                let used = program.used();
                let r = (0..8).find(|&r| !used.contains(crate::lgp::Reg::new(r).unwrap())).expect("a free register");
                mem.registers()[r as usize * LANES] = PADDING + 1;
            }
            _ => {}
        }
    }
}

/// Result of evaluating a candidate over a whole suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub error_sum: u64,
    pub instructions: u64,
    pub provider: Provider,
}

pub(crate) enum Meter {
    Hardware(HwCounter),
    Model,
}

impl Meter {
    pub(crate) fn new(choice: CounterChoice) -> Result<Meter, String> {
        match choice {
            CounterChoice::Require(Provider::Model) => Ok(Meter::Model),
            CounterChoice::Require(Provider::Hardware) => {
                HwCounter::open().map(Meter::Hardware).map_err(|e| format!("hardware counter unavailable: {e}"))
            }
            CounterChoice::Auto => Ok(HwCounter::open().map(Meter::Hardware).unwrap_or(Meter::Model)),
        }
    }

    pub(crate) fn provider(&self) -> Provider {
        match self {
            Meter::Hardware(_) => Provider::Hardware,
            Meter::Model => Provider::Model,
        }
    }

    fn measure<T>(&mut self, f: impl FnOnce() -> (T, u64)) -> Result<(T, u64), String> {
        match self {
            Meter::Model => Ok(f()),
            Meter::Hardware(c) => {
                c.start().map_err(|e| e.to_string())?;
                let (r, _) = f();
                let n = c.stop().map_err(|e| e.to_string())?;
                Ok((r, n))
            }
        }
    }
}

fn trap_status(t: Trap) -> StatusCode {
    match t {
        Trap::Segv => StatusCode::Sigsegv,
        Trap::Fpe => StatusCode::Sigfpe,
        Trap::Abort => StatusCode::Sigabrt,
        Trap::StepLimit => StatusCode::Timeout,
    }
}

fn decode_program<M: Memory>(mem: &mut M, len: usize) -> Result<Vec<Instruction>, Trap> {
    let base = mem.layout().program as i64;
    (0..len)
        .map(|i| {
            let mut b = [0u8; 4];
            for (k, byte) in b.iter_mut().enumerate() {
                *byte = mem.read_byte(base + (4 * i + k) as i64)?;
            }
            Instruction::decode(b).ok_or(Trap::Abort)
        })
        .collect()
}

fn run_one<M: Memory>(mem: &mut M, candidate: &Candidate, len: usize, limits: &VmLimits) -> (Result<(), Trap>, u64) {
    match candidate {
        Candidate::Native(opts) => {
            let instructions = match decode_program(mem, len) {
                Ok(i) => i,
                Err(t) => return (Err(t), 0),
            };
            let (cells, lut) = mem.native_views();
            let mut meter = CostMeter::default();
            execute_in_place(&instructions, cells, lut, opts, &mut meter);
            (Ok(()), meter.count)
        }
        Candidate::Toy(art) => match toy::run(art, len as i64, &mut Arrays(mem), limits) {
            Ok((_, cost)) => (Ok(()), cost),
            Err(t) => (Err(t), 0),
        },
    }
}

/// Runs `candidate` over every program of `suite` in `mem`. A trap ends the
/// evaluation with the matching signal status; otherwise each program's
/// padding and unused rows are checked before its outputs are scored.
pub(crate) fn evaluate<M: Memory>(
    mem: &mut M,
    suite: &TestSuite,
    candidate: &Candidate,
    meter: &mut Meter,
    probe: Option<Probe>,
    max_instructions: u64,
) -> RunOutcome {
    let provider = meter.provider();
    let limits = VmLimits { max_cost: max_instructions / suite.programs.len().max(1) as u64, ..VmLimits::default() };
    let mut out = RunOutcome { status: RunStatus::ok(), error_sum: 0, instructions: 0, provider };
    let finish = |mut out: RunOutcome, code: StatusCode, detail: String| {
        out.status = RunStatus::new(code, detail);
        out
    };

    for (p, (program, cases)) in suite.programs.iter().zip(&suite.inputs).enumerate() {
        if cases.len() != LANES {
            return finish(out, StatusCode::MeasurementFailure, format!("program {} has {} cases, need {LANES}", p + 1, cases.len()));
        }
        let regs = mem.registers();
        regs.fill(PADDING);
        for (c, &(x, y)) in cases.iter().enumerate() {
            regs[program.inputs[0].index() * LANES + c] = x;
            regs[program.inputs[1].index() * LANES + c] = y;
        }
        if let Err(e) = mem.load_program(&program.encode()) {
            return finish(out, StatusCode::MeasurementFailure, e.to_string());
        }
        if p == 0 {
            if let Some(probe) = probe {
                if let Err(t) = probe.before_run(mem) {
                    return finish(out, trap_status(t), format!("probe {}", probe.name()));
                }
            }
        }

        let measured = meter.measure(|| run_one(mem, candidate, program.len(), &limits));
        let (result, count) = match measured {
            Ok(v) => v,
            Err(e) => return finish(out, StatusCode::MeasurementFailure, e),
        };
        out.instructions = out.instructions.saturating_add(count);
        if let Err(t) = result {
            return finish(out, trap_status(t), format!("program {}", p + 1));
        }
        if p == 0 {
            if let Some(probe) = probe {
                probe.after_run(mem, program);
            }
        }

        let regs = mem.registers();
        if let Some(i) = regs[MATRIX_BYTES..].iter().position(|&b| b != PADDING) {
            return finish(out, StatusCode::PaddingOverwritten, format!("program {}: padding byte {}", p + 1, MATRIX_BYTES + i));
        }
        let used = program.used();
        for r in crate::lgp::Reg::all().filter(|r| !used.contains(*r)) {
            let row = &regs[r.index() * LANES..(r.index() + 1) * LANES];
            if row.iter().any(|&b| b != PADDING) {
                return finish(out, StatusCode::RegistersCorrupted, format!("program {}: {r} changed", p + 1));
            }
        }
        for (c, exp) in suite.expected[p].iter().enumerate() {
            for r in used.iter() {
                let actual = regs[r.index() * LANES + c];
                out.error_sum += actual.abs_diff(exp.get(r)) as u64;
            }
        }
    }
    if out.error_sum > 0 {
        let e = out.error_sum;
        return finish(out, StatusCode::WrongOutput, format!("error sum {e}"));
    }
    out
}

/// Public wrapper over the evaluation loop for callers that supply their own
/// arena (tests, benchmarks).
pub fn evaluate_candidate<M: Memory>(
    mem: &mut M,
    suite: &TestSuite,
    candidate: &Candidate,
    counter: CounterChoice,
    probe: Option<Probe>,
) -> Result<RunOutcome, String> {
    let mut meter = Meter::new(counter)?;
    Ok(evaluate(mem, suite, candidate, &mut meter, probe, MAX_INSTRUCTIONS))
}

struct ChildArgs {
    suite: PathBuf,
    candidate: Candidate,
    probe: Option<Probe>,
    max_instructions: u64,
}

const USAGE: &str = "usage: run --suite FILE (--native [--width 8|16|32] [--no-mask] [--dispatch eq|ge] | --artifact FILE) [--probe NAME] [--max-instructions N]";

fn parse_args(args: &[String]) -> Result<ChildArgs, String> {
    let mut it = args.iter();
    if it.next().map(String::as_str) != Some("run") {
        return Err(USAGE.into());
    }
    let (mut suite, mut artifact, mut native, mut probe) = (None, None, false, None);
    let mut max_instructions = MAX_INSTRUCTIONS;
    let mut opts = BatchOptions::default();
    while let Some(a) = it.next() {
        let mut value = || it.next().cloned().ok_or_else(|| format!("{a} needs a value"));
        match a.as_str() {
            "--suite" => suite = Some(PathBuf::from(value()?)),
            "--artifact" => artifact = Some(PathBuf::from(value()?)),
            "--native" => native = true,
            "--width" => opts.width = value()?.parse::<LaneWidth>().map_err(|e| e.to_string())?,
            "--no-mask" => opts.redundant_mask = false,
            "--dispatch" => {
                opts.dispatch = match value()?.as_str() {
                    "eq" => DispatchCompare::Equal,
                    "ge" => DispatchCompare::AtLeast,
                    other => return Err(format!("bad dispatch {other:?}")),
                }
            }
            "--max-instructions" => max_instructions = value()?.parse().map_err(|e| format!("--max-instructions: {e}"))?,
            "--probe" => probe = Some(value()?.parse::<Probe>().map_err(|e| e.to_string())?),
            other => return Err(format!("unexpected argument {other:?}\n{USAGE}")),
        }
    }
    let suite = suite.ok_or_else(|| USAGE.to_string())?;
    let candidate = match (native, artifact) {
        (true, None) => Candidate::Native(opts),
        (false, Some(path)) => {
            let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            Candidate::Toy(Artifact::from_bytes(&bytes).map_err(|e| format!("{}: {e}", path.display()))?)
        }
        _ => return Err(USAGE.into()),
    };
    Ok(ChildArgs { suite, candidate, probe, max_instructions })
}

fn exit_now(code: i32) -> ! {
    unsafe { libc::_exit(code) }
}

fn raise(sig: libc::c_int) -> ! {
    unsafe {
        libc::signal(sig, libc::SIG_DFL);
        libc::raise(sig);
        libc::_exit(128 + sig)
    }
}

/// Written on drop. Set `GI_DROP_MARKER` to check that the child leaves via
/// the raw exit routine: the marker file must never appear.
struct DropMarker(Option<PathBuf>);

impl Drop for DropMarker {
    fn drop(&mut self) {
        if let Some(p) = &self.0 {
            let _ = std::fs::write(p, "dropped");
        }
    }
}

fn write_counters(path: &Path, out: &RunOutcome) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "status={}", out.status.code)?;
    writeln!(f, "instructions={}", out.instructions)?;
    writeln!(f, "provider={}", out.provider)?;
    writeln!(f, "error_sum={}", out.error_sum)?;
    f.sync_all()
}

/// Sandbox child entry point (`args` excludes the program name). Never
/// returns: exits with 0, 1, 3 or 4, dies by signal, or exits 2 on setup
/// failure.
pub fn child_main(args: &[String]) -> ! {
    let _marker = DropMarker(std::env::var_os("GI_DROP_MARKER").map(PathBuf::from));
    let fail = |msg: String| -> ! {
        eprintln!("gi-sandbox: {msg}");
        exit_now(2)
    };
    let args = parse_args(args).unwrap_or_else(|e| fail(e));
    let table = DivisionTable::build();
    let text = std::fs::read_to_string(&args.suite).unwrap_or_else(|e| fail(format!("{}: {e}", args.suite.display())));
    let suite = TestSuite::parse(&text, &table).unwrap_or_else(|e| fail(format!("{}: {e}", args.suite.display())));
    let choice = CounterChoice::from_env().unwrap_or_else(|e| fail(e));
    let mut meter = Meter::new(choice).unwrap_or_else(|e| fail(e));
    let max_prog = suite.programs.iter().map(|p| p.len() * 4).max().unwrap_or(0);
    let mut arena = GuardedArena::new(&table, max_prog).unwrap_or_else(|e| fail(e.to_string()));

    let out = evaluate(&mut arena, &suite, &args.candidate, &mut meter, args.probe, args.max_instructions);
    match out.status.code {
        StatusCode::Sigsegv => raise(libc::SIGSEGV),
        StatusCode::Sigfpe => raise(libc::SIGFPE),
        StatusCode::Sigabrt => raise(libc::SIGABRT),
        StatusCode::Timeout => raise(libc::SIGXCPU),
        StatusCode::MeasurementFailure => fail(out.status.detail.clone()),
        code => {
            if let Some(path) = std::env::var_os(COUNTER_FILE_ENV) {
                if let Err(e) = write_counters(Path::new(&path), &out) {
                    fail(format!("counter file: {e}"));
                }
            }
            exit_now(code.exit_code().expect("child-reported status"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::EmulatedArena;
    use crate::testgen::fixture;

    fn run(candidate: &Candidate, probe: Option<Probe>) -> RunOutcome {
        let t = DivisionTable::shared();
        let suite = fixture::suite(t);
        let mut mem = EmulatedArena::new(t, 16);
        evaluate_candidate(&mut mem, &suite, candidate, CounterChoice::Require(Provider::Model), probe).unwrap()
    }

    #[test]
    fn native_reference_passes_in_all_configurations() {
        for width in LaneWidth::ALL {
            for mask in [true, false] {
                for dispatch in [DispatchCompare::Equal, DispatchCompare::AtLeast] {
                    let opts = BatchOptions { width, redundant_mask: mask, dispatch };
                    let out = run(&Candidate::Native(opts), None);
                    assert_eq!(out.status, RunStatus::ok(), "{opts:?}");
                    assert_eq!(out.error_sum, 0);
                }
            }
        }
    }

    #[test]
    fn probes_in_emulation() {
        let native = Candidate::Native(BatchOptions::default());
        for (probe, want) in [
            (Probe::RegisterMinusOne, StatusCode::Sigsegv),
            (Probe::RegistersPastEnd, StatusCode::Sigsegv),
            (Probe::WriteTable, StatusCode::Sigsegv),
            (Probe::WriteProgram, StatusCode::Sigsegv),
            (Probe::Padding, StatusCode::PaddingOverwritten),
            (Probe::UnusedRegister, StatusCode::RegistersCorrupted),
        ] {
            assert_eq!(run(&native, Some(probe)).status.code, want, "{probe:?}");
        }
        for k in 0..6 {
            assert_eq!(run(&native, Some(Probe::ReadBoundary(k))).status.code, StatusCode::Sigsegv);
        }
    }

    #[test]
    fn probe_names_round_trip() {
        for p in [Probe::RegisterMinusOne, Probe::RegistersPastEnd, Probe::WriteTable, Probe::WriteProgram, Probe::ReadBoundary(5), Probe::Padding, Probe::UnusedRegister] {
            assert_eq!(p.name().parse::<Probe>(), Ok(p));
        }
        assert!("read-boundary-6".parse::<Probe>().is_err());
    }

    #[test]
    fn toy_candidate_outcomes() {
        let compile = |src: &str| Candidate::Toy(toy::compile(src, toy::Stage::Optimized, 8).unwrap());
        // writes nothing: every written row stays at padding, so outputs are wrong
        let out = run(&compile("fn interpret(len) { }"), None);
        assert_eq!(out.status.code, StatusCode::WrongOutput);
        assert!(out.error_sum > 0);
        let out = run(&compile("fn interpret(len) { regs[-1] = 0; }"), None);
        assert_eq!(out.status.code, StatusCode::Sigsegv);
        let out = run(&compile("fn interpret(len) { return 1 / (len - len); }"), None);
        assert_eq!(out.status.code, StatusCode::Sigfpe);
        let out = run(&compile("fn interpret(len) { while (1) { } }"), None);
        assert_eq!(out.status.code, StatusCode::Timeout);
        let out = run(&compile("fn interpret(len) { regs[4000] = 1; }"), None);
        assert_eq!(out.status.code, StatusCode::PaddingOverwritten);
    }

    #[test]
    fn model_cost_is_repeatable_and_empty_program_costs_setup() {
        let a = run(&Candidate::Native(BatchOptions::default()), None);
        let b = run(&Candidate::Native(BatchOptions::default()), None);
        assert_eq!(a.instructions, b.instructions);
        let empty = Program::new(vec![], fixture::programs()[0].inputs, fixture::programs()[0].output);
        let t = DivisionTable::shared();
        let suite = TestSuite::new(vec![empty], vec![fixture::cases(0)], None, t);
        let mut mem = EmulatedArena::new(t, 0);
        let out = evaluate_candidate(
            &mut mem,
            &suite,
            &Candidate::Native(BatchOptions::default()),
            CounterChoice::Require(Provider::Model),
            None,
        )
        .unwrap();
        assert_eq!(out.status, RunStatus::ok());
        assert_eq!(out.instructions, crate::batch::cost::SETUP);
    }
}
