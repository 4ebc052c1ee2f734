//! Parent side: spawn the sandbox child, enforce the wall-clock limit, map
//! its exit to a status and read the counters it left behind.

use std::ffi::OsString;
use std::io::Read as _;
use std::os::unix::process::ExitStatusExt;
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use crate::lgp::DivisionTable;
use crate::testgen::TestSuite;

use super::arena::EmulatedArena;
use super::child::{evaluate, Candidate, Meter};
use super::counter::{CounterChoice, Provider};
use super::{FitnessRecord, RunStatus, StatusCode, COUNTER_ENV, COUNTER_FILE_ENV};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub timeout: Duration,
    pub counter: CounterChoice,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { timeout: DEFAULT_TIMEOUT, counter: CounterChoice::Auto }
    }
}

struct Counters {
    instructions: u64,
    error_sum: u64,
    provider: Provider,
}

fn read_counters(path: &Path) -> Result<Counters, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("counter file: {e}"))?;
    let (mut instructions, mut error_sum, mut provider) = (None, None, None);
    for line in text.lines() {
        match line.split_once('=') {
            Some(("instructions", v)) => instructions = v.parse().ok(),
            Some(("error_sum", v)) => error_sum = v.parse().ok(),
            Some(("provider", v)) => provider = Provider::parse(v),
            _ => {}
        }
    }
    match (instructions, error_sum, provider) {
        (Some(instructions), Some(error_sum), Some(provider)) => Ok(Counters { instructions, error_sum, provider }),
        _ => Err(format!("incomplete counter file: {text:?}")),
    }
}

/// Waits for `child`, killing it once `timeout` has passed (`Ok(None)`).
pub(crate) fn wait_with_timeout(child: &mut Child, timeout: Duration) -> std::io::Result<Option<ExitStatus>> {
    let deadline = Instant::now() + timeout;
    let mut pause = Duration::from_micros(200);
    loop {
        if let Some(s) = child.try_wait()? {
            return Ok(Some(s));
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        std::thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(10));
    }
}

/// Runs `program args...` as a sandbox child and scores it. The child must
/// follow the sandbox exit protocol; shell-style `128 + signal` exit codes
/// are accepted too so a wrapping `sh -c` works.
pub fn run_mutant(program: &Path, args: &[OsString], limits: &Limits) -> FitnessRecord {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return FitnessRecord::failure(StatusCode::MeasurementFailure, format!("tempdir: {e}")),
    };
    let counter_file = dir.path().join("counters");
    let mut child = match Command::new(program)
        .args(args)
        .env(COUNTER_FILE_ENV, &counter_file)
        .env(COUNTER_ENV, limits.counter.env_value())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => {
            return FitnessRecord::failure(StatusCode::MeasurementFailure, format!("spawn {}: {e}", program.display()))
        }
    };
    let mut stderr = child.stderr.take().expect("piped stderr");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let status = match wait_with_timeout(&mut child, limits.timeout) {
        Ok(s) => s,
        Err(e) => return FitnessRecord::failure(StatusCode::MeasurementFailure, format!("wait: {e}")),
    };
    let stderr = reader.join().unwrap_or_default();
    let detail = stderr.trim().to_string();

    let Some(status) = status else {
        return FitnessRecord::failure(StatusCode::Timeout, format!("killed after {:?}", limits.timeout));
    };
    let code = match (status.code(), status.signal()) {
        (_, Some(sig)) => StatusCode::from_signal(sig).ok_or(format!("killed by signal {sig}")),
        (Some(c), None) => StatusCode::from_exit_code(c).ok_or(format!("exit status {c}: {detail}")),
        (None, None) => Err("unknown exit status".to_string()),
    };
    let code = match code {
        Ok(c) => c,
        Err(msg) => return FitnessRecord::failure(StatusCode::MeasurementFailure, msg),
    };
    if code.exit_code().is_none() {
        return FitnessRecord::failure(code, detail);
    }
    match read_counters(&counter_file) {
        Ok(c) => FitnessRecord::new(RunStatus::new(code, detail), c.error_sum, c.instructions, Some(c.provider)),
        // a failing child owes no counters
        Err(_) if code != StatusCode::Ok => FitnessRecord::failure(code, detail),
        Err(e) => FitnessRecord::failure(StatusCode::MeasurementFailure, e),
    }
}

/// In-process evaluation on an [`EmulatedArena`]. Toy candidates stop with
/// a timeout once their model cost reaches `max_instructions`.
pub fn run_emulated(
    suite: &TestSuite,
    candidate: &Candidate,
    counter: CounterChoice,
    table: &DivisionTable,
    max_instructions: u64,
) -> FitnessRecord {
    let mut meter = match Meter::new(counter) {
        Ok(m) => m,
        Err(e) => return FitnessRecord::failure(StatusCode::MeasurementFailure, e),
    };
    let max_prog = suite.programs.iter().map(|p| p.len() * 4).max().unwrap_or(0);
    let mut arena = EmulatedArena::new(table, max_prog);
    let out = evaluate(&mut arena, suite, candidate, &mut meter, None, max_instructions);
    let provider = Some(out.provider);
    match out.status.code.exit_code() {
        Some(_) => FitnessRecord::new(out.status, out.error_sum, out.instructions, provider),
        None => FitnessRecord::failure(out.status.code, out.status.detail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str, timeout: Duration) -> FitnessRecord {
        let limits = Limits { timeout, counter: CounterChoice::Require(Provider::Model) };
        run_mutant(Path::new("/bin/sh"), &["-c".into(), script.into()], &limits)
    }

    #[test]
    fn maps_exit_statuses_from_a_shell() {
        let write = "printf 'instructions=7\\nerror_sum=0\\nprovider=model\\n' > \"$GI_COUNTER_FILE\"";
        let ok = sh(&format!("{write}; exit 0"), DEFAULT_TIMEOUT);
        assert_eq!(ok.status.code, StatusCode::Ok);
        assert_eq!(ok.fitness, 7);
        assert_eq!(sh("exit 1", DEFAULT_TIMEOUT).status.code, StatusCode::WrongOutput);
        assert_eq!(sh("exit 0", DEFAULT_TIMEOUT).status.code, StatusCode::MeasurementFailure);
        assert_eq!(sh("kill -SEGV $$", DEFAULT_TIMEOUT).status.code, StatusCode::Sigsegv);
        assert_eq!(sh("exit 136", DEFAULT_TIMEOUT).status.code, StatusCode::Sigfpe);
        assert_eq!(sh("kill -ABRT $$", DEFAULT_TIMEOUT).status.code, StatusCode::Sigabrt);
        assert_eq!(sh("exit 2", DEFAULT_TIMEOUT).status.code, StatusCode::MeasurementFailure);
        let slow = sh("sleep 5", Duration::from_millis(200));
        assert_eq!(slow.status.code, StatusCode::Timeout);
        assert!(slow.fitness >= super::super::PENALTY);
    }

    #[test]
    fn missing_program_is_a_measurement_failure() {
        let r = run_mutant(Path::new("/nonexistent/gi-sandbox"), &[], &Limits::default());
        assert_eq!(r.status.code, StatusCode::MeasurementFailure);
    }
}
