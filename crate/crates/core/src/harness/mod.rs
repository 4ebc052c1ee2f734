//! Sandboxed fitness evaluation.
//!
//! A candidate interpreter runs against every suite program inside an
//! [`arena`]: a page-aligned mapping holding the register matrix, the
//! division table and the encoded program, each fenced by inaccessible
//! guard pages. After each program the harness checks the padding bytes,
//! then the registers the program never writes, then scores the rest
//! against the oracle. The outcome is a [`FitnessRecord`].
//!
//! Candidates normally run in a child process ([`run_mutant`]) so faults
//! kill only the child; [`run_emulated`] runs the same checks in-process
//! against a software-checked copy of the layout.

pub mod arena;
mod child;
mod counter;
mod runner;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use arena::{Block, EmulatedArena, GuardedArena, Layout, Memory, PAGE_SIZE};
pub use child::{child_main, evaluate_candidate, Candidate, Probe, ProbeError, RunOutcome};
pub use counter::{hardware_counter_available, CounterChoice, HwCounter, Provider};
pub use runner::{run_emulated, run_mutant, Limits, DEFAULT_TIMEOUT};
pub(crate) use runner::wait_with_timeout;

/// Added to the error sum of every failing run. Legitimate instruction
/// counts are capped well below it.
pub const PENALTY: u64 = 1_000_000_000;

/// Runs whose instruction count reaches this are treated as timeouts so
/// every passing fitness stays below [`PENALTY`].
pub const MAX_INSTRUCTIONS: u64 = 100_000_000;

/// Environment variable selecting the counter provider (`hw` or `model`).
pub const COUNTER_ENV: &str = "GI_COUNTER";
/// Environment variable naming the child's key=value counter file.
pub const COUNTER_FILE_ENV: &str = "GI_COUNTER_FILE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatusCode {
    Ok,
    WrongOutput,
    PaddingOverwritten,
    RegistersCorrupted,
    Sigsegv,
    Sigfpe,
    Sigabrt,
    Timeout,
    MeasurementFailure,
}

impl StatusCode {
    pub const ALL: [StatusCode; 9] = [
        StatusCode::Ok,
        StatusCode::WrongOutput,
        StatusCode::PaddingOverwritten,
        StatusCode::RegistersCorrupted,
        StatusCode::Sigsegv,
        StatusCode::Sigfpe,
        StatusCode::Sigabrt,
        StatusCode::Timeout,
        StatusCode::MeasurementFailure,
    ];

    /// Child exit code for the statuses the child reports itself.
    pub fn exit_code(self) -> Option<i32> {
        match self {
            StatusCode::Ok => Some(0),
            StatusCode::WrongOutput => Some(1),
            StatusCode::PaddingOverwritten => Some(3),
            StatusCode::RegistersCorrupted => Some(4),
            _ => None,
        }
    }

    /// Shell-style status: exit code, or 128 + signal number.
    pub fn shell_status(self) -> Option<i32> {
        match self {
            StatusCode::Sigsegv => Some(128 + libc::SIGSEGV),
            StatusCode::Sigfpe => Some(128 + libc::SIGFPE),
            StatusCode::Sigabrt => Some(128 + libc::SIGABRT),
            other => other.exit_code(),
        }
    }

    pub fn from_exit_code(code: i32) -> Option<StatusCode> {
        match code {
            0 => Some(StatusCode::Ok),
            1 => Some(StatusCode::WrongOutput),
            3 => Some(StatusCode::PaddingOverwritten),
            4 => Some(StatusCode::RegistersCorrupted),
            c if c > 128 && c < 160 => StatusCode::from_signal(c - 128),
            _ => None,
        }
    }

    pub fn from_signal(sig: i32) -> Option<StatusCode> {
        match sig {
            libc::SIGSEGV | libc::SIGBUS => Some(StatusCode::Sigsegv),
            libc::SIGFPE => Some(StatusCode::Sigfpe),
            libc::SIGABRT => Some(StatusCode::Sigabrt),
            libc::SIGXCPU | libc::SIGKILL => Some(StatusCode::Timeout),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StatusCode::Ok => "ok",
            StatusCode::WrongOutput => "wrong_output",
            StatusCode::PaddingOverwritten => "padding_overwritten",
            StatusCode::RegistersCorrupted => "registers_corrupted",
            StatusCode::Sigsegv => "SIGSEGV",
            StatusCode::Sigfpe => "SIGFPE",
            StatusCode::Sigabrt => "SIGABRT",
            StatusCode::Timeout => "timeout",
            StatusCode::MeasurementFailure => "measurement_failure",
        }
    }
}

impl fmt::Display for StatusCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunStatus {
    pub code: StatusCode,
    pub detail: String,
}

impl RunStatus {
    pub fn new(code: StatusCode, detail: impl Into<String>) -> RunStatus {
        RunStatus { code, detail: detail.into() }
    }

    pub fn ok() -> RunStatus {
        RunStatus::new(StatusCode::Ok, "")
    }

    pub fn is_ok(&self) -> bool {
        self.code == StatusCode::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub status: RunStatus,
    pub error_sum: u64,
    pub instruction_count: u64,
    pub provider: Option<Provider>,
    pub fitness: u64,
}

impl FitnessRecord {
    /// Applies the fitness rule: the instruction count for passing runs,
    /// `PENALTY + error_sum` otherwise.
    pub fn new(status: RunStatus, error_sum: u64, instruction_count: u64, provider: Option<Provider>) -> FitnessRecord {
        let (status, error_sum) = if status.is_ok() && error_sum > 0 {
            (RunStatus::new(StatusCode::WrongOutput, "nonzero error sum"), error_sum)
        } else if status.is_ok() && instruction_count >= MAX_INSTRUCTIONS {
            (RunStatus::new(StatusCode::Timeout, format!("{instruction_count} instructions")), 0)
        } else {
            (status, error_sum)
        };
        let fitness = if status.is_ok() { instruction_count } else { PENALTY.saturating_add(error_sum) };
        FitnessRecord { status, error_sum, instruction_count, provider, fitness }
    }

    pub fn failure(code: StatusCode, detail: impl Into<String>) -> FitnessRecord {
        FitnessRecord::new(RunStatus::new(code, detail), 0, 0, None)
    }

    pub fn passed(&self) -> bool {
        self.status.is_ok()
    }
}
