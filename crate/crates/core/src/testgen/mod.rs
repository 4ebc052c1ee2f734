//! Test-suite generation: random LGP programs that all start with a
//! protected division, 64 input pairs per program with a controlled divisor
//! and quotient mix, the on-disk suite format, and output-distribution
//! diagnostics.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`
//! ([`rng_from_seed`]), so a seed regenerates the same suite on any
//! platform.

mod entropy;
pub mod fixture;
mod inputs;
mod programs;
mod suite;

pub use entropy::{
    entropy_loss_by_opcode, histogram_csv, entropy_csv, trace_csv, trace_distributions, trace_suite, value_entropy,
    DistributionReport, EntropyError, Histogram, Step, StepDistribution,
};
pub use inputs::{gen_division_inputs, DivisionInput, InputCategory};
pub use programs::{gen_programs, ProgramShape};
pub use suite::{ParseSuiteError, TestSuite};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lgp::DivisionTable;

pub type SuiteRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TestGenError {
    #[error("need at least 8 input pairs, asked for {0}")]
    TooFewCases(usize),
    #[error("no (x, y) pair found for quotient {target} after {tries} tries")]
    TargetUnreachable { target: u8, tries: usize },
    #[error("a suite needs at least one program of at least one instruction")]
    EmptyShape,
}

/// Generates a complete suite: programs, 64 inputs per program and the
/// oracle's expected registers.
pub fn gen_suite(seed: u64, shape: &ProgramShape, cases: usize, table: &DivisionTable) -> Result<TestSuite, TestGenError> {
    let mut rng = rng_from_seed(seed);
    let programs = gen_programs(&mut rng, shape)?;
    let inputs = programs
        .iter()
        .map(|_| gen_division_inputs(&mut rng, cases).map(|v| v.into_iter().map(|d| (d.x, d.y)).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TestSuite::new(programs, inputs, Some(seed), table))
}
