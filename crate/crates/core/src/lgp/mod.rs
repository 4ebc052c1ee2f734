//! The linear GP instruction set: four byte-wide arithmetic opcodes over an
//! eight-register file, protected division backed by a precomputed table,
//! and the scalar reference interpreter every other evaluator is checked
//! against.

mod program;
mod scalar;
mod table;

pub use program::{Instruction, Opcode, Operand, ParseProgramError, Program, Reg, RegSet};
pub use scalar::{apply_opcode, expected_registers, interpret_scalar, RegisterState};
pub use table::{protected_div, DivisionTable, TABLE_BYTES, TABLE_ENTRIES};

/// Number of registers in the LGP register file.
pub const NUM_REGS: usize = 8;

/// Byte loaded into every register that does not hold an input, and into
/// every unused byte of the sandbox register page.
pub const PADDING: u8 = 90;

/// Largest constant the program generator draws. Parsed listings accept
/// any byte, since one of the reference programs multiplies by 128.
pub const MAX_CONST: u8 = 127;
