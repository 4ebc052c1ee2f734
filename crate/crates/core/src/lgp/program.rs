use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::NUM_REGS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseProgramError {
    #[error("line {line}: expected `R<dst>=R<src><op><operand>`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: register index {index} out of range 0..{NUM_REGS}")]
    Register { line: usize, index: u32 },
    #[error("line {line}: constant {value} does not fit a byte")]
    Constant { line: usize, value: u32 },
}

/// Arithmetic opcode. Division carries the largest code, so for every
/// valid opcode `code == DIV` and `code >= DIV` agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Opcode {
    Add = 0,
    Sub = 1,
    Mul = 2,
    Div = 3,
}

impl Opcode {
    pub const ALL: [Opcode; 4] = [Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::Div];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Opcode> {
        Opcode::ALL.get(code as usize).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Opcode::Add => '+',
            Opcode::Sub => '-',
            Opcode::Mul => '*',
            Opcode::Div => '/',
        }
    }

    fn from_symbol(c: char) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|op| op.symbol() == c)
    }
}

/// Register index in `0..8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Reg(u8);

impl Reg {
    pub fn new(index: u8) -> Option<Reg> {
        ((index as usize) < NUM_REGS).then_some(Reg(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Reg> {
        (0..NUM_REGS as u8).map(Reg)
    }
}

impl TryFrom<u8> for Reg {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Reg::new(v).ok_or_else(|| format!("register index {v} out of range"))
    }
}

impl From<Reg> for u8 {
    fn from(r: Reg) -> u8 {
        r.0
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

/// Small bitset of register indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RegSet(u8);

impl RegSet {
    pub fn empty() -> RegSet {
        RegSet(0)
    }

    pub fn insert(&mut self, r: Reg) {
        self.0 |= 1 << r.0;
    }

    pub fn contains(self, r: Reg) -> bool {
        self.0 & (1 << r.0) != 0
    }

    pub fn union(self, other: RegSet) -> RegSet {
        RegSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Reg> {
        Reg::all().filter(move |r| self.contains(*r))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl FromIterator<Reg> for RegSet {
    fn from_iter<I: IntoIterator<Item = Reg>>(iter: I) -> Self {
        let mut s = RegSet::empty();
        for r in iter {
            s.insert(r);
        }
        s
    }
}

/// Second operand: a register or a constant in `0..=127`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Reg(Reg),
    Const(u8),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Opcode,
    pub dst: Reg,
    pub src1: Reg,
    pub src2: Operand,
}

/// Bit set in the encoded opcode byte when the second operand names a
/// register.
const REG_FLAG: u8 = 0x80;

impl Instruction {
    pub fn new(op: Opcode, dst: Reg, src1: Reg, src2: Operand) -> Instruction {
        Instruction { op, dst, src1, src2 }
    }

    /// Register indices are checked by [`Reg`] and constants are bytes, so
    /// this only guards instructions built from raw parts via `decode`.
    pub fn is_valid(&self) -> bool {
        Opcode::from_code(self.op.code()).is_some() && self.dst.index() < NUM_REGS && self.src1.index() < NUM_REGS
    }

    /// Four-byte encoding used in the sandbox program page:
    /// `[opcode, dst, src1, src2]`, with bit 7 of the opcode byte set when
    /// `src2` is a register index rather than a constant.
    pub fn encode(&self) -> [u8; 4] {
        match self.src2 {
            Operand::Reg(r) => [REG_FLAG | self.op.code(), self.dst.0, self.src1.0, r.0],
            Operand::Const(c) => [self.op.code(), self.dst.0, self.src1.0, c],
        }
    }

    pub fn decode(bytes: [u8; 4]) -> Option<Instruction> {
        let op = Opcode::from_code(bytes[0] & !REG_FLAG)?;
        let dst = Reg::new(bytes[1])?;
        let src1 = Reg::new(bytes[2])?;
        let src2 = if bytes[0] & REG_FLAG != 0 {
            Operand::Reg(Reg::new(bytes[3])?)
        } else {
            Operand::Const(bytes[3])
        };
        Some(Instruction { op, dst, src1, src2 })
    }

    fn parse_line(line: usize, s: &str) -> Result<Instruction, ParseProgramError> {
        let syntax = || ParseProgramError::Syntax { line, text: s.to_string() };
        let s = s.trim();
        let (lhs, rhs) = s.split_once('=').ok_or_else(syntax)?;
        let dst = parse_reg(line, lhs.trim()).ok_or_else(syntax)??;
        let rhs = rhs.trim();
        // first char after "R<digits>" is the operator
        let op_pos = rhs
            .char_indices()
            .skip(1)
            .find(|(_, c)| Opcode::from_symbol(*c).is_some())
            .map(|(i, _)| i)
            .ok_or_else(syntax)?;
        let op = Opcode::from_symbol(rhs[op_pos..].chars().next().unwrap()).unwrap();
        let src1 = parse_reg(line, rhs[..op_pos].trim()).ok_or_else(syntax)??;
        let operand = rhs[op_pos + 1..].trim();
        let src2 = if operand.starts_with('R') {
            Operand::Reg(parse_reg(line, operand).ok_or_else(syntax)??)
        } else {
            let value: u32 = operand.parse().map_err(|_| syntax())?;
            if value > u8::MAX as u32 {
                return Err(ParseProgramError::Constant { line, value });
            }
            Operand::Const(value as u8)
        };
        Ok(Instruction { op, dst, src1, src2 })
    }
}

fn parse_reg(line: usize, s: &str) -> Option<Result<Reg, ParseProgramError>> {
    let digits = s.strip_prefix('R')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let index: u32 = digits.parse().ok()?;
    Some(
        u8::try_from(index)
            .ok()
            .and_then(Reg::new)
            .ok_or(ParseProgramError::Register { line, index }),
    )
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}{}{}", self.dst, self.src1, self.op.symbol(), self.src2)
    }
}

impl FromStr for Instruction {
    type Err = ParseProgramError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instruction::parse_line(1, s)
    }
}

/// A linear program with its two input registers (x then y) and output
/// register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub inputs: [Reg; 2],
    pub output: Reg,
}

impl Program {
    pub fn new(instructions: Vec<Instruction>, inputs: [Reg; 2], output: Reg) -> Program {
        Program { instructions, inputs, output }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Registers written by at least one instruction.
    pub fn written(&self) -> RegSet {
        self.instructions.iter().map(|i| i.dst).collect()
    }

    /// Registers the harness scores: inputs plus everything written.
    pub fn used(&self) -> RegSet {
        self.written().union(self.inputs.iter().copied().collect())
    }

    /// One instruction per line, e.g. `R5=R0/R4`.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for i in &self.instructions {
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses a listing (blank lines ignored).
    pub fn parse_listing(text: &str) -> Result<Vec<Instruction>, ParseProgramError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| Instruction::parse_line(n + 1, l))
            .collect()
    }

    /// Encoded instruction stream for the sandbox program page.
    pub fn encode(&self) -> Vec<u8> {
        self.instructions.iter().flat_map(|i| i.encode()).collect()
    }
}
