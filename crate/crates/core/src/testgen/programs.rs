use rand::seq::SliceRandom;
use rand::Rng;

use crate::lgp::{Instruction, Opcode, Operand, Program, Reg, RegSet, MAX_CONST, NUM_REGS};

use super::TestGenError;

/// Fraction of second operands that read a register rather than a constant.
pub const REGISTER_OPERAND_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramShape {
    pub programs: usize,
    pub length: usize,
}

impl Default for ProgramShape {
    fn default() -> Self {
        ProgramShape { programs: 4, length: 4 }
    }
}

fn random_reg<R: Rng>(rng: &mut R) -> Reg {
    Reg::new(rng.gen_range(0..NUM_REGS as u8)).unwrap()
}

fn gen_one<R: Rng>(rng: &mut R, length: usize) -> Program {
    let x = random_reg(rng);
    let y = loop {
        let r = random_reg(rng);
        if r != x {
            break r;
        }
    };
    let output = random_reg(rng);
    let dst_for = |k: usize, rng: &mut R| if k + 1 == length { output } else { random_reg(rng) };

    let mut instructions = Vec::with_capacity(length);
    let d0 = dst_for(0, rng);
    instructions.push(Instruction::new(Opcode::Div, d0, x, Operand::Reg(y)));
    let mut known: RegSet = [x, y, d0].into_iter().collect();

    for k in 1..length {
        let pool: Vec<Reg> = known.iter().collect();
        let op = *Opcode::ALL.choose(rng).unwrap();
        let src1 = *pool.choose(rng).unwrap();
        let src2 = if rng.gen_bool(REGISTER_OPERAND_FRACTION) {
            Operand::Reg(*pool.choose(rng).unwrap())
        } else {
            Operand::Const(rng.gen_range(0..=MAX_CONST))
        };
        let dst = dst_for(k, rng);
        instructions.push(Instruction::new(op, dst, src1, src2));
        known.insert(dst);
    }
    Program::new(instructions, [x, y], output)
}

fn opcodes_of(programs: &[Program]) -> [bool; 4] {
    let mut seen = [false; 4];
    for p in programs {
        for i in &p.instructions {
            seen[i.op.code() as usize] = true;
        }
    }
    seen
}

/// Random programs whose first instruction divides the two input
/// registers. Later instructions read only registers already holding known
/// values. The third program (or the last, for shorter suites) is redrawn
/// until all four opcodes appear across the suite, whenever it has enough
/// free instructions to make that possible.
pub fn gen_programs<R: Rng>(rng: &mut R, shape: &ProgramShape) -> Result<Vec<Program>, TestGenError> {
    if shape.programs == 0 || shape.length == 0 {
        return Err(TestGenError::EmptyShape);
    }
    let enforce_at = shape.programs.min(3) - 1;
    let mut programs: Vec<Program> = Vec::with_capacity(shape.programs);
    for p in 0..shape.programs {
        let prog = if p == enforce_at {
            let missing = opcodes_of(&programs).iter().filter(|s| !**s).count();
            // instruction 0 is always a division, so it covers DIV itself
            let missing_non_div = missing.saturating_sub(usize::from(!opcodes_of(&programs)[3]));
            if missing_non_div <= shape.length - 1 {
                loop {
                    let candidate = gen_one(rng, shape.length);
                    programs.push(candidate);
                    let all = opcodes_of(&programs).iter().all(|s| *s);
                    let candidate = programs.pop().unwrap();
                    if all {
                        break candidate;
                    }
                }
            } else {
                gen_one(rng, shape.length)
            }
        } else {
            gen_one(rng, shape.length)
        };
        programs.push(prog);
    }
    Ok(programs)
}
