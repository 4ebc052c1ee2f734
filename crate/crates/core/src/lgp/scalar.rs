use super::{DivisionTable, Opcode, Operand, Program, Reg, RegSet, NUM_REGS, PADDING};

/// Register file after running a program on one test case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterState {
    pub regs: [u8; NUM_REGS],
    pub written: RegSet,
}

impl RegisterState {
    pub fn get(&self, r: Reg) -> u8 {
        self.regs[r.index()]
    }
}

/// Byte arithmetic: add/sub/mul wrap modulo 256, division reads the table.
#[inline]
pub fn apply_opcode(op: Opcode, a: u8, b: u8, table: &DivisionTable) -> u8 {
    match op {
        Opcode::Add => a.wrapping_add(b),
        Opcode::Sub => a.wrapping_sub(b),
        Opcode::Mul => a.wrapping_mul(b),
        Opcode::Div => table.get(a, b) as u8,
    }
}

/// Reference interpreter. Non-input registers start at the padding byte;
/// when both inputs name the same register the y input wins.
pub fn interpret_scalar(program: &Program, inputs: (u8, u8), table: &DivisionTable) -> RegisterState {
    let mut regs = [PADDING; NUM_REGS];
    regs[program.inputs[0].index()] = inputs.0;
    regs[program.inputs[1].index()] = inputs.1;
    let mut written = RegSet::empty();
    for instr in &program.instructions {
        let a = regs[instr.src1.index()];
        let b = match instr.src2 {
            Operand::Reg(r) => regs[r.index()],
            Operand::Const(c) => c,
        };
        regs[instr.dst.index()] = apply_opcode(instr.op, a, b, table);
        written.insert(instr.dst);
    }
    RegisterState { regs, written }
}

/// Oracle register states for every case, in case order.
pub fn expected_registers(program: &Program, cases: &[(u8, u8)], table: &DivisionTable) -> Vec<RegisterState> {
    cases.iter().map(|&c| interpret_scalar(program, c, table)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgp::Instruction;

    fn prog(lines: &str, inputs: [u8; 2], output: u8) -> Program {
        Program::new(
            Program::parse_listing(lines).unwrap(),
            [Reg::new(inputs[0]).unwrap(), Reg::new(inputs[1]).unwrap()],
            Reg::new(output).unwrap(),
        )
    }

    #[test]
    fn opcode_examples() {
        let t = DivisionTable::build();
        for v in 0..=255u8 {
            assert_eq!(apply_opcode(Opcode::Sub, v, v, &t), 0);
        }
        assert_eq!(apply_opcode(Opcode::Mul, 16, 16, &t), 0);
        assert_eq!(apply_opcode(Opcode::Add, 200, 100, &t), 44);
        assert_eq!(apply_opcode(Opcode::Div, 96, 122, &t), 0);
    }

    #[test]
    fn non_div_ops_are_modular() {
        let t = DivisionTable::build();
        for a in 0..=255u32 {
            for b in 0..=255u32 {
                assert_eq!(apply_opcode(Opcode::Add, a as u8, b as u8, &t) as u32, (a + b) % 256);
                assert_eq!(apply_opcode(Opcode::Sub, a as u8, b as u8, &t) as u32, (a + 256 - b) % 256);
                assert_eq!(apply_opcode(Opcode::Mul, a as u8, b as u8, &t) as u32, (a * b) % 256);
            }
        }
    }

    #[test]
    fn program_two_self_subtraction() {
        let t = DivisionTable::build();
        let p = prog("R4=R2/R5\nR5=R5-101\nR5=R4-R4", [2, 5], 1);
        for x in [0u8, 7, 200] {
            for y in [0u8, 1, 33] {
                assert_eq!(interpret_scalar(&p, (x, y), &t).regs[5], 0);
            }
        }
    }

    #[test]
    fn program_one_first_instruction() {
        let t = DivisionTable::build();
        let p = prog("R5=R0/R4", [0, 4], 1);
        assert_eq!(interpret_scalar(&p, (170, 0), &t).regs[5], 0);
    }

    #[test]
    fn program_three_hand_executed() {
        // R1=105, R5=1: R6=105/1=105, R4=105+119=224, R6=1+60=61, R7=1-61=196 (mod 256)
        let t = DivisionTable::build();
        let p = prog("R6=R1/R5\nR4=R1+119\nR6=R5+60\nR7=R5-61", [1, 5], 7);
        let s = interpret_scalar(&p, (105, 1), &t);
        assert_eq!(s.regs, [90, 105, 90, 90, 224, 1, 61, 196]);
        assert_eq!(s.written.iter().map(|r| r.index()).collect::<Vec<_>>(), vec![4, 6, 7]);
    }

    #[test]
    fn empty_program_keeps_padding() {
        let t = DivisionTable::build();
        let p = Program::new(Vec::<Instruction>::new(), [Reg::new(2).unwrap(), Reg::new(6).unwrap()], Reg::new(0).unwrap());
        let states = expected_registers(&p, &[(1, 2), (3, 4)], &t);
        assert_eq!(states[1].regs, [90, 90, 3, 90, 90, 90, 4, 90]);
        assert!(states[0].written.is_empty());
    }
}
