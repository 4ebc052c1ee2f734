use super::codegen::{Artifact, Op};
use super::hir::{eval_binary, eval_unary, Array};

/// Abnormal termination of a toy program, mirroring the signals a native
/// build would receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trap {
    /// Bad memory access or stack exhaustion.
    Segv,
    /// Integer division or remainder by zero.
    Fpe,
    Abort,
    /// Operation budget exhausted.
    StepLimit,
}

/// The three arrays a toy program can index.
pub trait ArrayMemory {
    fn load(&mut self, array: Array, index: i64) -> Result<i64, Trap>;
    fn store(&mut self, array: Array, index: i64, value: i64) -> Result<(), Trap>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VmLimits {
    pub max_cost: u64,
    pub max_depth: usize,
    pub max_stack: usize,
}

impl Default for VmLimits {
    fn default() -> Self {
        VmLimits { max_cost: 20_000_000, max_depth: 256, max_stack: 1 << 16 }
    }
}

struct Frame {
    func: usize,
    pc: usize,
    base: usize,
}

/// Runs the entry function with `arg` and returns its result and the
/// weighted operation count.
pub fn run<M: ArrayMemory>(art: &Artifact, arg: i64, mem: &mut M, limits: &VmLimits) -> Result<(i64, u64), Trap> {
    let mut cost = 0u64;
    let mut stack: Vec<i64> = Vec::with_capacity(256);
    let mut locals: Vec<i64> = Vec::with_capacity(256);
    let mut frames: Vec<Frame> = Vec::with_capacity(16);

    let entry = art.entry as usize;
    let f = art.functions.get(entry).ok_or(Trap::Abort)?;
    locals.push(arg);
    locals.resize(f.locals.max(1) as usize, 0);
    frames.push(Frame { func: entry, pc: 0, base: 0 });

    let (mut pc, mut base) = (0usize, 0usize);
    let mut code = &art.functions[entry].code;
    macro_rules! pop {
        () => {
            stack.pop().ok_or(Trap::Abort)?
        };
    }
    loop {
        let op = *code.get(pc).ok_or(Trap::Abort)?;
        pc += 1;
        cost += op.weight();
        if cost > limits.max_cost {
            return Err(Trap::StepLimit);
        }
        match op {
            Op::Push(n) => stack.push(n),
            Op::Load(s) => stack.push(locals[base + s as usize]),
            Op::Store(s) => {
                let v = pop!();
                locals[base + s as usize] = v;
            }
            Op::ArrLoad(a) => {
                let i = pop!();
                stack.push(mem.load(a, i)?);
            }
            Op::ArrStore(a) => {
                let v = pop!();
                let i = pop!();
                mem.store(a, i, v)?;
            }
            Op::Bin(b) => {
                let y = pop!();
                let x = pop!();
                stack.push(eval_binary(b, x, y).ok_or(Trap::Fpe)?);
            }
            Op::Un(u) => {
                let x = pop!();
                stack.push(eval_unary(u, x));
            }
            Op::Jump(t) => pc = t as usize,
            Op::JumpIfZero(t) => {
                if pop!() == 0 {
                    pc = t as usize;
                }
            }
            Op::Call(target) => {
                if frames.len() >= limits.max_depth {
                    return Err(Trap::Segv);
                }
                let callee = art.functions.get(target as usize).ok_or(Trap::Abort)?;
                let n = callee.params as usize;
                if stack.len() < n {
                    return Err(Trap::Abort);
                }
                frames.last_mut().unwrap().pc = pc;
                let new_base = locals.len();
                locals.extend(stack.drain(stack.len() - n..));
                locals.resize(new_base + callee.locals as usize, 0);
                frames.push(Frame { func: target as usize, pc: 0, base: new_base });
                pc = 0;
                base = new_base;
                code = &callee.code;
            }
            Op::Builtin(b) => {
                let n = b.arity();
                if stack.len() < n {
                    return Err(Trap::Abort);
                }
                let v = b.eval(&stack[stack.len() - n..]);
                stack.truncate(stack.len() - n);
                stack.push(v);
            }
            Op::Ret => {
                let v = pop!();
                frames.pop();
                locals.truncate(base);
                match frames.last() {
                    None => return Ok((v, cost)),
                    Some(fr) => {
                        pc = fr.pc;
                        base = fr.base;
                        code = &art.functions[fr.func].code;
                        stack.push(v);
                    }
                }
            }
            Op::Pop => {
                pop!();
            }
        }
        if stack.len() > limits.max_stack {
            return Err(Trap::Segv);
        }
    }
}

/// Plain in-memory arrays for unit tests and tooling.
#[derive(Debug, Clone, Default)]
pub struct VecMemory {
    pub regs: Vec<u8>,
    pub prog: Vec<u8>,
    pub lut: Vec<u32>,
}

impl ArrayMemory for VecMemory {
    fn load(&mut self, array: Array, index: i64) -> Result<i64, Trap> {
        let i = usize::try_from(index).map_err(|_| Trap::Segv)?;
        match array {
            Array::Regs => self.regs.get(i).map(|&v| v as i64),
            Array::Prog => self.prog.get(i).map(|&v| v as i64),
            Array::Lut => self.lut.get(i).map(|&v| v as i64),
        }
        .ok_or(Trap::Segv)
    }

    fn store(&mut self, array: Array, index: i64, value: i64) -> Result<(), Trap> {
        let i = usize::try_from(index).map_err(|_| Trap::Segv)?;
        match array {
            Array::Regs => *self.regs.get_mut(i).ok_or(Trap::Segv)? = value as u8,
            _ => return Err(Trap::Segv),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{compile, Stage};

    fn exec(src: &str, arg: i64, stage: Stage) -> Result<(i64, u64), Trap> {
        let art = compile(src, stage, 8).unwrap();
        let mut mem = VecMemory { regs: vec![0; 16], prog: vec![1, 2, 3], lut: vec![7; 4] };
        run(&art, arg, &mut mem, &VmLimits::default())
    }

    #[test]
    fn arithmetic_calls_and_loops() {
        let src = "fn sq(x) { return x * x; }\nfn interpret(n) { let s = 0; let i = 0; while (1) { if (i >= n) { break; } s += sq(i); i += 1; } return s; }";
        for stage in [Stage::Debug, Stage::Optimized] {
            assert_eq!(exec(src, 4, stage).unwrap().0, 14);
        }
    }

    #[test]
    fn short_circuit() {
        let src = "fn interpret(n) { return (n > 1 && 10 / (n - 1) == 5) + 2 * (n == 0 || 1 / n); }";
        assert_eq!(exec(src, 3, Stage::Debug).unwrap().0, 1 + 0);
        assert_eq!(exec(src, 0, Stage::Debug).unwrap().0, 2);
        assert_eq!(exec(src, 1, Stage::Debug).unwrap().0, 2);
    }

    #[test]
    fn traps() {
        assert_eq!(exec("fn interpret(n) { return 1 / n; }", 0, Stage::Debug), Err(Trap::Fpe));
        assert_eq!(exec("fn interpret(n) { return regs[-1]; }", 0, Stage::Debug), Err(Trap::Segv));
        assert_eq!(exec("fn interpret(n) { return interpret(n); }", 0, Stage::Debug), Err(Trap::Segv));
        assert_eq!(exec("fn interpret(n) { while (1) { } }", 0, Stage::Debug), Err(Trap::StepLimit));
    }

    #[test]
    fn arrays() {
        let src = "fn interpret(n) { regs[2] = 300; return regs[2] + prog[1] + lut[3]; }";
        assert_eq!(exec(src, 0, Stage::Debug).unwrap().0, 44 + 2 + 7);
    }

    #[test]
    fn ordered_compare_is_cheaper_than_equality() {
        let eq = exec("fn interpret(n) { return n == 3; }", 3, Stage::Debug).unwrap();
        let ge = exec("fn interpret(n) { return n >= 3; }", 3, Stage::Debug).unwrap();
        assert_eq!(eq.0, ge.0);
        assert_eq!(eq.1, ge.1 + 1);
    }
}
