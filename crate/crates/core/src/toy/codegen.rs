use serde::{Deserialize, Serialize};

use super::ast::{BinOp, UnOp};
use super::hir::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Push(i64),
    Load(u16),
    Store(u16),
    ArrLoad(Array),
    ArrStore(Array),
    Bin(BinOp),
    Un(UnOp),
    Jump(u32),
    JumpIfZero(u32),
    Call(u16),
    Builtin(Builtin),
    Ret,
    Pop,
}

impl Op {
    /// Cost-model weight. Equality tests are charged as a subtract plus a
    /// zero test; ordered compares read one flag.
    pub fn weight(self) -> u64 {
        match self {
            Op::Bin(BinOp::Eq | BinOp::Ne) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnCode {
    pub name: String,
    pub params: u16,
    pub locals: u16,
    pub code: Vec<Op>,
}

/// Compiled program: the build artifact compared byte-for-byte to detect
/// equivalent mutants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub functions: Vec<FnCode>,
    pub entry: u16,
}

impl Artifact {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("artifact serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Artifact, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

pub fn generate(p: &HProgram) -> Artifact {
    let functions = p
        .functions
        .iter()
        .map(|f| {
            let mut g = Gen { code: Vec::new(), breaks: Vec::new() };
            g.stmts(&f.body);
            g.code.push(Op::Push(0));
            g.code.push(Op::Ret);
            FnCode { name: f.name.clone(), params: f.params, locals: f.locals, code: g.code }
        })
        .collect();
    Artifact { functions, entry: p.entry }
}

struct Gen {
    code: Vec<Op>,
    /// Pending `break` jumps, one list per enclosing loop.
    breaks: Vec<Vec<usize>>,
}

impl Gen {
    fn here(&self) -> u32 {
        self.code.len() as u32
    }

    fn patch(&mut self, at: usize, target: u32) {
        match &mut self.code[at] {
            Op::Jump(t) | Op::JumpIfZero(t) => *t = target,
            _ => unreachable!(),
        }
    }

    fn stmts(&mut self, stmts: &[HStmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &HStmt) {
        match s {
            HStmt::SetLocal(slot, e) => {
                self.expr(e);
                self.code.push(Op::Store(*slot));
            }
            HStmt::Store(a, i, v) => {
                self.expr(i);
                self.expr(v);
                self.code.push(Op::ArrStore(*a));
            }
            HStmt::If(c, t, e) => {
                self.expr(c);
                let jz = self.code.len();
                self.code.push(Op::JumpIfZero(0));
                self.stmts(t);
                if e.is_empty() {
                    let end = self.here();
                    self.patch(jz, end);
                } else {
                    let jmp = self.code.len();
                    self.code.push(Op::Jump(0));
                    let else_at = self.here();
                    self.patch(jz, else_at);
                    self.stmts(e);
                    let end = self.here();
                    self.patch(jmp, end);
                }
            }
            HStmt::While(c, body) => {
                let top = self.here();
                self.expr(c);
                let jz = self.code.len();
                self.code.push(Op::JumpIfZero(0));
                self.breaks.push(Vec::new());
                self.stmts(body);
                self.code.push(Op::Jump(top));
                let end = self.here();
                self.patch(jz, end);
                for b in self.breaks.pop().unwrap() {
                    self.patch(b, end);
                }
            }
            HStmt::Return(e) => {
                self.expr(e);
                self.code.push(Op::Ret);
            }
            HStmt::Break => {
                let at = self.code.len();
                self.code.push(Op::Jump(0));
                self.breaks.last_mut().expect("checked: break inside loop").push(at);
            }
            HStmt::Expr(e) => {
                self.expr(e);
                self.code.push(Op::Pop);
            }
        }
    }

    fn expr(&mut self, e: &HExpr) {
        match e {
            HExpr::Num(n) => self.code.push(Op::Push(*n)),
            HExpr::Local(s) => self.code.push(Op::Load(*s)),
            HExpr::Load(a, i) => {
                self.expr(i);
                self.code.push(Op::ArrLoad(*a));
            }
            HExpr::Call(f, args) => {
                for a in args {
                    self.expr(a);
                }
                self.code.push(Op::Call(*f));
            }
            HExpr::Builtin(b, args) => {
                for a in args {
                    self.expr(a);
                }
                self.code.push(Op::Builtin(*b));
            }
            HExpr::Unary(op, a) => {
                self.expr(a);
                self.code.push(Op::Un(*op));
            }
            HExpr::Binary(op @ (BinOp::LogAnd | BinOp::LogOr), a, b) => {
                // short circuit: result is 0 or 1
                let and = *op == BinOp::LogAnd;
                self.expr(a);
                if !and {
                    self.code.push(Op::Un(UnOp::Not));
                }
                let j1 = self.code.len();
                self.code.push(Op::JumpIfZero(0));
                self.expr(b);
                self.code.push(Op::Un(UnOp::Not));
                self.code.push(Op::Un(UnOp::Not));
                let j2 = self.code.len();
                self.code.push(Op::Jump(0));
                let short = self.here();
                self.patch(j1, short);
                self.code.push(Op::Push(if and { 0 } else { 1 }));
                let end = self.here();
                self.patch(j2, end);
            }
            HExpr::Binary(op, a, b) => {
                self.expr(a);
                self.expr(b);
                self.code.push(Op::Bin(*op));
            }
        }
    }
}
