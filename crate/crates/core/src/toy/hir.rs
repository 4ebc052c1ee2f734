//! Name-resolved form shared by the optimizer and code generator. Locals
//! are frame slots, constants are already substituted.

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, UnOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Array {
    Regs,
    Prog,
    Lut,
}

impl Array {
    pub fn from_name(name: &str) -> Option<Array> {
        match name {
            "regs" => Some(Array::Regs),
            "prog" => Some(Array::Prog),
            "lut" => Some(Array::Lut),
            _ => None,
        }
    }

    pub fn writable(self) -> bool {
        self == Array::Regs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Builtin {
    /// Sign-extends the low byte into a 16-bit lane.
    Sext8,
    /// `blend(k, a, b)`: bits of `b` where `k` is set, else bits of `a`.
    Blend,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "sext8" => Some(Builtin::Sext8),
            "blend" => Some(Builtin::Blend),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Sext8 => 1,
            Builtin::Blend => 3,
        }
    }

    pub fn eval(self, args: &[i64]) -> i64 {
        match self {
            Builtin::Sext8 => (args[0] as u8 as i8 as i16 as u16) as i64,
            Builtin::Blend => (args[1] & !args[0]) | (args[2] & args[0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HExpr {
    Num(i64),
    Local(u16),
    Load(Array, Box<HExpr>),
    Call(u16, Vec<HExpr>),
    Builtin(Builtin, Vec<HExpr>),
    Unary(UnOp, Box<HExpr>),
    Binary(BinOp, Box<HExpr>, Box<HExpr>),
}

impl HExpr {
    /// No traps, no memory access and no calls: safe to drop or reorder.
    pub fn is_pure(&self) -> bool {
        match self {
            HExpr::Num(_) | HExpr::Local(_) => true,
            HExpr::Load(..) | HExpr::Call(..) => false,
            HExpr::Builtin(_, args) => args.iter().all(HExpr::is_pure),
            HExpr::Unary(_, e) => e.is_pure(),
            HExpr::Binary(op, a, b) => !matches!(op, BinOp::Div | BinOp::Rem) && a.is_pure() && b.is_pure(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HStmt {
    SetLocal(u16, HExpr),
    Store(Array, HExpr, HExpr),
    If(HExpr, Vec<HStmt>, Vec<HStmt>),
    While(HExpr, Vec<HStmt>),
    Return(HExpr),
    Break,
    Expr(HExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HFunction {
    pub name: String,
    pub params: u16,
    pub locals: u16,
    pub body: Vec<HStmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HProgram {
    pub functions: Vec<HFunction>,
    pub entry: u16,
}

/// Wrapping arithmetic shared by constant folding and the VM. `None` on
/// division or remainder by zero.
pub fn eval_binary(op: BinOp, a: i64, b: i64) -> Option<i64> {
    use BinOp::*;
    Some(match op {
        Add => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Mul => a.wrapping_mul(b),
        Div => {
            if b == 0 {
                return None;
            }
            a.wrapping_div(b)
        }
        Rem => {
            if b == 0 {
                return None;
            }
            a.wrapping_rem(b)
        }
        And => a & b,
        Or => a | b,
        Xor => a ^ b,
        Shl => a.wrapping_shl((b & 63) as u32),
        Shr => a.wrapping_shr((b & 63) as u32),
        Eq => (a == b) as i64,
        Ne => (a != b) as i64,
        Lt => (a < b) as i64,
        Le => (a <= b) as i64,
        Gt => (a > b) as i64,
        Ge => (a >= b) as i64,
        LogAnd => (a != 0 && b != 0) as i64,
        LogOr => (a != 0 || b != 0) as i64,
    })
}

pub fn eval_unary(op: UnOp, a: i64) -> i64 {
    match op {
        UnOp::Neg => a.wrapping_neg(),
        UnOp::Not => (a == 0) as i64,
        UnOp::BitNot => !a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        assert_eq!(Builtin::Sext8.eval(&[0x80]), 0xFF80);
        assert_eq!(Builtin::Sext8.eval(&[0x7F]), 0x7F);
        assert_eq!(Builtin::Sext8.eval(&[0x1AA]), 0xFFAA);
        assert_eq!(Builtin::Blend.eval(&[0xFF00, 0xFFAA, 0]), 0xAA);
        assert_eq!(Builtin::Blend.eval(&[0, 0xFFAA, 0]), 0xFFAA);
    }

    #[test]
    fn arithmetic_wraps_and_traps() {
        assert_eq!(eval_binary(BinOp::Add, i64::MAX, 1), Some(i64::MIN));
        assert_eq!(eval_binary(BinOp::Div, 7, 0), None);
        assert_eq!(eval_binary(BinOp::Div, i64::MIN, -1), Some(i64::MIN));
        assert_eq!(eval_binary(BinOp::Ge, 3, 3), Some(1));
    }
}
