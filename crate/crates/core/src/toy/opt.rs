//! Optimizing pass used by the second build stage: constant folding,
//! dead-branch removal, algebraic identities on pure operands and removal of
//! unreachable or effect-free statements.

use super::ast::BinOp;
use super::hir::*;

pub fn optimize(mut p: HProgram) -> HProgram {
    for f in &mut p.functions {
        f.body = block(std::mem::take(&mut f.body));
    }
    p
}

fn block(stmts: Vec<HStmt>) -> Vec<HStmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for s in stmts {
        let terminal = matches!(s, HStmt::Return(_) | HStmt::Break);
        match s {
            HStmt::SetLocal(slot, e) => match expr(e) {
                HExpr::Local(s2) if s2 == slot => {}
                e => out.push(HStmt::SetLocal(slot, e)),
            },
            HStmt::Store(a, i, v) => out.push(HStmt::Store(a, expr(i), expr(v))),
            HStmt::If(c, t, e) => match expr(c) {
                HExpr::Num(n) => {
                    let taken = block(if n != 0 { t } else { e });
                    let ends = ends_flow(&taken);
                    out.extend(taken);
                    if ends {
                        break;
                    }
                }
                c => {
                    let (t, e) = (block(t), block(e));
                    if t.is_empty() && e.is_empty() {
                        if !c.is_pure() {
                            out.push(HStmt::Expr(c));
                        }
                    } else {
                        out.push(HStmt::If(c, t, e));
                    }
                }
            },
            HStmt::While(c, body) => match expr(c) {
                HExpr::Num(0) => {}
                c => out.push(HStmt::While(c, block(body))),
            },
            HStmt::Return(e) => out.push(HStmt::Return(expr(e))),
            HStmt::Break => out.push(HStmt::Break),
            HStmt::Expr(e) => {
                let e = expr(e);
                if !e.is_pure() {
                    out.push(HStmt::Expr(e));
                }
            }
        }
        if terminal {
            break;
        }
    }
    out
}

fn ends_flow(stmts: &[HStmt]) -> bool {
    matches!(stmts.last(), Some(HStmt::Return(_) | HStmt::Break))
}

fn num(e: &HExpr) -> Option<i64> {
    match e {
        HExpr::Num(n) => Some(*n),
        _ => None,
    }
}

pub fn expr(e: HExpr) -> HExpr {
    match e {
        HExpr::Num(_) | HExpr::Local(_) => e,
        HExpr::Load(a, i) => HExpr::Load(a, Box::new(expr(*i))),
        HExpr::Call(f, args) => HExpr::Call(f, args.into_iter().map(expr).collect()),
        HExpr::Builtin(b, args) => {
            let args: Vec<HExpr> = args.into_iter().map(expr).collect();
            if let Some(vals) = args.iter().map(num).collect::<Option<Vec<_>>>() {
                return HExpr::Num(b.eval(&vals));
            }
            if b == Builtin::Blend {
                match num(&args[0]) {
                    Some(0) if args[2].is_pure() => return args.into_iter().nth(1).unwrap(),
                    Some(-1) if args[1].is_pure() => return args.into_iter().nth(2).unwrap(),
                    _ => {}
                }
            }
            HExpr::Builtin(b, args)
        }
        HExpr::Unary(op, a) => match expr(*a) {
            HExpr::Num(n) => HExpr::Num(eval_unary(op, n)),
            a => HExpr::Unary(op, Box::new(a)),
        },
        HExpr::Binary(op, a, b) => binary(op, expr(*a), expr(*b)),
    }
}

fn binary(op: BinOp, a: HExpr, b: HExpr) -> HExpr {
    use BinOp::*;
    if let (Some(x), Some(y)) = (num(&a), num(&b)) {
        if let Some(v) = eval_binary(op, x, y) {
            return HExpr::Num(v);
        }
    }
    match (op, num(&a), num(&b)) {
        (Add | Sub | Or | Xor | Shl | Shr, _, Some(0)) => a,
        (Add | Or | Xor, Some(0), _) => b,
        (Mul | Div, _, Some(1)) => a,
        (Mul, Some(1), _) => b,
        (Mul | And, _, Some(0)) if a.is_pure() => HExpr::Num(0),
        (Mul | And, Some(0), _) if b.is_pure() => HExpr::Num(0),
        (And, _, Some(-1)) => a,
        (And, Some(-1), _) => b,
        _ => HExpr::Binary(op, Box::new(a), Box::new(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(e: HExpr) -> Box<HExpr> {
        Box::new(e)
    }

    #[test]
    fn folds_and_identities() {
        let e = HExpr::Binary(BinOp::Add, bx(HExpr::Local(0)), bx(HExpr::Binary(BinOp::Mul, bx(HExpr::Num(2)), bx(HExpr::Num(0)))));
        assert_eq!(expr(e), HExpr::Local(0));
        let blend = HExpr::Builtin(Builtin::Blend, vec![HExpr::Num(0), HExpr::Load(Array::Regs, bx(HExpr::Num(3))), HExpr::Num(0)]);
        assert_eq!(expr(blend), HExpr::Load(Array::Regs, bx(HExpr::Num(3))));
        // division by a constant zero is left to trap at run time
        let d = HExpr::Binary(BinOp::Div, bx(HExpr::Num(4)), bx(HExpr::Num(0)));
        assert_eq!(expr(d.clone()), d);
        // an impure operand keeps the multiply by zero
        let m = HExpr::Binary(BinOp::Mul, bx(HExpr::Load(Array::Regs, bx(HExpr::Num(0)))), bx(HExpr::Num(0)));
        assert_eq!(expr(m.clone()), m);
    }

    #[test]
    fn dead_branches_and_unreachable_code() {
        let body = vec![
            HStmt::If(HExpr::Binary(BinOp::Eq, bx(HExpr::Num(8)), bx(HExpr::Num(16))), vec![HStmt::Expr(HExpr::Call(0, vec![]))], vec![]),
            HStmt::SetLocal(1, HExpr::Local(1)),
            HStmt::Expr(HExpr::Local(2)),
            HStmt::Return(HExpr::Num(1)),
            HStmt::Expr(HExpr::Call(0, vec![])),
        ];
        assert_eq!(block(body), vec![HStmt::Return(HExpr::Num(1))]);
        let w = vec![HStmt::While(HExpr::Num(0), vec![HStmt::Break])];
        assert!(block(w).is_empty());
    }
}
