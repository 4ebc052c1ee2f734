//! Name resolution and static checks, lowering the AST to the resolved form.

use std::collections::HashMap;

use super::ast::*;
use super::hir::*;
use super::{CompileError, Span, ENTRY};

struct Globals {
    consts: HashMap<String, i64>,
    functions: HashMap<String, (u16, usize)>,
}

pub fn resolve(unit: &Unit, width: i64) -> Result<HProgram, CompileError> {
    let mut g = Globals { consts: HashMap::from([("WIDTH".to_string(), width)]), functions: HashMap::new() };
    let reserved = |name: &str| Array::from_name(name).is_some() || Builtin::from_name(name).is_some();

    let mut fns: Vec<&FnItem> = Vec::new();
    for item in &unit.items {
        if let Item::Fn(f) = item {
            let n = &f.name;
            if reserved(&n.name) || g.functions.contains_key(&n.name) {
                return Err(redeclared(n));
            }
            g.functions.insert(n.name.clone(), (fns.len() as u16, f.params.len()));
            fns.push(f);
        }
    }
    for item in &unit.items {
        if let Item::Const(c) = item {
            let n = &c.name;
            if reserved(&n.name) || g.consts.contains_key(&n.name) || g.functions.contains_key(&n.name) {
                return Err(redeclared(n));
            }
            let v = const_eval(&c.value, &g)?;
            g.consts.insert(n.name.clone(), v);
        }
    }

    let entry = match g.functions.get(ENTRY) {
        Some(&(idx, 1)) => idx,
        Some(_) => {
            let f = fns.iter().find(|f| f.name.name == ENTRY).unwrap();
            return Err(CompileError::semantic(f.name.span, format!("`{ENTRY}` must take exactly one parameter")));
        }
        None => return Err(CompileError::semantic(unit.span.head(), format!("no `{ENTRY}(len)` entry point"))),
    };

    let functions = fns.iter().map(|f| FnResolver::new(&g).function(f)).collect::<Result<_, _>>()?;
    Ok(HProgram { functions, entry })
}

fn redeclared(n: &Ident) -> CompileError {
    CompileError::semantic(n.span, format!("redeclaration of `{}`", n.name))
}

fn undeclared(n: &Ident) -> CompileError {
    CompileError::semantic(n.span, format!("`{}` was not declared in this scope", n.name))
}

fn const_eval(e: &Expr, g: &Globals) -> Result<i64, CompileError> {
    let not_const = || CompileError::semantic(e.span, "expression is not a compile-time constant");
    match &e.kind {
        ExprKind::Num(n) => Ok(*n),
        ExprKind::Var(id) => g.consts.get(&id.name).copied().ok_or_else(|| undeclared(id)),
        ExprKind::Unary { op, expr, .. } => Ok(eval_unary(*op, const_eval(expr, g)?)),
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let (a, b) = (const_eval(lhs, g)?, const_eval(rhs, g)?);
            eval_binary(*op, a, b).ok_or_else(|| CompileError::semantic(e.span, "division by zero in constant"))
        }
        ExprKind::Call { callee, args } => match Builtin::from_name(&callee.name) {
            Some(b) if b.arity() == args.len() => {
                let vals = args.iter().map(|a| const_eval(a, g)).collect::<Result<Vec<_>, _>>()?;
                Ok(b.eval(&vals))
            }
            _ => Err(not_const()),
        },
        ExprKind::Index { .. } => Err(not_const()),
    }
}

struct FnResolver<'g> {
    g: &'g Globals,
    scopes: Vec<HashMap<String, u16>>,
    next_slot: u16,
    loops: usize,
}

impl<'g> FnResolver<'g> {
    fn new(g: &'g Globals) -> Self {
        FnResolver { g, scopes: Vec::new(), next_slot: 0, loops: 0 }
    }

    fn declare(&mut self, id: &Ident) -> Result<u16, CompileError> {
        let scope = self.scopes.last_mut().unwrap();
        if scope.contains_key(&id.name) {
            return Err(redeclared(id));
        }
        let slot = self.next_slot;
        scope.insert(id.name.clone(), slot);
        self.next_slot += 1;
        Ok(slot)
    }

    fn temp(&mut self) -> u16 {
        self.next_slot += 1;
        self.next_slot - 1
    }

    fn lookup(&self, name: &str) -> Option<u16> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn function(mut self, f: &FnItem) -> Result<HFunction, CompileError> {
        self.scopes.push(HashMap::new());
        for p in &f.params {
            self.declare(p)?;
        }
        let body = self.block(&f.body)?;
        Ok(HFunction { name: f.name.name.clone(), params: f.params.len() as u16, locals: self.next_slot, body })
    }

    fn block(&mut self, b: &Block) -> Result<Vec<HStmt>, CompileError> {
        self.scopes.push(HashMap::new());
        let mut out = Vec::with_capacity(b.stmts.len());
        for s in &b.stmts {
            self.stmt(s, &mut out)?;
        }
        self.scopes.pop();
        Ok(out)
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<HStmt>) -> Result<(), CompileError> {
        match &s.kind {
            StmtKind::Let { name, init } => {
                let init = self.expr(init)?;
                let slot = self.declare(name)?;
                out.push(HStmt::SetLocal(slot, init));
            }
            StmtKind::Assign { target, op, op_span: _, value } => {
                let value = self.expr(value)?;
                match target {
                    Place::Var(id) => {
                        let slot = match self.lookup(&id.name) {
                            Some(slot) => slot,
                            None if self.g.consts.contains_key(&id.name) => {
                                return Err(CompileError::semantic(id.span, format!("assignment of read-only `{}`", id.name)))
                            }
                            None => return Err(undeclared(id)),
                        };
                        let value = match op {
                            AssignOp::Set => value,
                            AssignOp::Compound(b) => HExpr::Binary(*b, Box::new(HExpr::Local(slot)), Box::new(value)),
                        };
                        out.push(HStmt::SetLocal(slot, value));
                    }
                    Place::Index { array, index } => {
                        let a = self.array(array)?;
                        if !a.writable() {
                            return Err(CompileError::semantic(
                                array.span,
                                format!("assignment of read-only location `{}`", array.name),
                            ));
                        }
                        let index = self.expr(index)?;
                        match op {
                            AssignOp::Set => out.push(HStmt::Store(a, index, value)),
                            AssignOp::Compound(b) => {
                                let t = self.temp();
                                out.push(HStmt::SetLocal(t, index));
                                let old = HExpr::Load(a, Box::new(HExpr::Local(t)));
                                out.push(HStmt::Store(a, HExpr::Local(t), HExpr::Binary(*b, Box::new(old), Box::new(value))));
                            }
                        }
                    }
                }
            }
            StmtKind::If { cond, then, els } => {
                let cond = self.expr(cond)?;
                let then = self.block(then)?;
                let els = match els {
                    None => Vec::new(),
                    Some(e) => {
                        let mut v = Vec::new();
                        self.scopes.push(HashMap::new());
                        self.stmt(e, &mut v)?;
                        self.scopes.pop();
                        v
                    }
                };
                out.push(HStmt::If(cond, then, els));
            }
            StmtKind::While { cond, body } => {
                let cond = self.expr(cond)?;
                self.loops += 1;
                let body = self.block(body)?;
                self.loops -= 1;
                out.push(HStmt::While(cond, body));
            }
            StmtKind::Return(v) => {
                let v = match v {
                    Some(e) => self.expr(e)?,
                    None => HExpr::Num(0),
                };
                out.push(HStmt::Return(v));
            }
            StmtKind::Break => {
                if self.loops == 0 {
                    return Err(CompileError::semantic(s.span, "break statement not within loop"));
                }
                out.push(HStmt::Break);
            }
            StmtKind::Expr(e) => out.push(HStmt::Expr(self.expr(e)?)),
            StmtKind::Block(b) => {
                let inner = self.block(b)?;
                out.extend(inner);
            }
        }
        Ok(())
    }

    fn array(&self, id: &Ident) -> Result<Array, CompileError> {
        if self.lookup(&id.name).is_some() || self.g.consts.contains_key(&id.name) {
            return Err(CompileError::semantic(id.span, format!("`{}` is not an array", id.name)));
        }
        Array::from_name(&id.name).ok_or_else(|| undeclared(id))
    }

    fn expr(&mut self, e: &Expr) -> Result<HExpr, CompileError> {
        Ok(match &e.kind {
            ExprKind::Num(n) => HExpr::Num(*n),
            ExprKind::Var(id) => {
                if let Some(slot) = self.lookup(&id.name) {
                    HExpr::Local(slot)
                } else if let Some(v) = self.g.consts.get(&id.name) {
                    HExpr::Num(*v)
                } else if Array::from_name(&id.name).is_some() {
                    return Err(CompileError::semantic(id.span, format!("array `{}` used without an index", id.name)));
                } else {
                    return Err(undeclared(id));
                }
            }
            ExprKind::Index { array, index } => {
                let a = self.array(array)?;
                HExpr::Load(a, Box::new(self.expr(index)?))
            }
            ExprKind::Call { callee, args } => {
                let hargs = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                let arity_err = |want: usize| {
                    CompileError::semantic(
                        e.span,
                        format!("`{}` takes {want} argument(s), {} given", callee.name, args.len()),
                    )
                };
                if self.lookup(&callee.name).is_some() {
                    return Err(CompileError::semantic(callee.span, format!("`{}` cannot be used as a function", callee.name)));
                }
                if let Some(b) = Builtin::from_name(&callee.name) {
                    if b.arity() != args.len() {
                        return Err(arity_err(b.arity()));
                    }
                    HExpr::Builtin(b, hargs)
                } else if let Some(&(idx, arity)) = self.g.functions.get(&callee.name) {
                    if arity != args.len() {
                        return Err(arity_err(arity));
                    }
                    HExpr::Call(idx, hargs)
                } else {
                    return Err(undeclared(callee));
                }
            }
            ExprKind::Unary { op, expr, .. } => HExpr::Unary(*op, Box::new(self.expr(expr)?)),
            ExprKind::Binary { op, lhs, rhs, .. } => HExpr::Binary(*op, Box::new(self.expr(lhs)?), Box::new(self.expr(rhs)?)),
        })
    }
}

impl Span {
    fn head(self) -> Span {
        Span::new(self.start, self.start)
    }
}
