use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{CompileError, Span};

pub fn parse(src: &str) -> Result<Unit, CompileError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut items = Vec::new();
    while p.peek() != &Tok::Eof {
        items.push(p.item()?);
    }
    Ok(Unit { items, span: Span::new(0, src.len()) })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_end(&self) -> usize {
        self.toks[self.pos.saturating_sub(1)].span.end
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expected(&self, what: &str) -> CompileError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("`{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        CompileError::syntax(self.span(), format!("expected {what} before {found}"))
    }

    fn expect(&mut self, p: &str) -> Result<Span, CompileError> {
        if self.is_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(self.expected(&format!("`{p}`")))
        }
    }

    fn ident(&mut self) -> Result<Ident, CompileError> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_keyword(&name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn item(&mut self) -> Result<Item, CompileError> {
        let start = self.span().start;
        if self.is_kw("const") {
            self.bump();
            let name = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            self.expect(";")?;
            Ok(Item::Const(ConstItem { name, value, span: Span::new(start, self.prev_end()) }))
        } else if self.is_kw("fn") {
            self.bump();
            let name = self.ident()?;
            self.expect("(")?;
            let mut params = Vec::new();
            if !self.is_punct(")") {
                loop {
                    params.push(self.ident()?);
                    if self.is_punct(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(")")?;
            let body = self.block()?;
            Ok(Item::Fn(FnItem { name, params, body, span: Span::new(start, self.prev_end()) }))
        } else {
            Err(self.expected("`fn` or `const`"))
        }
    }

    fn block(&mut self) -> Result<Block, CompileError> {
        let start = self.expect("{")?.start;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Tok::Eof {
                return Err(self.expected("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        let end = self.bump().span.end;
        Ok(Block { stmts, span: Span::new(start, end) })
    }

    fn stmt(&mut self) -> Result<Stmt, CompileError> {
        let start = self.span().start;
        let kind = if self.is_kw("let") {
            self.bump();
            let name = self.ident()?;
            self.expect("=")?;
            let init = self.expr()?;
            self.expect(";")?;
            StmtKind::Let { name, init }
        } else if self.is_kw("if") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = self.block()?;
            let els = if self.is_kw("else") {
                self.bump();
                let s = if self.is_kw("if") {
                    self.stmt()?
                } else {
                    let b = self.block()?;
                    Stmt { span: b.span, kind: StmtKind::Block(b) }
                };
                Some(Box::new(s))
            } else {
                None
            };
            StmtKind::If { cond, then, els }
        } else if self.is_kw("while") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            StmtKind::While { cond, body: self.block()? }
        } else if self.is_kw("return") {
            self.bump();
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect(";")?;
            StmtKind::Return(value)
        } else if self.is_kw("break") {
            self.bump();
            self.expect(";")?;
            StmtKind::Break
        } else if self.is_punct("{") {
            StmtKind::Block(self.block()?)
        } else {
            let e = self.expr()?;
            let assign = match self.peek() {
                Tok::Punct("=") => Some(AssignOp::Set),
                Tok::Punct(p) if p.len() >= 2 && p.ends_with('=') && !matches!(*p, "==" | "!=" | "<=" | ">=") => {
                    Some(AssignOp::Compound(BinOp::from_symbol(&p[..p.len() - 1]).unwrap()))
                }
                _ => None,
            };
            match assign {
                Some(op) => {
                    let op_span = self.bump().span;
                    let target = match e.kind {
                        ExprKind::Var(id) => Place::Var(id),
                        ExprKind::Index { array, index } => Place::Index { array, index },
                        _ => return Err(CompileError::syntax(e.span, "left side of assignment is not assignable")),
                    };
                    let value = self.expr()?;
                    self.expect(";")?;
                    StmtKind::Assign { target, op, op_span, value }
                }
                None => {
                    self.expect(";")?;
                    StmtKind::Expr(e)
                }
            }
        };
        Ok(Stmt { kind, span: Span::new(start, self.prev_end()) })
    }

    pub fn expr(&mut self) -> Result<Expr, CompileError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, CompileError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct(p) => match BinOp::from_symbol(p) {
                    Some(op) if op.precedence() >= min_prec => op,
                    _ => break,
                },
                _ => break,
            };
            let op_span = self.bump().span;
            let rhs = self.binary(op.precedence() + 1)?;
            let span = Span::new(lhs.span.start, rhs.span.end);
            lhs = Expr { kind: ExprKind::Binary { op, op_span, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, CompileError> {
        let op = match self.peek() {
            Tok::Punct("-") => Some(UnOp::Neg),
            Tok::Punct("!") => Some(UnOp::Not),
            Tok::Punct("~") => Some(UnOp::BitNot),
            _ => None,
        };
        if let Some(op) = op {
            let op_span = self.bump().span;
            let expr = self.unary()?;
            let span = Span::new(op_span.start, expr.span.end);
            return Ok(Expr { kind: ExprKind::Unary { op, op_span, expr: Box::new(expr) }, span });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, CompileError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                let span = self.bump().span;
                Ok(Expr { kind: ExprKind::Num(n), span })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let id = self.ident()?;
                if self.is_punct("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.is_punct(",") {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    let end = self.expect(")")?.end;
                    let span = Span::new(id.span.start, end);
                    Ok(Expr { kind: ExprKind::Call { callee: id, args }, span })
                } else if self.is_punct("[") {
                    self.bump();
                    let index = self.expr()?;
                    let end = self.expect("]")?.end;
                    let span = Span::new(id.span.start, end);
                    Ok(Expr { kind: ExprKind::Index { array: id, index: Box::new(index) }, span })
                } else {
                    let span = id.span;
                    Ok(Expr { kind: ExprKind::Var(id), span })
                }
            }
            _ => Err(self.expected("expression")),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "fn" | "let" | "const" | "if" | "else" | "while" | "return" | "break")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_spans() {
        let src = "fn f(a) { let x = 1 + a * 2 == 3; }";
        let u = parse(src).unwrap();
        let Item::Fn(f) = &u.items[0] else { panic!() };
        let StmtKind::Let { init, .. } = &f.body.stmts[0].kind else { panic!() };
        let ExprKind::Binary { op, lhs, .. } = &init.kind else { panic!() };
        assert_eq!(*op, BinOp::Eq);
        assert_eq!(&src[lhs.span.start..lhs.span.end], "1 + a * 2");
        assert_eq!(&src[f.body.stmts[0].span.start..f.body.stmts[0].span.end], "let x = 1 + a * 2 == 3;");
    }

    #[test]
    fn statements() {
        let src = "const K = 0xFF00;\nfn g() { while (1) { if (x) { break; } else if (y) { return; } else { regs[1] += 2; } } }";
        let u = parse(src).unwrap();
        assert_eq!(u.items.len(), 2);
    }

    #[test]
    fn syntax_errors() {
        for bad in ["fn f( { }", "fn f() { let = 3; }", "fn f() { 1 = 2; }", "fn f() { x + ; }", "let x = 1;", "fn f() {"] {
            assert!(matches!(parse(bad), Err(CompileError::Syntax { .. })), "{bad}");
        }
    }
}
