//! Tagged source trees in the srcML style: element nodes wrap spans of the
//! source text, and concatenating every text child in document order gives
//! the source back.

use std::fmt::Write as _;

use thiserror::Error;

use crate::toy::ast::{Block, ExprKind, Expr, Item, Place, Stmt, StmtKind};
use crate::toy::{self, CompileError, Span};

pub const STMT: &str = "stmt";
pub const BLOCK: &str = "block";
pub const NUMBER: &str = "number";
pub const OPERATOR_COMP: &str = "operator_comp";
pub const OPERATOR_ARITH: &str = "operator_arith";
/// Virtual tag naming statement slots: each block with `n` statements has
/// `n + 1` positions, numbered in document order.
pub const INTER_BLOCK: &str = "_inter_block";

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("{file}: malformed XML: {msg}")]
    Xml { file: String, msg: String },
    #[error("{file}: {msg}")]
    Source { file: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Child {
    Text(String),
    Node(Node),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Child>,
}

impl Node {
    pub fn new(tag: &str) -> Node {
        Node { tag: tag.to_string(), attrs: Vec::new(), children: Vec::new() }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, out: &mut String) {
        for c in &self.children {
            match c {
                Child::Text(t) => out.push_str(t),
                Child::Node(n) => n.render_into(out),
            }
        }
    }

    /// Merges adjacent text children and drops empty ones, recursively. Keeps
    /// the tree equal to what an XML round trip would produce.
    pub fn normalize(&mut self) {
        let mut out: Vec<Child> = Vec::with_capacity(self.children.len());
        for c in self.children.drain(..) {
            match c {
                Child::Text(t) if t.is_empty() => {}
                Child::Text(t) => match out.last_mut() {
                    Some(Child::Text(prev)) => prev.push_str(&t),
                    _ => out.push(Child::Text(t)),
                },
                Child::Node(mut n) => {
                    n.normalize();
                    out.push(Child::Node(n));
                }
            }
        }
        self.children = out;
    }

    fn count_into(&self, tag: &str, n: &mut usize) {
        for c in &self.children {
            if let Child::Node(node) = c {
                if node.tag == tag {
                    *n += 1;
                }
                node.count_into(tag, n);
            }
        }
    }

    /// Path (child indices from `self`) of the `index`-th descendant tagged
    /// `tag` in pre-order.
    fn locate(&self, tag: &str, index: &mut usize, path: &mut Vec<usize>) -> bool {
        for (i, c) in self.children.iter().enumerate() {
            if let Child::Node(node) = c {
                path.push(i);
                if node.tag == tag {
                    if *index == 0 {
                        return true;
                    }
                    *index -= 1;
                }
                if node.locate(tag, index, path) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }

    fn write_xml(&self, out: &mut String) {
        let _ = write!(out, "<{}", self.tag);
        for (k, v) in &self.attrs {
            let _ = write!(out, " {k}=\"{}\"", escape(v, true));
        }
        if self.children.is_empty() {
            out.push_str("/>");
            return;
        }
        out.push('>');
        for c in &self.children {
            match c {
                Child::Text(t) => out.push_str(&escape(t, false)),
                Child::Node(n) => n.write_xml(out),
            }
        }
        let _ = write!(out, "</{}>", self.tag);
    }
}

fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// A parsed source file. Ingredient (donor) trees are read-only.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceTree {
    pub file: String,
    pub root: Node,
    pub read_only: bool,
}

impl SourceTree {
    pub fn from_xml(file: &str, xml: &str) -> Result<SourceTree, TreeError> {
        let doc = roxmltree::Document::parse(xml).map_err(|e| TreeError::Xml { file: file.to_string(), msg: e.to_string() })?;
        fn convert(n: roxmltree::Node) -> Node {
            let mut node = Node::new(n.tag_name().name());
            node.attrs = n.attributes().map(|a| (a.name().to_string(), a.value().to_string())).collect();
            for c in n.children() {
                if c.is_element() {
                    node.children.push(Child::Node(convert(c)));
                } else if c.is_text() {
                    node.children.push(Child::Text(c.text().unwrap_or_default().to_string()));
                }
            }
            node
        }
        let mut root = convert(doc.root_element());
        root.normalize();
        Ok(SourceTree { file: file.to_string(), root, read_only: false })
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
        self.root.write_xml(&mut out);
        out.push('\n');
        out
    }

    /// The source text the tree stands for.
    pub fn render(&self) -> String {
        self.root.text()
    }

    /// Builds a tagged tree from toy-language source.
    pub fn from_toy_source(file: &str, src: &str) -> Result<SourceTree, TreeError> {
        let unit = toy::parse(src).map_err(|e: CompileError| TreeError::Source { file: file.to_string(), msg: e.render(src) })?;
        let mut spans = Vec::new();
        for item in &unit.items {
            match item {
                Item::Const(c) => {
                    spans.push(Tagged::new(c.span, "decl"));
                    expr_spans(&c.value, &mut spans);
                }
                Item::Fn(f) => {
                    spans.push(Tagged::new(f.span, "function"));
                    block_spans(&f.body, &mut spans);
                }
            }
        }
        spans.sort_by_key(|t| (t.span.start, std::cmp::Reverse(t.span.end), t.rank));
        let mut root = Node::new("unit");
        root.attrs.push(("filename".into(), file.trim_end_matches(".xml").to_string()));
        let mut pos = 0;
        let mut it = spans.into_iter().peekable();
        build(&mut root, src, &mut pos, src.len(), &mut it);
        root.normalize();
        Ok(SourceTree { file: file.to_string(), root, read_only: false })
    }

    pub fn count(&self, tag: &str) -> usize {
        if tag == INTER_BLOCK {
            return self.slots().len();
        }
        let mut n = 0;
        self.root.count_into(tag, &mut n);
        n
    }

    pub fn path(&self, tag: &str, index: usize) -> Option<Vec<usize>> {
        let mut i = index;
        let mut path = Vec::new();
        self.root.locate(tag, &mut i, &mut path).then_some(path)
    }

    pub fn node(&self, path: &[usize]) -> &Node {
        let mut n = &self.root;
        for &i in path {
            match &n.children[i] {
                Child::Node(c) => n = c,
                Child::Text(_) => unreachable!("path through a text child"),
            }
        }
        n
    }

    pub fn node_mut(&mut self, path: &[usize]) -> &mut Node {
        let mut n = &mut self.root;
        for &i in path {
            match &mut n.children[i] {
                Child::Node(c) => n = c,
                Child::Text(_) => unreachable!("path through a text child"),
            }
        }
        n
    }

    pub fn find(&self, tag: &str, index: usize) -> Option<&Node> {
        self.path(tag, index).map(|p| self.node(&p))
    }

    /// Statement slots in document order as (block path, child index to
    /// insert at).
    pub fn slots(&self) -> Vec<(Vec<usize>, usize)> {
        fn walk(n: &Node, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
            if n.tag == BLOCK {
                let stmts: Vec<usize> = n
                    .children
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| matches!(c, Child::Node(s) if s.tag == STMT))
                    .map(|(i, _)| i)
                    .collect();
                for &i in &stmts {
                    out.push((path.clone(), i));
                }
                let end = match stmts.last() {
                    Some(&last) => last + 1,
                    None => usize::from(matches!(n.children.first(), Some(Child::Text(t)) if t.starts_with('{'))),
                };
                out.push((path.clone(), end));
            }
            for (i, c) in n.children.iter().enumerate() {
                if let Child::Node(child) = c {
                    path.push(i);
                    walk(child, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Element counts per tag, sorted by tag.
    pub fn tag_counts(&self) -> Vec<(String, usize)> {
        fn walk(n: &Node, m: &mut std::collections::BTreeMap<String, usize>) {
            for c in &n.children {
                if let Child::Node(node) = c {
                    *m.entry(node.tag.clone()).or_default() += 1;
                    walk(node, m);
                }
            }
        }
        let mut m = std::collections::BTreeMap::new();
        *m.entry(self.root.tag.clone()).or_default() += 1;
        walk(&self.root, &mut m);
        m.into_iter().collect()
    }
}

struct Tagged {
    span: Span,
    tag: &'static str,
    rank: u8,
}

impl Tagged {
    fn new(span: Span, tag: &'static str) -> Tagged {
        let rank = match tag {
            "function" | "decl" => 0,
            "stmt" => 1,
            "block" => 2,
            "call" => 3,
            _ => 4,
        };
        Tagged { span, tag, rank }
    }
}

fn build(parent: &mut Node, src: &str, pos: &mut usize, end: usize, it: &mut std::iter::Peekable<std::vec::IntoIter<Tagged>>) {
    while let Some(next) = it.peek() {
        if next.span.start >= end {
            break;
        }
        let t = it.next().expect("peeked");
        if t.span.start > *pos {
            parent.children.push(Child::Text(src[*pos..t.span.start].to_string()));
        }
        *pos = t.span.start;
        let mut node = Node::new(t.tag);
        build(&mut node, src, pos, t.span.end, it);
        if t.span.end > *pos {
            node.children.push(Child::Text(src[*pos..t.span.end].to_string()));
        }
        *pos = t.span.end;
        parent.children.push(Child::Node(node));
    }
    if end > *pos {
        parent.children.push(Child::Text(src[*pos..end].to_string()));
        *pos = end;
    }
}

fn block_spans(b: &Block, out: &mut Vec<Tagged>) {
    out.push(Tagged::new(b.span, BLOCK));
    for s in &b.stmts {
        stmt_spans(s, out, true);
    }
}

fn stmt_spans(s: &Stmt, out: &mut Vec<Tagged>, tagged: bool) {
    if tagged {
        out.push(Tagged::new(s.span, STMT));
    }
    match &s.kind {
        StmtKind::Let { init, .. } => expr_spans(init, out),
        StmtKind::Assign { target, op, op_span, value } => {
            if let Place::Index { index, .. } = target {
                expr_spans(index, out);
            }
            if let crate::toy::ast::AssignOp::Compound(bin) = op {
                out.push(Tagged::new(Span::new(op_span.start, op_span.end - 1), op_tag(*bin)));
            }
            expr_spans(value, out);
        }
        StmtKind::If { cond, then, els } => {
            expr_spans(cond, out);
            block_spans(then, out);
            if let Some(e) = els {
                match &e.kind {
                    // `else { .. }`: the block alone, not a deletable statement
                    StmtKind::Block(b) => block_spans(b, out),
                    _ => stmt_spans(e, out, true),
                }
            }
        }
        StmtKind::While { cond, body } => {
            expr_spans(cond, out);
            block_spans(body, out);
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => expr_spans(e, out),
        StmtKind::Return(None) | StmtKind::Break => {}
        StmtKind::Block(b) => block_spans(b, out),
    }
}

fn op_tag(op: crate::toy::ast::BinOp) -> &'static str {
    if op.is_comparison() {
        OPERATOR_COMP
    } else if op.is_arithmetic() {
        OPERATOR_ARITH
    } else {
        "operator"
    }
}

fn expr_spans(e: &Expr, out: &mut Vec<Tagged>) {
    match &e.kind {
        ExprKind::Num(_) => out.push(Tagged::new(e.span, NUMBER)),
        ExprKind::Var(_) => {}
        ExprKind::Index { index, .. } => expr_spans(index, out),
        ExprKind::Call { args, .. } => {
            out.push(Tagged::new(e.span, "call"));
            for a in args {
                expr_spans(a, out);
            }
        }
        ExprKind::Unary { expr, .. } => expr_spans(expr, out),
        ExprKind::Binary { op, op_span, lhs, rhs } => {
            expr_spans(lhs, out);
            out.push(Tagged::new(*op_span, op_tag(*op)));
            expr_spans(rhs, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "const K = 2;\n// note: a < b & c\nfn interpret(len) {\n    let i = 0;\n    while (i < len) { regs[i] += K * 3; i = i + 1; }\n    if (len == 0) { return; } else { regs[0] = 1; }\n}\n";

    #[test]
    fn tree_renders_the_source_exactly() {
        let t = SourceTree::from_toy_source("a.toy.xml", SRC).unwrap();
        assert_eq!(t.render(), SRC);
    }

    #[test]
    fn xml_round_trip() {
        let t = SourceTree::from_toy_source("a.toy.xml", SRC).unwrap();
        let xml = t.to_xml();
        assert!(xml.contains("&lt;"));
        let back = SourceTree::from_xml("a.toy.xml", &xml).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_xml(), xml);
    }

    #[test]
    fn tags_and_ordinals() {
        let t = SourceTree::from_toy_source("a.toy.xml", SRC).unwrap();
        assert_eq!(t.count(OPERATOR_COMP), 2);
        assert_eq!(t.find(OPERATOR_COMP, 1).unwrap().text(), "==");
        assert_eq!(t.find(OPERATOR_ARITH, 0).unwrap().text(), "+");
        assert_eq!(t.find(NUMBER, 0).unwrap().text(), "2");
        assert_eq!(t.find(NUMBER, 2).unwrap().text(), "3");
        // let, while, i += .., i = .., if, return, regs[0] = 1
        assert_eq!(t.count(STMT), 7);
        assert_eq!(t.find(STMT, 0).unwrap().text(), "let i = 0;");
        assert!(t.find(STMT, 7).is_none());
        // function body, while body, then, else
        assert_eq!(t.count(BLOCK), 4);
        assert_eq!(t.count(INTER_BLOCK), 7 + 4);
    }

    #[test]
    fn three_statement_block() {
        let t = SourceTree::from_toy_source("b.toy.xml", "fn f() { a = 1; b = 2; c = 3; }").unwrap();
        let texts: Vec<String> = (0..3).map(|i| t.find(STMT, i).unwrap().text()).collect();
        assert_eq!(texts, ["a = 1;", "b = 2;", "c = 3;"]);
    }

    #[test]
    fn malformed_xml_is_an_error() {
        assert!(matches!(SourceTree::from_xml("x.xml", "<unit><stmt></unit>"), Err(TreeError::Xml { .. })));
    }
}
