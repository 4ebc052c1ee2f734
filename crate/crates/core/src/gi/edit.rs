//! Edits, patches and their readable serialization:
//! `SrcmlNumericSetting(('interp.toy.xml', 'number', 4), '0') | ...`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::tree::{Child, SourceTree, BLOCK, INTER_BLOCK, NUMBER, OPERATOR_ARITH, OPERATOR_COMP, STMT};

pub const COMPARISON_OPERATORS: [&str; 6] = ["==", "!=", "<", "<=", ">", ">="];
pub const ARITHMETIC_OPERATORS: [&str; 5] = ["+", "-", "*", "/", "%"];
pub const NUMERIC_VALUES: [&str; 11] = ["0", "1", "-1", "2", "8", "16", "32", "64", "128", "255", "256"];
pub const RELATIVE_STEPS: [&str; 4] = ["+1", "-1", "*2", "/2"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub file: String,
    pub tag: String,
    pub index: usize,
}

impl NodeRef {
    pub fn new(file: &str, tag: &str, index: usize) -> NodeRef {
        NodeRef { file: file.to_string(), tag: tag.to_string(), index }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "('{}', '{}', {})", self.file, self.tag, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditKind {
    StmtDeletion,
    StmtInsertion,
    StmtReplacement,
    NumericSetting,
    RelativeNumericSetting,
    ComparisonOperatorSetting,
    ArithmeticOperatorSetting,
    NodeDeletion(String),
    /// Inserts a node tagged `.0` into a slot of a node tagged `.1`.
    NodeInsertion(String, String),
    NodeReplacement(String),
}

impl EditKind {
    /// The ten kinds with the statement tag filled in for the generic ones.
    pub fn standard() -> Vec<EditKind> {
        vec![
            EditKind::ArithmeticOperatorSetting,
            EditKind::ComparisonOperatorSetting,
            EditKind::NumericSetting,
            EditKind::RelativeNumericSetting,
            EditKind::StmtDeletion,
            EditKind::StmtInsertion,
            EditKind::StmtReplacement,
            EditKind::NodeDeletion(STMT.into()),
            EditKind::NodeInsertion(STMT.into(), BLOCK.into()),
            EditKind::NodeReplacement(STMT.into()),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            EditKind::StmtDeletion => "SrcmlStmtDeletion".into(),
            EditKind::StmtInsertion => "SrcmlStmtInsertion".into(),
            EditKind::StmtReplacement => "SrcmlStmtReplacement".into(),
            EditKind::NumericSetting => "SrcmlNumericSetting".into(),
            EditKind::RelativeNumericSetting => "SrcmlRelativeNumericSetting".into(),
            EditKind::ComparisonOperatorSetting => "SrcmlComparisonOperatorSetting".into(),
            EditKind::ArithmeticOperatorSetting => "SrcmlArithmeticOperatorSetting".into(),
            EditKind::NodeDeletion(t) => format!("XmlNodeDeletion<{t}>"),
            EditKind::NodeInsertion(t, p) => format!("XmlNodeInsertion<{t},{p}>"),
            EditKind::NodeReplacement(t) => format!("XmlNodeReplacement<{t}>"),
        }
    }

    pub fn from_name(s: &str) -> Option<EditKind> {
        let generic = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_prefix('<')).and_then(|r| r.strip_suffix('>'));
        Some(match s {
            "SrcmlStmtDeletion" => EditKind::StmtDeletion,
            "SrcmlStmtInsertion" => EditKind::StmtInsertion,
            "SrcmlStmtReplacement" => EditKind::StmtReplacement,
            "SrcmlNumericSetting" => EditKind::NumericSetting,
            "SrcmlRelativeNumericSetting" => EditKind::RelativeNumericSetting,
            "SrcmlComparisonOperatorSetting" => EditKind::ComparisonOperatorSetting,
            "SrcmlArithmeticOperatorSetting" => EditKind::ArithmeticOperatorSetting,
            _ => {
                if let Some(t) = generic("XmlNodeDeletion") {
                    EditKind::NodeDeletion(t.trim().to_string())
                } else if let Some(t) = generic("XmlNodeReplacement") {
                    EditKind::NodeReplacement(t.trim().to_string())
                } else if let Some((t, p)) = generic("XmlNodeInsertion").and_then(|r| r.split_once(',')) {
                    EditKind::NodeInsertion(t.trim().to_string(), p.trim().to_string())
                } else {
                    return None;
                }
            }
        })
    }

    /// Tag of the node the edit targets.
    pub fn target_tag(&self) -> &str {
        match self {
            EditKind::StmtDeletion | EditKind::StmtReplacement => STMT,
            EditKind::StmtInsertion | EditKind::NodeInsertion(..) => INTER_BLOCK,
            EditKind::NumericSetting | EditKind::RelativeNumericSetting => NUMBER,
            EditKind::ComparisonOperatorSetting => OPERATOR_COMP,
            EditKind::ArithmeticOperatorSetting => OPERATOR_ARITH,
            EditKind::NodeDeletion(t) | EditKind::NodeReplacement(t) => t,
        }
    }

    /// Tag of the donor node, for edits that copy one in.
    pub fn payload_tag(&self) -> Option<&str> {
        match self {
            EditKind::StmtInsertion | EditKind::StmtReplacement => Some(STMT),
            EditKind::NodeInsertion(t, _) | EditKind::NodeReplacement(t) => Some(t),
            _ => None,
        }
    }

    /// Literal choices, for edits that set a value.
    pub fn literals(&self) -> Option<&'static [&'static str]> {
        match self {
            EditKind::NumericSetting => Some(&NUMERIC_VALUES),
            EditKind::RelativeNumericSetting => Some(&RELATIVE_STEPS),
            EditKind::ComparisonOperatorSetting => Some(&COMPARISON_OPERATORS),
            EditKind::ArithmeticOperatorSetting => Some(&ARITHMETIC_OPERATORS),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Payload {
    None,
    Node(NodeRef),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edit {
    pub kind: EditKind,
    pub target: NodeRef,
    pub payload: Payload,
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.kind.name(), self.target)?;
        match &self.payload {
            Payload::None => {}
            Payload::Node(r) => write!(f, ", {r}")?,
            Payload::Literal(v) => write!(f, ", '{v}'")?,
        }
        f.write_str(")")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParsePatchError {
    #[error("edit {index}: {msg}")]
    Edit { index: usize, msg: String },
    #[error("bad params line {0:?}")]
    Params(String),
}

impl std::str::FromStr for Edit {
    type Err = String;

    fn from_str(s: &str) -> Result<Edit, String> {
        let s = s.trim();
        let open = s.find("((").ok_or("expected `((` after the edit name")?;
        let kind = EditKind::from_name(s[..open].trim()).ok_or_else(|| format!("unknown edit {:?}", &s[..open]))?;
        let body = s[open + 1..].strip_suffix(')').ok_or("missing closing `)`")?;
        let mut p = Cursor { s: body, pos: 0 };
        let target = p.node_ref()?;
        let payload = if p.eat(',') {
            if p.peek() == Some('(') {
                Payload::Node(p.node_ref()?)
            } else {
                Payload::Literal(p.quoted()?)
            }
        } else {
            Payload::None
        };
        if !p.rest().trim().is_empty() {
            return Err(format!("trailing text {:?}", p.rest()));
        }
        let edit = Edit { kind, target, payload };
        edit.check_shape()?;
        Ok(edit)
    }
}

impl Edit {
    fn check_shape(&self) -> Result<(), String> {
        if self.target.tag != self.kind.target_tag() {
            return Err(format!("{} targets `{}` nodes, not `{}`", self.kind.name(), self.kind.target_tag(), self.target.tag));
        }
        match (&self.payload, self.kind.payload_tag(), self.kind.literals()) {
            (Payload::Node(r), Some(t), _) if r.tag == t => Ok(()),
            (Payload::Literal(_), None, Some(_)) => Ok(()),
            (Payload::None, None, None) => Ok(()),
            _ => Err(format!("{} has the wrong kind of payload", self.kind.name())),
        }
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn rest(&self) -> &str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let r = self.rest();
        self.pos += r.len() - r.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected `{c}` at {:?}", self.rest()))
        }
    }

    fn quoted(&mut self) -> Result<String, String> {
        let q = self.peek().filter(|c| *c == '\'' || *c == '"').ok_or_else(|| format!("expected a quoted string at {:?}", self.rest()))?;
        self.pos += 1;
        let end = self.rest().find(q).ok_or("unterminated string")?;
        let v = self.rest()[..end].to_string();
        self.pos += end + 1;
        Ok(v)
    }

    fn node_ref(&mut self) -> Result<NodeRef, String> {
        self.expect('(')?;
        let file = self.quoted()?;
        self.expect(',')?;
        let tag = self.quoted()?;
        self.expect(',')?;
        self.skip_ws();
        let digits: String = self.rest().chars().take_while(char::is_ascii_digit).collect();
        let index = digits.parse().map_err(|_| format!("expected an index at {:?}", self.rest()))?;
        self.pos += digits.len();
        self.expect(')')?;
        Ok(NodeRef { file, tag, index })
    }
}

/// An ordered list of edits plus build parameters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Patch {
    pub edits: Vec<Edit>,
    pub params: BTreeMap<String, String>,
}

impl Patch {
    pub fn new(edits: Vec<Edit>) -> Patch {
        Patch { edits, params: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Edits joined by ` | `.
    pub fn edits_text(&self) -> String {
        self.edits.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" | ")
    }

    /// Canonical text: the edit line, then one `param key=value` line per
    /// parameter in key order. Also the cache key.
    pub fn to_text(&self) -> String {
        let mut s = self.edits_text();
        s.push('\n');
        for (k, v) in &self.params {
            s.push_str(&format!("param {k}={v}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Patch, ParsePatchError> {
        let mut patch = Patch::default();
        let mut seen_edits = false;
        for line in text.lines() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(kv) = t.strip_prefix("param ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| ParsePatchError::Params(t.to_string()))?;
                patch.params.insert(k.trim().to_string(), v.trim().to_string());
            } else if !seen_edits {
                seen_edits = true;
                for (index, part) in split_edits(t).into_iter().enumerate() {
                    let e = part.parse::<Edit>().map_err(|msg| ParsePatchError::Edit { index, msg })?;
                    patch.edits.push(e);
                }
            } else {
                return Err(ParsePatchError::Edit { index: patch.edits.len(), msg: format!("unexpected line {t:?}") });
            }
        }
        Ok(patch)
    }
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.edits_text())
    }
}

/// Splits on `|` outside quotes.
fn split_edits(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut start, mut quote) = (0, None);
    for (i, c) in s.char_indices() {
        match (c, quote) {
            ('\'' | '"', None) => quote = Some(c),
            (c, Some(q)) if c == q => quote = None,
            ('|', None) => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

/// Target trees (writable, edited in place) plus read-only donors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trees {
    pub targets: Vec<SourceTree>,
    pub ingredients: Vec<SourceTree>,
}

impl Trees {
    pub fn new(targets: Vec<SourceTree>, mut ingredients: Vec<SourceTree>) -> Trees {
        for t in &mut ingredients {
            t.read_only = true;
        }
        Trees { targets, ingredients }
    }

    pub fn tree(&self, file: &str) -> Option<&SourceTree> {
        self.targets.iter().chain(&self.ingredients).find(|t| t.file == file)
    }

    fn target_mut(&mut self, file: &str) -> Option<&mut SourceTree> {
        self.targets.iter_mut().find(|t| t.file == file && !t.read_only)
    }

    fn payload(&self, r: &NodeRef) -> Option<super::tree::Node> {
        self.tree(&r.file)?.find(&r.tag, r.index).cloned()
    }

    /// Applies one edit. Returns false, leaving the trees untouched, when a
    /// reference does not resolve or the edit does not apply to the node.
    pub fn apply_edit(&mut self, edit: &Edit) -> bool {
        let payload = match &edit.payload {
            Payload::Node(r) => match self.payload(r) {
                Some(n) => Some(n),
                None => return false,
            },
            _ => None,
        };
        let Some(tree) = self.target_mut(&edit.target.file) else { return false };
        let t = &edit.target;
        let applied = match &edit.kind {
            EditKind::StmtInsertion | EditKind::NodeInsertion(..) => {
                let parent_tag = match &edit.kind {
                    EditKind::NodeInsertion(_, p) => p.as_str(),
                    _ => BLOCK,
                };
                let slots = if parent_tag == BLOCK { tree.slots() } else { Vec::new() };
                match (slots.get(t.index), payload) {
                    (Some((path, at)), Some(node)) => {
                        let block = tree.node_mut(path);
                        let empty = !block.children.iter().any(|c| matches!(c, Child::Node(n) if n.tag == STMT));
                        if empty && *at == 1 {
                            // `{}` is one text child; open it up
                            if let Child::Text(t) = &mut block.children[0] {
                                let rest = t.split_off(1);
                                block.children.insert(1, Child::Text(rest));
                            }
                        }
                        block.children.insert(*at, Child::Node(node));
                        true
                    }
                    _ => false,
                }
            }
            _ => match tree.path(&t.tag, t.index) {
                None => false,
                Some(path) => apply_at(tree, &path, &edit.kind, &edit.payload, payload),
            },
        };
        if applied {
            tree.root.normalize();
        }
        applied
    }

    /// Applies the edits in order; each sees the result of its predecessors.
    pub fn apply_patch(&mut self, patch: &Patch) -> Vec<bool> {
        patch.edits.iter().map(|e| self.apply_edit(e)).collect()
    }
}

fn apply_at(tree: &mut SourceTree, path: &[usize], kind: &EditKind, literal: &Payload, payload: Option<super::tree::Node>) -> bool {
    match kind {
        EditKind::StmtDeletion | EditKind::NodeDeletion(_) => {
            let (last, parent) = path.split_last().expect("non-root node");
            tree.node_mut(parent).children.remove(*last);
            true
        }
        EditKind::StmtReplacement | EditKind::NodeReplacement(_) => {
            let node = tree.node_mut(path);
            *node = payload.expect("payload resolved");
            true
        }
        _ => {
            let Payload::Literal(v) = literal else { return false };
            let node = tree.node_mut(path);
            let new = match kind {
                EditKind::RelativeNumericSetting => match relative(&node.text(), v) {
                    Some(n) => n,
                    None => return false,
                },
                _ => v.clone(),
            };
            node.children = vec![Child::Text(new)];
            true
        }
    }
}

fn parse_number(s: &str) -> Option<i64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => i64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

fn relative(current: &str, step: &str) -> Option<String> {
    let v = parse_number(current)?;
    let out = match step {
        "+1" => v.checked_add(1)?,
        "-1" => v.checked_sub(1)?,
        "*2" => v.checked_mul(2)?,
        "/2" => v / 2,
        _ => return None,
    };
    Some(out.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG10: &str = "XmlNodeReplacement<number>(('eval.cpp.xml', 'number', 9), ('eval_diffs.cpp.xml', 'number', 38)) | SrcmlComparisonOperatorSetting(('eval.cpp.xml', 'operator_comp', 4), '>=') | SrcmlNumericSetting(('eval.cpp.xml', 'number', 4), '0')";

    #[test]
    fn readable_form_round_trips() {
        let p = Patch::parse(FIG10).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.edits[0].kind, EditKind::NodeReplacement("number".into()));
        assert_eq!(p.edits[1].payload, Payload::Literal(">=".into()));
        assert_eq!(p.edits_text(), FIG10);
        assert_eq!(Patch::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn params_are_part_of_the_text() {
        let mut p = Patch::parse(FIG10).unwrap();
        p.params.insert("width".into(), "16".into());
        let text = p.to_text();
        assert!(text.ends_with("param width=16\n"));
        assert_eq!(Patch::parse(&text).unwrap(), p);
        assert_eq!(Patch::default().to_text(), "\n");
        assert_eq!(Patch::parse("\n").unwrap(), Patch::default());
    }

    #[test]
    fn malformed_edits_are_rejected() {
        for bad in [
            "SrcmlNumericSetting(('a', 'stmt', 1), '0')",
            "SrcmlStmtDeletion(('a', 'stmt', 1), '0')",
            "Frobnicate(('a', 'stmt', 1))",
            "SrcmlStmtDeletion(('a', 'stmt', x))",
            "SrcmlStmtReplacement(('a', 'stmt', 1), ('b', 'number', 2))",
        ] {
            assert!(Patch::parse(bad).is_err(), "{bad}");
        }
    }

    fn trees(src: &str) -> Trees {
        Trees::new(vec![SourceTree::from_toy_source("t.xml", src).unwrap()], vec![SourceTree::from_toy_source("d.xml", "fn d() { z = 0; }").unwrap()])
    }

    fn edit(s: &str) -> Edit {
        s.parse().unwrap()
    }

    #[test]
    fn literal_edits() {
        let mut t = trees("fn f() { if (a == 0x10) { b = a + 3; } }");
        assert!(t.apply_edit(&edit("SrcmlComparisonOperatorSetting(('t.xml', 'operator_comp', 0), '>=')")));
        assert!(t.apply_edit(&edit("SrcmlArithmeticOperatorSetting(('t.xml', 'operator_arith', 0), '*')")));
        assert!(t.apply_edit(&edit("SrcmlRelativeNumericSetting(('t.xml', 'number', 0), '*2')")));
        assert!(t.apply_edit(&edit("SrcmlNumericSetting(('t.xml', 'number', 1), '0')")));
        assert_eq!(t.targets[0].render(), "fn f() { if (a >= 32) { b = a * 0; } }");
        assert!(!t.apply_edit(&edit("SrcmlNumericSetting(('t.xml', 'number', 2), '0')")));
    }

    #[test]
    fn statement_edits() {
        let mut t = trees("fn f() { a = 1; b = 2; }");
        assert!(t.apply_edit(&edit("SrcmlStmtInsertion(('t.xml', '_inter_block', 2), ('d.xml', 'stmt', 0))")));
        assert_eq!(t.targets[0].render(), "fn f() { a = 1; b = 2;z = 0; }");
        assert!(t.apply_edit(&edit("SrcmlStmtReplacement(('t.xml', 'stmt', 0), ('t.xml', 'stmt', 1))")));
        assert!(t.apply_edit(&edit("XmlNodeDeletion<stmt>(('t.xml', 'stmt', 1))")));
        assert_eq!(t.targets[0].render(), "fn f() { b = 2; z = 0; }");
        // empty block: the only slot is just inside the brace
        let mut t = trees("fn f() {}");
        assert!(t.apply_edit(&edit("XmlNodeInsertion<stmt,block>(('t.xml', '_inter_block', 0), ('d.xml', 'stmt', 0))")));
        assert_eq!(t.targets[0].render(), "fn f() {z = 0;}");
    }

    #[test]
    fn ingredients_are_never_targets() {
        let mut t = trees("fn f() { a = 1; }");
        let before = t.ingredients.clone();
        assert!(!t.apply_edit(&edit("SrcmlStmtDeletion(('d.xml', 'stmt', 0))")));
        assert_eq!(t.ingredients, before);
    }

    #[test]
    fn unresolvable_edits_leave_trees_alone() {
        let mut t = trees("fn f() { a = 1; }");
        let before = t.clone();
        assert!(!t.apply_edit(&edit("SrcmlStmtDeletion(('t.xml', 'stmt', 5))")));
        assert!(!t.apply_edit(&edit("SrcmlStmtReplacement(('t.xml', 'stmt', 0), ('d.xml', 'stmt', 9))")));
        assert!(!t.apply_edit(&edit("SrcmlStmtDeletion(('nope.xml', 'stmt', 0))")));
        assert_eq!(t, before);
    }
}
