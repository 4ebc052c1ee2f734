//! A miniature C-like statement language used as the hermetic improvement
//! target. Sources are parsed into a span-carrying AST, checked, optionally
//! optimized and compiled to stack bytecode that runs on a cost-counting VM.
//!
//! Values are 64-bit wrapping integers. Three builtin arrays give access to
//! sandbox memory: `regs` (bytes, read-write), `prog` (bytes, read-only) and
//! `lut` (32-bit words, read-only). Builtins `sext8(v)` and
//! `blend(k, a, b)` model vector sign extension and masked blending. The
//! constant `WIDTH` holds the configured lane width.
//!
//! ```text
//! const LANES = 64;
//! fn interpret(len) {
//!     let i = 0;
//!     while (i < len) { i += 1; }
//! }
//! ```

pub mod ast;
mod check;
mod codegen;
pub mod hir;
mod lexer;
mod opt;
mod parser;
mod vm;

use thiserror::Error;

pub use codegen::{Artifact, FnCode, Op};
pub use parser::parse;
pub use vm::{run, ArrayMemory, Trap, VecMemory, VmLimits};

/// Name and arity of the function the harness calls.
pub const ENTRY: &str = "interpret";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("syntax error at byte {}: {msg}", span.start)]
    Syntax { span: Span, msg: String },
    #[error("error at byte {}: {msg}", span.start)]
    Semantic { span: Span, msg: String },
}

impl CompileError {
    pub fn syntax(span: Span, msg: impl Into<String>) -> Self {
        CompileError::Syntax { span, msg: msg.into() }
    }

    pub fn semantic(span: Span, msg: impl Into<String>) -> Self {
        CompileError::Semantic { span, msg: msg.into() }
    }

    pub fn span(&self) -> Span {
        match self {
            CompileError::Syntax { span, .. } | CompileError::Semantic { span, .. } => *span,
        }
    }

    /// `line:col: message` diagnostic against the source it came from.
    pub fn render(&self, src: &str) -> String {
        let at = self.span().start.min(src.len());
        let line = src[..at].matches('\n').count() + 1;
        let col = at - src[..at].rfind('\n').map_or(0, |p| p + 1) + 1;
        let msg = match self {
            CompileError::Syntax { msg, .. } | CompileError::Semantic { msg, .. } => msg,
        };
        format!("{line}:{col}: error: {msg}")
    }
}

/// Build stage: the first build skips optimization, the second folds
/// constants and removes dead code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Debug,
    Optimized,
}

pub fn compile(src: &str, stage: Stage, width: u32) -> Result<Artifact, CompileError> {
    let unit = parser::parse(src)?;
    let mut hir = check::resolve(&unit, width as i64)?;
    if stage == Stage::Optimized {
        hir = opt::optimize(hir);
    }
    Ok(codegen::generate(&hir))
}
