use super::{CompileError, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// longest first so that `<=` wins over `<`
const PUNCT: [&str; 37] = [
    "<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-",
    "*", "/", "%", "&", "|", "^", "!", "~", "<", ">", "=", "(", ")", "{", "}", "[", "]",
];

pub fn lex(src: &str) -> Result<Vec<Token>, CompileError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if src[i..].starts_with("/*") {
            let end = src[i + 2..].find("*/").ok_or(CompileError::syntax(Span::new(i, i + 2), "unterminated comment"))?;
            i += end + 4;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            let span = Span::new(start, i);
            let value = if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                i64::from_str_radix(hex, 16)
            } else {
                text.parse::<i64>()
            }
            .map_err(|_| CompileError::syntax(span, format!("invalid number literal `{text}`")))?;
            out.push(Token { tok: Tok::Number(value), span });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), span: Span::new(start, i) });
        } else if c == b';' || c == b',' {
            out.push(Token { tok: Tok::Punct(if c == b';' { ";" } else { "," }), span: Span::new(i, i + 1) });
            i += 1;
        } else if let Some(p) = PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
            out.push(Token { tok: Tok::Punct(p), span: Span::new(i, i + p.len()) });
            i += p.len();
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(CompileError::syntax(Span::new(i, i + ch.len_utf8()), format!("stray character `{ch}`")));
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(src.len(), src.len()) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_spans() {
        let toks = lex("x <= 0x10; // note\n y>>=2").unwrap();
        let kinds: Vec<Tok> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("x".into()),
                Tok::Punct("<="),
                Tok::Number(16),
                Tok::Punct(";"),
                Tok::Ident("y".into()),
                Tok::Punct(">>="),
                Tok::Number(2),
                Tok::Eof
            ]
        );
        assert_eq!(toks[2].span, Span::new(5, 9));
    }

    #[test]
    fn errors() {
        assert!(lex("a @ b").is_err());
        assert!(lex("12ab").is_err());
        assert!(lex("/* open").is_err());
    }
}
