use std::fmt;

use serde::{Deserialize, Serialize};

use super::SqlError;

/// Byte range in the source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Identifier or keyword, as written.
    Word(String),
    Number(String),
    /// Quoted string, quotes included.
    Str(String),
    Sym(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

impl Token {
    /// Case-insensitive keyword test.
    pub fn is_word(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.tok, Tok::Sym(t) if t == s)
    }
}

const SYMBOLS: [&str; 15] = ["<>", "!=", "<=", ">=", "(", ")", ",", ".", "*", "+", "-", "/", "=", "<", ">"];

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Word(text[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            Tok::Number(text[start..i].to_string())
        } else if c == b'\'' || c == b'"' {
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(SqlError::unsupported("unterminated string", Span { start, end: i }));
                }
                if bytes[i] == c {
                    // A doubled quote is an escaped quote.
                    if i + 1 < bytes.len() && bytes[i + 1] == c {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            Tok::Str(text[start..i].to_string())
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            i += sym.len();
            Tok::Sym(sym)
        } else if c == b';' && text[i + 1..].trim().is_empty() {
            break;
        } else {
            let end = start + text[start..].chars().next().map_or(1, char::len_utf8);
            return Err(SqlError::unsupported(
                format!("unexpected character `{}`", &text[start..end]),
                Span { start, end },
            ));
        };
        out.push(Token {
            tok,
            span: Span { start, end: i },
        });
    }
    Ok(out)
}
