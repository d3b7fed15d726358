//! Character-level scanner shared by the hand-written parsers.
//!
//! All four textual languages (manifests, statecharts, tag models and
//! tagschemas) are small enough to parse scannerless. The scanner tracks
//! line and column, skips whitespace and comments, and offers the handful
//! of token shapes the grammars need.

use std::fmt;

use thiserror::Error;

use crate::span::{QualifiedName, Span};

/// A syntax error at a concrete source position.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}", line = span.line, column = span.column)]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

pub type ScanResult<T> = Result<T, SyntaxError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommentStyle {
    /// `//` line and `/* */` block comments.
    CFamily,
    /// `#` to end of line.
    Hash,
}

pub struct Scanner<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
    comments: CommentStyle,
}

impl<'a> Scanner<'a> {
    pub fn new(src: &'a str) -> Self {
        Scanner {
            src,
            pos: 0,
            line: 1,
            column: 1,
            comments: CommentStyle::CFamily,
        }
    }

    /// A scanner over a fragment that starts at `origin` in some larger file.
    pub fn with_origin(src: &'a str, origin: Span, comments: CommentStyle) -> Self {
        Scanner {
            src,
            pos: 0,
            line: origin.line,
            column: origin.column,
            comments,
        }
    }

    pub fn span(&self) -> Span {
        Span::new(self.line, self.column)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest().chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, bytes: usize) {
        let end = self.pos + bytes;
        while self.pos < end {
            self.bump();
        }
    }

    pub fn skip_trivia(&mut self) {
        loop {
            let rest = self.rest();
            if let Some(c) = rest.chars().next() {
                if c.is_whitespace() {
                    self.bump();
                    continue;
                }
            }
            match self.comments {
                CommentStyle::CFamily if rest.starts_with("//") => {
                    while let Some(c) = self.rest().chars().next() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                CommentStyle::CFamily if rest.starts_with("/*") => {
                    self.bump_n(2);
                    match self.rest().find("*/") {
                        Some(end) => self.bump_n(end + 2),
                        None => self.bump_n(self.rest().len()),
                    }
                }
                CommentStyle::Hash if rest.starts_with('#') => {
                    while let Some(c) = self.rest().chars().next() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_trivia();
        self.pos >= self.src.len()
    }

    pub fn peek_char(&mut self) -> Option<char> {
        self.skip_trivia();
        self.rest().chars().next()
    }

    pub fn peek_str(&mut self, s: &str) -> bool {
        self.skip_trivia();
        self.rest().starts_with(s)
    }

    pub fn eat_str(&mut self, s: &str) -> bool {
        if self.peek_str(s) {
            self.bump_n(s.len());
            true
        } else {
            false
        }
    }

    pub fn eat_char(&mut self, c: char) -> bool {
        if self.peek_char() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_char(&mut self, c: char) -> ScanResult<Span> {
        let span = self.span_here();
        if self.eat_char(c) {
            Ok(span)
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    /// Position of the next significant character.
    pub fn span_here(&mut self) -> Span {
        self.skip_trivia();
        self.span()
    }

    fn ident_len(rest: &str) -> usize {
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return 0,
        }
        for (i, c) in chars {
            if !(c.is_ascii_alphanumeric() || c == '_') {
                return i;
            }
        }
        rest.len()
    }

    pub fn peek_ident(&mut self) -> Option<&'a str> {
        self.skip_trivia();
        let rest = self.rest();
        let len = Self::ident_len(rest);
        (len > 0).then(|| &rest[..len])
    }

    pub fn ident(&mut self) -> Option<String> {
        let word = self.peek_ident()?;
        self.bump_n(word.len());
        Some(word.to_owned())
    }

    pub fn expect_ident(&mut self, what: &str) -> ScanResult<(String, Span)> {
        let span = self.span_here();
        match self.ident() {
            Some(word) => Ok((word, span)),
            None => Err(self.unexpected(what)),
        }
    }

    pub fn peek_keyword(&mut self, keyword: &str) -> bool {
        self.peek_ident() == Some(keyword)
    }

    pub fn eat_keyword(&mut self, keyword: &str) -> bool {
        if self.peek_keyword(keyword) {
            self.bump_n(keyword.len());
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, keyword: &str) -> ScanResult<Span> {
        let span = self.span_here();
        if self.eat_keyword(keyword) {
            Ok(span)
        } else {
            Err(self.unexpected(&format!("`{keyword}`")))
        }
    }

    pub fn qualified_name(&mut self, what: &str) -> ScanResult<(QualifiedName, Span)> {
        let (first, span) = self.expect_ident(what)?;
        let mut segments = vec![first];
        loop {
            // `...` is an elision marker, never a name separator.
            if self.peek_str(".") && !self.peek_str("...") {
                self.bump_n(1);
                let (next, _) = self.expect_ident("an identifier after `.`")?;
                segments.push(next);
            } else {
                break;
            }
        }
        Ok((QualifiedName::new(segments), span))
    }

    /// A double-quoted string literal. Recognized escapes: `\"` and `\\`.
    pub fn string_literal(&mut self) -> ScanResult<(String, Span)> {
        let span = self.span_here();
        if !self.rest().starts_with('"') {
            return Err(self.unexpected("a string literal"));
        }
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(SyntaxError::new(span, "unterminated string literal")),
                Some('"') => return Ok((out, span)),
                Some('\\') => {
                    let at = self.span();
                    match self.bump() {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some(other) => {
                            return Err(SyntaxError::new(
                                at,
                                format!("unsupported escape sequence `\\{other}`"),
                            ))
                        }
                        None => return Err(SyntaxError::new(span, "unterminated string literal")),
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }

    /// Consumes `[ ... ]` and returns the trimmed inner text. Nested
    /// brackets are balanced; the text is otherwise opaque.
    pub fn bracketed_raw(&mut self) -> ScanResult<(String, Span)> {
        let span = self.expect_char('[')?;
        let start = self.pos;
        let mut depth = 1usize;
        loop {
            match self.bump() {
                None => return Err(SyntaxError::new(span, "unterminated `[`")),
                Some('[') => depth += 1,
                Some(']') => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = &self.src[start..self.pos - 1];
                        return Ok((inner.trim().to_owned(), span));
                    }
                }
                Some(_) => {}
            }
        }
    }

    /// Consumes raw text up to (not including) `stop`, returning it trimmed.
    pub fn raw_until(&mut self, stop: char) -> ScanResult<(String, Span)> {
        let span = self.span_here();
        let start = self.pos;
        loop {
            match self.rest().chars().next() {
                None => return Err(SyntaxError::new(span, format!("expected `{stop}`"))),
                Some(c) if c == stop => {
                    return Ok((self.src[start..self.pos].trim().to_owned(), span));
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }

    pub fn unexpected(&mut self, expected: &str) -> SyntaxError {
        let span = self.span_here();
        let found = Found(self.rest());
        SyntaxError::new(span, format!("expected {expected}, found {found}"))
    }
}

struct Found<'a>(&'a str);

impl fmt::Display for Found<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let len = Scanner::ident_len(self.0);
        if len > 0 {
            write!(f, "`{}`", &self.0[..len])
        } else {
            match self.0.chars().next() {
                Some(c) => write!(f, "`{c}`"),
                None => f.write_str("end of input"),
            }
        }
    }
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders `text` as a string literal, escaping `"` and `\`.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

pub fn is_identifier(text: &str) -> bool {
    !text.is_empty() && Scanner::ident_len(text) == text.len()
}
