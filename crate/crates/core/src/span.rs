use std::fmt;

use serde::{Deserialize, Serialize};

/// A 1-based line/column position in a source file.
///
/// Spans never participate in structural equality or hashing: two models
/// that differ only in layout compare equal.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// A dot-separated name such as `loggingschema.StatechartTagSchema`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub struct QualifiedName(Vec<String>);

impl QualifiedName {
    pub fn new<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        QualifiedName(segments.into_iter().map(Into::into).collect())
    }

    /// Splits on `.`; empty input yields an empty name.
    pub fn parse(text: &str) -> Self {
        if text.is_empty() {
            return QualifiedName(Vec::new());
        }
        QualifiedName(text.split('.').map(str::to_owned).collect())
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_simple(&self) -> bool {
        self.0.len() == 1
    }

    pub fn last(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    /// All segments but the last.
    pub fn qualifier(&self) -> QualifiedName {
        match self.0.split_last() {
            Some((_, init)) => QualifiedName(init.to_vec()),
            None => QualifiedName::default(),
        }
    }

    pub fn child(&self, segment: impl Into<String>) -> QualifiedName {
        let mut segments = self.0.clone();
        segments.push(segment.into());
        QualifiedName(segments)
    }

    pub fn join(&self, other: &QualifiedName) -> QualifiedName {
        let mut segments = self.0.clone();
        segments.extend(other.0.iter().cloned());
        QualifiedName(segments)
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

impl From<QualifiedName> for String {
    fn from(name: QualifiedName) -> String {
        name.to_string()
    }
}

impl From<String> for QualifiedName {
    fn from(text: String) -> Self {
        QualifiedName::parse(&text)
    }
}

impl From<&str> for QualifiedName {
    fn from(text: &str) -> Self {
        QualifiedName::parse(text)
    }
}
