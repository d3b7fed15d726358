//! Tag models (`.tag`).
//!
//! The structure is fixed by the common tag language; only the element
//! identifiers vary per source DSL. Qualified names are always accepted,
//! bracketed identifiers only when the [`LanguageProfile`] declares a
//! bracket rule that matches their text.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::derive::{BracketMatch, LanguageProfile};
use crate::lexer::{quote, Scanner, SyntaxError};
use crate::span::{QualifiedName, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagModel {
    pub package: Option<QualifiedName>,
    pub conforms_to: Vec<SchemaRef>,
    pub name: String,
    pub target_model: QualifiedName,
    pub body: Vec<BodyItem>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaRef {
    pub name: QualifiedName,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BodyItem {
    Context(Context),
    Statement(TagStatement),
    /// A `...` placeholder for omitted content.
    Elision(Span),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    pub element: ElementRef,
    pub body: Vec<BodyItem>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagStatement {
    pub elements: Vec<ElementRef>,
    pub tags: Vec<TagUse>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElementRef {
    pub ident: ElementIdentifier,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElementIdentifier {
    QualifiedName(QualifiedName),
    /// `[ ... ]` with the bracket rules its text matched, best first.
    Bracket {
        raw: String,
        matches: Vec<BracketMatch>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagUse {
    pub name: String,
    pub value: TagValue,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TagValue {
    Simple,
    /// The unescaped content of the string literal.
    Valued(String),
    Complex(Vec<TagUse>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TagModelError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{span}: `[{raw}]` matches no identifier form of this language")]
    UnknownIdentifierForm { raw: String, span: Span },
    #[error("{span}: a tag model must declare `conforms to` at least one tagschema")]
    MissingConformsTo { span: Span },
}

impl TagModelError {
    pub fn span(&self) -> Span {
        match self {
            TagModelError::Syntax(e) => e.span,
            TagModelError::UnknownIdentifierForm { span, .. }
            | TagModelError::MissingConformsTo { span } => *span,
        }
    }
}

impl fmt::Display for ElementIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementIdentifier::QualifiedName(name) => write!(f, "{name}"),
            ElementIdentifier::Bracket { raw, .. } => write!(f, "[{raw}]"),
        }
    }
}

impl TagModel {
    pub fn qualified_name(&self) -> QualifiedName {
        match &self.package {
            Some(p) => p.child(&self.name),
            None => QualifiedName::new([self.name.clone()]),
        }
    }

    /// All statements in source order, each with the `within` chain that
    /// encloses it (outermost first).
    pub fn statements(&self) -> Vec<(Vec<&ElementRef>, &TagStatement)> {
        fn walk<'a>(
            items: &'a [BodyItem],
            chain: &mut Vec<&'a ElementRef>,
            out: &mut Vec<(Vec<&'a ElementRef>, &'a TagStatement)>,
        ) {
            for item in items {
                match item {
                    BodyItem::Statement(st) => out.push((chain.clone(), st)),
                    BodyItem::Context(ctx) => {
                        chain.push(&ctx.element);
                        walk(&ctx.body, chain, out);
                        chain.pop();
                    }
                    BodyItem::Elision(_) => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut Vec::new(), &mut out);
        out
    }
}

pub fn parse_tag_model(source: &str, profile: &LanguageProfile) -> Result<TagModel, TagModelError> {
    let mut p = TagParser {
        s: Scanner::new(source),
        profile,
    };
    p.model()
}

struct TagParser<'a> {
    s: Scanner<'a>,
    profile: &'a LanguageProfile,
}

impl TagParser<'_> {
    fn model(&mut self) -> Result<TagModel, TagModelError> {
        let s = &mut self.s;
        let package = if s.eat_keyword("package") {
            let (name, _) = s.qualified_name("a package name")?;
            s.expect_char(';')?;
            Some(name)
        } else {
            None
        };
        let at = s.span_here();
        if !s.eat_keyword("conforms") {
            if s.peek_keyword("tags") {
                return Err(TagModelError::MissingConformsTo { span: at });
            }
            return Err(s.unexpected("`conforms to`").into());
        }
        s.expect_keyword("to")?;
        let mut conforms_to = Vec::new();
        loop {
            let (name, span) = s.qualified_name("a tagschema name")?;
            conforms_to.push(SchemaRef { name, span });
            if !s.eat_char(',') {
                break;
            }
        }
        s.expect_char(';')?;
        let span = s.expect_keyword("tags")?;
        let (name, _) = s.expect_ident("a tag model name")?;
        s.expect_keyword("for")?;
        let (target_model, _) = s.qualified_name("a target model name")?;
        s.expect_char('{')?;
        let body = self.body()?;
        if !self.s.at_end() {
            return Err(self.s.unexpected("end of input").into());
        }
        Ok(TagModel {
            package,
            conforms_to,
            name,
            target_model,
            body,
            span,
        })
    }

    /// Items up to and including the closing `}`.
    fn body(&mut self) -> Result<Vec<BodyItem>, TagModelError> {
        let mut items = Vec::new();
        loop {
            let at = self.s.span_here();
            if self.s.eat_char('}') {
                return Ok(items);
            }
            if self.s.eat_str("...") {
                items.push(BodyItem::Elision(at));
            } else if self.s.eat_keyword("within") {
                let element = self.element_ref()?;
                self.s.expect_char('{')?;
                let body = self.body()?;
                items.push(BodyItem::Context(Context { element, body }));
            } else if self.s.eat_keyword("tag") {
                items.push(BodyItem::Statement(self.statement(at)?));
            } else {
                return Err(self.s.unexpected("`tag`, `within` or `}`").into());
            }
        }
    }

    fn statement(&mut self, span: Span) -> Result<TagStatement, TagModelError> {
        let mut elements = vec![self.element_ref()?];
        while self.s.eat_char(',') {
            elements.push(self.element_ref()?);
        }
        self.s.expect_keyword("with")?;
        let mut tags = vec![self.tag()?];
        while self.s.eat_char(',') {
            tags.push(self.tag()?);
        }
        self.s.expect_char(';')?;
        Ok(TagStatement {
            elements,
            tags,
            span,
        })
    }

    fn element_ref(&mut self) -> Result<ElementRef, TagModelError> {
        if self.s.peek_char() == Some('[') {
            let (raw, span) = self.s.bracketed_raw()?;
            let matches = self.profile.match_bracket(&raw);
            if matches.is_empty() {
                return Err(TagModelError::UnknownIdentifierForm { raw, span });
            }
            return Ok(ElementRef {
                ident: ElementIdentifier::Bracket { raw, matches },
                span,
            });
        }
        let (name, span) = self.s.qualified_name("an element identifier")?;
        Ok(ElementRef {
            ident: ElementIdentifier::QualifiedName(name),
            span,
        })
    }

    fn tag(&mut self) -> Result<TagUse, TagModelError> {
        let (name, span) = self.s.expect_ident("a tag name")?;
        let value = if self.s.eat_char('=') {
            TagValue::Valued(self.s.string_literal()?.0)
        } else if self.s.eat_char('{') {
            let mut subtags = Vec::new();
            if !self.s.eat_char('}') {
                subtags.push(self.tag()?);
                while self.s.eat_char(',') {
                    subtags.push(self.tag()?);
                }
                self.s.expect_char(';')?;
                self.s.expect_char('}')?;
            }
            TagValue::Complex(subtags)
        } else {
            TagValue::Simple
        };
        Ok(TagUse { name, value, span })
    }
}

impl fmt::Display for TagModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if let Some(p) = &self.package {
            let _ = writeln!(out, "package {p};");
        }
        let schemas: Vec<String> = self
            .conforms_to
            .iter()
            .map(|r| r.name.to_string())
            .collect();
        let _ = writeln!(out, "conforms to {};", schemas.join(", "));
        let _ = writeln!(out);
        let _ = writeln!(out, "tags {} for {} {{", self.name, self.target_model);
        write_body(&mut out, &self.body, 1);
        out.push_str("}\n");
        f.write_str(&out)
    }
}

fn write_body(out: &mut String, items: &[BodyItem], depth: usize) {
    let indent = "    ".repeat(depth);
    for item in items {
        match item {
            BodyItem::Elision(_) => {
                let _ = writeln!(out, "{indent}...");
            }
            BodyItem::Context(ctx) => {
                let _ = writeln!(out, "{indent}within {} {{", ctx.element.ident);
                write_body(out, &ctx.body, depth + 1);
                let _ = writeln!(out, "{indent}}}");
            }
            BodyItem::Statement(st) => {
                let elements: Vec<String> =
                    st.elements.iter().map(|e| e.ident.to_string()).collect();
                let tags: Vec<String> = st.tags.iter().map(tag_text).collect();
                let _ = writeln!(
                    out,
                    "{indent}tag {} with {};",
                    elements.join(", "),
                    tags.join(", ")
                );
            }
        }
    }
}

fn tag_text(tag: &TagUse) -> String {
    match &tag.value {
        TagValue::Simple => tag.name.clone(),
        TagValue::Valued(raw) => format!("{} = {}", tag.name, quote(raw)),
        TagValue::Complex(subtags) if subtags.is_empty() => format!("{} {{ }}", tag.name),
        TagValue::Complex(subtags) => {
            let inner: Vec<String> = subtags.iter().map(tag_text).collect();
            format!("{} {{ {}; }}", tag.name, inner.join(", "))
        }
    }
}
