//! Grammar manifests (`.glang`).
//!
//! A manifest describes a source DSL's grammar in just enough detail to
//! derive its tagging languages: the productions, which of them are
//! identifiable by a qualified name, and the preceding identifiers that
//! label repeated nonterminals on a right-hand side.
//!
//! ```text
//! grammar Statechart
//! @named @alias Statechart production SCDefinition = Name Element*
//! @skip interface Element
//! production Transition = source:Name "->" target:Name
//! external Expression
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::lexer::{self, CommentStyle, Scanner, SyntaxError};
use crate::span::Span;

/// Lexical nonterminals every manifest may reference without declaring.
pub const BUILTIN_NONTERMINALS: &[&str] = &["Name", "QualifiedName", "String", "Int", "Boolean"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarManifest {
    pub grammar_name: String,
    pub productions: Vec<Production>,
    pub interfaces: Vec<Interface>,
    pub externals: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interface {
    pub name: String,
    pub skipped: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Production {
    pub name: String,
    /// Instances carry a qualified name (`@named`).
    pub name_identifiable: bool,
    /// Excluded from derivation (`@skip`).
    pub skipped: bool,
    /// Scope keyword to use instead of the nonterminal name (`@alias`).
    pub alias: Option<String>,
    /// Concrete-syntax sketch for bracket identifiers (`@syntax "..."`).
    pub concrete_syntax_sketch: Option<String>,
    pub rhs: Vec<RhsItem>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RhsItem {
    Terminal(String),
    Ref(RhsRef),
    /// `...`: the rest of the right-hand side is not described.
    Elision,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhsRef {
    pub preceding_identifier: Option<String>,
    pub nonterminal: String,
    pub cardinality: Cardinality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Cardinality {
    #[default]
    One,
    Optional,
    Many,
    AtLeastOne,
}

impl Cardinality {
    fn suffix(self) -> &'static str {
        match self {
            Cardinality::One => "",
            Cardinality::Optional => "?",
            Cardinality::Many => "*",
            Cardinality::AtLeastOne => "+",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{span}: duplicate production `{name}`")]
    DuplicateProduction { name: String, span: Span },
    #[error("{span}: production `{production}` references unknown nonterminal `{nonterminal}`")]
    UnknownNonterminalReference {
        production: String,
        nonterminal: String,
        span: Span,
    },
    #[error("{span}: `{nonterminal}` occurs more than once in `{production}` and every occurrence needs a preceding identifier")]
    MissingPrecedingIdentifier {
        production: String,
        nonterminal: String,
        span: Span,
    },
    #[error("{span}: preceding identifier `{identifier}` is used twice in `{production}`")]
    DuplicatePrecedingIdentifier {
        production: String,
        identifier: String,
        span: Span,
    },
}

impl ManifestError {
    pub fn span(&self) -> Span {
        match self {
            ManifestError::Syntax(e) => e.span,
            ManifestError::DuplicateProduction { span, .. }
            | ManifestError::UnknownNonterminalReference { span, .. }
            | ManifestError::MissingPrecedingIdentifier { span, .. }
            | ManifestError::DuplicatePrecedingIdentifier { span, .. } => *span,
        }
    }
}

impl Production {
    pub fn rhs_refs(&self) -> impl Iterator<Item = &RhsRef> {
        self.rhs.iter().filter_map(|item| match item {
            RhsItem::Ref(r) => Some(r),
            _ => None,
        })
    }

    pub fn preceding_identifiers(&self) -> Vec<&str> {
        self.rhs_refs()
            .filter_map(|r| r.preceding_identifier.as_deref())
            .collect()
    }

    /// Preceding identifiers that distinguish a nonterminal occurring more
    /// than once on this right-hand side, in RHS order.
    pub fn nested_identifiers(&self) -> Vec<&str> {
        let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
        for r in self.rhs_refs() {
            *occurrences.entry(r.nonterminal.as_str()).or_default() += 1;
        }
        self.rhs_refs()
            .filter(|r| occurrences[r.nonterminal.as_str()] > 1)
            .filter_map(|r| r.preceding_identifier.as_deref())
            .collect()
    }

    /// The scope keyword this production contributes.
    pub fn keyword(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

impl GrammarManifest {
    pub fn production(&self, name: &str) -> Option<&Production> {
        self.productions.iter().find(|p| p.name == name)
    }

    pub fn derivable_productions(&self) -> impl Iterator<Item = &Production> {
        self.productions.iter().filter(|p| !p.skipped)
    }

    fn validate(&self) -> Result<(), ManifestError> {
        let mut declared: HashSet<&str> = HashSet::new();
        for p in &self.productions {
            if !declared.insert(&p.name) {
                return Err(ManifestError::DuplicateProduction {
                    name: p.name.clone(),
                    span: p.span,
                });
            }
        }
        for i in &self.interfaces {
            if !declared.insert(&i.name) {
                return Err(ManifestError::DuplicateProduction {
                    name: i.name.clone(),
                    span: i.span,
                });
            }
        }
        declared.extend(self.externals.iter().map(String::as_str));
        declared.extend(BUILTIN_NONTERMINALS.iter().copied());

        for p in &self.productions {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            let mut seen_pi: HashSet<&str> = HashSet::new();
            for r in p.rhs_refs() {
                if !declared.contains(r.nonterminal.as_str()) {
                    return Err(ManifestError::UnknownNonterminalReference {
                        production: p.name.clone(),
                        nonterminal: r.nonterminal.clone(),
                        span: p.span,
                    });
                }
                *counts.entry(&r.nonterminal).or_default() += 1;
                if let Some(pi) = &r.preceding_identifier {
                    if !seen_pi.insert(pi) {
                        return Err(ManifestError::DuplicatePrecedingIdentifier {
                            production: p.name.clone(),
                            identifier: pi.clone(),
                            span: p.span,
                        });
                    }
                }
            }
            for r in p.rhs_refs() {
                if counts[r.nonterminal.as_str()] > 1 && r.preceding_identifier.is_none() {
                    return Err(ManifestError::MissingPrecedingIdentifier {
                        production: p.name.clone(),
                        nonterminal: r.nonterminal.clone(),
                        span: p.span,
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn parse_manifest(source: &str) -> Result<GrammarManifest, ManifestError> {
    let mut grammar_name: Option<String> = None;
    let mut productions = Vec::new();
    let mut interfaces = Vec::new();
    let mut externals: Vec<String> = Vec::new();

    for (index, line) in source.lines().enumerate() {
        let origin = Span::new(index as u32 + 1, 1);
        let mut s = Scanner::with_origin(line, origin, CommentStyle::Hash);
        if s.at_end() {
            continue;
        }
        if grammar_name.is_none() {
            s.expect_keyword("grammar")?;
            let (name, _) = s.expect_ident("a grammar name")?;
            expect_line_end(&mut s)?;
            grammar_name = Some(name);
            continue;
        }
        parse_declaration(&mut s, &mut productions, &mut interfaces, &mut externals)?;
    }

    let grammar_name = grammar_name.ok_or_else(|| {
        SyntaxError::new(Span::new(1, 1), "expected `grammar <Name>` declaration")
    })?;
    let manifest = GrammarManifest {
        grammar_name,
        productions,
        interfaces,
        externals,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn expect_line_end(s: &mut Scanner<'_>) -> Result<(), SyntaxError> {
    if s.at_end() {
        Ok(())
    } else {
        Err(s.unexpected("end of line"))
    }
}

#[derive(Default)]
struct Annotations {
    named: bool,
    skip: bool,
    alias: Option<String>,
    syntax: Option<String>,
}

fn parse_declaration(
    s: &mut Scanner<'_>,
    productions: &mut Vec<Production>,
    interfaces: &mut Vec<Interface>,
    externals: &mut Vec<String>,
) -> Result<(), SyntaxError> {
    let mut ann = Annotations::default();
    while s.eat_char('@') {
        let (word, span) = s.expect_ident("an annotation name")?;
        match word.as_str() {
            "named" => ann.named = true,
            "skip" => ann.skip = true,
            "alias" => ann.alias = Some(s.expect_ident("an alias keyword")?.0),
            "syntax" => ann.syntax = Some(s.string_literal()?.0),
            other => {
                return Err(SyntaxError::new(
                    span,
                    format!("unknown annotation `@{other}`"),
                ))
            }
        }
    }

    let span = s.span_here();
    if s.eat_keyword("production") {
        let (name, span) = s.expect_ident("a production name")?;
        s.expect_char('=')?;
        let rhs = parse_rhs(s)?;
        productions.push(Production {
            name,
            name_identifiable: ann.named,
            skipped: ann.skip,
            alias: ann.alias,
            concrete_syntax_sketch: ann.syntax,
            rhs,
            span,
        });
        return Ok(());
    }
    if ann.named || ann.alias.is_some() || ann.syntax.is_some() {
        return Err(SyntaxError::new(
            span,
            "`@named`, `@alias` and `@syntax` apply only to productions",
        ));
    }
    if s.eat_keyword("interface") {
        let (name, span) = s.expect_ident("an interface name")?;
        expect_line_end(s)?;
        interfaces.push(Interface {
            name,
            skipped: ann.skip,
            span,
        });
        return Ok(());
    }
    if ann.skip {
        return Err(SyntaxError::new(
            span,
            "`@skip` applies only to productions and interfaces",
        ));
    }
    if s.eat_keyword("external") {
        loop {
            externals.push(s.expect_ident("an external nonterminal")?.0);
            if !s.eat_char(',') {
                break;
            }
        }
        return expect_line_end(s);
    }
    Err(s.unexpected("`production`, `interface` or `external`"))
}

fn parse_rhs(s: &mut Scanner<'_>) -> Result<Vec<RhsItem>, SyntaxError> {
    let mut items = Vec::new();
    while !s.at_end() {
        if s.eat_str("...") {
            items.push(RhsItem::Elision);
            continue;
        }
        match s.peek_char() {
            Some('"') => items.push(RhsItem::Terminal(s.string_literal()?.0)),
            Some('\'') => {
                let span = s.span_here();
                s.eat_char('\'');
                let (text, _) = s
                    .raw_until('\'')
                    .map_err(|_| SyntaxError::new(span, "unterminated terminal literal"))?;
                s.eat_char('\'');
                items.push(RhsItem::Terminal(text));
            }
            _ => {
                let (first, _) = s.expect_ident("a nonterminal, terminal or `...`")?;
                let (preceding_identifier, nonterminal) = if s.eat_char(':') {
                    (Some(first), s.expect_ident("a nonterminal")?.0)
                } else {
                    (None, first)
                };
                let cardinality = if s.eat_char('?') {
                    Cardinality::Optional
                } else if s.eat_char('*') {
                    Cardinality::Many
                } else if s.eat_char('+') {
                    Cardinality::AtLeastOne
                } else {
                    Cardinality::One
                };
                items.push(RhsItem::Ref(RhsRef {
                    preceding_identifier,
                    nonterminal,
                    cardinality,
                }));
            }
        }
    }
    Ok(items)
}

impl fmt::Display for GrammarManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "grammar {}", self.grammar_name)?;
        for p in &self.productions {
            let mut line = String::new();
            if p.name_identifiable {
                line.push_str("@named ");
            }
            if p.skipped {
                line.push_str("@skip ");
            }
            if let Some(alias) = &p.alias {
                let _ = write!(line, "@alias {alias} ");
            }
            if let Some(sketch) = &p.concrete_syntax_sketch {
                let _ = write!(line, "@syntax {} ", lexer::quote(sketch));
            }
            let _ = write!(line, "production {} =", p.name);
            for item in &p.rhs {
                line.push(' ');
                match item {
                    RhsItem::Terminal(t) => line.push_str(&lexer::quote(t)),
                    RhsItem::Elision => line.push_str("..."),
                    RhsItem::Ref(r) => {
                        if let Some(pi) = &r.preceding_identifier {
                            let _ = write!(line, "{pi}:");
                        }
                        line.push_str(&r.nonterminal);
                        line.push_str(r.cardinality.suffix());
                    }
                }
            }
            writeln!(f, "{line}")?;
        }
        for i in &self.interfaces {
            if i.skipped {
                f.write_str("@skip ")?;
            }
            writeln!(f, "interface {}", i.name)?;
        }
        if !self.externals.is_empty() {
            writeln!(f, "external {}", self.externals.join(", "))?;
        }
        Ok(())
    }
}
