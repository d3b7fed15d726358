//! Tagschema models (`.tagschema`).
//!
//! A schema declares tag types: their value domain (flag, native value,
//! enumeration or complex structure) and the element types they may be
//! attached to. Element types are the scope keywords of a
//! [`LanguageProfile`].
//!
//! Two departures from the printed common schema grammar: a complex tag
//! type carries a name like every other tag type, and the native types are
//! the three keywords `int`, `String` and `Boolean`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::derive::LanguageProfile;
use crate::lexer::{quote, Scanner, SyntaxError};
use crate::span::{QualifiedName, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSchema {
    pub package: Option<QualifiedName>,
    pub name: String,
    pub tag_types: Vec<TagTypeDef>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagTypeDef {
    pub name: String,
    pub is_private: bool,
    pub scope: ScopeSpec,
    pub domain: DomainSpec,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScopeSpec {
    /// `for +` or no scope at all.
    Any,
    Listed(Vec<ScopeRef>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScopeRef {
    pub keyword: String,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum NativeType {
    Int,
    String,
    Boolean,
}

impl NativeType {
    pub fn keyword(self) -> &'static str {
        match self {
            NativeType::Int => "int",
            NativeType::String => "String",
            NativeType::Boolean => "Boolean",
        }
    }

    fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "int" => Some(NativeType::Int),
            "String" => Some(NativeType::String),
            "Boolean" => Some(NativeType::Boolean),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainSpec {
    SimpleFlag,
    Native(NativeType),
    Enumerated(Vec<String>),
    Complex(Vec<Reference>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reference {
    pub name: String,
    pub ref_type: RefType,
    pub cardinality: RefCardinality,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefType {
    Native(NativeType),
    Named(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RefCardinality {
    #[default]
    Required,
    /// `?`
    Optional,
    /// `*`
    Many,
    /// `+`
    AtLeastOne,
}

impl RefCardinality {
    pub fn admits(self, count: usize) -> bool {
        match self {
            RefCardinality::Required => count == 1,
            RefCardinality::Optional => count <= 1,
            RefCardinality::Many => true,
            RefCardinality::AtLeastOne => count >= 1,
        }
    }

    /// Whether every instance must contain at least one such subtag.
    pub fn is_mandatory(self) -> bool {
        matches!(self, RefCardinality::Required | RefCardinality::AtLeastOne)
    }

    fn suffix(self) -> &'static str {
        match self {
            RefCardinality::Required => "",
            RefCardinality::Optional => "?",
            RefCardinality::Many => "*",
            RefCardinality::AtLeastOne => "+",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemaIssue {
    DuplicateTagTypeName,
    UnknownScopeKeyword,
    UnresolvedNamedReference,
    EmptyEnumDomain,
    DuplicateEnumValue,
    DuplicateReferenceName,
    RecursiveRequiredReference,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct SchemaDiagnostic {
    pub issue: SchemaIssue,
    pub span: Span,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    IllFormed(SchemaDiagnostic),
}

impl SchemaError {
    pub fn span(&self) -> Span {
        match self {
            SchemaError::Syntax(e) => e.span,
            SchemaError::IllFormed(d) => d.span,
        }
    }

    pub fn issue(&self) -> Option<SchemaIssue> {
        match self {
            SchemaError::Syntax(_) => None,
            SchemaError::IllFormed(d) => Some(d.issue),
        }
    }
}

impl TagSchema {
    pub fn qualified_name(&self) -> QualifiedName {
        match &self.package {
            Some(p) => p.child(&self.name),
            None => QualifiedName::new([self.name.clone()]),
        }
    }

    pub fn tag_type(&self, name: &str) -> Option<&TagTypeDef> {
        self.tag_types.iter().find(|t| t.name == name)
    }
}

impl ScopeSpec {
    pub fn admits(&self, element_type: &str) -> bool {
        match self {
            ScopeSpec::Any => true,
            ScopeSpec::Listed(keywords) => keywords.iter().any(|k| k.keyword == element_type),
        }
    }
}

/// Parses and validates a schema; the first well-formedness problem is
/// returned as an error.
pub fn parse_tag_schema(source: &str, profile: &LanguageProfile) -> Result<TagSchema, SchemaError> {
    let schema = parse_tag_schema_unchecked(source)?;
    if let Some(first) = validate_schema_well_formedness(&schema, profile)
        .into_iter()
        .next()
    {
        return Err(SchemaError::IllFormed(first));
    }
    Ok(schema)
}

/// Parses the schema syntax only. Scope keywords and named references are
/// left unchecked; see [`validate_schema_well_formedness`].
pub fn parse_tag_schema_unchecked(source: &str) -> Result<TagSchema, SyntaxError> {
    let mut s = Scanner::new(source);
    let package = if s.eat_keyword("package") {
        let (name, _) = s.qualified_name("a package name")?;
        s.expect_char(';')?;
        Some(name)
    } else {
        None
    };
    let span = s.expect_keyword("tagschema")?;
    let (name, _) = s.expect_ident("a tagschema name")?;
    s.expect_char('{')?;
    let mut tag_types = Vec::new();
    while !s.eat_char('}') {
        if s.at_end() {
            return Err(s.unexpected("`}`"));
        }
        tag_types.push(parse_tag_type(&mut s)?);
    }
    if !s.at_end() {
        return Err(s.unexpected("end of input"));
    }
    Ok(TagSchema {
        package,
        name,
        tag_types,
        span,
    })
}

fn parse_tag_type(s: &mut Scanner<'_>) -> Result<TagTypeDef, SyntaxError> {
    let is_private = s.eat_keyword("private");
    s.expect_keyword("tagtype")?;
    let (name, span) = s.expect_ident("a tag type name")?;

    let mut domain = None;
    if s.eat_char(':') {
        if s.eat_char('[') {
            let mut values = Vec::new();
            if !s.eat_char(']') {
                loop {
                    values.push(s.string_literal()?.0);
                    if !s.eat_char('|') {
                        break;
                    }
                }
                s.expect_char(']')?;
            }
            domain = Some(DomainSpec::Enumerated(values));
        } else {
            let native = s
                .peek_ident()
                .and_then(NativeType::from_keyword)
                .ok_or_else(|| s.unexpected("`int`, `String`, `Boolean` or `[`"))?;
            s.ident();
            domain = Some(DomainSpec::Native(native));
        }
    }

    let scope = parse_scope(s)?;

    let domain = match domain {
        Some(d) => {
            s.expect_char(';')?;
            d
        }
        None if s.eat_char(';') => DomainSpec::SimpleFlag,
        None if s.eat_char('{') => {
            let mut references = vec![parse_reference(s)?];
            while s.eat_char(',') {
                references.push(parse_reference(s)?);
            }
            s.expect_char(';')?;
            s.expect_char('}')?;
            DomainSpec::Complex(references)
        }
        None => return Err(s.unexpected("`;`, `:`, `for` or `{`")),
    };
    Ok(TagTypeDef {
        name,
        is_private,
        scope,
        domain,
        span,
    })
}

fn parse_scope(s: &mut Scanner<'_>) -> Result<ScopeSpec, SyntaxError> {
    if !s.eat_keyword("for") {
        return Ok(ScopeSpec::Any);
    }
    if s.eat_char('+') {
        return Ok(ScopeSpec::Any);
    }
    let mut keywords = Vec::new();
    loop {
        let (keyword, span) = s.expect_ident("a scope identifier or `+`")?;
        keywords.push(ScopeRef { keyword, span });
        if !s.eat_char(',') {
            break;
        }
    }
    Ok(ScopeSpec::Listed(keywords))
}

fn parse_reference(s: &mut Scanner<'_>) -> Result<Reference, SyntaxError> {
    let (name, span) = s.expect_ident("a reference name")?;
    s.expect_char(':')?;
    let (type_name, _) = s.expect_ident("a reference type")?;
    let ref_type = match NativeType::from_keyword(&type_name) {
        Some(native) => RefType::Native(native),
        None => RefType::Named(type_name),
    };
    let cardinality = if s.eat_char('?') {
        RefCardinality::Optional
    } else if s.eat_char('*') {
        RefCardinality::Many
    } else if s.eat_char('+') {
        RefCardinality::AtLeastOne
    } else {
        RefCardinality::Required
    };
    Ok(Reference {
        name,
        ref_type,
        cardinality,
        span,
    })
}

/// Checks what the schema grammar cannot express. An empty result means the
/// schema is well formed for `profile`.
pub fn validate_schema_well_formedness(
    schema: &TagSchema,
    profile: &LanguageProfile,
) -> Vec<SchemaDiagnostic> {
    let mut out = Vec::new();
    let mut push = |issue, span, message: String| {
        out.push(SchemaDiagnostic {
            issue,
            span,
            message,
        })
    };

    let mut names = HashSet::new();
    for tt in &schema.tag_types {
        if !names.insert(tt.name.as_str()) {
            push(
                SchemaIssue::DuplicateTagTypeName,
                tt.span,
                format!("tag type `{}` is defined more than once", tt.name),
            );
        }
    }

    for tt in &schema.tag_types {
        if let ScopeSpec::Listed(keywords) = &tt.scope {
            for k in keywords {
                if !profile.has_keyword(&k.keyword) {
                    push(
                        SchemaIssue::UnknownScopeKeyword,
                        k.span,
                        format!(
                            "`{}` is not a scope identifier of language `{}`",
                            k.keyword, profile.grammar_name
                        ),
                    );
                }
            }
        }
        match &tt.domain {
            DomainSpec::Enumerated(values) if values.is_empty() => push(
                SchemaIssue::EmptyEnumDomain,
                tt.span,
                format!("enumerated tag type `{}` has no values", tt.name),
            ),
            DomainSpec::Enumerated(values) => {
                let mut seen = HashSet::new();
                for v in values {
                    if !seen.insert(v) {
                        push(
                            SchemaIssue::DuplicateEnumValue,
                            tt.span,
                            format!("value {} appears twice in `{}`", quote(v), tt.name),
                        );
                    }
                }
            }
            DomainSpec::Complex(references) => {
                let mut seen = HashSet::new();
                for r in references {
                    if !seen.insert(r.name.as_str()) {
                        push(
                            SchemaIssue::DuplicateReferenceName,
                            r.span,
                            format!("reference `{}` appears twice in `{}`", r.name, tt.name),
                        );
                    }
                    if let RefType::Named(target) = &r.ref_type {
                        if schema.tag_type(target).is_none() {
                            push(
                                SchemaIssue::UnresolvedNamedReference,
                                r.span,
                                format!("`{target}` is not a tag type of this schema"),
                            );
                        }
                    }
                }
            }
            _ => {}
        }
    }

    for (name, span) in required_cycles(schema) {
        push(
            SchemaIssue::RecursiveRequiredReference,
            span,
            format!("`{name}` requires itself through mandatory subtags; no finite value exists"),
        );
    }
    out
}

/// Tag types that reach themselves along mandatory named references.
fn required_cycles(schema: &TagSchema) -> Vec<(String, Span)> {
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for tt in &schema.tag_types {
        if let DomainSpec::Complex(refs) = &tt.domain {
            for r in refs {
                if let (RefType::Named(target), true) = (&r.ref_type, r.cardinality.is_mandatory())
                {
                    edges
                        .entry(tt.name.as_str())
                        .or_default()
                        .push(target.as_str());
                }
            }
        }
    }
    let mut cyclic = Vec::new();
    let mut reported = HashSet::new();
    for tt in &schema.tag_types {
        if !reported.insert(tt.name.as_str()) {
            continue;
        }
        let mut stack: Vec<&str> = edges.get(tt.name.as_str()).cloned().unwrap_or_default();
        let mut visited = HashSet::new();
        while let Some(next) = stack.pop() {
            if next == tt.name {
                cyclic.push((tt.name.clone(), tt.span));
                break;
            }
            if visited.insert(next) {
                if let Some(more) = edges.get(next) {
                    stack.extend(more.iter().copied());
                }
            }
        }
    }
    cyclic
}

impl fmt::Display for TagSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if let Some(p) = &self.package {
            let _ = writeln!(out, "package {p};");
        }
        let _ = writeln!(out, "tagschema {} {{", self.name);
        for tt in &self.tag_types {
            out.push_str("    ");
            if tt.is_private {
                out.push_str("private ");
            }
            let _ = write!(out, "tagtype {}", tt.name);
            match &tt.domain {
                DomainSpec::Native(n) => {
                    let _ = write!(out, ":{}", n.keyword());
                }
                DomainSpec::Enumerated(values) => {
                    let quoted: Vec<String> = values.iter().map(|v| quote(v)).collect();
                    let _ = write!(out, ":[{}]", quoted.join("|"));
                }
                _ => {}
            }
            if let ScopeSpec::Listed(keywords) = &tt.scope {
                let list: Vec<&str> = keywords.iter().map(|k| k.keyword.as_str()).collect();
                let _ = write!(out, " for {}", list.join(", "));
            }
            match &tt.domain {
                DomainSpec::Complex(refs) => {
                    out.push_str(" {\n");
                    let lines: Vec<String> = refs
                        .iter()
                        .map(|r| {
                            let ty = match &r.ref_type {
                                RefType::Native(n) => n.keyword(),
                                RefType::Named(name) => name.as_str(),
                            };
                            format!("        {}:{}{}", r.name, ty, r.cardinality.suffix())
                        })
                        .collect();
                    out.push_str(&lines.join(",\n"));
                    out.push_str(";\n    }\n");
                }
                _ => out.push_str(";\n"),
            }
        }
        out.push_str("}\n");
        f.write_str(&out)
    }
}
