//! The textual Statechart subset used as the example source language.
//!
//! ```text
//! package mobile;
//! statechart Mobile {
//!     initial state Start;
//!     state Active {
//!         state Call { [status!=isActive]; }
//!     }
//!     Start -> Active : dial() ;
//! }
//! ```
//!
//! Besides parsing and printing, the model answers element lookups for tag
//! models: qualified state names resolve against a context state first and
//! the model root second, and bracket identifiers resolve to transitions
//! (`[Start -> Active]`) or invariants (`[status!=isActive]`).

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::derive::LanguageProfile;
use crate::lexer::{normalize_whitespace, Scanner, SyntaxError};
use crate::span::{QualifiedName, Span};
use crate::tags::ElementIdentifier;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatechartModel {
    pub package: Option<QualifiedName>,
    pub name: String,
    pub states: Vec<StateDef>,
    /// Invariants attached to the statechart itself.
    pub invariants: Vec<InvariantDef>,
    pub transitions: Vec<TransitionDef>,
    /// The body ends with a `...` placeholder.
    pub elided: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateDef {
    pub name: String,
    pub initial: bool,
    pub is_final: bool,
    pub substates: Vec<StateDef>,
    pub invariants: Vec<InvariantDef>,
    pub elided: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantDef {
    /// Whitespace-normalized expression text.
    pub text: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionDef {
    pub source: QualifiedName,
    pub target: QualifiedName,
    pub event: Option<String>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ElementKind {
    Statechart,
    State,
    Transition,
    Invariant,
}

impl ElementKind {
    /// The grammar nonterminal defining elements of this kind.
    pub fn nonterminal(self) -> &'static str {
        match self {
            ElementKind::Statechart => "SCDefinition",
            ElementKind::State => "State",
            ElementKind::Transition => "Transition",
            ElementKind::Invariant => "Invariant",
        }
    }
}

/// An addressable element of a statechart.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementHandle {
    /// `Mobile`, `Active.Call`, `[Start -> Active]`, `Active.Call[status!=isActive]`.
    pub path: String,
    pub kind: ElementKind,
    /// The profile's scope keyword for `kind`.
    pub element_type: String,
}

impl ElementHandle {
    /// The state path to use as a lookup context when this element opens a
    /// `within` block. Only states have children.
    pub fn context_path(&self) -> QualifiedName {
        match self.kind {
            ElementKind::State => QualifiedName::parse(&self.path),
            _ => QualifiedName::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StatechartError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{span}: state `{name}` is declared twice at the same level")]
    DuplicateSiblingState { name: String, span: Span },
    #[error("{span}: state `{name}` cannot be both initial and final")]
    InitialAndFinal { name: String, span: Span },
    #[error("{span}: transition endpoint `{endpoint}` does not name a state")]
    UnresolvedTransitionEndpoint { endpoint: QualifiedName, span: Span },
}

impl StatechartError {
    pub fn span(&self) -> Span {
        match self {
            StatechartError::Syntax(e) => e.span,
            StatechartError::DuplicateSiblingState { span, .. }
            | StatechartError::InitialAndFinal { span, .. }
            | StatechartError::UnresolvedTransitionEndpoint { span, .. } => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("element `{0}` does not exist in the target model")]
    UnresolvedElement(String),
    #[error("element `{0}` is ambiguous")]
    AmbiguousElement(String),
    #[error("transition `[{0}]` matches more than one transition")]
    AmbiguousTransition(String),
}

pub fn parse_statechart(source: &str) -> Result<StatechartModel, StatechartError> {
    let mut s = Scanner::new(source);
    let package = if s.eat_keyword("package") {
        let (name, _) = s.qualified_name("a package name")?;
        s.expect_char(';')?;
        Some(name)
    } else {
        None
    };
    let span = s.expect_keyword("statechart")?;
    let (name, _) = s.expect_ident("a statechart name")?;
    s.expect_char('{')?;

    let mut model = StatechartModel {
        package,
        name,
        states: Vec::new(),
        invariants: Vec::new(),
        transitions: Vec::new(),
        elided: false,
        span,
    };
    while !s.eat_char('}') {
        if s.at_end() {
            return Err(s.unexpected("`}`").into());
        }
        if s.eat_str("...") {
            model.elided = true;
        } else if s.peek_char() == Some('[') {
            model.invariants.push(parse_invariant(&mut s)?);
        } else if starts_state(&mut s) {
            model.states.push(parse_state(&mut s)?);
        } else {
            model.transitions.push(parse_transition(&mut s)?);
        }
    }
    if !s.at_end() {
        return Err(s.unexpected("end of input").into());
    }
    model.validate()?;
    Ok(model)
}

fn starts_state(s: &mut Scanner<'_>) -> bool {
    s.peek_keyword("state") || s.peek_keyword("initial") || s.peek_keyword("final")
}

fn parse_invariant(s: &mut Scanner<'_>) -> Result<InvariantDef, SyntaxError> {
    let (raw, span) = s.bracketed_raw()?;
    s.expect_char(';')?;
    Ok(InvariantDef {
        text: normalize_whitespace(&raw),
        span,
    })
}

fn parse_state(s: &mut Scanner<'_>) -> Result<StateDef, SyntaxError> {
    let mut initial = false;
    let mut is_final = false;
    loop {
        if s.eat_keyword("initial") {
            initial = true;
        } else if s.eat_keyword("final") {
            is_final = true;
        } else {
            break;
        }
    }
    s.expect_keyword("state")?;
    let (name, span) = s.expect_ident("a state name")?;
    let mut state = StateDef {
        name,
        initial,
        is_final,
        substates: Vec::new(),
        invariants: Vec::new(),
        elided: false,
        span,
    };
    if s.eat_char(';') {
        return Ok(state);
    }
    s.expect_char('{')?;
    while !s.eat_char('}') {
        if s.at_end() {
            return Err(s.unexpected("`}`"));
        }
        if s.eat_str("...") {
            state.elided = true;
        } else if s.peek_char() == Some('[') {
            state.invariants.push(parse_invariant(s)?);
        } else if starts_state(s) {
            state.substates.push(parse_state(s)?);
        } else {
            return Err(s.unexpected("`state`, an invariant or `}`"));
        }
    }
    s.eat_char(';');
    Ok(state)
}

fn parse_transition(s: &mut Scanner<'_>) -> Result<TransitionDef, SyntaxError> {
    let (source, span) = s.qualified_name("a state, transition, invariant or `}`")?;
    if !s.eat_str("->") {
        return Err(s.unexpected("`->`"));
    }
    let (target, _) = s.qualified_name("a target state")?;
    let event = if s.eat_char(':') {
        let (text, at) = s.raw_until(';')?;
        if text.is_empty() {
            return Err(SyntaxError::new(at, "expected an event after `:`"));
        }
        Some(normalize_whitespace(&text))
    } else {
        None
    };
    s.expect_char(';')?;
    Ok(TransitionDef {
        source,
        target,
        event,
        span,
    })
}

impl StatechartModel {
    pub fn qualified_name(&self) -> QualifiedName {
        match &self.package {
            Some(p) => p.child(&self.name),
            None => QualifiedName::new([self.name.clone()]),
        }
    }

    fn validate(&self) -> Result<(), StatechartError> {
        fn check_level(states: &[StateDef]) -> Result<(), StatechartError> {
            let mut seen = HashSet::new();
            for st in states {
                if !seen.insert(st.name.as_str()) {
                    return Err(StatechartError::DuplicateSiblingState {
                        name: st.name.clone(),
                        span: st.span,
                    });
                }
                if st.initial && st.is_final {
                    return Err(StatechartError::InitialAndFinal {
                        name: st.name.clone(),
                        span: st.span,
                    });
                }
                check_level(&st.substates)?;
            }
            Ok(())
        }
        check_level(&self.states)?;
        for t in &self.transitions {
            for endpoint in [&t.source, &t.target] {
                if find_state(&self.states, endpoint.segments()).is_none() {
                    return Err(StatechartError::UnresolvedTransitionEndpoint {
                        endpoint: endpoint.clone(),
                        span: t.span,
                    });
                }
            }
        }
        Ok(())
    }

    /// Transitions sharing source, target and event with an earlier one.
    pub fn warnings(&self) -> Vec<(Span, String)> {
        let mut seen = HashSet::new();
        self.transitions
            .iter()
            .filter(|t| !seen.insert((&t.source, &t.target, &t.event)))
            .map(|t| {
                (
                    t.span,
                    format!(
                        "duplicate transition {} -> {}; bracket identifiers for it are ambiguous",
                        t.source, t.target
                    ),
                )
            })
            .collect()
    }

    fn handle(&self, path: String, kind: ElementKind, profile: &LanguageProfile) -> ElementHandle {
        let element_type = profile
            .keyword_for(kind.nonterminal())
            .unwrap_or(kind.nonterminal())
            .to_owned();
        ElementHandle {
            path,
            kind,
            element_type,
        }
    }

    /// Every addressable element in pre-order: the statechart, its own
    /// invariants, each state followed by its invariants and substates,
    /// then the transitions.
    pub fn enumerate_elements(&self, profile: &LanguageProfile) -> Vec<ElementHandle> {
        let mut out = vec![self.handle(self.name.clone(), ElementKind::Statechart, profile)];
        for inv in &self.invariants {
            out.push(self.handle(format!("[{}]", inv.text), ElementKind::Invariant, profile));
        }
        fn walk(
            model: &StatechartModel,
            states: &[StateDef],
            prefix: &QualifiedName,
            profile: &LanguageProfile,
            out: &mut Vec<ElementHandle>,
        ) {
            for st in states {
                let path = prefix.child(&st.name);
                out.push(model.handle(path.to_string(), ElementKind::State, profile));
                for inv in &st.invariants {
                    out.push(model.handle(
                        format!("{path}[{}]", inv.text),
                        ElementKind::Invariant,
                        profile,
                    ));
                }
                walk(model, &st.substates, &path, profile, out);
            }
        }
        walk(
            self,
            &self.states,
            &QualifiedName::default(),
            profile,
            &mut out,
        );
        for i in 0..self.transitions.len() {
            out.push(self.handle(self.transition_path(i), ElementKind::Transition, profile));
        }
        out
    }

    /// `[src -> tgt]`, suffixed with `#n` for the n-th transition sharing
    /// the same endpoints.
    fn transition_path(&self, index: usize) -> String {
        let t = &self.transitions[index];
        let nth = self.transitions[..index]
            .iter()
            .filter(|o| o.source == t.source && o.target == t.target)
            .count();
        if nth == 0 {
            format!("[{} -> {}]", t.source, t.target)
        } else {
            format!("[{} -> {}]#{}", t.source, t.target, nth + 1)
        }
    }

    /// Resolves `ident` relative to the state at `context` (empty for the
    /// model root). In-context matches win; the root is searched only when
    /// the context yields nothing.
    pub fn resolve_element(
        &self,
        ident: &ElementIdentifier,
        context: &QualifiedName,
        profile: &LanguageProfile,
    ) -> Result<ElementHandle, ResolveError> {
        match ident {
            ElementIdentifier::QualifiedName(name) => {
                let (path, kind) = self.resolve_name(name, context)?;
                Ok(self.handle(path, kind, profile))
            }
            ElementIdentifier::Bracket { raw, matches } => {
                for m in matches {
                    let found = match m.nonterminal.as_str() {
                        "Transition" if m.slots.len() >= 2 => {
                            self.resolve_transition(raw, &m.slots[0].1, &m.slots[1].1, context)?
                        }
                        "Invariant" => self.resolve_invariant(raw, context)?,
                        _ => None,
                    };
                    if let Some((path, kind)) = found {
                        return Ok(self.handle(path, kind, profile));
                    }
                }
                Err(ResolveError::UnresolvedElement(format!("[{raw}]")))
            }
        }
    }

    fn resolve_name(
        &self,
        name: &QualifiedName,
        context: &QualifiedName,
    ) -> Result<(String, ElementKind), ResolveError> {
        if !context.is_empty() {
            if let Some(ctx) = find_state(&self.states, context.segments()) {
                if find_state(&ctx.substates, name.segments()).is_some() {
                    return Ok((context.join(name).to_string(), ElementKind::State));
                }
            }
        }
        let mut candidates: Vec<(String, ElementKind)> = Vec::new();
        if find_state(&self.states, name.segments()).is_some() {
            candidates.push((name.to_string(), ElementKind::State));
        }
        if let Some((first, rest)) = name.segments().split_first() {
            if *first == self.name {
                if rest.is_empty() {
                    candidates.push((self.name.clone(), ElementKind::Statechart));
                } else if find_state(&self.states, rest).is_some() {
                    let path = QualifiedName::new(rest.to_vec()).to_string();
                    if !candidates.iter().any(|(p, _)| *p == path) {
                        candidates.push((path, ElementKind::State));
                    }
                }
            }
        }
        match candidates.len() {
            0 => Err(ResolveError::UnresolvedElement(name.to_string())),
            1 => Ok(candidates.remove(0)),
            _ => Err(ResolveError::AmbiguousElement(name.to_string())),
        }
    }

    /// Resolves a state reference written inside a bracket identifier.
    fn resolve_state_text(&self, text: &str, context: &QualifiedName) -> Option<QualifiedName> {
        let name = QualifiedName::parse(text);
        if name
            .segments()
            .iter()
            .any(|s| !crate::lexer::is_identifier(s))
        {
            return None;
        }
        match self.resolve_name(&name, context) {
            Ok((path, ElementKind::State)) => Some(QualifiedName::parse(&path)),
            _ => None,
        }
    }

    fn resolve_transition(
        &self,
        raw: &str,
        source: &str,
        target: &str,
        context: &QualifiedName,
    ) -> Result<Option<(String, ElementKind)>, ResolveError> {
        let (Some(source), Some(target)) = (
            self.resolve_state_text(source, context),
            self.resolve_state_text(target, context),
        ) else {
            return Ok(None);
        };
        let hits: Vec<usize> = self
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.source == source && t.target == target)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [] => Ok(None),
            [i] => Ok(Some((self.transition_path(*i), ElementKind::Transition))),
            _ => Err(ResolveError::AmbiguousTransition(raw.to_owned())),
        }
    }

    fn resolve_invariant(
        &self,
        raw: &str,
        context: &QualifiedName,
    ) -> Result<Option<(String, ElementKind)>, ResolveError> {
        let text = normalize_whitespace(raw);
        let mut all: Vec<(QualifiedName, &InvariantDef)> = self
            .invariants
            .iter()
            .map(|inv| (QualifiedName::default(), inv))
            .collect();
        collect_invariants(&self.states, &QualifiedName::default(), &mut all);
        let matching: Vec<&QualifiedName> = all
            .iter()
            .filter(|(_, inv)| inv.text == text)
            .map(|(owner, _)| owner)
            .collect();
        let local: Vec<&QualifiedName> = if context.is_empty() {
            Vec::new()
        } else {
            matching.iter().copied().filter(|o| *o == context).collect()
        };
        let pick = if local.is_empty() { matching } else { local };
        match pick.as_slice() {
            [] => Ok(None),
            [owner] => Ok(Some((format!("{owner}[{text}]"), ElementKind::Invariant))),
            _ => Err(ResolveError::AmbiguousElement(format!("[{raw}]"))),
        }
    }
}

fn collect_invariants<'a>(
    states: &'a [StateDef],
    prefix: &QualifiedName,
    out: &mut Vec<(QualifiedName, &'a InvariantDef)>,
) {
    for st in states {
        let path = prefix.child(&st.name);
        out.extend(st.invariants.iter().map(|inv| (path.clone(), inv)));
        collect_invariants(&st.substates, &path, out);
    }
}

fn find_state<'a>(states: &'a [StateDef], path: &[String]) -> Option<&'a StateDef> {
    let (first, rest) = path.split_first()?;
    let st = states.iter().find(|s| s.name == *first)?;
    if rest.is_empty() {
        Some(st)
    } else {
        find_state(&st.substates, rest)
    }
}

impl fmt::Display for StatechartModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if let Some(p) = &self.package {
            let _ = writeln!(out, "package {p};");
        }
        let _ = writeln!(out, "statechart {} {{", self.name);
        for st in &self.states {
            write_state(&mut out, st, 1);
        }
        for inv in &self.invariants {
            let _ = writeln!(out, "    [{}];", inv.text);
        }
        for t in &self.transitions {
            match &t.event {
                Some(e) => {
                    let _ = writeln!(out, "    {} -> {} : {};", t.source, t.target, e);
                }
                None => {
                    let _ = writeln!(out, "    {} -> {};", t.source, t.target);
                }
            }
        }
        if self.elided {
            let _ = writeln!(out, "    ...");
        }
        out.push_str("}\n");
        f.write_str(&out)
    }
}

fn write_state(out: &mut String, st: &StateDef, depth: usize) {
    let indent = "    ".repeat(depth);
    let mut head = String::new();
    if st.initial {
        head.push_str("initial ");
    }
    if st.is_final {
        head.push_str("final ");
    }
    let _ = write!(out, "{indent}{head}state {}", st.name);
    if st.substates.is_empty() && st.invariants.is_empty() && !st.elided {
        out.push_str(";\n");
        return;
    }
    out.push_str(" {\n");
    for inv in &st.invariants {
        let _ = writeln!(out, "{indent}    [{}];", inv.text);
    }
    for sub in &st.substates {
        write_state(out, sub, depth + 1);
    }
    if st.elided {
        let _ = writeln!(out, "{indent}    ...");
    }
    let _ = writeln!(out, "{indent}}}");
}
