//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rayon::prelude::*;

use tagweaver::derive::IdentifierKind;
use tagweaver::tags::BodyItem;
use tagweaver::{
    check, derive_profile, parse_manifest, parse_statechart, parse_tag_model, parse_tag_schema,
    CheckInput, CheckOutcome, LanguageProfile, StatechartModel, TagModel, TagSchema,
};

pub const MANIFEST: &str = include_str!("../../grammars/statechart.glang");
pub const MOBILE_SC: &str = include_str!("../../fixtures/mobile.sc");
pub const TAGS: &str = include_str!("../../fixtures/statechart_tags.tag");
pub const TAGS_COMPLETED: &str = include_str!("../../fixtures/statechart_tags_completed.tag");
pub const SCHEMA: &str = include_str!("../../fixtures/logging_schema.tagschema");

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn profile() -> LanguageProfile {
    derive_profile(&parse_manifest(MANIFEST).unwrap()).unwrap()
}

/// Runs a property over `cases` generated values without persisting
/// failures, returning the shrunk counterexample as text.
pub fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

// ---------------------------------------------------------------------------
// grammar manifests

const PI_POOL: [&str; 6] = ["src", "tgt", "lhs", "rhs", "left", "right"];
const CARDS: [&str; 4] = ["", "?", "*", "+"];

#[derive(Clone, Debug)]
pub struct GenRef {
    pub pi: Option<String>,
    pub nt: String,
    pub card: &'static str,
}

#[derive(Clone, Debug)]
pub struct GenProduction {
    pub name: String,
    pub named: bool,
    pub skipped: bool,
    pub alias: Option<String>,
    pub terminal: bool,
    pub refs: Vec<GenRef>,
}

#[derive(Clone, Debug)]
pub struct GenManifest {
    pub productions: Vec<GenProduction>,
}

pub fn manifest_strategy() -> impl Strategy<Value = GenManifest> {
    (1usize..=6)
        .prop_flat_map(|n| {
            prop::collection::vec(
                (
                    any::<bool>(),
                    prop::bool::weighted(0.25),
                    prop::bool::weighted(0.25),
                    any::<bool>(),
                    0usize..PI_POOL.len(),
                    prop::collection::vec((0..=n, prop::bool::weighted(0.3), 0usize..4), 0..=4),
                ),
                n,
            )
        })
        .prop_map(|raw| {
            let n = raw.len();
            let productions = raw
                .into_iter()
                .enumerate()
                .map(|(i, (named, skipped, aliased, terminal, seed, refs))| {
                    let nts: Vec<String> = refs
                        .iter()
                        .map(|(t, _, _)| {
                            if *t == n {
                                "Name".into()
                            } else {
                                format!("P{t}")
                            }
                        })
                        .collect();
                    let refs = refs
                        .iter()
                        .enumerate()
                        .map(|(k, (_, want_pi, card))| {
                            let repeated = nts.iter().filter(|x| **x == nts[k]).count() > 1;
                            GenRef {
                                pi: (repeated || *want_pi)
                                    .then(|| PI_POOL[(seed + k) % PI_POOL.len()].to_owned()),
                                nt: nts[k].clone(),
                                card: CARDS[*card],
                            }
                        })
                        .collect();
                    GenProduction {
                        name: format!("P{i}"),
                        named,
                        skipped,
                        alias: aliased.then(|| format!("Al{i}")),
                        terminal,
                        refs,
                    }
                })
                .collect();
            GenManifest { productions }
        })
}

impl GenManifest {
    pub fn render(&self) -> String {
        let mut out = String::from("grammar Gen\n");
        for p in &self.productions {
            if p.named {
                out.push_str("@named ");
            }
            if p.skipped {
                out.push_str("@skip ");
            }
            if let Some(a) = &p.alias {
                let _ = write!(out, "@alias {a} ");
            }
            let _ = write!(out, "production {} =", p.name);
            if p.terminal {
                out.push_str(" \"kw\"");
            }
            for r in &p.refs {
                out.push(' ');
                if let Some(pi) = &r.pi {
                    let _ = write!(out, "{pi}:");
                }
                let _ = write!(out, "{}{}", r.nt, r.card);
            }
            out.push('\n');
        }
        out
    }
}

/// Expected derivation result, computed straight from the counting rules.
#[derive(Debug, PartialEq, Eq)]
pub struct DerivationCount {
    pub keywords: BTreeSet<String>,
    pub keyword_count: usize,
    pub qualified_name_rules: usize,
    pub bracket_rules: usize,
}

pub fn count_derivation(m: &GenManifest) -> Option<DerivationCount> {
    let live: Vec<&GenProduction> = m.productions.iter().filter(|p| !p.skipped).collect();
    if live.is_empty() {
        return None;
    }
    let mut keywords = Vec::new();
    for p in &live {
        keywords.push(p.alias.clone().unwrap_or_else(|| p.name.clone()));
    }
    for p in &live {
        for r in &p.refs {
            let occurrences = p.refs.iter().filter(|o| o.nt == r.nt).count();
            if occurrences < 2 {
                continue;
            }
            let pi = r.pi.as_ref().unwrap();
            let users = live
                .iter()
                .filter(|q| q.refs.iter().any(|o| o.pi.as_ref() == Some(pi)))
                .count();
            keywords.push(if users == 1 {
                pi.clone()
            } else {
                format!("{}_{}", p.name, pi)
            });
        }
    }
    Some(DerivationCount {
        keyword_count: keywords.len(),
        keywords: keywords.into_iter().collect(),
        qualified_name_rules: live.iter().filter(|p| p.named).count(),
        bracket_rules: live.iter().filter(|p| !p.named).count(),
    })
}

pub fn observed_derivation(profile: &LanguageProfile) -> DerivationCount {
    DerivationCount {
        keywords: profile
            .scope_keywords
            .iter()
            .map(|k| k.keyword.clone())
            .collect(),
        keyword_count: profile.scope_keywords.len(),
        qualified_name_rules: profile
            .identifier_rules
            .iter()
            .filter(|r| r.kind == IdentifierKind::QualifiedName)
            .count(),
        bracket_rules: profile
            .identifier_rules
            .iter()
            .filter(|r| r.kind == IdentifierKind::BracketSyntax)
            .count(),
    }
}

/// |scope keywords| = derivable productions + qualifying preceding
/// identifiers, over `cases` random manifests.
pub fn counting_law(cases: u32) -> Result<(), String> {
    run_property(cases, manifest_strategy(), |m| {
        let text = m.render();
        let manifest =
            parse_manifest(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        match (count_derivation(&m), derive_profile(&manifest)) {
            (None, Err(_)) => Ok(()),
            (Some(expected), Ok(profile)) => {
                prop_assert_eq!(expected, observed_derivation(&profile), "{}", text);
                Ok(())
            }
            (expected, got) => Err(TestCaseError::fail(format!(
                "expected {expected:?}, got {got:?}\n{text}"
            ))),
        }
    })
}

// ---------------------------------------------------------------------------
// statecharts

const STATE_NAMES: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Clone, Debug)]
pub struct GenState {
    pub name: String,
    pub invariant: Option<u8>,
    pub children: Vec<GenState>,
}

#[derive(Clone, Debug)]
pub struct GenChart {
    pub states: Vec<GenState>,
    pub transitions: Vec<(String, String)>,
}

fn name_siblings(mut states: Vec<GenState>) -> Vec<GenState> {
    for (i, s) in states.iter_mut().enumerate() {
        s.name = STATE_NAMES[i].to_owned();
    }
    states
}

fn states_strategy(depth: u32, max: usize) -> BoxedStrategy<Vec<GenState>> {
    let invariant = prop::option::weighted(0.3, 0u8..3);
    if depth == 0 {
        prop::collection::vec(
            invariant.prop_map(|invariant| GenState {
                name: String::new(),
                invariant,
                children: Vec::new(),
            }),
            0..=max,
        )
        .prop_map(name_siblings)
        .boxed()
    } else {
        prop::collection::vec(
            (invariant, states_strategy(depth - 1, 2)).prop_map(|(invariant, children)| GenState {
                name: String::new(),
                invariant,
                children,
            }),
            0..=max,
        )
        .prop_map(name_siblings)
        .boxed()
    }
}

pub fn chart_strategy() -> impl Strategy<Value = GenChart> {
    states_strategy(2, 3)
        .prop_filter("at least one state", |s| !s.is_empty())
        .prop_flat_map(|states| {
            let k = GenChart {
                states: states.clone(),
                transitions: Vec::new(),
            }
            .state_paths()
            .len();
            (Just(states), prop::collection::vec((0..k, 0..k), 0..=3))
        })
        .prop_map(|(states, pairs)| {
            let mut chart = GenChart {
                states,
                transitions: Vec::new(),
            };
            let paths = chart.state_paths();
            chart.transitions = pairs
                .into_iter()
                .map(|(a, b)| (paths[a].clone(), paths[b].clone()))
                .collect();
            chart
        })
}

impl GenChart {
    pub fn state_paths(&self) -> Vec<String> {
        fn walk(states: &[GenState], prefix: &str, out: &mut Vec<String>) {
            for s in states {
                let path = if prefix.is_empty() {
                    s.name.clone()
                } else {
                    format!("{prefix}.{}", s.name)
                };
                out.push(path.clone());
                walk(&s.children, &path, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.states, "", &mut out);
        out
    }

    /// (owner path, invariant text)
    pub fn invariants(&self) -> Vec<(String, String)> {
        fn walk(states: &[GenState], prefix: &str, out: &mut Vec<(String, String)>) {
            for s in states {
                let path = if prefix.is_empty() {
                    s.name.clone()
                } else {
                    format!("{prefix}.{}", s.name)
                };
                if let Some(k) = s.invariant {
                    out.push((path.clone(), format!("x > {k}")));
                }
                walk(&s.children, &path, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.states, "", &mut out);
        out
    }

    /// (state path, child name) for every nested state.
    pub fn nestings(&self) -> Vec<(String, String)> {
        let paths = self.state_paths();
        paths
            .iter()
            .filter_map(|p| {
                p.rsplit_once('.')
                    .map(|(parent, child)| (parent.to_owned(), child.to_owned()))
            })
            .collect()
    }

    pub fn render(&self) -> String {
        fn state(out: &mut String, s: &GenState, depth: usize) {
            let indent = "    ".repeat(depth);
            if s.invariant.is_none() && s.children.is_empty() {
                let _ = writeln!(out, "{indent}state {};", s.name);
                return;
            }
            let _ = writeln!(out, "{indent}state {} {{", s.name);
            if let Some(k) = s.invariant {
                let _ = writeln!(out, "{indent}    [x > {k}];");
            }
            for c in &s.children {
                state(out, c, depth + 1);
            }
            let _ = writeln!(out, "{indent}}}");
        }
        let mut out = String::from("package gen;\nstatechart M {\n");
        for s in &self.states {
            state(&mut out, s, 1);
        }
        for (a, b) in &self.transitions {
            let _ = writeln!(out, "    {a} -> {b};");
        }
        out.push_str("}\n");
        out
    }

    /// Definitional lookup of an identifier written at the model root:
    /// returns the element path and its type.
    pub fn lookup(&self, ident: &str) -> Option<(String, &'static str)> {
        if ident == "M" {
            return Some(("M".into(), "Statechart"));
        }
        if let Some(inner) = ident.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            if let Some((a, b)) = inner.split_once(" -> ") {
                let hits = self
                    .transitions
                    .iter()
                    .filter(|(s, t)| s == a && t == b)
                    .count();
                return (hits == 1).then(|| (format!("[{a} -> {b}]"), "Transition"));
            }
            let owners: Vec<String> = self
                .invariants()
                .into_iter()
                .filter(|(_, text)| text == inner)
                .map(|(owner, _)| owner)
                .collect();
            return match owners.as_slice() {
                [owner] => Some((format!("{owner}[{inner}]"), "Invariant")),
                _ => None,
            };
        }
        self.state_paths()
            .contains(&ident.to_owned())
            .then(|| (ident.to_owned(), "State"))
    }

    /// Identifiers worth using in tag models: every element plus some
    /// that resolve to nothing.
    pub fn identifier_pool(&self) -> Vec<String> {
        let mut pool = vec!["M".to_owned(), "Ghost".to_owned(), "A.Ghost".to_owned()];
        pool.extend(self.state_paths());
        pool.extend(
            self.transitions
                .iter()
                .map(|(a, b)| format!("[{a} -> {b}]")),
        );
        pool.push("[A -> Ghost]".to_owned());
        pool.extend(self.invariants().into_iter().map(|(_, t)| format!("[{t}]")));
        pool.push("[x > 9]".to_owned());
        pool.sort();
        pool.dedup();
        pool
    }

    /// Identifiers that resolve, paired with their element type.
    pub fn addressable(&self) -> Vec<(String, &'static str)> {
        self.identifier_pool()
            .into_iter()
            .filter_map(|i| self.lookup(&i).map(|(_, ty)| (i, ty)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// tagschemas

pub const SCOPE_KEYWORDS: [&str; 6] = [
    "Statechart",
    "State",
    "Transition",
    "Invariant",
    "source",
    "target",
];
const NATIVES: [&str; 3] = ["int", "String", "Boolean"];
const ENUM_POOL: [&str; 3] = ["a", "b", "c"];

#[derive(Clone, Debug, PartialEq)]
pub enum GenRefType {
    Native(&'static str),
    Named(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenRefDef {
    pub name: String,
    pub ty: GenRefType,
    pub card: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenDomain {
    Flag,
    Native(&'static str),
    Enum(Vec<String>),
    Complex(Vec<GenRefDef>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenTagType {
    pub name: String,
    pub private: bool,
    /// `None` admits every element type.
    pub scope: Option<Vec<&'static str>>,
    pub domain: GenDomain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenSchema {
    pub types: Vec<GenTagType>,
}

pub fn schema_strategy(max_types: usize) -> impl Strategy<Value = GenSchema> {
    let ty = (
        prop::bool::weighted(0.2),
        prop::option::weighted(
            0.7,
            prop::sample::subsequence(SCOPE_KEYWORDS.to_vec(), 1..=3),
        ),
        0usize..4,
        0usize..3,
        1usize..8,
        prop::collection::vec((any::<bool>(), 0usize..3, any::<usize>(), 0usize..4), 1..=3),
    );
    prop::collection::vec(ty, 1..=max_types).prop_map(|raw| {
        let types = raw
            .into_iter()
            .enumerate()
            .map(|(i, (private, scope, kind, native, mask, refs))| {
                let domain = match kind {
                    0 => GenDomain::Flag,
                    1 => GenDomain::Native(NATIVES[native]),
                    2 => GenDomain::Enum(
                        ENUM_POOL
                            .iter()
                            .enumerate()
                            .filter(|(b, _)| mask & (1 << b) != 0)
                            .map(|(_, v)| v.to_string())
                            .collect(),
                    ),
                    _ => GenDomain::Complex(
                        refs.into_iter()
                            .enumerate()
                            .map(|(k, (named, native, target, card))| GenRefDef {
                                name: format!("r{k}"),
                                ty: if named && i > 0 {
                                    GenRefType::Named(format!("T{}", target % i))
                                } else {
                                    GenRefType::Native(NATIVES[native])
                                },
                                card: CARDS[card],
                            })
                            .collect(),
                    ),
                };
                GenTagType {
                    name: format!("T{i}"),
                    private,
                    scope,
                    domain,
                }
            })
            .collect();
        GenSchema { types }
    })
}

impl GenSchema {
    pub fn render(&self) -> String {
        let mut out = String::from("package genschema;\ntagschema S {\n");
        for t in &self.types {
            out.push_str("    ");
            if t.private {
                out.push_str("private ");
            }
            let _ = write!(out, "tagtype {}", t.name);
            match &t.domain {
                GenDomain::Native(n) => {
                    let _ = write!(out, ":{n}");
                }
                GenDomain::Enum(values) => {
                    let values: Vec<String> = values
                        .iter()
                        .map(|v| format!("\"{}\"", escape(v)))
                        .collect();
                    let _ = write!(out, ":[{}]", values.join("|"));
                }
                _ => {}
            }
            if let Some(scope) = &t.scope {
                let _ = write!(out, " for {}", scope.join(", "));
            }
            match &t.domain {
                GenDomain::Complex(refs) => {
                    let refs: Vec<String> = refs
                        .iter()
                        .map(|r| {
                            let ty = match &r.ty {
                                GenRefType::Native(n) => n.to_string(),
                                GenRefType::Named(n) => n.clone(),
                            };
                            format!("{}:{ty}{}", r.name, r.card)
                        })
                        .collect();
                    let _ = writeln!(out, " {{ {}; }}", refs.join(", "));
                }
                _ => out.push_str(";\n"),
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn get(&self, name: &str) -> Option<&GenTagType> {
        self.types.iter().find(|t| t.name == name)
    }

    /// Whether some complex type can only be instantiated infinitely.
    pub fn has_required_cycle(&self) -> bool {
        fn reaches(s: &GenSchema, from: &str, goal: &str, seen: &mut BTreeSet<String>) -> bool {
            let Some(GenTagType {
                domain: GenDomain::Complex(refs),
                ..
            }) = s.get(from)
            else {
                return false;
            };
            refs.iter().any(|r| match (&r.ty, r.card) {
                (GenRefType::Named(n), "" | "+") => {
                    n == goal || (seen.insert(n.clone()) && reaches(s, n, goal, seen))
                }
                _ => false,
            })
        }
        self.types
            .iter()
            .any(|t| reaches(self, &t.name, &t.name, &mut BTreeSet::new()))
    }
}

// ---------------------------------------------------------------------------
// tag values and tag models

#[derive(Clone, Debug, PartialEq)]
pub enum GenValue {
    Simple,
    Valued(String),
    Complex(Vec<(String, GenValue)>),
}

pub fn render_tag(name: &str, value: &GenValue) -> String {
    match value {
        GenValue::Simple => name.to_owned(),
        GenValue::Valued(v) => format!("{name} = \"{}\"", escape(v)),
        GenValue::Complex(subs) if subs.is_empty() => format!("{name} {{ }}"),
        GenValue::Complex(subs) => {
            let subs: Vec<String> = subs.iter().map(|(n, v)| render_tag(n, v)).collect();
            format!("{name} {{ {}; }}", subs.join(", "))
        }
    }
}

const RAW_POOL: [&str; 10] = [
    "1",
    "-3",
    "x",
    "true",
    "false",
    "a",
    "b",
    "",
    "07",
    "say \"hi\"",
];

pub fn value_strategy(subtag_names: Vec<String>) -> impl Strategy<Value = GenValue> {
    let raw = prop::sample::select(RAW_POOL.to_vec()).prop_map(|s| GenValue::Valued(s.to_owned()));
    let leaf = prop_oneof![Just(GenValue::Simple), raw.clone()];
    let mut names = subtag_names;
    names.push("bogus".into());
    let sub = (
        prop::sample::select(names),
        prop_oneof![Just(GenValue::Simple), raw.clone()],
    );
    prop_oneof![
        2 => leaf,
        1 => prop::collection::vec(sub, 0..=3).prop_map(GenValue::Complex),
    ]
}

#[derive(Clone, Debug)]
pub struct GenTagUse {
    pub name: String,
    pub value: GenValue,
}

impl GenTagUse {
    pub fn render(&self) -> String {
        render_tag(&self.name, &self.value)
    }
}

#[derive(Clone, Debug)]
pub enum GenItem {
    Statement {
        elements: Vec<String>,
        tags: Vec<GenTagUse>,
    },
    Within {
        context: String,
        body: Vec<GenItem>,
    },
}

pub fn render_model(body: &[GenItem], expand: bool) -> String {
    fn items(out: &mut String, body: &[GenItem], depth: usize, expand: bool) {
        let indent = "    ".repeat(depth);
        for item in body {
            match item {
                GenItem::Statement { elements, tags } if expand => {
                    for e in elements {
                        for t in tags {
                            let _ = writeln!(out, "{indent}tag {e} with {};", t.render());
                        }
                    }
                }
                GenItem::Statement { elements, tags } => {
                    let tags: Vec<String> = tags.iter().map(GenTagUse::render).collect();
                    let _ = writeln!(
                        out,
                        "{indent}tag {} with {};",
                        elements.join(", "),
                        tags.join(", ")
                    );
                }
                GenItem::Within { context, body } => {
                    let _ = writeln!(out, "{indent}within {context} {{");
                    items(out, body, depth + 1, expand);
                    let _ = writeln!(out, "{indent}}}");
                }
            }
        }
    }
    let mut out = String::from("package gen;\nconforms to genschema.S;\ntags G for M {\n");
    items(&mut out, body, 1, expand);
    out.push_str("}\n");
    out
}

fn tag_use_strategy(schema: &GenSchema) -> impl Strategy<Value = GenTagUse> {
    let mut names: Vec<String> = schema.types.iter().map(|t| t.name.clone()).collect();
    names.push("Unknown".into());
    let subtags: Vec<String> = schema
        .types
        .iter()
        .flat_map(|t| match &t.domain {
            GenDomain::Complex(refs) => refs.iter().map(|r| r.name.clone()).collect(),
            _ => Vec::new(),
        })
        .collect();
    (prop::sample::select(names), value_strategy(subtags))
        .prop_map(|(name, value)| GenTagUse { name, value })
}

fn statement_strategy(idents: Vec<String>, schema: &GenSchema) -> impl Strategy<Value = GenItem> {
    (
        prop::collection::vec(prop::sample::select(idents), 1..=3),
        prop::collection::vec(tag_use_strategy(schema), 1..=3),
    )
        .prop_map(|(elements, tags)| GenItem::Statement { elements, tags })
}

/// A chart, a schema and an arbitrary (often non-conforming) tag body.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub chart: GenChart,
    pub schema: GenSchema,
    pub body: Vec<GenItem>,
}

pub fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (
        chart_strategy(),
        schema_strategy(3).prop_filter("finite", |s| !s.has_required_cycle()),
    )
        .prop_flat_map(|(chart, schema)| {
            let idents = chart.identifier_pool();
            let mut contexts = chart.state_paths();
            contexts.push("Ghost".into());
            let mut inner = idents.clone();
            inner.extend(STATE_NAMES.iter().map(|s| s.to_string()));
            let statement = statement_strategy(idents, &schema);
            let within = (
                prop::sample::select(contexts),
                prop::collection::vec(statement_strategy(inner, &schema), 1..=2),
            )
                .prop_map(|(context, body)| GenItem::Within { context, body });
            let body = prop::collection::vec(prop_oneof![3 => statement, 1 => within], 0..=5);
            (Just(chart), Just(schema), body)
        })
        .prop_map(|(chart, schema, body)| Scenario {
            chart,
            schema,
            body,
        })
}

/// Parsed artifacts of a scenario.
pub struct Parsed {
    pub profile: LanguageProfile,
    pub target: StatechartModel,
    pub schema: TagSchema,
}

impl Parsed {
    pub fn new(
        profile: &LanguageProfile,
        chart: &GenChart,
        schema: &GenSchema,
    ) -> Result<Self, String> {
        let target =
            parse_statechart(&chart.render()).map_err(|e| format!("{e}\n{}", chart.render()))?;
        let schema = parse_tag_schema(&schema.render(), profile)
            .map_err(|e| format!("{e}\n{}", schema.render()))?;
        Ok(Parsed {
            profile: profile.clone(),
            target,
            schema,
        })
    }

    pub fn parse_tags(&self, text: &str) -> Result<TagModel, String> {
        parse_tag_model(text, &self.profile).map_err(|e| format!("{e}\n{text}"))
    }

    pub fn check(&self, model: &TagModel) -> CheckOutcome {
        check(&CheckInput {
            tag_model: model,
            target: &self.target,
            schemas: std::slice::from_ref(&self.schema),
            profile: &self.profile,
        })
    }
}

/// Diagnostics with positions dropped, in a canonical order.
pub fn diagnostic_multiset(outcome: &CheckOutcome) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = outcome
        .diagnostics
        .iter()
        .map(|d| (d.condition.id().to_owned(), d.message.clone()))
        .collect();
    v.sort();
    v
}

pub fn condition_multiset(outcome: &CheckOutcome) -> Vec<String> {
    let mut v: Vec<String> = outcome
        .diagnostics
        .iter()
        .map(|d| d.condition.id().to_owned())
        .collect();
    v.sort();
    v
}

/// `tag A, B with T1, T2;` checks like its four single statements.
pub fn expansion_equivalence(cases: u32) -> Result<(), String> {
    let profile = profile();
    run_property(cases, scenario_strategy(), |sc| {
        let parsed = Parsed::new(&profile, &sc.chart, &sc.schema).map_err(TestCaseError::fail)?;
        let compact = parsed
            .parse_tags(&render_model(&sc.body, false))
            .map_err(TestCaseError::fail)?;
        let expanded = parsed
            .parse_tags(&render_model(&sc.body, true))
            .map_err(TestCaseError::fail)?;
        let a = parsed.check(&compact);
        let b = parsed.check(&expanded);
        prop_assert_eq!(diagnostic_multiset(&a), diagnostic_multiset(&b));
        prop_assert_eq!(a.resolved.is_some(), b.resolved.is_some());
        Ok(())
    })
}

/// `within C { tag X with T; }` checks like `tag C.X with T;`.
pub fn context_equivalence(cases: u32) -> Result<(), String> {
    let profile = profile();
    let strategy = scenario_strategy()
        .prop_filter("nested states", |sc| !sc.chart.nestings().is_empty())
        .prop_flat_map(|sc| {
            let n = sc.chart.nestings().len();
            let tags = prop::collection::vec(tag_use_strategy(&sc.schema), 1..=2);
            (Just(sc), prop::collection::vec((0..n, tags), 1..=4))
        });
    run_property(cases, strategy, |(sc, picks)| {
        let parsed = Parsed::new(&profile, &sc.chart, &sc.schema).map_err(TestCaseError::fail)?;
        let nestings = sc.chart.nestings();
        let mut within = Vec::new();
        let mut flat = Vec::new();
        for (i, tags) in picks {
            let (context, child) = &nestings[i];
            within.push(GenItem::Within {
                context: context.clone(),
                body: vec![GenItem::Statement {
                    elements: vec![child.clone()],
                    tags: tags.clone(),
                }],
            });
            flat.push(GenItem::Statement {
                elements: vec![format!("{context}.{child}")],
                tags,
            });
        }
        let a = parsed.check(
            &parsed
                .parse_tags(&render_model(&within, false))
                .map_err(TestCaseError::fail)?,
        );
        let b = parsed.check(
            &parsed
                .parse_tags(&render_model(&flat, false))
                .map_err(TestCaseError::fail)?,
        );
        prop_assert_eq!(diagnostic_multiset(&a), diagnostic_multiset(&b));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// schema-driven generation

/// Deterministic source of choices for value generation.
pub struct Choices {
    seq: Vec<u32>,
    next: usize,
}

impl Choices {
    pub fn new(seq: Vec<u32>) -> Self {
        Choices { seq, next: 0 }
    }

    pub fn pick(&mut self, n: usize) -> usize {
        let v = self.seq[self.next % self.seq.len()] as usize;
        self.next += 1;
        v % n.max(1)
    }
}

const STRING_POOL: [&str; 6] = [
    "",
    "plain",
    "with space",
    "q\"uote",
    "back\\slash",
    "App.call()",
];

pub fn valid_value(schema: &GenSchema, domain: &GenDomain, c: &mut Choices) -> GenValue {
    match domain {
        GenDomain::Flag => GenValue::Simple,
        GenDomain::Native("int") => {
            let n = c.pick(2001) as i64 - 1000;
            GenValue::Valued(n.to_string())
        }
        GenDomain::Native("Boolean") => GenValue::Valued(["true", "false"][c.pick(2)].into()),
        GenDomain::Native(_) => GenValue::Valued(STRING_POOL[c.pick(STRING_POOL.len())].into()),
        GenDomain::Enum(values) => GenValue::Valued(values[c.pick(values.len())].clone()),
        GenDomain::Complex(refs) => {
            let mut subs = Vec::new();
            for r in refs {
                let count = match r.card {
                    "" => 1,
                    "?" => c.pick(2),
                    "*" => c.pick(3),
                    _ => 1 + c.pick(2),
                };
                for _ in 0..count {
                    let domain = match &r.ty {
                        GenRefType::Native(n) => GenDomain::Native(n),
                        GenRefType::Named(n) => schema.get(n).unwrap().domain.clone(),
                    };
                    subs.push((r.name.clone(), valid_value(schema, &domain, c)));
                }
            }
            GenValue::Complex(subs)
        }
    }
}

/// Tags every admissible element with valid values for each public tag
/// type, optionally through `within` blocks.
pub fn conforming_body(chart: &GenChart, schema: &GenSchema, c: &mut Choices) -> Vec<GenItem> {
    let addressable = chart.addressable();
    let mut body = Vec::new();
    for t in schema.types.iter().filter(|t| !t.private) {
        let admissible: Vec<&String> = addressable
            .iter()
            .filter(|(_, ty)| t.scope.as_ref().is_none_or(|s| s.contains(ty)))
            .map(|(i, _)| i)
            .collect();
        if admissible.is_empty() {
            continue;
        }
        for _ in 0..=c.pick(2) {
            let ident = admissible[c.pick(admissible.len())].clone();
            let tag = GenTagUse {
                name: t.name.clone(),
                value: valid_value(schema, &t.domain, c),
            };
            let statement = |e: String| GenItem::Statement {
                elements: vec![e],
                tags: vec![tag.clone()],
            };
            match ident.rsplit_once('.') {
                Some((parent, child)) if !ident.starts_with('[') && c.pick(2) == 0 => {
                    body.push(GenItem::Within {
                        context: parent.to_owned(),
                        body: vec![statement(child.to_owned())],
                    })
                }
                _ => body.push(statement(ident)),
            }
        }
    }
    body
}

pub fn generator_soundness(cases: u32) -> Result<(), String> {
    let profile = profile();
    let strategy = (
        chart_strategy(),
        schema_strategy(4).prop_filter("finite", |s| !s.has_required_cycle()),
        prop::collection::vec(any::<u32>(), 1..64),
    );
    let attached = std::sync::atomic::AtomicUsize::new(0);
    run_property(cases, strategy, |(chart, schema, seq)| {
        let parsed = Parsed::new(&profile, &chart, &schema).map_err(TestCaseError::fail)?;
        let body = conforming_body(&chart, &schema, &mut Choices::new(seq));
        let text = render_model(&body, false);
        let model = parsed.parse_tags(&text).map_err(TestCaseError::fail)?;
        let outcome = parsed.check(&model);
        prop_assert_eq!(
            outcome.error_count(),
            0,
            "{:?}\n{}",
            outcome.diagnostics,
            text
        );
        // every generated item holds exactly one (element, tag) pair
        let attachments = outcome.resolved.unwrap().attachments.len();
        prop_assert_eq!(attachments, body.len());
        attached.fetch_add(attachments, std::sync::atomic::Ordering::Relaxed);
        Ok(())
    })?;
    let total = attached.into_inner();
    if total < cases as usize {
        return Err(format!(
            "generator too sparse: {total} attachments over {cases} models"
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// the definitional oracle

fn oracle_domain(
    schema: &GenSchema,
    domain: &GenDomain,
    v: &GenValue,
    out: &mut Vec<&'static str>,
) -> Option<String> {
    let before = out.len();
    let key = match (domain, v) {
        (GenDomain::Flag, GenValue::Simple) => Some("flag".to_owned()),
        (GenDomain::Native("int"), GenValue::Valued(s)) => {
            let digits = s.strip_prefix('-').unwrap_or(s);
            let ok = !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit());
            ok.then(|| s.parse::<i64>().ok())
                .flatten()
                .map(|n| format!("int:{n}"))
        }
        (GenDomain::Native("Boolean"), GenValue::Valued(s)) => {
            (s == "true" || s == "false").then(|| format!("bool:{s}"))
        }
        (GenDomain::Native(_), GenValue::Valued(s)) => Some(format!("str:{s}")),
        (GenDomain::Enum(values), GenValue::Valued(s)) => {
            values.contains(s).then(|| format!("enum:{s}"))
        }
        (GenDomain::Complex(refs), GenValue::Complex(subs)) => {
            let mut parts = Vec::new();
            for (name, _) in subs {
                if !refs.iter().any(|r| r.name == *name) {
                    out.push("UnknownSubtagName");
                }
            }
            for r in refs {
                let n = subs.iter().filter(|(name, _)| *name == r.name).count();
                let ok = match r.card {
                    "" => n == 1,
                    "?" => n <= 1,
                    "*" => true,
                    _ => n >= 1,
                };
                if !ok {
                    out.push("CardinalityViolation");
                }
            }
            for (name, sub) in subs {
                let Some(r) = refs.iter().find(|r| r.name == *name) else {
                    continue;
                };
                let d = match &r.ty {
                    GenRefType::Native(n) => GenDomain::Native(n),
                    GenRefType::Named(t) => schema.get(t).unwrap().domain.clone(),
                };
                if let Some(k) = oracle_domain(schema, &d, sub, out) {
                    parts.push(format!("{name}={k}"));
                }
            }
            Some(format!("{{{}}}", parts.join(",")))
        }
        _ => None,
    };
    match key {
        Some(k) if out.len() == before => Some(k),
        Some(_) => None,
        None => {
            out.push("E3_3");
            None
        }
    }
}

/// Condition IDs expected for `(identifier, tag)` pairs written at the
/// model root, computed directly from the definitions.
pub fn oracle_conditions(
    chart: &GenChart,
    schema: &GenSchema,
    pairs: &[(String, GenTagUse)],
) -> Vec<String> {
    let mut out: Vec<&'static str> = Vec::new();
    let mut attached: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for (ident, tag) in pairs {
        let Some((path, ty)) = chart.lookup(ident) else {
            out.push("E1");
            continue;
        };
        let Some(tt) = schema.get(&tag.name) else {
            out.push("E3_1");
            continue;
        };
        let mut local = Vec::new();
        if tt.private {
            local.push("PrivateTopLevelUse");
        }
        if let Some(scope) = &tt.scope {
            if !scope.contains(&ty) {
                local.push("E3_2");
            }
        }
        let key = oracle_domain(schema, &tt.domain, &tag.value, &mut local);
        if local.is_empty() {
            *attached
                .entry((path, tt.name.clone(), key.unwrap()))
                .or_default() += 1;
        }
        out.extend(local);
    }
    for n in attached.values() {
        out.extend(std::iter::repeat_n("DuplicateTag", n - 1));
    }
    let mut out: Vec<String> = out.into_iter().map(str::to_owned).collect();
    out.sort();
    out
}

/// Random root-level models compared against the oracle.
pub fn oracle_agreement(cases: u32) -> Result<(), String> {
    let profile = profile();
    let strategy = scenario_strategy().prop_flat_map(|sc| {
        let idents = sc.chart.identifier_pool();
        let tags = tag_use_strategy(&sc.schema);
        (
            Just(sc),
            prop::collection::vec((prop::sample::select(idents), tags), 0..=8),
        )
    });
    run_property(cases, strategy, |(sc, pairs)| {
        let parsed = Parsed::new(&profile, &sc.chart, &sc.schema).map_err(TestCaseError::fail)?;
        let body: Vec<GenItem> = pairs
            .iter()
            .map(|(e, t)| GenItem::Statement {
                elements: vec![e.clone()],
                tags: vec![t.clone()],
            })
            .collect();
        let outcome = parsed.check(
            &parsed
                .parse_tags(&render_model(&body, false))
                .map_err(TestCaseError::fail)?,
        );
        prop_assert_eq!(
            condition_multiset(&outcome),
            oracle_conditions(&sc.chart, &sc.schema, &pairs)
        );
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// bounded exhaustive universe: charts with at most five elements and
// schemas with at most three tag types

fn st(name: &str, invariant: Option<u8>, children: Vec<GenState>) -> GenState {
    GenState {
        name: name.into(),
        invariant,
        children,
    }
}

pub fn small_charts() -> Vec<GenChart> {
    let t = |a: &str, b: &str| (a.to_owned(), b.to_owned());
    vec![
        GenChart {
            states: vec![],
            transitions: vec![],
        },
        GenChart {
            states: vec![st("A", None, vec![])],
            transitions: vec![],
        },
        GenChart {
            states: vec![st("A", None, vec![]), st("B", None, vec![])],
            transitions: vec![t("A", "B")],
        },
        GenChart {
            states: vec![
                st("A", None, vec![st("C", None, vec![])]),
                st("B", None, vec![]),
            ],
            transitions: vec![],
        },
        GenChart {
            states: vec![st("A", Some(1), vec![]), st("B", None, vec![])],
            transitions: vec![t("A", "B")],
        },
        GenChart {
            states: vec![st("A", None, vec![])],
            transitions: vec![t("A", "A"), t("A", "A")],
        },
        GenChart {
            states: vec![st("A", None, vec![st("C", Some(1), vec![])])],
            transitions: vec![t("A.C", "A")],
        },
        GenChart {
            states: vec![st("A", Some(1), vec![]), st("B", Some(1), vec![])],
            transitions: vec![],
        },
    ]
}

pub fn element_count(chart: &GenChart) -> usize {
    1 + chart.state_paths().len() + chart.invariants().len() + chart.transitions.len()
}

pub fn tag_type_catalog() -> Vec<GenTagType> {
    let ty = |name: &str, private, scope: Option<Vec<&'static str>>, domain| GenTagType {
        name: name.into(),
        private,
        scope,
        domain,
    };
    let r = |name: &str, ty: GenRefType, card| GenRefDef {
        name: name.into(),
        ty,
        card,
    };
    vec![
        ty("Mon", false, Some(vec!["State"]), GenDomain::Flag),
        ty(
            "Lvl",
            false,
            Some(vec!["Transition", "State"]),
            GenDomain::Native("int"),
        ),
        ty(
            "Kind",
            false,
            Some(vec!["Statechart"]),
            GenDomain::Enum(vec!["a".into(), "b".into()]),
        ),
        ty("Note", false, None, GenDomain::Native("String")),
        ty(
            "Ok",
            false,
            Some(vec!["Invariant", "source"]),
            GenDomain::Native("Boolean"),
        ),
        ty("Pri", true, None, GenDomain::Native("int")),
        ty(
            "Exc",
            false,
            Some(vec!["State"]),
            GenDomain::Complex(vec![
                r("code", GenRefType::Native("int"), ""),
                r("msg", GenRefType::Native("String"), "?"),
                r("flag", GenRefType::Native("Boolean"), "*"),
            ]),
        ),
        ty(
            "Wrap",
            false,
            None,
            GenDomain::Complex(vec![
                r("inner", GenRefType::Named("Kind".into()), ""),
                r("extra", GenRefType::Named("Pri".into()), "+"),
            ]),
        ),
    ]
}

/// Every subset of at most three catalog types whose references resolve.
pub fn small_schemas() -> Vec<GenSchema> {
    let catalog = tag_type_catalog();
    let n = catalog.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() > 3 {
            continue;
        }
        let types: Vec<GenTagType> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| catalog[i].clone())
            .collect();
        let schema = GenSchema { types };
        let closed = schema.types.iter().all(|t| match &t.domain {
            GenDomain::Complex(refs) => refs.iter().all(|r| match &r.ty {
                GenRefType::Named(n) => schema.get(n).is_some(),
                GenRefType::Native(_) => true,
            }),
            _ => true,
        });
        if closed {
            out.push(schema);
        }
    }
    out
}

pub fn small_identifiers() -> Vec<String> {
    [
        "M",
        "A",
        "B",
        "C",
        "A.C",
        "Ghost",
        "[A -> B]",
        "[A -> A]",
        "[A.C -> A]",
        "[x > 1]",
        "[B -> A]",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn small_tag_uses() -> Vec<GenTagUse> {
    let v = |s: &str| GenValue::Valued(s.into());
    let c = |subs: &[(&str, GenValue)]| {
        GenValue::Complex(
            subs.iter()
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect(),
        )
    };
    let u = |name: &str, value: GenValue| GenTagUse {
        name: name.into(),
        value,
    };
    vec![
        u("Mon", GenValue::Simple),
        u("Mon", v("1")),
        u("Lvl", v("3")),
        u("Lvl", v("-03")),
        u("Lvl", v("x")),
        u("Lvl", v("99999999999999999999")),
        u("Kind", v("a")),
        u("Kind", v("A")),
        u("Note", v("hi")),
        u("Note", GenValue::Simple),
        u("Ok", v("true")),
        u("Ok", v("yes")),
        u("Pri", v("1")),
        u("Exc", c(&[("code", v("1"))])),
        u(
            "Exc",
            c(&[
                ("code", v("1")),
                ("msg", v("m")),
                ("flag", v("true")),
                ("flag", v("false")),
            ]),
        ),
        u("Exc", c(&[("msg", v("m"))])),
        u("Exc", c(&[("code", v("1")), ("bad", v("x"))])),
        u("Exc", c(&[("code", v("z"))])),
        u("Exc", v("1")),
        u("Wrap", c(&[("inner", v("a")), ("extra", v("2"))])),
        u("Wrap", c(&[("inner", v("q")), ("extra", v("2"))])),
        u("Wrap", c(&[("inner", v("b"))])),
        u("Unknown", GenValue::Simple),
    ]
}

/// Checks every single-pair tag model, and one model holding all pairs,
/// for every small chart and schema. Returns the number of instances.
pub fn exhaustive() -> Result<usize, String> {
    let profile = profile();
    let charts = small_charts();
    let schemas = small_schemas();
    let identifiers = small_identifiers();
    let uses = small_tag_uses();
    assert!(charts.iter().all(|c| element_count(c) <= 5));
    assert!(schemas.iter().all(|s| s.types.len() <= 3));

    let pairs: Vec<(String, GenTagUse)> = identifiers
        .iter()
        .flat_map(|i| uses.iter().map(move |u| (i.clone(), u.clone())))
        .collect();
    let body: Vec<GenItem> = pairs
        .iter()
        .map(|(e, t)| GenItem::Statement {
            elements: vec![e.clone()],
            tags: vec![t.clone()],
        })
        .collect();
    let text = render_model(&body, false);

    let jobs: Vec<(&GenChart, &GenSchema)> = charts
        .iter()
        .flat_map(|c| schemas.iter().map(move |s| (c, s)))
        .collect();
    let counts: Vec<Result<usize, String>> = jobs
        .par_iter()
        .map(|(chart, schema)| {
            let parsed = Parsed::new(&profile, chart, schema)?;
            let model = parsed.parse_tags(&text)?;

            let whole = parsed.check(&model);
            let expected = oracle_conditions(chart, schema, &pairs);
            if condition_multiset(&whole) != expected {
                return Err(format!(
                    "all-pairs model disagrees\nchart:\n{}schema:\n{}got {:?}\nwant {:?}",
                    chart.render(),
                    schema.render(),
                    condition_multiset(&whole),
                    expected
                ));
            }

            for (item, pair) in model.body.iter().zip(&pairs) {
                let single = TagModel {
                    body: vec![item.clone()],
                    ..without_body(&model)
                };
                let got = condition_multiset(&parsed.check(&single));
                let want = oracle_conditions(chart, schema, std::slice::from_ref(pair));
                if got != want {
                    return Err(format!(
                        "`tag {} with {}` disagrees\nchart:\n{}schema:\n{}got {got:?}\nwant {want:?}",
                        pair.0,
                        pair.1.render(),
                        chart.render(),
                        schema.render()
                    ));
                }
            }
            Ok(pairs.len() + 1)
        })
        .collect();
    counts.into_iter().sum()
}

fn without_body(model: &TagModel) -> TagModel {
    TagModel {
        package: model.package.clone(),
        conforms_to: model.conforms_to.clone(),
        name: model.name.clone(),
        target_model: model.target_model.clone(),
        body: Vec::<BodyItem>::new(),
        span: model.span,
    }
}
