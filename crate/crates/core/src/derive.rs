//! Derivation of a [`LanguageProfile`] from a [`GrammarManifest`].
//!
//! Four rules specialize the common tag and tagschema languages:
//!
//! * every name-identifiable nonterminal reuses the qualified-name
//!   identifier of the common tag language;
//! * every other nonterminal gets a bracketed identifier that reuses its
//!   concrete syntax, e.g. `[Start -> Active]`;
//! * every nonterminal becomes a scope keyword of the schema language;
//! * every preceding identifier that labels a repeated nonterminal becomes
//!   a nested scope keyword, `n_pi`, shortened to `pi` when unambiguous.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::normalize_whitespace;
use crate::manifest::{GrammarManifest, Production, RhsItem};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LanguageProfile {
    pub grammar_name: String,
    pub identifier_rules: Vec<IdentifierRule>,
    pub scope_keywords: Vec<ScopeKeyword>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentifierRule {
    pub nonterminal: String,
    pub kind: IdentifierKind,
    /// Human-readable form; for bracket rules the bracketed concrete syntax.
    pub syntax_sketch: String,
    /// Tokens a bracket identifier is matched against. Empty for
    /// qualified-name rules.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pattern: Vec<PatternToken>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum IdentifierKind {
    QualifiedName,
    BracketSyntax,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum PatternToken {
    Slot { name: String, nonterminal: String },
    Literal { text: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScopeKeyword {
    pub keyword: String,
    pub origin: KeywordOrigin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum KeywordOrigin {
    Plain {
        nonterminal: String,
    },
    #[serde(rename_all = "camelCase")]
    Nested {
        production: String,
        preceding_identifier: String,
    },
}

/// A bracket identifier matched against one bracket rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracketMatch {
    pub nonterminal: String,
    /// Slot name and captured text, in pattern order.
    pub slots: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("grammar `{0}` has no derivable productions")]
    SkippedEverything(String),
    #[error("derived scope keyword `{keyword}` is produced twice")]
    KeywordCollision { keyword: String },
}

pub fn derive_profile(manifest: &GrammarManifest) -> Result<LanguageProfile, DeriveError> {
    let derivable: Vec<&Production> = manifest.derivable_productions().collect();
    if derivable.is_empty() {
        return Err(DeriveError::SkippedEverything(
            manifest.grammar_name.clone(),
        ));
    }
    let skipped: BTreeSet<&str> = manifest
        .productions
        .iter()
        .filter(|p| p.skipped)
        .map(|p| p.name.as_str())
        .chain(
            manifest
                .interfaces
                .iter()
                .filter(|i| i.skipped)
                .map(|i| i.name.as_str()),
        )
        .collect();

    let identifier_rules = derivable
        .iter()
        .map(|p| {
            if p.name_identifiable {
                IdentifierRule {
                    nonterminal: p.name.clone(),
                    kind: IdentifierKind::QualifiedName,
                    syntax_sketch: "QualifiedName".to_owned(),
                    pattern: Vec::new(),
                }
            } else {
                let pattern = bracket_pattern(p, &skipped);
                IdentifierRule {
                    nonterminal: p.name.clone(),
                    kind: IdentifierKind::BracketSyntax,
                    syntax_sketch: sketch_text(&pattern),
                    pattern,
                }
            }
        })
        .collect();

    let mut scope_keywords: Vec<ScopeKeyword> = derivable
        .iter()
        .map(|p| ScopeKeyword {
            keyword: p.keyword().to_owned(),
            origin: KeywordOrigin::Plain {
                nonterminal: p.name.clone(),
            },
        })
        .collect();

    // How many derivable productions use each preceding identifier.
    let mut pi_uses: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &derivable {
        for pi in p.preceding_identifiers() {
            *pi_uses.entry(pi).or_default() += 1;
        }
    }
    let reserved: BTreeSet<&str> = manifest
        .productions
        .iter()
        .flat_map(|p| [p.name.as_str(), p.keyword()])
        .chain(manifest.interfaces.iter().map(|i| i.name.as_str()))
        .collect();

    for p in &derivable {
        for pi in p.nested_identifiers() {
            let bare = pi_uses[pi] == 1 && !reserved.contains(pi);
            let keyword = if bare {
                pi.to_owned()
            } else {
                format!("{}_{}", p.name, pi)
            };
            scope_keywords.push(ScopeKeyword {
                keyword,
                origin: KeywordOrigin::Nested {
                    production: p.name.clone(),
                    preceding_identifier: pi.to_owned(),
                },
            });
        }
    }

    let mut seen = BTreeSet::new();
    for kw in &scope_keywords {
        if !seen.insert(kw.keyword.as_str()) {
            return Err(DeriveError::KeywordCollision {
                keyword: kw.keyword.clone(),
            });
        }
    }

    Ok(LanguageProfile {
        grammar_name: manifest.grammar_name.clone(),
        identifier_rules,
        scope_keywords,
    })
}

fn bracket_pattern(p: &Production, skipped: &BTreeSet<&str>) -> Vec<PatternToken> {
    if let Some(sketch) = &p.concrete_syntax_sketch {
        let trimmed = sketch.trim();
        let inner = trimmed
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .unwrap_or(trimmed);
        return inner
            .split_whitespace()
            .map(|word| {
                let slot = p.rhs_refs().find(|r| {
                    r.preceding_identifier.as_deref() == Some(word) || r.nonterminal == word
                });
                match slot {
                    Some(r) => PatternToken::Slot {
                        name: word.to_owned(),
                        nonterminal: r.nonterminal.clone(),
                    },
                    None => PatternToken::Literal {
                        text: word.to_owned(),
                    },
                }
            })
            .collect();
    }
    p.rhs
        .iter()
        .filter_map(|item| match item {
            RhsItem::Terminal(text) => Some(PatternToken::Literal { text: text.clone() }),
            RhsItem::Ref(r) if !skipped.contains(r.nonterminal.as_str()) => {
                Some(PatternToken::Slot {
                    name: r
                        .preceding_identifier
                        .clone()
                        .unwrap_or_else(|| r.nonterminal.clone()),
                    nonterminal: r.nonterminal.clone(),
                })
            }
            _ => None,
        })
        .collect()
}

fn sketch_text(pattern: &[PatternToken]) -> String {
    let words: Vec<&str> = pattern
        .iter()
        .map(|t| match t {
            PatternToken::Slot { name, .. } => name.as_str(),
            PatternToken::Literal { text } => text.as_str(),
        })
        .collect();
    format!("[{}]", words.join(" "))
}

impl LanguageProfile {
    pub fn has_keyword(&self, keyword: &str) -> bool {
        self.scope_keywords.iter().any(|k| k.keyword == keyword)
    }

    /// The plain scope keyword of a nonterminal, honoring aliases.
    pub fn keyword_for(&self, nonterminal: &str) -> Option<&str> {
        self.scope_keywords.iter().find_map(|k| match &k.origin {
            KeywordOrigin::Plain { nonterminal: n } if n == nonterminal => Some(k.keyword.as_str()),
            _ => None,
        })
    }

    pub fn identifier_rule(&self, nonterminal: &str) -> Option<&IdentifierRule> {
        self.identifier_rules
            .iter()
            .find(|r| r.nonterminal == nonterminal)
    }

    /// Every bracket rule the text `raw` (without brackets) matches, most
    /// specific (most literal tokens) first; ties keep profile order.
    pub fn match_bracket(&self, raw: &str) -> Vec<BracketMatch> {
        let mut matches: Vec<(usize, BracketMatch)> = self
            .identifier_rules
            .iter()
            .filter(|r| r.kind == IdentifierKind::BracketSyntax)
            .filter_map(|r| {
                let slots = match_pattern(&r.pattern, raw)?;
                let literals = r
                    .pattern
                    .iter()
                    .filter(|t| matches!(t, PatternToken::Literal { .. }))
                    .count();
                Some((
                    literals,
                    BracketMatch {
                        nonterminal: r.nonterminal.clone(),
                        slots,
                    },
                ))
            })
            .collect();
        matches.sort_by_key(|m| std::cmp::Reverse(m.0));
        matches.into_iter().map(|(_, m)| m).collect()
    }
}

/// Matches bracket text against a pattern. Literals must appear verbatim;
/// each slot captures a non-empty, whitespace-normalized run of text.
/// Adjacent slots are separated by whitespace.
pub fn match_pattern(pattern: &[PatternToken], text: &str) -> Option<Vec<(String, String)>> {
    let mut captured = Vec::new();
    if match_from(pattern, text, &mut captured) {
        Some(captured)
    } else {
        None
    }
}

fn match_from(pattern: &[PatternToken], text: &str, out: &mut Vec<(String, String)>) -> bool {
    let text = text.trim_start();
    let Some((first, rest)) = pattern.split_first() else {
        return text.trim_end().is_empty();
    };
    match first {
        PatternToken::Literal { text: lit } => match text.strip_prefix(lit.as_str()) {
            Some(after) => match_from(rest, after, out),
            None => false,
        },
        PatternToken::Slot { name, .. } => {
            let candidates: Vec<usize> = match rest.first() {
                None => vec![text.len()],
                Some(PatternToken::Literal { text: lit }) => {
                    text.match_indices(lit.as_str()).map(|(i, _)| i).collect()
                }
                Some(PatternToken::Slot { .. }) => text
                    .char_indices()
                    .filter(|(_, c)| c.is_whitespace())
                    .map(|(i, _)| i)
                    .collect(),
            };
            for end in candidates {
                let value = normalize_whitespace(&text[..end]);
                if value.is_empty() {
                    continue;
                }
                out.push((name.clone(), value));
                if match_from(rest, &text[end..], out) {
                    return true;
                }
                out.pop();
            }
            false
        }
    }
}

/// Renders the derived productions of both tagging languages.
pub fn render_derived_grammar(profile: &LanguageProfile) -> String {
    let mut out = String::new();
    let g = &profile.grammar_name;
    let _ = writeln!(out, "// Derived tagging languages for grammar {g}");
    let _ = writeln!(out);
    let _ = writeln!(out, "grammar {g}Tags extends Tags {{");

    let named: Vec<&str> = profile
        .identifier_rules
        .iter()
        .filter(|r| r.kind == IdentifierKind::QualifiedName)
        .map(|r| r.nonterminal.as_str())
        .collect();
    if !named.is_empty() {
        let _ = writeln!(
            out,
            "  // DefaultIdent (QualifiedName) addresses: {}",
            named.join(", ")
        );
    }
    for rule in profile
        .identifier_rules
        .iter()
        .filter(|r| r.kind == IdentifierKind::BracketSyntax)
    {
        let mut body = vec!["\"[\"".to_owned()];
        for token in &rule.pattern {
            body.push(match token {
                PatternToken::Slot { name, nonterminal } if name == nonterminal => {
                    nonterminal.clone()
                }
                PatternToken::Slot { name, nonterminal } => format!("{name}:{nonterminal}"),
                PatternToken::Literal { text } => crate::lexer::quote(text),
            });
        }
        body.push("\"]\"".to_owned());
        let _ = writeln!(
            out,
            "  I_{} implements ModelElementIdentifier = {};",
            rule.nonterminal,
            body.join(" ")
        );
    }
    let _ = writeln!(out, "}}");
    let _ = writeln!(out);

    let _ = writeln!(out, "grammar {g}Schema extends TagSchema {{");
    for kw in &profile.scope_keywords {
        if let KeywordOrigin::Plain { nonterminal } = &kw.origin {
            let _ = writeln!(
                out,
                "  SI_{nonterminal} implements ScopeIdentifier = \"{}\";",
                kw.keyword
            );
        }
    }
    let nested: Vec<&ScopeKeyword> = profile
        .scope_keywords
        .iter()
        .filter(|k| matches!(k.origin, KeywordOrigin::Nested { .. }))
        .collect();
    if !nested.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "  // nested occurrences");
        for kw in nested {
            let _ = writeln!(
                out,
                "  SI_{} implements ScopeIdentifier = \"{}\";",
                kw.keyword, kw.keyword
            );
        }
    }
    let _ = writeln!(out, "}}");
    out
}
