//! Tagging toolchain for textual modeling languages: derive a tag language
//! from a grammar manifest, parse statecharts, tag models and tagschemas,
//! check their conformance and export resolved tags.

pub mod conformance;
pub mod derive;
pub mod export;
pub mod lexer;
pub mod manifest;
pub mod schema;
pub mod span;
pub mod statechart;
pub mod tags;
pub mod workspace;

pub use conformance::{
    check, check_value_domain, CheckInput, CheckOutcome, Condition, Diagnostic, Severity,
};
pub use derive::{derive_profile, render_derived_grammar, LanguageProfile};
pub use manifest::{parse_manifest, GrammarManifest};
pub use schema::{parse_tag_schema, TagSchema};
pub use span::{QualifiedName, Span};
pub use statechart::{parse_statechart, StatechartModel};
pub use tags::{parse_tag_model, TagModel};

/// The statechart manifest shipped with the toolchain.
pub const STATECHART_MANIFEST: &str = include_str!("../grammars/statechart.glang");
