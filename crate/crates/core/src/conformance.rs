//! Conformance of a tag model to its target model and tagschemas.
//!
//! Checks, per tag model:
//!
//! * tag type names are unique across every referenced schema (`E2`);
//! * every tagged element exists in the target model (`E1`);
//! * every used tag names a defined tag type (`E3_1`);
//! * the element's type is in the tag type's scope (`E3_2`);
//! * the tag's value fits the tag type's domain (`E3_3`, plus
//!   `CardinalityViolation` and `UnknownSubtagName` inside complex values);
//! * private tag types are not used as top-level tags.
//!
//! Statements are expanded into (element, tag) pairs first. An unresolved
//! element suppresses the remaining checks for its pair only, as does an
//! unknown tag type.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::derive::LanguageProfile;
use crate::schema::{DomainSpec, NativeType, RefType, TagSchema, TagTypeDef};
use crate::span::{QualifiedName, Span};
use crate::statechart::{ElementHandle, StatechartModel};
use crate::tags::{BodyItem, TagModel, TagUse, TagValue};

#[derive(Clone, Copy, Debug)]
pub struct CheckInput<'a> {
    pub tag_model: &'a TagModel,
    pub target: &'a StatechartModel,
    /// The schemas named in the tag model's `conforms to` clause.
    pub schemas: &'a [TagSchema],
    pub profile: &'a LanguageProfile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Condition {
    E1UnresolvedElement,
    E2DuplicateTagTypeName,
    E3_1UnknownTagType,
    E3_2ScopeMismatch,
    E3_3DomainMismatch,
    PrivateTopLevelUse,
    CardinalityViolation,
    UnknownSubtagName,
    DuplicateTagWarning,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::E1UnresolvedElement => "E1",
            Condition::E2DuplicateTagTypeName => "E2",
            Condition::E3_1UnknownTagType => "E3_1",
            Condition::E3_2ScopeMismatch => "E3_2",
            Condition::E3_3DomainMismatch => "E3_3",
            Condition::PrivateTopLevelUse => "PrivateTopLevelUse",
            Condition::CardinalityViolation => "CardinalityViolation",
            Condition::UnknownSubtagName => "UnknownSubtagName",
            Condition::DuplicateTagWarning => "DuplicateTag",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Condition::DuplicateTagWarning => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// A finding located in the tag model file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub condition: Condition,
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    fn new(condition: Condition, span: Span, message: String) -> Self {
        Diagnostic {
            condition,
            severity: condition.severity(),
            span,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormalizedValue {
    Flag,
    Int(i64),
    Str(String),
    Bool(bool),
    EnumChoice(String),
    /// Subtags in source order.
    Complex(Vec<(String, NormalizedValue)>),
}

impl NormalizedValue {
    pub fn kind(&self) -> &'static str {
        match self {
            NormalizedValue::Flag => "flag",
            NormalizedValue::Int(_) => "int",
            NormalizedValue::Str(_) => "string",
            NormalizedValue::Bool(_) => "bool",
            NormalizedValue::EnumChoice(_) => "enum",
            NormalizedValue::Complex(_) => "complex",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attachment {
    pub element: ElementHandle,
    pub tag_type: TagTypeDef,
    pub schema: QualifiedName,
    pub value: NormalizedValue,
    /// Position of the tag in the tag model.
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedTagging {
    pub tag_model: QualifiedName,
    pub target_model: QualifiedName,
    pub attachments: Vec<Attachment>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub diagnostics: Vec<Diagnostic>,
    /// Present iff no diagnostic has error severity.
    pub resolved: Option<ResolvedTagging>,
}

impl CheckOutcome {
    pub fn error_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.is_error()).count()
    }

    pub fn warning_count(&self) -> usize {
        self.diagnostics.len() - self.error_count()
    }
}

enum Lookup<'a> {
    Found(&'a QualifiedName, &'a TagTypeDef, &'a TagSchema),
    /// Defined in more than one referenced schema; already reported as E2.
    Ambiguous,
    Missing,
}

struct TypeIndex<'a> {
    by_name: BTreeMap<&'a str, Vec<(QualifiedName, &'a TagTypeDef, &'a TagSchema)>>,
}

impl<'a> TypeIndex<'a> {
    fn new(schemas: &'a [TagSchema]) -> Self {
        let mut by_name: BTreeMap<&str, Vec<_>> = BTreeMap::new();
        for schema in schemas {
            let qn = schema.qualified_name();
            for tt in &schema.tag_types {
                by_name
                    .entry(tt.name.as_str())
                    .or_default()
                    .push((qn.clone(), tt, schema));
            }
        }
        TypeIndex { by_name }
    }

    fn lookup(&self, name: &str) -> Lookup<'_> {
        match self.by_name.get(name).map(Vec::as_slice) {
            None | Some([]) => Lookup::Missing,
            Some([(qn, tt, schema)]) => Lookup::Found(qn, tt, schema),
            Some(_) => Lookup::Ambiguous,
        }
    }
}

pub fn check(input: &CheckInput<'_>) -> CheckOutcome {
    let mut diagnostics = Vec::new();
    let index = TypeIndex::new(input.schemas);

    for (name, defs) in &index.by_name {
        if defs.len() > 1 {
            let origins: Vec<String> = defs.iter().map(|(qn, _, _)| qn.to_string()).collect();
            let second = &defs[1].0;
            let span = input
                .tag_model
                .conforms_to
                .iter()
                .find(|r| resolves_to(&r.name, second, input.tag_model))
                .map(|r| r.span)
                .unwrap_or(input.tag_model.span);
            diagnostics.push(Diagnostic::new(
                Condition::E2DuplicateTagTypeName,
                span,
                format!(
                    "tag type `{name}` is defined {} times across referenced tagschemas ({})",
                    defs.len(),
                    origins.join(", ")
                ),
            ));
        }
    }

    let mut attachments = Vec::new();
    walk_body(
        input,
        &index,
        &input.tag_model.body,
        &QualifiedName::default(),
        &mut diagnostics,
        &mut attachments,
    );

    let mut seen = HashSet::new();
    for a in &attachments {
        if !seen.insert((&a.element.path, &a.tag_type.name, &a.value)) {
            diagnostics.push(Diagnostic::new(
                Condition::DuplicateTagWarning,
                a.span,
                format!(
                    "`{}` already carries this `{}` tag",
                    a.element.path, a.tag_type.name
                ),
            ));
        }
    }

    let resolved = diagnostics
        .iter()
        .all(|d| !d.is_error())
        .then(|| ResolvedTagging {
            tag_model: input.tag_model.qualified_name(),
            target_model: input.target.qualified_name(),
            attachments,
        });
    CheckOutcome {
        diagnostics,
        resolved,
    }
}

/// Whether a `conforms to` reference names `schema`, defaulting unqualified
/// references to the tag model's package.
fn resolves_to(reference: &QualifiedName, schema: &QualifiedName, model: &TagModel) -> bool {
    reference == schema
        || (reference.is_simple()
            && model.package.as_ref().map(|p| p.join(reference)).as_ref() == Some(schema))
}

fn walk_body(
    input: &CheckInput<'_>,
    index: &TypeIndex<'_>,
    items: &[BodyItem],
    context: &QualifiedName,
    diagnostics: &mut Vec<Diagnostic>,
    attachments: &mut Vec<Attachment>,
) {
    for item in items {
        match item {
            BodyItem::Elision(_) => {}
            BodyItem::Context(ctx) => {
                let inner =
                    match input
                        .target
                        .resolve_element(&ctx.element.ident, context, input.profile)
                    {
                        Ok(handle) => handle.context_path(),
                        Err(e) => {
                            diagnostics.push(Diagnostic::new(
                                Condition::E1UnresolvedElement,
                                ctx.element.span,
                                e.to_string(),
                            ));
                            context.clone()
                        }
                    };
                walk_body(input, index, &ctx.body, &inner, diagnostics, attachments);
            }
            BodyItem::Statement(st) => {
                for element in &st.elements {
                    let resolved =
                        input
                            .target
                            .resolve_element(&element.ident, context, input.profile);
                    for tag in &st.tags {
                        let handle = match &resolved {
                            Ok(h) => h,
                            Err(e) => {
                                diagnostics.push(Diagnostic::new(
                                    Condition::E1UnresolvedElement,
                                    element.span,
                                    e.to_string(),
                                ));
                                continue;
                            }
                        };
                        check_pair(index, handle, tag, diagnostics, attachments);
                    }
                }
            }
        }
    }
}

fn check_pair(
    index: &TypeIndex<'_>,
    element: &ElementHandle,
    tag: &TagUse,
    diagnostics: &mut Vec<Diagnostic>,
    attachments: &mut Vec<Attachment>,
) {
    let (schema_name, tag_type, schema) = match index.lookup(&tag.name) {
        Lookup::Found(qn, tt, schema) => (qn, tt, schema),
        Lookup::Ambiguous => return,
        Lookup::Missing => {
            diagnostics.push(Diagnostic::new(
                Condition::E3_1UnknownTagType,
                tag.span,
                format!("no referenced tagschema defines tag type `{}`", tag.name),
            ));
            return;
        }
    };
    let errors_before = diagnostics.iter().filter(|d| d.is_error()).count();

    if tag_type.is_private {
        diagnostics.push(Diagnostic::new(
            Condition::PrivateTopLevelUse,
            tag.span,
            format!(
                "tag type `{}` is private and can only be used inside other tag types",
                tag.name
            ),
        ));
    }
    if !tag_type.scope.admits(&element.element_type) {
        diagnostics.push(Diagnostic::new(
            Condition::E3_2ScopeMismatch,
            tag.span,
            format!(
                "`{}` is a {}, but tag type `{}` cannot be attached to that element type",
                element.path, element.element_type, tag.name
            ),
        ));
    }
    let (domain_diags, value) = check_value_domain(tag, tag_type, schema);
    diagnostics.extend(domain_diags);

    let errors_after = diagnostics.iter().filter(|d| d.is_error()).count();
    if let (Some(value), true) = (value, errors_after == errors_before) {
        attachments.push(Attachment {
            element: element.clone(),
            tag_type: tag_type.clone(),
            schema: schema_name.clone(),
            value,
            span: tag.span,
        });
    }
}

/// Checks a tag's value against the domain of `tag_type`. Scope is not
/// consulted: it constrains model elements, not nesting.
pub fn check_value_domain(
    tag: &TagUse,
    tag_type: &TagTypeDef,
    schema: &TagSchema,
) -> (Vec<Diagnostic>, Option<NormalizedValue>) {
    let mut diagnostics = Vec::new();
    let value = check_domain(
        tag,
        &tag_type.domain,
        &tag_type.name,
        schema,
        &mut diagnostics,
    );
    let value = if diagnostics.is_empty() { value } else { None };
    (diagnostics, value)
}

fn check_domain(
    tag: &TagUse,
    domain: &DomainSpec,
    type_name: &str,
    schema: &TagSchema,
    out: &mut Vec<Diagnostic>,
) -> Option<NormalizedValue> {
    let mismatch = |out: &mut Vec<Diagnostic>, expected: String| {
        out.push(Diagnostic::new(
            Condition::E3_3DomainMismatch,
            tag.span,
            format!(
                "`{}` expects {expected}, found {}",
                tag.name,
                describe(&tag.value)
            ),
        ));
        None
    };
    match (domain, &tag.value) {
        (DomainSpec::SimpleFlag, TagValue::Simple) => Some(NormalizedValue::Flag),
        (DomainSpec::SimpleFlag, _) => mismatch(out, "no value (it is a flag)".into()),
        (DomainSpec::Native(native), TagValue::Valued(raw)) => match parse_native(*native, raw) {
            Some(v) => Some(v),
            None => mismatch(out, format!("a value of type {}", native.keyword())),
        },
        (DomainSpec::Native(native), _) => {
            mismatch(out, format!("a value of type {}", native.keyword()))
        }
        (DomainSpec::Enumerated(values), TagValue::Valued(raw)) if values.contains(raw) => {
            Some(NormalizedValue::EnumChoice(raw.clone()))
        }
        (DomainSpec::Enumerated(values), _) => {
            let choices: Vec<String> = values.iter().map(|v| crate::lexer::quote(v)).collect();
            mismatch(out, format!("one of {}", choices.join(" | ")))
        }
        (DomainSpec::Complex(references), TagValue::Complex(subtags)) => {
            let before = out.len();
            for sub in subtags {
                if !references.iter().any(|r| r.name == sub.name) {
                    out.push(Diagnostic::new(
                        Condition::UnknownSubtagName,
                        sub.span,
                        format!("`{type_name}` has no subtag named `{}`", sub.name),
                    ));
                }
            }
            for r in references {
                let count = subtags.iter().filter(|s| s.name == r.name).count();
                if !r.cardinality.admits(count) {
                    out.push(Diagnostic::new(
                        Condition::CardinalityViolation,
                        tag.span,
                        format!(
                            "`{type_name}` expects {} `{}` subtag(s), found {count}",
                            cardinality_text(r.cardinality),
                            r.name
                        ),
                    ));
                }
            }
            let mut children = Vec::new();
            for sub in subtags {
                let Some(r) = references.iter().find(|r| r.name == sub.name) else {
                    continue;
                };
                let child = match &r.ref_type {
                    RefType::Native(native) => check_domain(
                        sub,
                        &DomainSpec::Native(*native),
                        native.keyword(),
                        schema,
                        out,
                    ),
                    RefType::Named(target) => match schema.tag_type(target) {
                        Some(tt) => check_domain(sub, &tt.domain, &tt.name, schema, out),
                        None => {
                            out.push(Diagnostic::new(
                                Condition::E3_3DomainMismatch,
                                sub.span,
                                format!("subtag type `{target}` is not defined"),
                            ));
                            None
                        }
                    },
                };
                if let Some(child) = child {
                    children.push((sub.name.clone(), child));
                }
            }
            (out.len() == before).then_some(NormalizedValue::Complex(children))
        }
        (DomainSpec::Complex(_), _) => mismatch(out, "a complex value `{ ... }`".into()),
    }
}

fn cardinality_text(c: crate::schema::RefCardinality) -> &'static str {
    use crate::schema::RefCardinality::*;
    match c {
        Required => "exactly one",
        Optional => "at most one",
        Many => "any number of",
        AtLeastOne => "at least one",
    }
}

fn describe(value: &TagValue) -> String {
    match value {
        TagValue::Simple => "no value".into(),
        TagValue::Valued(raw) => crate::lexer::quote(raw),
        TagValue::Complex(_) => "a complex value".into(),
    }
}

fn parse_native(native: NativeType, raw: &str) -> Option<NormalizedValue> {
    match native {
        NativeType::String => Some(NormalizedValue::Str(raw.to_owned())),
        NativeType::Boolean => match raw {
            "true" => Some(NormalizedValue::Bool(true)),
            "false" => Some(NormalizedValue::Bool(false)),
            _ => None,
        },
        NativeType::Int => {
            let digits = raw.strip_prefix('-').unwrap_or(raw);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            raw.parse::<i64>().ok().map(NormalizedValue::Int)
        }
    }
}

/// Checks independent tag models, in parallel when the `parallel` feature
/// is enabled.
pub fn check_all(inputs: &[CheckInput<'_>]) -> Vec<CheckOutcome> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        inputs.par_iter().map(check).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        check_all_sequential(inputs)
    }
}

pub fn check_all_sequential(inputs: &[CheckInput<'_>]) -> Vec<CheckOutcome> {
    inputs.iter().map(check).collect()
}
