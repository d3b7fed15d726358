//! JSON export of resolved tag attachments.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::conformance::{NormalizedValue, ResolvedTagging};
use crate::span::QualifiedName;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExportReport {
    pub target_model: String,
    pub attachments: Vec<ExportRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExportRecord {
    pub element_path: String,
    pub element_type: String,
    pub tag_type: String,
    pub schema: String,
    pub tag_model: String,
    pub line: u32,
    pub column: u32,
    /// `flag`, `int`, `string`, `bool`, `enum` or `complex`.
    pub kind: String,
    pub value: Value,
}

impl ExportRecord {
    fn sort_key(&self) -> (&str, &str, &str, u32, u32) {
        (
            &self.element_path,
            &self.tag_type,
            &self.tag_model,
            self.line,
            self.column,
        )
    }
}

/// Flags export as `true`; complex values as objects, with repeated
/// subtags collected into arrays.
pub fn value_to_json(value: &NormalizedValue) -> Value {
    match value {
        NormalizedValue::Flag => Value::Bool(true),
        NormalizedValue::Int(i) => Value::from(*i),
        NormalizedValue::Str(s) | NormalizedValue::EnumChoice(s) => Value::String(s.clone()),
        NormalizedValue::Bool(b) => Value::Bool(*b),
        NormalizedValue::Complex(children) => {
            let mut map = Map::new();
            for (name, child) in children {
                let child = value_to_json(child);
                let repeated = children.iter().filter(|(n, _)| n == name).count() > 1;
                match map.get_mut(name) {
                    Some(Value::Array(items)) => items.push(child),
                    _ if repeated => {
                        map.insert(name.clone(), Value::Array(vec![child]));
                    }
                    _ => {
                        map.insert(name.clone(), child);
                    }
                }
            }
            Value::Object(map)
        }
    }
}

impl ExportReport {
    /// Merges the resolved taggings of one target model. Records are
    /// ordered by element path, tag type, then tag model and position.
    pub fn build<'a>(
        target_model: &QualifiedName,
        taggings: impl IntoIterator<Item = &'a ResolvedTagging>,
    ) -> Self {
        let mut attachments: Vec<ExportRecord> = taggings
            .into_iter()
            .flat_map(|t| {
                t.attachments.iter().map(move |a| ExportRecord {
                    element_path: a.element.path.clone(),
                    element_type: a.element.element_type.clone(),
                    tag_type: a.tag_type.name.clone(),
                    schema: a.schema.to_string(),
                    tag_model: t.tag_model.to_string(),
                    line: a.span.line,
                    column: a.span.column,
                    kind: a.value.kind().to_owned(),
                    value: value_to_json(&a.value),
                })
            })
            .collect();
        attachments.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        ExportReport {
            target_model: target_model.to_string(),
            attachments,
        }
    }

    /// Combines reports for the same target, re-establishing the order.
    pub fn merge(mut self, other: ExportReport) -> Self {
        self.attachments.extend(other.attachments);
        self.attachments
            .sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
