//! Loading a set of model, tag and schema files and checking them together.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::conformance::{check_all, CheckInput, CheckOutcome, Diagnostic, Severity};
use crate::derive::{derive_profile, LanguageProfile};
use crate::manifest::parse_manifest;
use crate::schema::{parse_tag_schema, TagSchema};
use crate::span::{QualifiedName, Span};
use crate::statechart::{parse_statechart, StatechartModel};
use crate::tags::{parse_tag_model, TagModel};

/// The files making up one checking run.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    pub model_files: Vec<PathBuf>,
    pub tag_files: Vec<PathBuf>,
    pub schema_files: Vec<PathBuf>,
    /// Falls back to the built-in statechart manifest.
    pub manifest_file: Option<PathBuf>,
    /// A previously derived `.profile.json`, used instead of the manifest.
    pub profile_file: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Loaded<T> {
    pub path: PathBuf,
    pub model: T,
}

#[derive(Clone, Debug)]
pub struct LoadedWorkspace {
    pub profile: LanguageProfile,
    pub models: Vec<Loaded<StatechartModel>>,
    pub tags: Vec<Loaded<TagModel>>,
    pub schemas: Vec<Loaded<TagSchema>>,
}

/// A failure that prevents checking altogether.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WorkspaceError {
    #[error("{}: error[Io]: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}:{span}: error[{kind}]: {message}", path.display())]
    Parse {
        path: PathBuf,
        span: Span,
        kind: &'static str,
        message: String,
    },
    #[error("{}: error[Derive]: {message}", path.display())]
    Derive { path: PathBuf, message: String },
    #[error("{}:{span}: error[UnknownSchema]: no supplied tagschema is named `{name}`", path.display())]
    UnknownSchema {
        path: PathBuf,
        span: Span,
        name: QualifiedName,
    },
    #[error("{}:{span}: error[UnknownTargetModel]: no supplied model is named `{name}`", path.display())]
    UnknownTargetModel {
        path: PathBuf,
        span: Span,
        name: QualifiedName,
    },
    #[error("{}:{span}: error[AmbiguousReference]: `{name}` matches {count} supplied files", path.display())]
    AmbiguousReference {
        path: PathBuf,
        span: Span,
        name: QualifiedName,
        count: usize,
    },
    #[error("error[Usage]: {0}")]
    Usage(String),
}

const BUILTIN_MANIFEST_PATH: &str = "<builtin>/statechart.glang";

fn read(path: &Path) -> Result<String, WorkspaceError> {
    std::fs::read_to_string(path).map_err(|e| WorkspaceError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Splits an error rendered as `LINE:COL: message` back into its message.
fn parse_error(path: &Path, span: Span, kind: &'static str, rendered: String) -> WorkspaceError {
    let message = rendered
        .strip_prefix(&format!("{span}: "))
        .map(str::to_owned)
        .unwrap_or(rendered);
    WorkspaceError::Parse {
        path: path.to_owned(),
        span,
        kind,
        message,
    }
}

/// Loads the language profile from a manifest, a profile file, or the
/// built-in statechart manifest.
pub fn load_profile(
    manifest_file: Option<&Path>,
    profile_file: Option<&Path>,
) -> Result<LanguageProfile, WorkspaceError> {
    if let Some(path) = profile_file {
        let text = read(path)?;
        return serde_json::from_str(&text).map_err(|e| WorkspaceError::Parse {
            path: path.to_owned(),
            span: Span::new(e.line() as u32, e.column() as u32),
            kind: "Profile",
            message: e.to_string(),
        });
    }
    let (path, text) = match manifest_file {
        Some(path) => (path.to_owned(), read(path)?),
        None => (
            PathBuf::from(BUILTIN_MANIFEST_PATH),
            crate::STATECHART_MANIFEST.to_owned(),
        ),
    };
    let manifest = parse_manifest(&text)
        .map_err(|e| parse_error(&path, e.span(), "Manifest", e.to_string()))?;
    derive_profile(&manifest).map_err(|e| WorkspaceError::Derive {
        path,
        message: e.to_string(),
    })
}

fn parse_files<T: Send>(
    paths: &[PathBuf],
    parse: impl Fn(&Path, &str) -> Result<T, WorkspaceError> + Sync,
) -> Result<Vec<Loaded<T>>, WorkspaceError> {
    let one = |path: &PathBuf| -> Result<Loaded<T>, WorkspaceError> {
        let text = read(path)?;
        Ok(Loaded {
            path: path.clone(),
            model: parse(path, &text)?,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        paths.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        paths.iter().map(one).collect()
    }
}

impl Workspace {
    /// Reads and parses every file. Independent files are parsed in
    /// parallel when the `parallel` feature is enabled; the first error in
    /// file order is reported.
    pub fn load(&self) -> Result<LoadedWorkspace, WorkspaceError> {
        let profile = load_profile(self.manifest_file.as_deref(), self.profile_file.as_deref())?;
        let models = parse_files(&self.model_files, |path, text| {
            parse_statechart(text).map_err(|e| parse_error(path, e.span(), "Model", e.to_string()))
        })?;
        let schemas = parse_files(&self.schema_files, |path, text| {
            parse_tag_schema(text, &profile).map_err(|e| {
                let kind = if e.issue().is_some() {
                    "Schema"
                } else {
                    "Syntax"
                };
                parse_error(path, e.span(), kind, e.to_string())
            })
        })?;
        let tags = parse_files(&self.tag_files, |path, text| {
            parse_tag_model(text, &profile)
                .map_err(|e| parse_error(path, e.span(), "TagModel", e.to_string()))
        })?;
        Ok(LoadedWorkspace {
            profile,
            models,
            tags,
            schemas,
        })
    }
}

/// Finds the single entry named `name`. An unqualified name is first looked
/// up in `package` (the referencing file's package), then as written.
fn lookup<'a, T>(
    items: &'a [Loaded<T>],
    name: &QualifiedName,
    package: Option<&QualifiedName>,
    qualified: impl Fn(&T) -> QualifiedName,
) -> Result<&'a Loaded<T>, usize> {
    let mut candidates = Vec::new();
    if name.is_simple() {
        if let Some(package) = package {
            candidates.push(package.join(name));
        }
    }
    candidates.push(name.clone());
    for candidate in candidates {
        let found: Vec<&Loaded<T>> = items
            .iter()
            .filter(|item| qualified(&item.model) == candidate)
            .collect();
        match found.len() {
            0 => continue,
            1 => return Ok(found[0]),
            n => return Err(n),
        }
    }
    Err(0)
}

/// A tag model together with the files it references.
#[derive(Clone, Debug)]
pub struct Binding<'a> {
    pub tags: &'a Loaded<TagModel>,
    pub target: &'a Loaded<StatechartModel>,
    pub schemas: Vec<TagSchema>,
}

impl LoadedWorkspace {
    /// Resolves each tag model's `conforms to` and `for` references.
    pub fn bind(&self) -> Result<Vec<Binding<'_>>, WorkspaceError> {
        let mut bindings = Vec::new();
        for tags in &self.tags {
            let model = &tags.model;
            let package = model.package.as_ref();
            let mut schemas = Vec::new();
            for reference in &model.conforms_to {
                match lookup(
                    &self.schemas,
                    &reference.name,
                    package,
                    TagSchema::qualified_name,
                ) {
                    Ok(schema) => schemas.push(schema.model.clone()),
                    Err(0) => {
                        return Err(WorkspaceError::UnknownSchema {
                            path: tags.path.clone(),
                            span: reference.span,
                            name: reference.name.clone(),
                        })
                    }
                    Err(count) => {
                        return Err(WorkspaceError::AmbiguousReference {
                            path: tags.path.clone(),
                            span: reference.span,
                            name: reference.name.clone(),
                            count,
                        })
                    }
                }
            }
            let target = match lookup(
                &self.models,
                &model.target_model,
                package,
                StatechartModel::qualified_name,
            ) {
                Ok(target) => target,
                Err(0) => {
                    return Err(WorkspaceError::UnknownTargetModel {
                        path: tags.path.clone(),
                        span: model.span,
                        name: model.target_model.clone(),
                    })
                }
                Err(count) => {
                    return Err(WorkspaceError::AmbiguousReference {
                        path: tags.path.clone(),
                        span: model.span,
                        name: model.target_model.clone(),
                        count,
                    })
                }
            };
            bindings.push(Binding {
                tags,
                target,
                schemas,
            });
        }
        Ok(bindings)
    }

    /// Checks every tag model; results follow the order of the tag files.
    pub fn check(&self) -> Result<Vec<FileReport>, WorkspaceError> {
        let bindings = self.bind()?;
        let inputs: Vec<CheckInput<'_>> = bindings
            .iter()
            .map(|b| CheckInput {
                tag_model: &b.tags.model,
                target: &b.target.model,
                schemas: &b.schemas,
                profile: &self.profile,
            })
            .collect();
        let outcomes = check_all(&inputs);
        Ok(bindings
            .iter()
            .zip(outcomes)
            .map(|(b, outcome)| FileReport {
                path: b.tags.path.clone(),
                target: b.target.model.qualified_name(),
                outcome,
            })
            .collect())
    }

    /// Advisory findings in the target models themselves.
    pub fn model_warnings(&self) -> Vec<String> {
        self.models
            .iter()
            .flat_map(|m| {
                m.model.warnings().into_iter().map(move |(span, msg)| {
                    format!("{}:{span}: warning[Model]: {msg}", m.path.display())
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FileReport {
    pub path: PathBuf,
    pub target: QualifiedName,
    pub outcome: CheckOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

/// `FILE:LINE:COL: SEVERITY[CONDITION]: message`, optionally coloured.
pub fn render_diagnostic(path: &Path, d: &Diagnostic, color: bool) -> String {
    let label = format!("{}[{}]", d.severity, d.condition.id());
    let label = match (color, d.severity) {
        (false, _) => label,
        (true, Severity::Error) => format!("\x1b[1;31m{label}\x1b[0m"),
        (true, Severity::Warning) => format!("\x1b[1;33m{label}\x1b[0m"),
    };
    format!("{}:{}: {label}: {}", path.display(), d.span, d.message)
}

#[derive(Serialize)]
struct JsonDiagnostic<'a> {
    file: String,
    line: u32,
    column: u32,
    severity: Severity,
    condition: &'static str,
    message: &'a str,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    errors: usize,
    warnings: usize,
    diagnostics: Vec<JsonDiagnostic<'a>>,
}

pub fn render_reports(reports: &[FileReport], format: Format, color: bool) -> String {
    match format {
        Format::Text => {
            let mut out = String::new();
            for r in reports {
                for d in &r.outcome.diagnostics {
                    out.push_str(&render_diagnostic(&r.path, d, color));
                    out.push('\n');
                }
            }
            out
        }
        Format::Json => {
            let report = JsonReport {
                errors: reports.iter().map(|r| r.outcome.error_count()).sum(),
                warnings: reports.iter().map(|r| r.outcome.warning_count()).sum(),
                diagnostics: reports
                    .iter()
                    .flat_map(|r| {
                        r.outcome.diagnostics.iter().map(|d| JsonDiagnostic {
                            file: r.path.display().to_string(),
                            line: d.span.line,
                            column: d.span.column,
                            severity: d.severity,
                            condition: d.condition.id(),
                            message: &d.message,
                        })
                    })
                    .collect(),
            };
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            text
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Json => "json",
        })
    }
}
