use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tagweaver::export::ExportReport;
use tagweaver::render_derived_grammar;
use tagweaver::workspace::{
    load_profile, render_diagnostic, render_reports, Format, Workspace, WorkspaceError,
};

/// Check tag models against statecharts and tagschemas, derive tag
/// languages and export resolved tags.
#[derive(Parser)]
#[command(name = "tagweaver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check tag models for conformance.
    Check {
        #[command(flatten)]
        files: Files,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Derive the tag language profile from a grammar manifest.
    Derive {
        /// Grammar manifest; defaults to the built-in statechart manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Directory for `<grammar>.profile.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Export resolved tag attachments as JSON.
    Export {
        #[command(flatten)]
        files: Files,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
}

#[derive(Args)]
struct Files {
    /// Statechart model (`.sc`).
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Tag model (`.tag`).
    #[arg(long = "tags")]
    tags: Vec<PathBuf>,
    /// Tagschema (`.tagschema`).
    #[arg(long = "schema")]
    schemas: Vec<PathBuf>,
    /// Grammar manifest of the modeling language.
    #[arg(long, conflicts_with = "profile")]
    manifest: Option<PathBuf>,
    /// Derived `.profile.json`, instead of a manifest.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Text => Format::Text,
            OutputFormat::Json => Format::Json,
        }
    }
}

impl Files {
    fn workspace(self) -> Workspace {
        Workspace {
            model_files: self.models,
            tag_files: self.tags,
            schema_files: self.schemas,
            manifest_file: self.manifest,
            profile_file: self.profile,
        }
    }
}

fn color() -> bool {
    std::env::var("TAGWEAVER_COLOR").is_ok_and(|v| v == "1")
}

fn write_out(path: &Path, text: &str) -> Result<(), WorkspaceError> {
    std::fs::write(path, text).map_err(|e| WorkspaceError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<u8, WorkspaceError> {
    match cli.command {
        Command::Check { files, format } => {
            let loaded = files.workspace().load()?;
            let reports = loaded.check()?;
            for w in loaded.model_warnings() {
                eprintln!("{w}");
            }
            print!("{}", render_reports(&reports, format.into(), color()));
            let errors: usize = reports.iter().map(|r| r.outcome.error_count()).sum();
            Ok(u8::from(errors > 0))
        }
        Command::Derive { manifest, out } => {
            let profile = load_profile(manifest.as_deref(), None)?;
            let path = out.join(format!("{}.profile.json", profile.grammar_name));
            let mut json = serde_json::to_string_pretty(&profile).expect("profile serializes");
            json.push('\n');
            write_out(&path, &json)?;
            print!("{}", render_derived_grammar(&profile));
            Ok(0)
        }
        Command::Export { files, out, format } => {
            let loaded = files.workspace().load()?;
            let reports = loaded.check()?;
            let errors: usize = reports.iter().map(|r| r.outcome.error_count()).sum();
            if errors > 0 {
                eprint!("{}", render_reports(&reports, format.into(), color()));
                eprintln!("export refused: {errors} error(s)");
                return Ok(1);
            }
            let Some(first) = reports.first() else {
                return Err(WorkspaceError::Usage(
                    "export needs at least one --tags file".into(),
                ));
            };
            if let Some(other) = reports.iter().find(|r| r.target != first.target) {
                return Err(WorkspaceError::Usage(format!(
                    "all tag models must target one model; found `{}` and `{}`",
                    first.target, other.target
                )));
            }
            let report = ExportReport::build(
                &first.target,
                reports.iter().filter_map(|r| r.outcome.resolved.as_ref()),
            );
            for r in &reports {
                for d in &r.outcome.diagnostics {
                    eprintln!("{}", render_diagnostic(&r.path, d, color()));
                }
            }
            match out {
                Some(path) => write_out(&path, &report.to_json())?,
                None => print!("{}", report.to_json()),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
