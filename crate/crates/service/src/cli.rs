//! `crowdgen` command line.

use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdgen_core::imaging::{self, samples, ImageBuffer, OpKind};
use crowdgen_core::study::{
    analysis_csv, analyze, plan_study_with, read_records, simulate_raters, write_records, Grouping, RaterModel, StudyPlan,
    TaskSets,
};
use crowdgen_core::task::TaskContextInput;
use crowdgen_core::widgets::{build_codegen_prompt, emit_widget_code, WidgetSpec, EXAMPLE_CODE};
use crowdgen_core::{load_library_str, subset_library, LibraryMode, TaskContext};
use serde_json::{json, Value};

use crate::config::{EngineConfig, CONFIG_ENV};
use crate::engine::{BackendChoice, Engine, KindSelection, ReasonRequest, WidgetsRequest};
use crate::error::ServiceError;

#[derive(Debug, Parser)]
#[command(name = "crowdgen", version, about = "Preference-guided widget recommendation and generation")]
pub struct Cli {
    /// Engine configuration (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregated widget recommendations for a task.
    Reason(ReasonArgs),
    /// Widget specs for a task.
    Widgets {
        #[command(flatten)]
        reason: ReasonArgs,
        /// Comma-separated widget kinds; omit for the top widget per aspect.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
    },
    /// Applies image operations to a PNG.
    Apply {
        /// Input PNG; the built-in sample photo when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Operation JSON, e.g. '{"op":"hue","h":0.2}'. Repeatable, applied in order.
        #[arg(long = "op", required = true)]
        ops: Vec<String>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Widget code text for specs.
    Emit {
        /// JSON array of specs, or a `widgets` result.
        #[arg(long)]
        specs: PathBuf,
        #[arg(long, default_value = "notebook")]
        template: String,
        /// Print the LLM codegen prompt instead.
        #[arg(long)]
        prompt: bool,
        /// Example code for the prompt; the shipped examples when omitted.
        #[arg(long)]
        example_code: Option<PathBuf>,
    },
    #[command(subcommand)]
    Library(LibraryCommand),
    #[command(subcommand)]
    Study(StudyCommand),
    /// Runs the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
    },
}

#[derive(Debug, Args)]
struct ReasonArgs {
    /// Task context JSON file.
    #[arg(long, conflicts_with = "task")]
    task_file: Option<PathBuf>,
    /// Task description.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    mode: Option<LibraryMode>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    backend: Option<BackendName>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subset_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendName {
    Oracle,
    Llm,
}

#[derive(Debug, Subcommand)]
enum LibraryCommand {
    /// Checks a library file; violations go to the error line.
    Validate { path: PathBuf },
    /// Keeps n responses per (task, aspect).
    Subset {
        path: PathBuf,
        #[arg(long)]
        mode: LibraryMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
enum StudyCommand {
    /// Counterbalanced assignments.
    Plan {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Give every participant this task set (1 or 2).
        #[arg(long)]
        task_set: Option<u8>,
    },
    /// Simulated comparison records as JSON lines.
    Simulate {
        /// Plan JSON; planned from --n and --seed when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Rater model JSON; overrides --p.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 78)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Chi-squared tests over JSON-lines records.
    Analyze {
        /// Records file; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "aspect-pair")]
        group_by: Grouping,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn read_file(path: &Path) -> Result<String, ServiceError> {
    fs::read_to_string(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))
}

fn task_from(args: &ReasonArgs) -> Result<TaskContext, ServiceError> {
    match (&args.task_file, &args.task) {
        (Some(p), _) => {
            let input: TaskContextInput = serde_json::from_str(&read_file(p)?)
                .map_err(|e| ServiceError::Validation(format!("{}: {e}", p.display())))?;
            Ok(TaskContext::try_from(input)?)
        }
        (None, Some(d)) => Ok(TaskContext::new("user_task", d, crowdgen_core::Aspect::ALL)?),
        (None, None) => Err(ServiceError::Validation("give --task-file or --task".into())),
    }
}

fn reason_request(args: &ReasonArgs) -> Result<ReasonRequest, ServiceError> {
    Ok(ReasonRequest {
        task: task_from(args)?,
        library_mode: args.mode,
        k: args.k,
        backend: args.backend.map(|b| {
            BackendChoice::Name(match b {
                BackendName::Oracle => "oracle".into(),
                BackendName::Llm => "llm".into(),
            })
        }),
        seed: args.seed,
        subset_seed: args.subset_seed,
        session_id: None,
    })
}

fn specs_from(v: Value) -> Result<Vec<WidgetSpec>, ServiceError> {
    let list = match v {
        Value::Object(mut o) if o.contains_key("specs") => o.remove("specs").expect("checked"),
        other => other,
    };
    serde_json::from_value(list).map_err(|e| ServiceError::Validation(format!("specs: {e}")))
}

fn print_json(out: &mut impl Write, v: &impl serde::Serialize) -> Result<(), ServiceError> {
    serde_json::to_writer_pretty(&mut *out, v).expect("json");
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), ServiceError> {
    let config = || EngineConfig::load(cli.config.as_deref());
    match cli.command {
        Command::Reason(args) => {
            let engine = Engine::open(config()?)?;
            print_json(out, &engine.reason(&reason_request(&args)?)?)
        }
        Command::Widgets { reason, kinds } => {
            let engine = Engine::open(config()?)?;
            let req = WidgetsRequest {
                task: Some(task_from(&reason)?),
                session_id: None,
                kinds: KindSelection::Kinds(kinds.clone()),
            };
            if kinds.is_empty() {
                let session = engine.create_session(&crate::engine::SessionRequest::default())?;
                let mut rreq = reason_request(&reason)?;
                rreq.session_id = Some(session.session_id.clone());
                engine.reason(&rreq)?;
                let req = WidgetsRequest {
                    session_id: Some(session.session_id),
                    ..req
                };
                return print_json(out, &engine.widgets(&req)?);
            }
            print_json(out, &engine.widgets(&req)?)
        }
        Command::Apply { input, ops, output } => {
            let mut img = match &input {
                Some(p) => ImageBuffer::decode_png(&fs::read(p).map_err(|e| ServiceError::Io(format!("{}: {e}", p.display())))?)?,
                None => samples::photo_like(),
            };
            for raw in &ops {
                let op: OpKind = serde_json::from_str(raw).map_err(|e| ServiceError::Validation(format!("op {raw}: {e}")))?;
                img = imaging::apply(&img, &op)?;
            }
            fs::write(&output, img.encode_png()).map_err(|e| ServiceError::Io(format!("{}: {e}", output.display())))?;
            print_json(
                out,
                &json!({ "output": output, "image_handle": crate::store::image_handle(&img), "width": img.width(), "height": img.height() }),
            )
        }
        Command::Emit { specs, template, prompt, example_code } => {
            let v: Value = serde_json::from_str(&read_file(&specs)?)
                .map_err(|e| ServiceError::Validation(format!("{}: {e}", specs.display())))?;
            let specs = specs_from(v)?;
            if prompt {
                let code = match &example_code {
                    Some(p) => read_file(p)?,
                    None => EXAMPLE_CODE.to_string(),
                };
                return print_json(out, &build_codegen_prompt(&specs, &code)?);
            }
            out.write_all(emit_widget_code(&specs, &template)?.as_bytes())?;
            Ok(())
        }
        Command::Library(LibraryCommand::Validate { path }) => {
            let lib = load_library_str(&read_file(&path)?)?;
            print_json(
                out,
                &json!({ "valid": true, "tasks": lib.tasks.len(), "responses": lib.total_responses(), "min_per_aspect": lib.min_responses_per_aspect() }),
            )
        }
        Command::Library(LibraryCommand::Subset { path, mode, seed }) => {
            let lib = load_library_str(&read_file(&path)?)?;
            let sub = subset_library(&lib, mode, seed)?;
            out.write_all(sub.to_json().as_bytes())?;
            writeln!(out)?;
            Ok(())
        }
        Command::Study(StudyCommand::Plan { n, seed, task_set }) => {
            let plan = plan_study_with(n, seed, task_set.map_or(TaskSets::Both, TaskSets::Only))?;
            print_json(out, &plan)
        }
        Command::Study(StudyCommand::Simulate { plan, model, p, n, seed }) => {
            let plan: StudyPlan = match &plan {
                Some(path) => serde_json::from_str(&read_file(path)?)
                    .map_err(|e| ServiceError::Validation(format!("{}: {e}", path.display())))?,
                None => plan_study_with(n, seed, TaskSets::Both)?,
            };
            let model: RaterModel = match &model {
                Some(path) => serde_json::from_str(&read_file(path)?)
                    .map_err(|e| ServiceError::Validation(format!("{}: {e}", path.display())))?,
                None => RaterModel::uniform(p, seed),
            };
            let records = simulate_raters(&plan, &model)?;
            write_records(&mut *out, &records)?;
            Ok(())
        }
        Command::Study(StudyCommand::Analyze { input, group_by, format }) => {
            let records = match &input {
                Some(p) => read_records(BufReader::new(
                    fs::File::open(p).map_err(|e| ServiceError::Io(format!("{}: {e}", p.display())))?,
                ))?,
                None => {
                    let mut text = String::new();
                    io::stdin().read_to_string(&mut text)?;
                    read_records(text.as_bytes())?
                }
            };
            let rows = analyze(&records, group_by)?;
            match format {
                Format::Csv => out.write_all(analysis_csv(&rows, group_by).as_bytes())?,
                Format::Json => print_json(out, &json!({ "group_by": group_by, "rows": rows }))?,
            }
            Ok(())
        }
        Command::Serve { listen } => {
            let mut cfg = config()?;
            if let Some(l) = listen {
                cfg.listen = l;
            }
            let engine = Arc::new(Engine::open(cfg)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::http::serve(engine))
        }
    }
}

/// Parses arguments, runs, and returns the process exit code. Failures print
/// one JSON error line to stderr.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let mut line = e.to_json();
            line["error"]["exit_code"] = json!(e.exit_code());
            eprintln!("{line}");
            e.exit_code()
        }
    }
}
