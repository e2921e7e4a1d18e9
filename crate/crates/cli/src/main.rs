//! `kgpilot` binary. Exit status: 0 success, 1 usage error, 2 runtime error.

mod args;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use args::{Cli, Command, EvalCommand, GraphCommand, ProviderKind};
use clap::error::ErrorKind;
use clap::Parser;
use kgpilot_core::evalkit::{self, ReportFormat, ReviewStatus};
use kgpilot_core::graph::{export_to_string, import_str, KnowledgeGraph};
use kgpilot_core::kgforge::{self, Corpus, ForgeConfig, RelationSchema};
use kgpilot_core::llm::Gateway;
use kgpilot_core::pipeline::{FixedClock, Pipeline, TaskClass, UserQuery};
use kgpilot_service::{load_graph, ProviderConfig, ServiceConfig};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] kgpilot_service::ConfigError),
    #[error(transparent)]
    Serve(#[from] kgpilot_service::ServeError),
    #[error(transparent)]
    Forge(#[from] kgforge::ForgeError),
    #[error(transparent)]
    Eval(#[from] evalkit::EvalError),
    #[error("{0}")]
    Run(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Config file, then flags and environment layered on top.
fn settings(cli: &Cli) -> Result<ServiceConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    if let Some(g) = &cli.source.graph {
        cfg.graph_path = Some(g.clone());
    }
    match cli.source.provider {
        Some(ProviderKind::None) => cfg.provider = None,
        Some(ProviderKind::Scripted) => {
            let script = cli
                .source
                .script
                .clone()
                .or_else(|| match &cfg.provider {
                    Some(ProviderConfig::Scripted { script }) => Some(script.clone()),
                    _ => None,
                })
                .ok_or_else(|| CliError::Run("--provider scripted needs --script FILE".into()))?;
            cfg.provider = Some(ProviderConfig::Scripted { script });
        }
        Some(ProviderKind::Http) => {
            if !matches!(cfg.provider, Some(ProviderConfig::Http(_))) {
                return Err(CliError::Run(
                    "--provider http needs a [provider] section with kind = \"http\" in --config".into(),
                ));
            }
        }
        None => {
            if let Some(script) = &cli.source.script {
                cfg.provider = Some(ProviderConfig::Scripted { script: script.clone() });
            }
        }
    }
    Ok(cfg)
}

/// Scripted runs use a frozen clock so repeated invocations print the same bytes.
fn pipeline(cfg: &ServiceConfig) -> Result<Pipeline, CliError> {
    let p = cfg.pipeline()?;
    Ok(match cfg.provider {
        Some(ProviderConfig::Scripted { .. }) => p.with_clock(Arc::new(FixedClock(0))),
        _ => p,
    })
}

fn graph(cfg: &ServiceConfig) -> Result<KnowledgeGraph, CliError> {
    Ok(load_graph(cfg.graph_path.as_deref())?)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(format!("cannot write {}", path.display())))
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("values serialize")
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = settings(&cli)?;
    let json = cli.json;
    let mut emit =
        |text: String| -> Result<(), CliError> { writeln!(out, "{}", text.trim_end()).map_err(io_err("stdout")) };
    match cli.command {
        Command::Serve { bind, cors_origin } => {
            let mut cfg = cfg;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if let Some(o) = cors_origin {
                cfg.cors_origin = Some(o);
            }
            let rt = tokio::runtime::Runtime::new().map_err(io_err("cannot start runtime"))?;
            rt.block_on(kgpilot_service::serve(&cfg))?;
        }
        Command::Ask {
            question,
            trace,
            session,
        } => {
            let g = graph(&cfg)?;
            let p = pipeline(&cfg)?;
            let query = UserQuery {
                session_id: session,
                text: question,
                received_at: 0,
            };
            let t = p.run(&query, &g).map_err(|f| CliError::Run(f.error.to_string()))?;
            let answer = t
                .response
                .clone()
                .ok_or_else(|| CliError::Run("no response produced".into()))?;
            if json {
                let mut v = serde_json::json!({
                    "class": t.intent.as_ref().map(|i| i.task_class.number()),
                    "answer": answer,
                    "linked_entities": t.extraction.as_ref().map(|x| x.linked_ids()).unwrap_or_default(),
                });
                if trace {
                    v["trace"] = serde_json::to_value(&t).expect("trace serializes");
                }
                emit(pretty(&v))?;
            } else {
                let class = t.intent.as_ref().map_or(TaskClass::Freestyle, |i| i.task_class);
                let mut text = format!("[{}]\n{}\n", class.label(), answer.direct_answer);
                if !answer.detailed_explanation.is_empty() {
                    text.push('\n');
                    text.push_str(&answer.detailed_explanation);
                    text.push('\n');
                }
                if trace {
                    text.push('\n');
                    text.push_str(&t.to_json());
                }
                emit(text)?;
            }
        }
        Command::Graph(GraphCommand::Import { file }) => {
            let target = cfg
                .graph_path
                .clone()
                .ok_or_else(|| CliError::Run("graph import needs --graph TARGET".into()))?;
            let text = std::fs::read_to_string(&file).map_err(io_err(format!("cannot read {}", file.display())))?;
            let g = import_str(&text).map_err(|e| CliError::Run(format!("{}: {e}", file.display())))?;
            write_file(&target, &export_to_string(&g))?;
            let summary = serde_json::json!({"nodes": g.node_count(), "edges": g.edge_count(), "path": target});
            emit(if json {
                pretty(&summary)
            } else {
                format!(
                    "imported {} nodes, {} edges into {}",
                    g.node_count(),
                    g.edge_count(),
                    target.display()
                )
            })?;
        }
        Command::Graph(GraphCommand::Export { file }) => {
            let g = graph(&cfg)?;
            write_file(&file, &export_to_string(&g))?;
            let summary = serde_json::json!({"nodes": g.node_count(), "edges": g.edge_count(), "path": file});
            emit(if json {
                pretty(&summary)
            } else {
                format!(
                    "exported {} nodes, {} edges to {}",
                    g.node_count(),
                    g.edge_count(),
                    file.display()
                )
            })?;
        }
        Command::Construct {
            corpus,
            schema,
            out: target,
            confirm_merges,
        } => {
            let schema = match schema.as_str() {
                "uk-legislation" => RelationSchema::from_json_str(kgforge::UK_LEGISLATION_SCHEMA)?,
                "japanese-medical" => RelationSchema::from_json_str(kgforge::JAPANESE_MEDICAL_SCHEMA)?,
                path => RelationSchema::load(Path::new(path))?,
            };
            let corpus = Corpus::load_dir(&corpus)?;
            let config = ForgeConfig {
                confirm_merges,
                ..ForgeConfig::default()
            };
            let gateway = Gateway::new(kgpilot_service::build_provider(cfg.provider.as_ref())?);
            let embedder = cfg.embedder.build();
            let built = kgforge::build(&corpus, &schema, &config, &gateway, embedder.as_ref())?;
            write_file(&target, &export_to_string(&built.graph))?;
            emit(if json {
                built.stats.to_json_pretty()
            } else {
                built.stats.to_table()
            })?;
        }
        Command::Eval(EvalCommand::Generate {
            class,
            count,
            domain,
            records,
        }) => {
            let class = TaskClass::try_from(class).map_err(CliError::Run)?;
            let gateway = Gateway::new(kgpilot_service::build_provider(cfg.provider.as_ref())?);
            let generated = evalkit::generate_queries(class, count, &domain, &gateway)?;
            evalkit::append_records(&records, &generated.records)?;
            let summary = serde_json::json!({"added": generated.records.len(), "duplicates": generated.duplicates});
            emit(if json {
                pretty(&summary)
            } else {
                format!(
                    "added {} pending records ({} duplicates dropped) to {}",
                    generated.records.len(),
                    generated.duplicates.len(),
                    records.display()
                )
            })?;
        }
        Command::Eval(EvalCommand::Review { id, status, records }) => {
            let status: ReviewStatus = status.parse().map_err(CliError::Run)?;
            let rec = evalkit::set_review_status(&records, &id, status)?;
            emit(if json {
                pretty(&rec)
            } else {
                format!("{} is now {}", rec.id, status_name(rec.review_status))
            })?;
        }
        Command::Eval(EvalCommand::Run {
            records,
            verdicts,
            parallel,
        }) => {
            let recs = evalkit::load_records(&records)?;
            let g = graph(&cfg)?;
            let p = pipeline(&cfg)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(parallel as usize)
                .build()
                .map_err(|e| CliError::Run(format!("cannot start workers: {e}")))?;
            let results = pool.install(|| evalkit::run_eval(&recs, &p, &g));
            let file =
                std::fs::File::create(&verdicts).map_err(io_err(format!("cannot write {}", verdicts.display())))?;
            evalkit::write_jsonl(&results, std::io::BufWriter::new(file))?;
            let ok = results.iter().filter(|v| v.valid_output()).count();
            let summary = serde_json::json!({"runs": results.len(), "valid": ok, "path": verdicts});
            emit(if json {
                pretty(&summary)
            } else {
                format!(
                    "{} runs, {} valid outputs, verdicts in {}",
                    results.len(),
                    ok,
                    verdicts.display()
                )
            })?;
        }
        Command::Eval(EvalCommand::Score { records, verdicts }) => {
            let recs = evalkit::load_records(&records)?;
            let v = evalkit::load_verdicts(&verdicts)?;
            let metrics: kgpilot_core::Metrics = evalkit::score(&v, &recs)?;
            let format = if json { ReportFormat::Json } else { ReportFormat::Text };
            emit(evalkit::report(&metrics, format))?;
        }
    }
    Ok(())
}

fn status_name(s: ReviewStatus) -> &'static str {
    match s {
        ReviewStatus::Pending => "pending",
        ReviewStatus::Approved => "approved",
        ReviewStatus::Rejected => "rejected",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{}", e.render());
                    ExitCode::from(1)
                }
            };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
