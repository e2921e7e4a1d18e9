//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "kgpilot",
    version,
    about = "Knowledge-graph question answering, construction and evaluation"
)]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    /// TOML file with server, graph and provider settings.
    #[arg(long, global = true, env = "KGPILOT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Each overrides the config file.
#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Graph interchange file the command reads (and `graph import` writes).
    #[arg(long, global = true, env = "KGPILOT_GRAPH")]
    pub graph: Option<PathBuf>,
    /// Language model answering agent prompts.
    #[arg(long, global = true, value_enum, env = "KGPILOT_PROVIDER")]
    pub provider: Option<ProviderKind>,
    /// Hash-keyed reply script for `--provider scripted`.
    #[arg(long, global = true, env = "KGPILOT_SCRIPT")]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// Replay a script file; prompts it lacks fail.
    Scripted,
    /// The HTTP provider from the config file.
    Http,
    /// No model: every call fails.
    None,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "KGPILOT_BIND")]
        bind: Option<String>,
        #[arg(long, env = "KGPILOT_CORS_ORIGIN")]
        cors_origin: Option<String>,
    },
    /// Answer one question.
    Ask {
        question: String,
        /// Also print the full pipeline trace.
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value = "cli")]
        session: String,
    },
    /// Move graphs between interchange files.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Build a graph from a directory of `.txt` documents.
    Construct {
        #[arg(long)]
        corpus: PathBuf,
        /// Relation schema JSON, or `uk-legislation` / `japanese-medical`.
        #[arg(long)]
        schema: String,
        /// Where to write the graph.
        #[arg(long)]
        out: PathBuf,
        /// Ask the model before merging similar entity names.
        #[arg(long)]
        confirm_merges: bool,
    },
    /// Benchmark generation, runs and scoring.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Validate FILE and store it as the `--graph` file.
    Import { file: PathBuf },
    /// Write the `--graph` file (re-serialized) to FILE.
    Export { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Ask the model for questions of one class and append them as pending records.
    Generate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
        class: u8,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value = "NLP")]
        domain: String,
        #[arg(long)]
        records: PathBuf,
    },
    /// Mark a record approved or rejected.
    Review {
        id: String,
        #[arg(value_parser = ["approved", "rejected", "pending"])]
        status: String,
        #[arg(long)]
        records: PathBuf,
    },
    /// Run approved records through the pipeline and write verdicts.
    Run {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        parallel: u16,
    },
    /// Score verdicts against records.
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
    },
}
