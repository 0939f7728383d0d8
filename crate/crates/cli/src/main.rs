//! `rkindex`: Rk-index tables, thresholds and counterfactuals from a publication corpus.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rkindex",
    version,
    about = "Rank-based citation analyses (Rk-index)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and load a corpus, reporting counts and drop causes.
    Validate(CorpusArgs),
    /// Number of papers and Rk-index per entity, selector and topic.
    Table {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Topics per entity whose Rk-index exceeds each level.
    Thresholds {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        select: SelectArgs,
        /// Ascending positive levels.
        #[arg(long, value_delimiter = ',', default_value = "5,15,25")]
        levels: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Domestic vs. world-excluding, or all collaborations vs. collaborations without a partner.
    Counterfactual {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        entity: String,
        /// Switches to partner-exclusion mode.
        #[arg(long)]
        partner: Option<String>,
        /// Topics to report (default: every topic in the corpus).
        #[arg(long, value_delimiter = ',')]
        topics: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a synthetic corpus (JSONL) from a params JSON file.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Publication window.
    #[arg(long, default_value = "2014-2017")]
    window: String,
    #[arg(long, default_value = "2019-2022")]
    citation_window: String,
    /// Per-topic publication window, TOPIC=Y1-Y2 (repeatable).
    #[arg(long = "topic-window")]
    topic_windows: Vec<String>,
    /// JSON map of aggregate name to country codes.
    #[arg(long)]
    aggregates: Option<PathBuf>,
    /// One excluded record id per line.
    #[arg(long = "exclude-ids")]
    exclude_ids: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Countries (code or name) or aggregate names.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    entities: Vec<String>,
    /// Topics to report (default: every topic in the corpus).
    #[arg(long, value_delimiter = ',')]
    topics: Vec<String>,
    /// domestic|D, collaborative|C, collaborative_excluding:P|Cx:P, entity_all|A, world_excluding|Wx, world_all|W
    #[arg(long, value_delimiter = ',')]
    selectors: Vec<String>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv,md")]
    emit: Vec<String>,
    /// Full-precision numbers instead of two decimals.
    #[arg(long)]
    precise: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(c) => commands::validate(&c),
        Command::Table {
            corpus,
            select,
            output,
        } => commands::table(&corpus, &select, &output),
        Command::Thresholds {
            corpus,
            select,
            levels,
            output,
        } => commands::thresholds(&corpus, &select, &levels, &output),
        Command::Counterfactual {
            corpus,
            entity,
            partner,
            topics,
            output,
        } => commands::counterfactual(&corpus, &entity, partner.as_deref(), &topics, &output),
        Command::Simulate { params, out } => commands::simulate(&params, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
