//! `bookscope`: runs the annotation and analytics pipeline over a directory
//! of raw books and writes everything into a store directory.

mod phases;
mod progress;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use bookscope::config::Config;
use clap::{Args, Parser, Subcommand};

use phases::Context;

#[derive(Parser)]
#[command(name = "bookscope", version, about = "Annotate and analyze a corpus of novels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Raw input directory: Gutenberg `*.txt` files and page-file directories.
    #[arg(long = "in", global = true, value_name = "DIR")]
    input: Option<PathBuf>,
    /// Store directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "store")]
    out: PathBuf,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Redo work even when phase stamps are current.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for MinHash and embedding training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Progress file, one JSON line per book and phase [default: <out>/_logs/progress.jsonl].
    #[arg(long, global = true, value_name = "FILE")]
    log: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Download Gutenberg books into the input directory.
    Fetch {
        /// Book ids; defaults to `fetch_ids` from the configuration.
        ids: Vec<u64>,
    },
    /// Read raw books and mark boilerplate.
    Ingest,
    /// Find duplicate books and choose one copy of each.
    Dedup,
    /// Segment, tag and identify characters.
    Annotate,
    /// Per-book analytics.
    Analyze,
    /// Corpus-wide statistics and book embeddings.
    CorpusStats,
    /// Write the HTML and JSON reports.
    Report,
    /// Every phase in order.
    All,
    /// Print the effective configuration.
    Config,
}

fn run(cli: Cli) -> bookscope::Result<usize> {
    let c = &cli.common;
    let mut cfg = Config::load(c.config.as_deref(), |k| std::env::var(k).ok())?;
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    if let Some(jobs) = c.jobs {
        cfg.jobs = jobs;
    }
    if let Command::Config = cli.command {
        print!("{}", cfg.to_flat());
        return Ok(0);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
        log::debug!("thread pool: {e}");
    }
    let ctx = Context::new(cfg, c.input.clone(), &c.out, c.log.as_deref(), c.force)?;
    match cli.command {
        Command::Fetch { ids } => {
            let ids = if ids.is_empty() { ctx.cfg.fetch_ids.clone() } else { ids };
            phases::fetch(&ctx, &ids)
        }
        Command::Ingest => phases::ingest(&ctx),
        Command::Dedup => phases::dedup(&ctx),
        Command::Annotate => phases::annotate(&ctx),
        Command::Analyze => phases::analyze(&ctx),
        Command::CorpusStats => phases::corpus(&ctx),
        Command::Report => phases::report(&ctx),
        Command::All => phases::all(&ctx),
        Command::Config => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("bookscope: {failed} book(s) failed; see the log above");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("bookscope: {e}");
            ExitCode::FAILURE
        }
    }
}
