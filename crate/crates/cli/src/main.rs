//! `subprobe` command-line entry point.
//!
//! Every subcommand reads its options from flags, falling back to the
//! matching table of an optional TOML config file. Failures are reported as
//! a single JSON object on stderr and nothing is written.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{check, genprobe, report, sweep, tokenize, tokstats, train};
use config::{ConfigFile, Failure};

#[derive(Debug, Parser)]
#[command(name = "subprobe", version, about = "Subword statistics and layerwise probing over stored embeddings")]
struct Cli {
    /// TOML file with one table per subcommand, keys mirroring the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a whitespace-tokenized corpus with a WordPiece vocabulary.
    Tokenize(tokenize::Args),
    /// Segmentation statistics table, JSON report and length-rank profile.
    Tokstats(tokstats::Args),
    /// Generate probing datasets from a CoNLL-U treebank.
    Genprobe(genprobe::Args),
    /// Validate an embedding store.
    ExtractCheck(check::Args),
    /// Train a morphological probe.
    #[command(subcommand)]
    Probe(train::ProbeCommand),
    /// Train a POS or NER tagger.
    #[command(subcommand)]
    Tag(train::TagCommand),
    /// Train one probe or tagger per model, layer and pooling.
    Sweep(sweep::Args),
    /// Render sweep results as tables.
    Report(report::Args),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let jobs = file.jobs(cli.jobs)?;
    match cli.command {
        Command::Tokenize(a) => tokenize::run(file.resolve(&a, &["tokenize"])?),
        Command::Tokstats(a) => tokstats::run(file.resolve(&a, &["tokstats"])?, jobs),
        Command::Genprobe(a) => genprobe::run(file.resolve(&a, &["genprobe"])?),
        Command::ExtractCheck(a) => check::run(file.resolve(&a, &["extract-check"])?),
        Command::Probe(train::ProbeCommand::Train(a)) => train::run_probe(file.resolve(&a, &["probe", "train"])?),
        Command::Tag(train::TagCommand::Train(a)) => train::run_tag(file.resolve(&a, &["tag", "train"])?),
        Command::Sweep(a) => sweep::run(file.resolve(&a, &["sweep"])?, jobs),
        Command::Report(a) => report::run(file.resolve(&a, &["report"])?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let failure = Failure::usage(e.render().to_string().trim());
            failure.report();
            return ExitCode::from(failure.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            failure.report();
            ExitCode::from(failure.exit_code())
        }
    }
}
