mod commands;
mod config;
mod provenance;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use engram_core::{Error, ErrorCategory};

use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(name = "engram", version, about = "Word surprisal, behavioral memory analysis and kNN memory evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-word surprisal and attention statistics for a text -> words.csv
    Surprisal(#[command(flatten)] Flags),
    /// Cloze responses scored by embedding similarity -> scores.csv
    Score(#[command(flatten)] Flags),
    /// Memory effect on distinctiveness, surprisal and frequency -> glm.json
    Regress(#[command(flatten)] Flags),
    /// All word-level regressions -> analysis.json and plotdata.csv
    Analyze(#[command(flatten)] Flags),
    /// Perplexity with and without an external kNN memory -> mem.json
    MemoryEval(#[command(flatten)] Flags),
    /// Oracle-based checks that need no external assets
    Selftest {
        /// Run only these criteria (1-7).
        #[arg(long, value_delimiter = ',')]
        criterion: Vec<u8>,
    },
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Asset => 3,
        ErrorCategory::Parse => 4,
        ErrorCategory::Integrity => 5,
        ErrorCategory::Alignment => 6,
        ErrorCategory::Model => 7,
        ErrorCategory::Numeric => 8,
        ErrorCategory::Precondition => 9,
        ErrorCategory::Memory => 10,
    }
}

fn run(command: Command) -> Result<bool, Error> {
    let resolve = |flags: &Flags| RunConfig::resolve(flags);
    match command {
        Command::Surprisal(f) => commands::surprisal(&resolve(&f)?)?,
        Command::Score(f) => commands::score(&resolve(&f)?)?,
        Command::Regress(f) => commands::regress(&resolve(&f)?)?,
        Command::Analyze(f) => commands::analyze_cmd(&resolve(&f)?)?,
        Command::MemoryEval(f) => commands::memory_eval(&resolve(&f)?)?,
        Command::Selftest { criterion } => return commands::selftest(&criterion),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let category = e.category();
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", category.tag());
            ExitCode::from(exit_code(category))
        }
    }
}
