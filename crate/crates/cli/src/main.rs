use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod inputs;

use config::{FileConfig, Settings};

/// Point-of-view conversion of narrative text: first or second person to third.
#[derive(Parser, Debug)]
#[command(name = "povshift", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML file with defaults for the flags below and a [model] table
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for training, sampling and random baselines
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for document-level parallelism
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Dimension of the hash embedding provider
    #[arg(long, global = true, value_name = "D")]
    embedding_dim: Option<usize>,
    /// Verb dictionary TSV (lemma, base, third_singular, past) replacing the built-in one
    #[arg(long, global = true, value_name = "PATH")]
    verb_dict: Option<PathBuf>,
    /// Relational noun TSV (noun, masculine_converse, feminine_converse)
    #[arg(long, global = true, value_name = "PATH")]
    relational_lexicon: Option<PathBuf>,
    /// Performative verb lemmas, one per line, `#` comments
    #[arg(long, global = true, value_name = "PATH")]
    performatives: Option<PathBuf>,
    /// Log more (repeat for debug output)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build ranking examples from CoNLL-2012 files or benchmark documents
    ExtractData(commands::ExtractArgs),
    /// Train the neural ranker or a tree baseline on ranking examples
    Train(commands::TrainArgs),
    /// Convert documents to third person
    Convert(commands::ConvertArgs),
    /// Score conversions against benchmark gold edits
    Evaluate(commands::EvaluateArgs),
    /// Referential and naturalness scores from human ratings
    ScoreHumanEval(commands::HumanArgs),
    /// Train and compare rankers with parts of the model switched off
    Ablate(commands::AblateArgs),
    /// Entity, mention, document and word counts per dataset
    Stats(commands::StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Random,
    Pronouns,
    MostCommon,
    Tree,
    Forest,
    Gbt,
}

/// Command result other than an error.
pub enum Outcome {
    Ok,
    GateFailed(String),
}

fn settings(g: &GlobalArgs) -> Result<Settings, String> {
    let file = match &g.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut model = file.model.unwrap_or_default();
    let seed = g.seed.or(file.seed).unwrap_or(model.seed);
    model.seed = seed;
    model.validate().map_err(|e| e.to_string())?;
    let embedding_dim = g.embedding_dim.or(file.embedding_dim).unwrap_or(povshift::ranker::HashEmbedding::DEFAULT_DIM);
    if embedding_dim == 0 {
        return Err("--embedding-dim must be positive".into());
    }
    let jobs = g.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err("--jobs must be positive".into());
    }
    Ok(Settings {
        seed,
        jobs,
        embedding_dim,
        verb_dict: g.verb_dict.clone().or(file.verb_dict),
        relational_lexicon: g.relational_lexicon.clone().or(file.relational_lexicon),
        performatives: g.performatives.clone().or(file.performatives),
        model,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = settings(&cli.global).and_then(|s| {
        if let Some(n) = s.jobs {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
        }
        commands::run(cli.command, &s).map_err(|e| e.to_string())
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::GateFailed(msg)) => {
            eprintln!("povshift: {msg}");
            ExitCode::from(1)
        }
        Err(msg) => {
            eprintln!("povshift: {msg}");
            ExitCode::from(2)
        }
    }
}
