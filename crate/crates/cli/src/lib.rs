//! Command-line front end for the quipgen pipeline.

pub mod commands;
pub mod config;
pub mod exit;
pub mod stack;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::build::BuildArgs;
use commands::generate::TargetSource;
use commands::score::ScoreArgs;
use config::PipelineConfig;
use exit::{Classify, CmdResult, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "quipgen",
    version,
    about = "Retrieval-augmented humorous comment generation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (TOML).
    #[arg(long, global = true, env = "QUIPGEN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Use deterministic mock services.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Seed for the mock services
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Videos processed at once
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Dataset path, overriding the configuration.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Scratch directory, overriding the configuration
    #[arg(long, global = true)]
    pub work_dir: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl videos, describe them and label their comments.
    DatasetBuild {
        /// Comma-separated tags to search for.
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Individual video URLs.
        #[arg(long = "url")]
        urls: Vec<String>,
    },
    /// Relabel the comments of an existing dataset.
    Annotate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Embed every video of the dataset into the retrieval store.
    Embed,
    /// Generate a comment for one target video.
    Generate {
        /// A described video record (JSON).
        #[arg(long, group = "source")]
        record: Option<PathBuf>,
        /// Platform metadata (JSON) whose media is processed first.
        #[arg(long, group = "source")]
        target: Option<PathBuf>,
        #[arg(long, group = "source")]
        url: Option<String>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Score generated comments against a benchmark dataset.
    Score {
        /// JSONL files of {model, video_id, comment}.
        #[arg(long, required = true, num_args = 1..)]
        comments: Vec<PathBuf>,
        #[arg(long)]
        benchmark: PathBuf,
        /// Corpus for originality; defaults to the configured dataset.
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long, default_value = "scores.tsv")]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::DatasetBuild { .. } => "dataset-build",
            Command::Annotate { .. } => "annotate",
            Command::Embed => "embed",
            Command::Generate { .. } => "generate",
            Command::Score { .. } => "score",
        }
    }
}

/// Load the configuration file, then apply command-line overrides.
pub fn effective_config(global: &GlobalArgs) -> CmdResult<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path).or_config()?,
        None => {
            let mut c = PipelineConfig::default();
            c.resolve_paths(&std::env::current_dir().or_config()?);
            c
        }
    };
    config.mock |= global.mock;
    if let Some(s) = global.seed {
        config.seed = s;
    }
    if let Some(c) = global.concurrency {
        config.concurrency = c;
    }
    if let Some(d) = &global.dataset {
        config.paths.dataset = std::path::absolute(d).or_config()?;
    }
    if let Some(w) = &global.work_dir {
        config.paths.work_dir = std::path::absolute(w).or_config()?;
    }
    config.validate().or_config()?;
    Ok(config)
}

/// Run a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let config = effective_config(&cli.global)?;
    let name = cli.command.name();
    log::info!("running {name} (mock: {})", config.mock);
    match &cli.command {
        Command::DatasetBuild { tags, count, urls } => commands::build::run(
            &config,
            &BuildArgs {
                tags: tags.clone(),
                count: *count,
                urls: urls.clone(),
            },
            name,
        ),
        Command::Annotate { input, output } => {
            let input = input
                .clone()
                .unwrap_or_else(|| config.paths.dataset.clone());
            let output = output.clone().unwrap_or_else(|| input.clone());
            commands::annotate::run(&config, &input, &output, name)
        }
        Command::Embed => commands::embed::run(&config, name),
        Command::Generate {
            record,
            target,
            url,
            out_dir,
        } => {
            let source = match (record, target, url) {
                (Some(p), _, _) => TargetSource::Record(p.clone()),
                (_, Some(p), _) => TargetSource::Meta(p.clone()),
                (_, _, Some(u)) => TargetSource::Url(u.clone()),
                _ => {
                    return Err(exit::Failure::Config(anyhow::anyhow!(
                        "pass one of --record, --target or --url"
                    )))
                }
            };
            commands::generate::run(&config, &source, out_dir, name)
        }
        Command::Score {
            comments,
            benchmark,
            training,
            out,
        } => commands::score::run(
            &config,
            &ScoreArgs {
                comments: comments.clone(),
                benchmark: benchmark.clone(),
                training: training.clone(),
                out: out.clone(),
            },
            name,
        ),
    }
}
