//! `quipgen score`: score generated comments against a benchmark.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Deserialize;

use quipgen_core::corpus::{load_dataset, Dataset};
use quipgen_core::scorer::{score_report_tsv, ScoreRow, ScoringContext};

use super::{sibling, write_echo, write_file};
use crate::config::PipelineConfig;
use crate::exit::{Classify, CmdResult, Failure};
use crate::stack::sentiment_client;

#[derive(Debug, Clone)]
pub struct ScoreArgs {
    pub comments: Vec<PathBuf>,
    pub benchmark: PathBuf,
    pub training: Option<PathBuf>,
    pub out: PathBuf,
}

/// One line of a comments file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedComment {
    pub model: String,
    pub video_id: String,
    pub comment: String,
}

pub fn read_comments(path: &Path) -> anyhow::Result<Vec<GeneratedComment>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

pub fn run(config: &PipelineConfig, args: &ScoreArgs, command: &str) -> CmdResult {
    let benchmark = load_dataset(&args.benchmark).or_config()?;
    let training = match &args.training {
        Some(p) => load_dataset(p).or_config()?,
        None if config.paths.dataset.is_file() => {
            load_dataset(&config.paths.dataset).or_config()?
        }
        None => Dataset::default(),
    };
    let mut comments = Vec::new();
    for p in &args.comments {
        comments.extend(read_comments(p).or_config()?);
    }
    let unknown: BTreeSet<&str> = comments
        .iter()
        .filter(|c| benchmark.get(&c.video_id).is_none())
        .map(|c| c.video_id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Failure::Config(anyhow!(
            "comments refer to videos missing from the benchmark: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let context = ScoringContext::build(&benchmark, &training, config.scoring).or_pipeline()?;
    let sentiment = sentiment_client(config).or_config()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for c in &comments {
        let video = benchmark.get(&c.video_id).expect("ids checked above");
        match context.score(&c.comment, video, sentiment.as_ref()) {
            Ok(scores) => rows.push(ScoreRow {
                model: c.model.clone(),
                video_id: c.video_id.clone(),
                platform: video.platform,
                scores,
            }),
            Err(e) => failures.push(format!("{}/{}: {e}", c.model, c.video_id)),
        }
    }
    let table = score_report_tsv(&rows, context.params(), context.baseline());
    write_file(&args.out, table.as_bytes())?;
    write_echo(&sibling(&args.out, ".run.toml"), command, config)?;
    println!("scored {} comments -> {}", rows.len(), args.out.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(failures.join("; ")))
    }
}
