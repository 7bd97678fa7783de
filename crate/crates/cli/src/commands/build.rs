//! `quipgen dataset-build`: crawl, process, describe and label videos.
//!
//! Progress is tracked in `<work_dir>/build_status.tsv`. Rerunning the
//! command skips described videos and retries failed ones.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use quipgen_core::corpus::{top_five_comments, Dataset, VideoRecord};
use quipgen_core::media::encode_png;
use quipgen_core::media::pipeline::tiered_composite;
use quipgen_core::services::workqueue::{drain, WorkQueue, WorkStatus};
use quipgen_core::services::VideoMeta;

use super::annotate::annotate_and_save;
use crate::config::PipelineConfig;
use crate::exit::{Classify, CmdResult, Failure};
use crate::stack::Stack;

#[derive(Debug, Clone, Default)]
pub struct BuildArgs {
    pub tags: Vec<String>,
    pub count: usize,
    pub urls: Vec<String>,
}

fn record_path(work_dir: &Path, id: &str) -> PathBuf {
    work_dir.join("records").join(format!("{id}.json"))
}

fn process_video(
    stack: &Stack,
    config: &PipelineConfig,
    meta: &VideoMeta,
) -> anyhow::Result<VideoRecord> {
    let language = meta.platform.language();
    let comments = top_five_comments(meta.comments.clone());
    let transcription = stack
        .transcriber
        .transcribe(&meta.media, language)
        .context("transcription")?;
    let composite = tiered_composite(stack.decoder.as_ref(), &meta.media, &config.composite)
        .context("frame composite")?;
    let png = encode_png(&composite.image)?;
    let png_path = config
        .paths
        .work_dir
        .join("composites")
        .join(format!("{}.png", meta.id));
    quipgen_core::fsutil::write_atomic(&png_path, &png)
        .with_context(|| format!("writing {}", png_path.display()))?;
    let description = stack
        .describer
        .describe(&composite.image, &transcription, &meta.tags, language)
        .context("description")?;
    let record = VideoRecord {
        id: meta.id.clone(),
        platform: meta.platform,
        language,
        category: meta.category,
        tags: meta.tags.clone(),
        introduction: meta.introduction.clone(),
        description,
        transcription,
        comments,
        source_url: meta.source_url.clone(),
    };
    record
        .validate()
        .map_err(|e| anyhow!("invalid record: {e}"))?;
    let json = serde_json::to_string_pretty(&record)?;
    quipgen_core::fsutil::write_atomic(
        &record_path(&config.paths.work_dir, &meta.id),
        json.as_bytes(),
    )?;
    Ok(record)
}

fn fetch(stack: &Stack, args: &BuildArgs) -> CmdResult<Vec<VideoMeta>> {
    let mut videos = Vec::new();
    if !args.tags.is_empty() {
        videos.extend(
            stack
                .platform
                .fetch_videos(&args.tags, args.count)
                .context("fetching videos")
                .or_pipeline()?,
        );
    }
    for url in &args.urls {
        videos.push(
            stack
                .platform
                .fetch_by_url(url)
                .with_context(|| format!("fetching {url}"))
                .or_pipeline()?,
        );
    }
    let mut seen = BTreeSet::new();
    videos.retain(|v| seen.insert(v.id.clone()));
    Ok(videos)
}

pub fn run(config: &PipelineConfig, args: &BuildArgs, command: &str) -> CmdResult {
    if args.tags.is_empty() && args.urls.is_empty() {
        return Err(Failure::Config(anyhow!(
            "pass --tags or at least one --url"
        )));
    }
    let stack = Stack::build(config).or_config()?;
    let videos = fetch(&stack, args)?;
    let work_dir = &config.paths.work_dir;
    let mut queue = WorkQueue::open(work_dir.join("build_status.tsv")).or_pipeline()?;
    for v in &videos {
        queue.enqueue(&v.id).or_pipeline()?;
    }
    queue.requeue_failed();
    queue.persist().or_pipeline()?;
    let skipped = queue.count(WorkStatus::Described);

    let by_id: std::collections::HashMap<&str, &VideoMeta> =
        videos.iter().map(|v| (v.id.as_str(), v)).collect();
    let processed = drain(&mut queue, config.concurrency, |id| {
        let meta = by_id
            .get(id)
            .ok_or_else(|| format!("`{id}` was not returned by the platform this run"))?;
        process_video(&stack, config, meta).map_err(|e| format!("{e:#}"))
    })
    .or_pipeline()?;
    let failed: Vec<&str> = processed
        .iter()
        .filter(|p| p.result.is_err())
        .map(|p| p.id.as_str())
        .collect();
    for p in &processed {
        if let Err(e) = &p.result {
            log::warn!("video `{}` failed: {e}", p.id);
        }
    }
    let described = processed.len() - failed.len();

    let mut records = Vec::new();
    for item in queue.items() {
        if item.status != WorkStatus::Described {
            continue;
        }
        let path = record_path(work_dir, &item.id);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .or_pipeline()?;
        let record: VideoRecord = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .or_pipeline()?;
        records.push(record);
    }
    let dataset = Dataset::new(records);
    annotate_and_save(config, &dataset, &config.paths.dataset, command)?;
    println!(
        "described {described}, skipped {skipped}, failed {} -> {}",
        failed.len(),
        config.paths.dataset.display()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!(
            "{} videos failed: {}; rerun to retry them",
            failed.len(),
            failed.join(", ")
        )))
    }
}
