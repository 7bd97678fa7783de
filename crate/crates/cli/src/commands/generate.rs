//! `quipgen generate`: write one humorous comment for a target video.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use quipgen_core::corpus::{Dataset, Language, VideoRecord};
use quipgen_core::genpipe::{build_prompt, generate_comment, PromptBundle, PromptTemplate};
use quipgen_core::media::pipeline::climax_composite;
use quipgen_core::media::{encode_png, ClimaxInterval, GridLayout};
use quipgen_core::retrieval::{
    build_query_text, store_path_for, topk_similar, EmbeddingVector, RetrievalScope, VectorStore,
};
use quipgen_core::services::VideoMeta;
use quipgen_core::stylist::{
    augment_with_memes, decide_style, extract_keywords, record_meme_usage, MemeCache, MemeHit,
    StyleDecision,
};
use quipgen_core::textmetrics::TfIdfModel;
use quipgen_core::{Platform, StyleLabel};

use super::{load_input_dataset, write_echo, write_file};
use crate::config::PipelineConfig;
use crate::exit::{Classify, CmdResult, Failure};
use crate::stack::Stack;

#[derive(Debug, Clone)]
pub enum TargetSource {
    /// An already described video record.
    Record(PathBuf),
    /// Platform metadata with media still to process.
    Meta(PathBuf),
    Url(String),
}

#[derive(Debug, Serialize)]
struct Processing {
    climaxes: Vec<ClimaxInterval>,
    sampled_frames: usize,
    climax_frames: usize,
    grid: GridLayout,
}

#[derive(Debug, Serialize)]
struct HitReport {
    sample_id: String,
    similarity: f64,
}

#[derive(Debug, Serialize)]
struct RetrievalReport {
    k: usize,
    scope: RetrievalScope,
    hits: Vec<HitReport>,
}

#[derive(Debug, Serialize)]
struct StyleReport {
    chosen: StyleLabel,
    vote_counts: std::collections::BTreeMap<StyleLabel, u64>,
}

#[derive(Debug, Serialize)]
struct MemeReport {
    keywords: Vec<String>,
    hit: Option<MemeHit>,
}

#[derive(Debug, Serialize)]
struct TargetReport {
    id: String,
    platform: Platform,
    language: Language,
    category: quipgen_core::VideoCategory,
}

#[derive(Debug, Serialize)]
struct Provenance {
    target: TargetReport,
    processing: Option<Processing>,
    retrieval: RetrievalReport,
    style: StyleReport,
    examples: Vec<quipgen_core::stylist::StyleExample>,
    meme: Option<MemeReport>,
    encyclopedia_calls: usize,
    prompt: String,
    comment: String,
}

#[derive(Debug, Serialize)]
struct CommentLine<'a> {
    model: &'a str,
    video_id: &'a str,
    comment: &'a str,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_config()?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .or_config()
}

/// Turn platform metadata into a record, sampling climaxes densely.
fn process_target(
    stack: &Stack,
    config: &PipelineConfig,
    meta: VideoMeta,
    out_dir: &Path,
) -> CmdResult<(VideoRecord, Processing)> {
    let language = meta.platform.language();
    let composite = climax_composite(
        stack.decoder.as_ref(),
        &meta.media,
        &config.target,
        &config.composite,
    )
    .context("target composite")
    .or_pipeline()?;
    write_file(
        &out_dir.join("composite.png"),
        &encode_png(&composite.image).or_pipeline()?,
    )?;
    let transcription = stack
        .transcriber
        .transcribe(&meta.media, language)
        .context("transcription")
        .or_pipeline()?;
    let description = stack
        .describer
        .describe(&composite.image, &transcription, &meta.tags, language)
        .context("description")
        .or_pipeline()?;
    let processing = Processing {
        climaxes: composite.climaxes,
        sampled_frames: composite.schedule.timestamps_s.len(),
        climax_frames: composite.schedule.climax_s.len(),
        grid: composite.layout,
    };
    let record = VideoRecord {
        id: meta.id,
        platform: meta.platform,
        language,
        category: meta.category,
        tags: meta.tags,
        introduction: meta.introduction,
        description,
        transcription,
        comments: Vec::new(),
        source_url: meta.source_url,
    };
    Ok((record, processing))
}

fn template_for(config: &PipelineConfig, platform: Platform) -> CmdResult<PromptTemplate> {
    let path = match platform {
        Platform::Douyin => &config.paths.template_douyin,
        Platform::YouTube => &config.paths.template_youtube,
    };
    match path {
        Some(p) => PromptTemplate::load(p).or_config(),
        None => Ok(PromptTemplate::default_for(platform)),
    }
}

/// Examples in retrieval order with exact duplicates removed.
fn unique_examples(decision: &StyleDecision) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in &decision.examples {
        if !out.contains(&e.text) {
            out.push(e.text.clone());
        }
    }
    out
}

fn find_meme(
    stack: &Stack,
    config: &PipelineConfig,
    dataset: &Dataset,
    target: &VideoRecord,
    query: &str,
) -> CmdResult<MemeReport> {
    let texts = dataset
        .records()
        .iter()
        .filter_map(|r| build_query_text(r).ok().map(|t| (t, r.language)))
        .chain(std::iter::once((query.to_string(), target.language)))
        .collect::<Vec<_>>();
    let model = TfIdfModel::fit_texts(texts.iter().map(|(t, l)| (t.as_str(), *l))).or_pipeline()?;
    let keywords = extract_keywords(
        query,
        target.language,
        &model,
        config.generation.meme_keywords,
    );
    let mut cache = MemeCache::open(&config.paths.meme_cache).or_config()?;
    let clients: Vec<&dyn quipgen_core::services::MemeEncyclopedia> = stack
        .encyclopedias
        .iter()
        .map(|e| e as &dyn quipgen_core::services::MemeEncyclopedia)
        .collect();
    let hit = augment_with_memes(&keywords, &mut cache, &clients, target.language).or_pipeline()?;
    Ok(MemeReport { keywords, hit })
}

pub fn run(
    config: &PipelineConfig,
    source: &TargetSource,
    out_dir: &Path,
    command: &str,
) -> CmdResult {
    let dataset = load_input_dataset(&config.paths.dataset)?;
    let store_path = store_path_for(&config.paths.dataset);
    if !store_path.is_file() {
        return Err(Failure::Config(anyhow!(
            "vector store {} does not exist; run `quipgen embed` first",
            store_path.display()
        )));
    }
    let store = VectorStore::load(&store_path).or_pipeline()?;
    let stack = Stack::build(config).or_config()?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .or_pipeline()?;

    let (target, processing) = match source {
        TargetSource::Record(p) => {
            let record: VideoRecord = read_json(p)?;
            (record, None)
        }
        TargetSource::Meta(p) => {
            let meta: VideoMeta = read_json(p)?;
            let (r, proc) = process_target(&stack, config, meta, out_dir)?;
            (r, Some(proc))
        }
        TargetSource::Url(u) => {
            let meta = stack
                .platform
                .fetch_by_url(u)
                .with_context(|| format!("fetching {u}"))
                .or_pipeline()?;
            let (r, proc) = process_target(&stack, config, meta, out_dir)?;
            (r, Some(proc))
        }
    };
    let language = target.language;

    let query = build_query_text(&target).or_pipeline()?;
    let vector = stack
        .embedder
        .embed(&query)
        .map_err(anyhow::Error::from)
        .and_then(|v| Ok(EmbeddingVector::new(v)?))
        .context("embedding the target")
        .or_pipeline()?;
    // The target itself is never its own example.
    let k = config.retrieval.k;
    let mut retrieval =
        topk_similar(&store, &vector, Some(target.category), k + 1).or_pipeline()?;
    retrieval.hits.retain(|h| h.sample_id != target.id);
    retrieval.hits.truncate(k);
    let retrieved: Vec<&VideoRecord> = retrieval
        .hits
        .iter()
        .filter_map(|h| dataset.get(&h.sample_id))
        .collect();
    let decision = decide_style(&retrieved)
        .context("choosing a style from the retrieved samples")
        .or_pipeline()?;

    let meme = if decision.style == StyleLabel::Meme {
        Some(find_meme(&stack, config, &dataset, &target, &query)?)
    } else {
        None
    };
    let bundle = PromptBundle {
        platform: target.platform,
        language,
        introduction: target.introduction.clone(),
        description: target.description.clone(),
        transcription: target.transcription.clone(),
        style: decision.style,
        examples: unique_examples(&decision),
        meme: meme
            .as_ref()
            .and_then(|m| m.hit.as_ref())
            .map(|h| h.entry.clone()),
    };
    let template = template_for(config, target.platform)?;
    let prompt = build_prompt(&bundle, &template).or_config()?;
    let comment = generate_comment(
        stack.generator.as_ref(),
        &prompt,
        &config.generation.sampling,
        config.generation.max_retries,
    )
    .or_pipeline()?;
    if let Some(entry) = &bundle.meme {
        let mut cache = MemeCache::open(&config.paths.meme_cache).or_config()?;
        record_meme_usage(&mut cache, &entry.name, &comment).or_pipeline()?;
    }

    let provenance = Provenance {
        target: TargetReport {
            id: target.id.clone(),
            platform: target.platform,
            language,
            category: target.category,
        },
        processing,
        retrieval: RetrievalReport {
            k,
            scope: retrieval.scope,
            hits: retrieval
                .hits
                .iter()
                .map(|h| HitReport {
                    sample_id: h.sample_id.clone(),
                    similarity: h.similarity,
                })
                .collect(),
        },
        style: StyleReport {
            chosen: decision.style,
            vote_counts: decision.vote_counts.clone(),
        },
        examples: decision.examples.clone(),
        meme,
        encyclopedia_calls: stack.encyclopedia_calls(),
        prompt,
        comment: comment.clone(),
    };
    let line = serde_json::to_string(&CommentLine {
        model: &config.generation.model_name,
        video_id: &target.id,
        comment: &comment,
    })
    .or_pipeline()?;
    write_file(
        &out_dir.join("comment.txt"),
        format!("{comment}\n").as_bytes(),
    )?;
    write_file(
        &out_dir.join("comments.jsonl"),
        format!("{line}\n").as_bytes(),
    )?;
    let json = serde_json::to_string_pretty(&provenance).or_pipeline()?;
    write_file(
        &out_dir.join("provenance.json"),
        format!("{json}\n").as_bytes(),
    )?;
    write_echo(&out_dir.join("run.toml"), command, config)?;
    println!("{comment}");
    Ok(())
}
