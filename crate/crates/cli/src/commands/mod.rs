//! Subcommand implementations.

pub mod annotate;
pub mod build;
pub mod embed;
pub mod generate;
pub mod score;

use std::path::{Path, PathBuf};

use anyhow::Context;

use quipgen_core::corpus::{load_dataset, Dataset};
use quipgen_core::fsutil::write_atomic;
use quipgen_core::labeler::{CascadeConfig, EmotionLexicon, LabelResources, RuleSet};

use crate::config::PipelineConfig;
use crate::exit::{Classify, CmdResult};

/// Sibling of `path` with its extension replaced by `suffix`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn write_file(path: &Path, contents: &[u8]) -> CmdResult {
    write_atomic(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .or_pipeline()
}

/// Record the command line and effective configuration next to an output.
pub fn write_echo(path: &Path, command: &str, config: &PipelineConfig) -> CmdResult {
    let text = format!("# quipgen {command}\n{}", config.to_toml());
    write_file(path, text.as_bytes())
}

pub fn load_input_dataset(path: &Path) -> CmdResult<Dataset> {
    if !path.is_file() {
        return Err(crate::exit::Failure::Config(anyhow::anyhow!(
            "dataset {} does not exist; build it with `quipgen dataset-build`",
            path.display()
        )));
    }
    load_dataset(path).or_pipeline()
}

pub fn load_seed(config: &PipelineConfig) -> CmdResult<Option<Dataset>> {
    config
        .paths
        .seed_dataset
        .as_deref()
        .map(|p| load_dataset(p).with_context(|| "loading seed dataset"))
        .transpose()
        .or_config()
}

pub fn label_resources(config: &PipelineConfig) -> CmdResult<LabelResources> {
    let mut r = LabelResources::default();
    let l = &config.labeler;
    if let Some(p) = &l.rules_zh {
        r.rules_zh = RuleSet::load(p).or_config()?;
    }
    if let Some(p) = &l.rules_en {
        r.rules_en = RuleSet::load(p).or_config()?;
    }
    if let Some(p) = &l.lexicon_zh {
        r.lexicon_zh = EmotionLexicon::load(p).or_config()?;
    }
    if let Some(p) = &l.lexicon_en {
        r.lexicon_en = EmotionLexicon::load(p).or_config()?;
    }
    Ok(r)
}

pub fn cascade_config(config: &PipelineConfig) -> CascadeConfig {
    CascadeConfig {
        sim_threshold: config.labeler.sim_threshold,
        knn_k: config.labeler.knn_k,
        knn_min_sim: config.labeler.knn_min_sim,
        disabled: Vec::new(),
    }
}
