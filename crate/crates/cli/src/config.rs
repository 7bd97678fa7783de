//! Pipeline configuration file.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use quipgen_core::genpipe::GenerationConfig;
use quipgen_core::labeler::DEFAULT_SIM_THRESHOLD;
use quipgen_core::media::pipeline::{CompositeConfig, TargetProcessing};
use quipgen_core::retrieval::DEFAULT_TOP_K;
use quipgen_core::scorer::ScoringParams;
use quipgen_core::services::ClientConfig;
use quipgen_core::textmetrics::{DEFAULT_KNN_K, DEFAULT_KNN_MIN_SIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for every mock service.
    pub seed: u64,
    /// Use deterministic mocks for every external service.
    pub mock: bool,
    /// Maximum number of videos processed at once.
    pub concurrency: usize,
    pub paths: Paths,
    pub labeler: LabelerSettings,
    pub composite: CompositeConfig,
    pub target: TargetProcessing,
    pub retrieval: RetrievalSettings,
    pub generation: GenerationSettings,
    pub scoring: ScoringParams,
    pub services: ServiceSettings,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            mock: false,
            concurrency: 4,
            paths: Paths::default(),
            labeler: LabelerSettings::default(),
            composite: CompositeConfig::default(),
            target: TargetProcessing::default(),
            retrieval: RetrievalSettings::default(),
            generation: GenerationSettings::default(),
            scoring: ScoringParams::default(),
            services: ServiceSettings::default(),
            base: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Scratch space for status files, per-video records and composites.
    pub work_dir: PathBuf,
    /// The dataset that `dataset-build` writes and `generate` retrieves from.
    pub dataset: PathBuf,
    /// Manually labeled comments that bootstrap k-NN and priors.
    pub seed_dataset: Option<PathBuf>,
    pub meme_cache: PathBuf,
    /// Directory the mock platform and encyclopedias read from.
    pub fixtures: Option<PathBuf>,
    /// Prompt template overriding the built-in one for each platform.
    pub template_douyin: Option<PathBuf>,
    pub template_youtube: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            work_dir: "work".into(),
            dataset: "work/dataset.jsonl".into(),
            seed_dataset: None,
            meme_cache: "work/memes.jsonl".into(),
            fixtures: None,
            template_douyin: None,
            template_youtube: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerSettings {
    pub rules_zh: Option<PathBuf>,
    pub rules_en: Option<PathBuf>,
    pub lexicon_zh: Option<PathBuf>,
    pub lexicon_en: Option<PathBuf>,
    pub sim_threshold: f64,
    pub knn_k: usize,
    pub knn_min_sim: f64,
}

impl Default for LabelerSettings {
    fn default() -> Self {
        Self {
            rules_zh: None,
            rules_en: None,
            lexicon_zh: None,
            lexicon_en: None,
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            knn_k: DEFAULT_KNN_K,
            knn_min_sim: DEFAULT_KNN_MIN_SIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub k: usize,
    /// Vector length produced by the mock embedder.
    pub mock_dim: usize,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOP_K,
            mock_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub sampling: GenerationConfig,
    pub max_retries: u32,
    /// Model name written next to each generated comment.
    pub model_name: String,
    /// Keywords tried against the meme cache and encyclopedias.
    pub meme_keywords: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            sampling: GenerationConfig::default(),
            max_retries: 2,
            model_name: "quipgen".into(),
            meme_keywords: quipgen_core::stylist::DEFAULT_KEYWORDS,
        }
    }
}

/// HTTP endpoints for live mode. Credentials are named by environment
/// variable only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub platform: Option<ClientConfig>,
    pub transcriber: Option<ClientConfig>,
    pub describer: Option<ClientConfig>,
    pub embedder: Option<ClientConfig>,
    pub sentiment: Option<ClientConfig>,
    pub generator: Option<ClientConfig>,
    pub regeng_baike: Option<ClientConfig>,
    pub urban_dictionary: Option<ClientConfig>,
    pub know_your_meme: Option<ClientConfig>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        resolve(base, p);
    }
}

impl PipelineConfig {
    /// Parse, validate and resolve relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).context("parsing config")?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let path = &std::path::absolute(path)?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.base = Some(base.to_path_buf());
        let p = &mut self.paths;
        resolve(base, &mut p.work_dir);
        resolve(base, &mut p.dataset);
        resolve(base, &mut p.meme_cache);
        resolve_opt(base, &mut p.seed_dataset);
        resolve_opt(base, &mut p.fixtures);
        resolve_opt(base, &mut p.template_douyin);
        resolve_opt(base, &mut p.template_youtube);
        let l = &mut self.labeler;
        for f in [
            &mut l.rules_zh,
            &mut l.rules_en,
            &mut l.lexicon_zh,
            &mut l.lexicon_en,
        ] {
            resolve_opt(base, f);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.concurrency == 0 {
            bail!("concurrency must be at least 1");
        }
        if !(self.labeler.sim_threshold.is_finite()
            && (0.0..=1.0).contains(&self.labeler.sim_threshold))
        {
            bail!("labeler.sim_threshold must lie in [0, 1]");
        }
        if self.labeler.knn_k == 0 || self.retrieval.k == 0 || self.retrieval.mock_dim == 0 {
            bail!("labeler.knn_k, retrieval.k and retrieval.mock_dim must be positive");
        }
        self.generation.sampling.validate()?;
        self.scoring.validate()?;
        Ok(())
    }

    /// The effective configuration as TOML, for run echoes. Paths under the
    /// base directory are written relative to it so echoes do not depend on
    /// where a run happens.
    pub fn to_toml(&self) -> String {
        let mut c = self.clone();
        if let Some(base) = &self.base {
            let rel = |p: &mut PathBuf| {
                if let Ok(r) = p.strip_prefix(base) {
                    *p = if r.as_os_str().is_empty() {
                        ".".into()
                    } else {
                        r.to_path_buf()
                    };
                }
            };
            let p = &mut c.paths;
            for f in [&mut p.work_dir, &mut p.dataset, &mut p.meme_cache] {
                rel(f);
            }
            for f in [
                &mut p.seed_dataset,
                &mut p.fixtures,
                &mut p.template_douyin,
                &mut p.template_youtube,
            ] {
                f.as_mut().map(rel);
            }
            let l = &mut c.labeler;
            for f in [
                &mut l.rules_zh,
                &mut l.rules_en,
                &mut l.lexicon_zh,
                &mut l.lexicon_en,
            ] {
                f.as_mut().map(rel);
            }
        }
        toml::to_string(&c).expect("config serializes")
    }
}
