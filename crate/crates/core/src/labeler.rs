//! Three-tier cascaded style labeling of comments.
//!
//! Tier 1 applies a prioritized regular-expression rule set. Tier 2 labels a
//! comment `ContentExtraction` when its TF-IDF cosine similarity to the video
//! description reaches the threshold. Tier 3 tries an emotion lexicon, then a
//! k-NN vote over already-labeled comments, and finally the most frequent
//! label for the video's category.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, LabelTier, Language, StyleLabel, VideoCategory, VideoRecord};
use crate::textmetrics::{
    self, argmax_canonical, cosine, knn_vote, tokenize, SparseVector, TextError, TfIdfModel,
};

pub const DEFAULT_SIM_THRESHOLD: f64 = 0.10;

const DEFAULT_RULES_ZH: &str = include_str!("../data/rules_zh.tsv");
const DEFAULT_RULES_EN: &str = include_str!("../data/rules_en.tsv");
const DEFAULT_LEXICON_ZH: &str = include_str!("../data/lexicon_zh.tsv");
const DEFAULT_LEXICON_EN: &str = include_str!("../data/lexicon_en.tsv");

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no label evidence: prior table is empty")]
    NoEvidence,
    #[error(transparent)]
    Text(#[from] TextError),
}

fn read_data_file(path: &Path) -> Result<String, LabelError> {
    fs::read_to_string(path).map_err(|source| LabelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Iterate `(line_number, left, label)` over a tab-separated data file,
/// skipping blank lines and `#` comments.
fn tab_lines(text: &str) -> impl Iterator<Item = Result<(usize, &str, StyleLabel), LabelError>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let parse = |message: String| LabelError::Parse {
            line: i + 1,
            message,
        };
        Some(match line.rsplit_once('\t') {
            None => Err(parse("expected `<text>\\t<label>`".into())),
            Some((left, label)) => label
                .trim()
                .parse::<StyleLabel>()
                .map(|l| (i + 1, left, l))
                .map_err(|e| parse(e.to_string())),
        })
    })
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub pattern: Regex,
    pub label: StyleLabel,
}

/// Ordered regex rules; earlier lines take priority.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        let mut rules = Vec::new();
        for item in tab_lines(text) {
            let (line, pattern, label) = item?;
            let pattern = Regex::new(pattern).map_err(|e| LabelError::Parse {
                line,
                message: e.to_string(),
            })?;
            rules.push(Rule { pattern, label });
        }
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        Self::parse(&read_data_file(path)?)
    }

    pub fn default_for(language: Language) -> Self {
        let text = match language {
            Language::Zh => DEFAULT_RULES_ZH,
            Language::En => DEFAULT_RULES_EN,
        };
        Self::parse(text).expect("shipped rule file parses")
    }

    pub fn from_rules(rules: Vec<Rule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Index and label of the first matching rule.
    pub fn first_match(&self, text: &str) -> Option<(usize, StyleLabel)> {
        self.rules
            .iter()
            .position(|r| r.pattern.is_match(text))
            .map(|i| (i, self.rules[i].label))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmotionLexicon {
    entries: HashMap<String, StyleLabel>,
}

impl EmotionLexicon {
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        let mut entries = HashMap::new();
        for item in tab_lines(text) {
            let (line, token, label) = item?;
            let token = token.trim().to_lowercase();
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(LabelError::Parse {
                    line,
                    message: format!("lexicon entry `{token}` must be a single token"),
                });
            }
            entries.insert(token, label);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        Self::parse(&read_data_file(path)?)
    }

    pub fn default_for(language: Language) -> Self {
        let text = match language {
            Language::Zh => DEFAULT_LEXICON_ZH,
            Language::En => DEFAULT_LEXICON_EN,
        };
        Self::parse(text).expect("shipped lexicon parses")
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, StyleLabel)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(t, l)| (t.to_lowercase(), l))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First token (in tokenization order) present in the lexicon.
    pub fn first_hit(&self, tokens: &[String]) -> Option<(usize, StyleLabel)> {
        tokens
            .iter()
            .enumerate()
            .find_map(|(i, t)| self.entries.get(t).map(|&l| (i, l)))
    }
}

/// Label frequencies per video category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorTable {
    counts: BTreeMap<VideoCategory, BTreeMap<StyleLabel, u64>>,
}

impl PriorTable {
    pub fn from_observations(obs: impl IntoIterator<Item = (VideoCategory, StyleLabel)>) -> Self {
        let mut counts: BTreeMap<VideoCategory, BTreeMap<StyleLabel, u64>> = BTreeMap::new();
        for (cat, label) in obs {
            *counts.entry(cat).or_default().entry(label).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, category: VideoCategory, label: StyleLabel) -> u64 {
        self.counts
            .get(&category)
            .and_then(|m| m.get(&label))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, category: VideoCategory) -> u64 {
        self.counts
            .get(&category)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }

    pub fn categories(&self) -> impl Iterator<Item = VideoCategory> + '_ {
        self.counts.keys().copied()
    }

    /// Relative frequency of `label` among labeled comments of `category`.
    pub fn probability(&self, category: VideoCategory, label: StyleLabel) -> Option<f64> {
        let total = self.total(category);
        (total > 0).then(|| self.count(category, label) as f64 / total as f64)
    }

    pub fn global_counts(&self) -> BTreeMap<StyleLabel, u64> {
        let mut out = BTreeMap::new();
        for row in self.counts.values() {
            for (&l, &c) in row {
                *out.entry(l).or_insert(0) += c;
            }
        }
        out
    }
}

/// Tally labeled comments by their video's category.
pub fn compute_priors(dataset: &Dataset) -> PriorTable {
    PriorTable::from_observations(dataset.records().iter().flat_map(|r| {
        r.comments
            .iter()
            .filter_map(move |c| c.c_label.map(|l| (r.category, l)))
    }))
}

/// Most probable label for the category, falling back to global counts when
/// the category has no labeled comments. Returns the label and its relative
/// frequency.
pub fn map_fallback(
    category: VideoCategory,
    priors: &PriorTable,
) -> Result<(StyleLabel, f64), LabelError> {
    let row = match priors.counts.get(&category) {
        Some(row) if row.values().sum::<u64>() > 0 => row.clone(),
        _ => priors.global_counts(),
    };
    let total: u64 = row.values().sum();
    let (label, count) = argmax_canonical(&row).ok_or(LabelError::NoEvidence)?;
    if total == 0 {
        return Err(LabelError::NoEvidence);
    }
    Ok((label, count as f64 / total as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDecision {
    pub label: StyleLabel,
    /// Never `Manual`.
    pub tier: LabelTier,
    /// Rule index for `Rule`, cosine for `Similarity`, token position for
    /// `Lexicon`, vote share for `Knn`, prior probability for `MapPrior`.
    pub evidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub sim_threshold: f64,
    pub knn_k: usize,
    pub knn_min_sim: f64,
    /// Tiers to skip; used to probe cascade shadowing.
    pub disabled: Vec<LabelTier>,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            knn_k: textmetrics::DEFAULT_KNN_K,
            knn_min_sim: textmetrics::DEFAULT_KNN_MIN_SIM,
            disabled: Vec::new(),
        }
    }
}

impl CascadeConfig {
    fn enabled(&self, tier: LabelTier) -> bool {
        !self.disabled.contains(&tier)
    }
}

/// Whether a description similarity is high enough for `ContentExtraction`.
pub fn meets_content_threshold(similarity: f64, threshold: f64) -> bool {
    similarity >= threshold
}

/// Everything the cascade consults for one language.
pub struct CascadeInputs<'a> {
    pub rules: &'a RuleSet,
    pub lexicon: &'a EmotionLexicon,
    pub model: &'a TfIdfModel,
    pub labeled_pool: &'a [(SparseVector, StyleLabel)],
    pub priors: &'a PriorTable,
    pub config: &'a CascadeConfig,
}

/// Tiers 1, 2 and the lexicon step of tier 3: the ones driven by evidence in
/// the comment itself.
pub fn evidence_tiers(
    comment: &str,
    video: &VideoRecord,
    inputs: &CascadeInputs<'_>,
) -> Option<LabelDecision> {
    let cfg = inputs.config;
    if cfg.enabled(LabelTier::Rule) {
        if let Some((idx, label)) = inputs.rules.first_match(comment) {
            return Some(LabelDecision {
                label,
                tier: LabelTier::Rule,
                evidence: idx as f64,
            });
        }
    }
    if cfg.enabled(LabelTier::Similarity) {
        let sim = cosine(
            &inputs.model.vectorize_text(comment, video.language),
            &inputs
                .model
                .vectorize_text(&video.description, video.language),
        );
        if meets_content_threshold(sim, cfg.sim_threshold) {
            return Some(LabelDecision {
                label: StyleLabel::ContentExtraction,
                tier: LabelTier::Similarity,
                evidence: sim,
            });
        }
    }
    if cfg.enabled(LabelTier::Lexicon) {
        let tokens = tokenize(comment, video.language);
        if let Some((pos, label)) = inputs.lexicon.first_hit(&tokens.tokens) {
            return Some(LabelDecision {
                label,
                tier: LabelTier::Lexicon,
                evidence: pos as f64,
            });
        }
    }
    None
}

/// k-NN vote, then the category prior.
pub fn fallback_tiers(
    comment: &str,
    video: &VideoRecord,
    inputs: &CascadeInputs<'_>,
) -> Result<LabelDecision, LabelError> {
    let cfg = inputs.config;
    if cfg.enabled(LabelTier::Knn) {
        let query = inputs.model.vectorize_text(comment, video.language);
        if let Some(out) = knn_vote(&query, inputs.labeled_pool, cfg.knn_k, cfg.knn_min_sim)? {
            return Ok(LabelDecision {
                label: out.label,
                tier: LabelTier::Knn,
                evidence: out.margin,
            });
        }
    }
    let (label, p) = map_fallback(video.category, inputs.priors)?;
    Ok(LabelDecision {
        label,
        tier: LabelTier::MapPrior,
        evidence: p,
    })
}

/// Run the full cascade on one comment. Exactly one tier fires.
///
/// The prior tier cannot be disabled; it is the last resort and fails only
/// when the prior table is empty.
pub fn label_comment(
    comment: &str,
    video: &VideoRecord,
    inputs: &CascadeInputs<'_>,
) -> Result<LabelDecision, LabelError> {
    match evidence_tiers(comment, video, inputs) {
        Some(d) => Ok(d),
        None => fallback_tiers(comment, video, inputs),
    }
}

/// Rules and lexicon for each corpus language.
#[derive(Debug, Clone)]
pub struct LabelResources {
    pub rules_zh: RuleSet,
    pub rules_en: RuleSet,
    pub lexicon_zh: EmotionLexicon,
    pub lexicon_en: EmotionLexicon,
}

impl Default for LabelResources {
    fn default() -> Self {
        Self {
            rules_zh: RuleSet::default_for(Language::Zh),
            rules_en: RuleSet::default_for(Language::En),
            lexicon_zh: EmotionLexicon::default_for(Language::Zh),
            lexicon_en: EmotionLexicon::default_for(Language::En),
        }
    }
}

impl LabelResources {
    pub fn rules(&self, language: Language) -> &RuleSet {
        match language {
            Language::Zh => &self.rules_zh,
            Language::En => &self.rules_en,
        }
    }

    pub fn lexicon(&self, language: Language) -> &EmotionLexicon {
        match language {
            Language::Zh => &self.lexicon_zh,
            Language::En => &self.lexicon_en,
        }
    }
}

/// One labeled comment, for the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub video_id: String,
    pub comment_index: usize,
    pub label: StyleLabel,
    pub tier: LabelTier,
    pub evidence: f64,
}

pub fn audit_to_tsv(rows: &[AuditRow]) -> String {
    let mut out = String::from("video_id\tcomment_index\tlabel\ttier\tevidence\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\n",
            r.video_id, r.comment_index, r.label, r.tier, r.evidence
        ));
    }
    out
}

/// Label every comment in `dataset` that lacks a manual label.
///
/// Labels are assigned in two passes. The first runs the evidence tiers on
/// every pending comment. The k-NN pool and the category priors are then
/// built from the seed dataset, any manual labels, and the first-pass
/// decisions, and the second pass runs the fallback tiers on what is left.
/// The TF-IDF space is fit over all descriptions and comments of `dataset`
/// and `seed`.
pub fn annotate_dataset(
    dataset: &Dataset,
    seed: Option<&Dataset>,
    resources: &LabelResources,
    config: &CascadeConfig,
) -> Result<(Dataset, Vec<AuditRow>), LabelError> {
    let mut records: Vec<VideoRecord> = dataset.records().to_vec();
    let seed_records: &[VideoRecord] = seed.map(|s| s.records()).unwrap_or(&[]);

    let texts = records.iter().chain(seed_records).flat_map(|r| {
        std::iter::once((r.description.as_str(), r.language)).chain(
            r.comments
                .iter()
                .map(move |c| (c.text.as_str(), r.language)),
        )
    });
    let model = TfIdfModel::fit_texts(texts)?;

    let empty_pool: Vec<(SparseVector, StyleLabel)> = Vec::new();
    let empty_priors = PriorTable::default();
    let mut decisions: BTreeMap<(usize, usize), LabelDecision> = BTreeMap::new();
    let mut pending: Vec<(usize, usize)> = Vec::new();

    for (ri, r) in records.iter().enumerate() {
        let inputs = CascadeInputs {
            rules: resources.rules(r.language),
            lexicon: resources.lexicon(r.language),
            model: &model,
            labeled_pool: &empty_pool,
            priors: &empty_priors,
            config,
        };
        for (ci, c) in r.comments.iter().enumerate() {
            if c.label_tier == Some(LabelTier::Manual) {
                continue;
            }
            match evidence_tiers(&c.text, r, &inputs) {
                Some(d) => {
                    decisions.insert((ri, ci), d);
                }
                None => pending.push((ri, ci)),
            }
        }
    }

    let mut pool = Vec::new();
    let mut observations = Vec::new();
    let manual = records.iter().flat_map(|r| {
        r.comments
            .iter()
            .filter(|c| c.label_tier == Some(LabelTier::Manual))
            .map(move |c| (r, c.text.as_str(), c.c_label))
    });
    let seeded = seed_records.iter().flat_map(|r| {
        r.comments
            .iter()
            .map(move |c| (r, c.text.as_str(), c.c_label))
    });
    let first_pass = decisions.iter().map(|(&(ri, ci), d)| {
        (
            &records[ri],
            records[ri].comments[ci].text.as_str(),
            Some(d.label),
        )
    });
    for (r, text, label) in seeded.chain(manual).chain(first_pass) {
        if let Some(label) = label {
            pool.push((model.vectorize_text(text, r.language), label));
            observations.push((r.category, label));
        }
    }
    let priors = PriorTable::from_observations(observations);

    for (ri, ci) in pending {
        let r = &records[ri];
        let inputs = CascadeInputs {
            rules: resources.rules(r.language),
            lexicon: resources.lexicon(r.language),
            model: &model,
            labeled_pool: &pool,
            priors: &priors,
            config,
        };
        let d = fallback_tiers(&r.comments[ci].text, r, &inputs)?;
        decisions.insert((ri, ci), d);
    }

    let mut audit = Vec::with_capacity(decisions.len());
    for ((ri, ci), d) in decisions {
        let r = &mut records[ri];
        r.comments[ci].c_label = Some(d.label);
        r.comments[ci].label_tier = Some(d.tier);
        audit.push(AuditRow {
            video_id: r.id.clone(),
            comment_index: ci,
            label: d.label,
            tier: d.tier,
            evidence: d.evidence,
        });
    }
    Ok((Dataset::new(records), audit))
}
