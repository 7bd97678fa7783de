//! Style voting over retrieved samples, few-shot example selection, keyword
//! extraction and the persistent meme cache.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub use crate::corpus::MemeSource;
use crate::corpus::{Language, StyleLabel, VideoRecord};
use crate::fsutil::{ensure_parent, write_atomic};
use crate::services::MemeEncyclopedia;
use crate::textmetrics::{argmax_canonical, tokenize, TfIdfModel};

/// Few-shot examples taken from any one retrieved sample.
pub const MAX_EXAMPLES_PER_SAMPLE: usize = 2;
pub const DEFAULT_KEYWORDS: usize = 5;

#[derive(Debug, Error)]
pub enum StylistError {
    #[error("retrieved samples carry no labeled comments; annotate the dataset first")]
    NoLabels,
    #[error("meme name must be non-empty")]
    EmptyName,
    #[error("no meme named `{0}` in the cache")]
    UnknownMeme(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleExample {
    pub text: String,
    pub sample_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StyleDecision {
    pub style: StyleLabel,
    pub vote_counts: BTreeMap<StyleLabel, u64>,
    pub examples: Vec<StyleExample>,
}

/// Majority vote over every labeled comment of the retrieved samples. Ties
/// go to the earlier label in canonical order. Each sample contributes at
/// most two examples of the winning style, highest-liked first.
pub fn decide_style(retrieved: &[&VideoRecord]) -> Result<StyleDecision, StylistError> {
    let mut vote_counts = BTreeMap::new();
    for c in retrieved.iter().flat_map(|r| &r.comments) {
        if let Some(l) = c.c_label {
            *vote_counts.entry(l).or_insert(0u64) += 1;
        }
    }
    let (style, _) = argmax_canonical(&vote_counts).ok_or(StylistError::NoLabels)?;
    let mut examples = Vec::new();
    for r in retrieved {
        let mut matching: Vec<_> = r
            .comments
            .iter()
            .filter(|c| c.c_label == Some(style))
            .collect();
        matching.sort_by_key(|c| std::cmp::Reverse(c.like_count));
        examples.extend(
            matching
                .into_iter()
                .take(MAX_EXAMPLES_PER_SAMPLE)
                .map(|c| StyleExample {
                    text: c.text.clone(),
                    sample_id: r.id.clone(),
                }),
        );
    }
    Ok(StyleDecision {
        style,
        vote_counts,
        examples,
    })
}

/// The `n` in-vocabulary tokens of `text` with the highest TF-IDF weight,
/// ties by first appearance.
pub fn extract_keywords(
    text: &str,
    language: Language,
    model: &TfIdfModel,
    n: usize,
) -> Vec<String> {
    let tokens = tokenize(text, language);
    let mut order: Vec<&str> = Vec::new();
    let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
    for t in &tokens.tokens {
        if model.idf(t).is_none() {
            continue;
        }
        let e = tf.entry(t.as_str()).or_insert(0.0);
        if *e == 0.0 {
            order.push(t);
        }
        *e += 1.0;
    }
    let mut weighted: Vec<(usize, &str, f64)> = order
        .iter()
        .enumerate()
        .map(|(i, t)| (i, *t, tf[t] * model.idf(t).unwrap_or(0.0)))
        .collect();
    weighted.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    weighted
        .into_iter()
        .take(n)
        .map(|(_, t, _)| t.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemeEntry {
    pub name: String,
    pub definition: String,
    #[serde(default)]
    pub expressions: Vec<String>,
    pub source: MemeSource,
}

/// Cache key: NFKC-folded, lowercased, whitespace-collapsed.
pub fn normalize_meme_name(name: &str) -> String {
    let folded: String = name.nfkc().collect::<String>().to_lowercase();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Self-growing meme knowledge base persisted as JSON lines sorted by key.
///
/// Entries are never removed and expressions are append-only. Saves take an
/// exclusive lock on a `.lock` sidecar file and replace the cache atomically.
#[derive(Debug, Clone)]
pub struct MemeCache {
    path: PathBuf,
    entries: BTreeMap<String, MemeEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StylistError + '_ {
    move |source| StylistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl MemeCache {
    /// Open the cache at `path`; a missing file is an empty cache.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StylistError> {
        let path = path.into();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let entries = Self::parse(&text, &path)?;
        Ok(Self { path, entries })
    }

    fn parse(text: &str, path: &Path) -> Result<BTreeMap<String, MemeEntry>, StylistError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| StylistError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let entry: MemeEntry = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let key = normalize_meme_name(&entry.name);
            if key.is_empty() {
                return Err(bad("empty meme name".into()));
            }
            if entries.insert(key, entry).is_some() {
                return Err(bad("duplicate meme name".into()));
            }
        }
        Ok(entries)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &MemeEntry> {
        self.entries.values()
    }

    pub fn lookup(&self, name: &str) -> Option<&MemeEntry> {
        self.entries.get(&normalize_meme_name(name))
    }

    /// Add `entry` unless a meme with the same normalized name exists.
    /// Returns whether it was added. Does not persist.
    pub fn insert(&mut self, entry: MemeEntry) -> Result<bool, StylistError> {
        let key = normalize_meme_name(&entry.name);
        if key.is_empty() {
            return Err(StylistError::EmptyName);
        }
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.entries.insert(key, entry);
        Ok(true)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            out.push_str(&serde_json::to_string(e).expect("meme entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self) -> Result<(), StylistError> {
        ensure_parent(&self.path).map_err(io_err(&self.path))?;
        let mut lock_name = self.path.file_name().unwrap_or_default().to_os_string();
        lock_name.push(".lock");
        let lock_path = self.path.with_file_name(lock_name);
        let lock: File = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io_err(&lock_path))?;
        lock.lock().map_err(io_err(&lock_path))?;
        let written = write_atomic(&self.path, self.to_text().as_bytes());
        let _ = lock.unlock();
        written.map_err(io_err(&self.path))
    }
}

/// Result of a meme lookup for a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemeHit {
    pub keyword: String,
    pub entry: MemeEntry,
    pub from_cache: bool,
}

/// Encyclopedias consulted for a language, in order.
pub fn encyclopedia_order(language: Language) -> &'static [MemeSource] {
    match language {
        Language::Zh => &[MemeSource::RegengBaike],
        Language::En => &[MemeSource::UrbanDictionary, MemeSource::KnowYourMeme],
    }
}

/// Find a meme for the first keyword that resolves. Every keyword is tried
/// against the cache before any encyclopedia is called; client errors count
/// as misses. A hit from an encyclopedia is added to the cache and persisted.
pub fn augment_with_memes(
    keywords: &[String],
    cache: &mut MemeCache,
    clients: &[&dyn MemeEncyclopedia],
    language: Language,
) -> Result<Option<MemeHit>, StylistError> {
    let ordered: Vec<&dyn MemeEncyclopedia> = encyclopedia_order(language)
        .iter()
        .flat_map(|src| clients.iter().copied().filter(move |c| c.source() == *src))
        .collect();
    for kw in keywords {
        if let Some(entry) = cache.lookup(kw) {
            return Ok(Some(MemeHit {
                keyword: kw.clone(),
                entry: entry.clone(),
                from_cache: true,
            }));
        }
    }
    for kw in keywords {
        for client in &ordered {
            match client.lookup(kw) {
                Ok(Some(def)) => {
                    let entry = MemeEntry {
                        name: if def.name.trim().is_empty() {
                            kw.clone()
                        } else {
                            def.name
                        },
                        definition: def.definition,
                        expressions: Vec::new(),
                        source: client.source(),
                    };
                    cache.insert(entry.clone())?;
                    cache.save()?;
                    let entry = cache.lookup(&entry.name).cloned().unwrap_or(entry);
                    return Ok(Some(MemeHit {
                        keyword: kw.clone(),
                        entry,
                        from_cache: false,
                    }));
                }
                Ok(None) => {}
                Err(e) => log::warn!("meme lookup for `{kw}` via {} failed: {e}", client.source()),
            }
        }
    }
    Ok(None)
}

/// Append a generated comment to a meme's expressions and persist. Exact
/// duplicates are not appended again. Returns whether the cache changed.
pub fn record_meme_usage(
    cache: &mut MemeCache,
    meme_name: &str,
    generated_comment: &str,
) -> Result<bool, StylistError> {
    let key = normalize_meme_name(meme_name);
    let entry = cache
        .entries
        .get_mut(&key)
        .ok_or_else(|| StylistError::UnknownMeme(meme_name.to_string()))?;
    let seen: HashSet<&str> = entry.expressions.iter().map(String::as_str).collect();
    if seen.contains(generated_comment) {
        return Ok(false);
    }
    entry.expressions.push(generated_comment.to_string());
    cache.save()?;
    Ok(true)
}
