//! Domain types for videos, comments and style labels, plus the line-delimited
//! dataset file with its category index.
//!
//! A dataset file holds one JSON object per line. Blank lines are ignored.
//! Every record is validated on load and schema problems are reported with the
//! 1-based line number they occur on.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil;

/// Maximum number of comments retained per video.
pub const MAX_COMMENTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} `{value}`")]
pub struct ParseEnumError {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            /// Every variant, in canonical order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ParseEnumError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok($name::$variant),)+
                    _ => Err(ParseEnumError { kind: $kind, value: s.to_string() }),
                }
            }
        }
    };
}

named_enum!(
    /// The six comment style categories. Declaration order is the canonical
    /// order used to break ties everywhere a vote or argmax is taken.
    StyleLabel, "style label", {
        Puns,
        Rhyming,
        Meme,
        Sarcasm,
        GeneralHumor,
        ContentExtraction,
    }
);

named_enum!(
    /// Video content category. `Other` collects videos outside the five
    /// high-engagement categories.
    VideoCategory, "video category", {
        TalkShow,
        HumorousCommentary,
        FunnyAnimal,
        DailyLifeSkit,
        ComedyShortDrama,
        Other,
    }
);

named_enum!(
    /// Where a meme definition came from.
    MemeSource, "meme source", {
        LocalCache,
        RegengBaike,
        UrbanDictionary,
        KnowYourMeme,
    }
);

named_enum!(
    /// How a comment's label was assigned.
    LabelTier, "label tier", {
        Rule,
        Similarity,
        Lexicon,
        Knn,
        MapPrior,
        Manual,
    }
);

named_enum!(Platform, "platform", { Douyin, YouTube });

named_enum!(Language, "language", { Zh, En });

impl Platform {
    /// Corpus language is fixed by platform.
    pub fn language(self) -> Language {
        match self {
            Platform::Douyin => Language::Zh,
            Platform::YouTube => Language::En,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentRecord {
    pub text: String,
    pub like_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_label: Option<StyleLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_tier: Option<LabelTier>,
}

impl CommentRecord {
    pub fn new(text: impl Into<String>, like_count: u64) -> Self {
        Self {
            text: text.into(),
            like_count,
            c_label: None,
            label_tier: None,
        }
    }

    pub fn labeled(mut self, label: StyleLabel, tier: LabelTier) -> Self {
        self.c_label = Some(label);
        self.label_tier = Some(tier);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("comment text is empty".into());
        }
        if self.c_label.is_some() != self.label_tier.is_some() {
            return Err("c_label and label_tier must be present together".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRecord {
    pub id: String,
    pub platform: Platform,
    pub language: Language,
    pub category: VideoCategory,
    pub tags: Vec<String>,
    pub introduction: String,
    pub description: String,
    pub transcription: String,
    pub comments: Vec<CommentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

impl VideoRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.platform.language() != self.language {
            return Err(format!(
                "platform {} requires language {}, found {}",
                self.platform,
                self.platform.language(),
                self.language
            ));
        }
        if self.comments.len() > MAX_COMMENTS {
            return Err(format!(
                "{} comments, at most {MAX_COMMENTS} allowed",
                self.comments.len()
            ));
        }
        if self
            .comments
            .windows(2)
            .any(|w| w[0].like_count < w[1].like_count)
        {
            return Err("comments are not sorted by like_count descending".into());
        }
        for (i, c) in self.comments.iter().enumerate() {
            c.validate().map_err(|e| format!("comment {i}: {e}"))?;
        }
        Ok(())
    }

    /// Description followed by transcription; the text a comment is compared
    /// against when judging relevance to the video.
    pub fn content_text(&self) -> String {
        join_nonempty(&[&self.description, &self.transcription], "\n")
    }
}

pub(crate) fn join_nonempty(parts: &[&str], sep: &str) -> String {
    parts
        .iter()
        .filter(|p| !p.trim().is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(sep)
}

/// Keep the (at most) five most-liked comments. Equal like counts keep their
/// original relative order.
pub fn top_five_comments(mut comments: Vec<CommentRecord>) -> Vec<CommentRecord> {
    comments.sort_by_key(|c| std::cmp::Reverse(c.like_count));
    comments.truncate(MAX_COMMENTS);
    comments
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// An immutable collection of video records indexed by category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<VideoRecord>,
    category_index: BTreeMap<VideoCategory, Vec<usize>>,
}

impl Dataset {
    pub fn new(records: Vec<VideoRecord>) -> Self {
        let category_index = build_index(&records);
        Self {
            records,
            category_index,
        }
    }

    pub fn records(&self) -> &[VideoRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<VideoRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn category_index(&self) -> &BTreeMap<VideoCategory, Vec<usize>> {
        &self.category_index
    }

    pub fn in_category(&self, category: VideoCategory) -> impl Iterator<Item = &VideoRecord> {
        self.category_index
            .get(&category)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    pub fn get(&self, id: &str) -> Option<&VideoRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Map from record id to position, for repeated lookups.
    pub fn id_map(&self) -> BTreeMap<&str, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect()
    }
}

fn build_index(records: &[VideoRecord]) -> BTreeMap<VideoCategory, Vec<usize>> {
    let mut index: BTreeMap<VideoCategory, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        index.entry(r.category).or_default().push(i);
    }
    index
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, path)
}

pub(crate) fn parse_dataset(text: &str, path: &Path) -> Result<Dataset, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| CorpusError::Schema {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let record: VideoRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        record.validate().map_err(&schema)?;
        if !seen.insert(record.id.clone()) {
            return Err(schema(format!("duplicate record id `{}`", record.id)));
        }
        records.push(record);
    }
    Ok(Dataset::new(records))
}

pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    for r in dataset.records() {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    fsutil::write_atomic(path, dataset_to_string(dataset).as_bytes()).map_err(|source| {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}
