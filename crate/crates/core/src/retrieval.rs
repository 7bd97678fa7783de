//! Dense-embedding retrieval of similar dataset samples.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{join_nonempty, Dataset, VideoCategory, VideoRecord};
use crate::fsutil::write_atomic;
use crate::services::Embedder;

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("video `{0}` has no introduction, description or transcription to embed")]
    NothingToEmbed(String),
    #[error("vector store is empty")]
    EmptyStore,
    #[error("dimension mismatch: store has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding must be non-empty and finite")]
    BadVector,
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample id `{0}` is empty or contains whitespace")]
    BadId(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Service(#[from] crate::services::ServiceError),
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::BadVector);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity of two equal-length dense vectors, clamped to `[-1, 1]`.
/// Zero when either has zero norm.
pub fn dense_cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    (dot / denom).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreEntry {
    pub sample_id: String,
    pub category: VideoCategory,
    pub vector: EmbeddingVector,
}

/// Flat list of embedded samples with unique ids and a uniform dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorStore {
    dim: usize,
    entries: Vec<StoreEntry>,
    ids: HashSet<String>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dimension of stored vectors; zero while the store is empty.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(
        &mut self,
        sample_id: &str,
        category: VideoCategory,
        vector: EmbeddingVector,
    ) -> Result<(), RetrievalError> {
        if sample_id.is_empty() || sample_id.contains(char::is_whitespace) {
            return Err(RetrievalError::BadId(sample_id.to_string()));
        }
        if self.ids.contains(sample_id) {
            return Err(RetrievalError::DuplicateId(sample_id.to_string()));
        }
        if !self.entries.is_empty() && vector.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        self.dim = vector.dim();
        self.ids.insert(sample_id.to_string());
        self.entries.push(StoreEntry {
            sample_id: sample_id.to_string(),
            category,
            vector,
        });
        Ok(())
    }

    /// Text form: a `dim<TAB>count` header, then
    /// `id<TAB>category<TAB>v1 v2 ...` per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\t{}\n", self.dim, self.entries.len());
        for e in &self.entries {
            let values: Vec<String> = e.vector.values.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.sample_id,
                e.category,
                values.join(" ")
            ));
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, RetrievalError> {
        let bad = |line: usize, message: String| RetrievalError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?;
        let (dim, count) = header
            .split_once('\t')
            .and_then(|(d, n)| Some((d.parse::<usize>().ok()?, n.parse::<usize>().ok()?)))
            .ok_or_else(|| bad(1, "header must be `dim<TAB>count`".into()))?;
        let mut store = VectorStore::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let mut f = line.split('\t');
            let (Some(id), Some(cat), Some(vals), None) = (f.next(), f.next(), f.next(), f.next())
            else {
                return Err(bad(lineno, "expected id, category, values".into()));
            };
            let category = cat.parse().map_err(|e| bad(lineno, format!("{e}")))?;
            let values = vals
                .split(' ')
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(lineno, format!("value: {e}")))?;
            let vector = EmbeddingVector::new(values).map_err(|e| bad(lineno, e.to_string()))?;
            store
                .insert(id, category, vector)
                .map_err(|e| bad(lineno, e.to_string()))?;
        }
        if store.len() != count || (count > 0 && store.dim != dim) {
            return Err(bad(
                1,
                format!(
                    "header says {dim}x{count}, body is {}x{}",
                    store.dim,
                    store.len()
                ),
            ));
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        write_atomic(path, self.to_text().as_bytes()).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Where the vector store for a dataset file lives: beside it, with a
/// `.vectors.tsv` suffix.
pub fn store_path_for(dataset_path: &Path) -> PathBuf {
    let mut name = dataset_path
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".vectors.tsv");
    dataset_path.with_file_name(name)
}

/// Introduction, description and transcription joined by newlines, skipping
/// empty parts.
pub fn build_query_text(video: &VideoRecord) -> Result<String, RetrievalError> {
    let text = join_nonempty(
        &[
            &video.introduction,
            &video.description,
            &video.transcription,
        ],
        "\n",
    );
    if text.is_empty() {
        return Err(RetrievalError::NothingToEmbed(video.id.clone()));
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalScope {
    /// Candidates restricted to the query's category.
    Category(VideoCategory),
    /// Category unknown or absent from the store; all samples were candidates.
    Global,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Hit {
    pub sample_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Retrieval {
    pub scope: RetrievalScope,
    pub hits: Vec<Hit>,
}

/// Top-`k` entries by cosine similarity to `query`, ties by sample id.
///
/// With a known category present in the store, only that category is
/// searched even when it holds fewer than `k` entries. `Other`, `None` or a
/// category with no entries searches the whole store.
pub fn topk_similar(
    store: &VectorStore,
    query: &EmbeddingVector,
    category: Option<VideoCategory>,
    k: usize,
) -> Result<Retrieval, RetrievalError> {
    if store.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    if query.dim() != store.dim {
        return Err(RetrievalError::DimensionMismatch {
            expected: store.dim,
            got: query.dim(),
        });
    }
    let scope = match category {
        Some(c) if c != VideoCategory::Other && store.entries.iter().any(|e| e.category == c) => {
            RetrievalScope::Category(c)
        }
        _ => RetrievalScope::Global,
    };
    let mut hits: Vec<Hit> = store
        .entries
        .iter()
        .filter(|e| match scope {
            RetrievalScope::Category(c) => e.category == c,
            RetrievalScope::Global => true,
        })
        .map(|e| Hit {
            sample_id: e.sample_id.clone(),
            similarity: dense_cosine(query, &e.vector),
        })
        .collect();
    hits.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.sample_id.cmp(&b.sample_id))
    });
    hits.truncate(k);
    Ok(Retrieval { scope, hits })
}

/// Embed every record's query text. Records that cannot be embedded are
/// skipped with a warning naming them.
pub fn embed_and_index(dataset: &Dataset, embedder: &dyn Embedder) -> (VectorStore, Vec<String>) {
    let mut store = VectorStore::new();
    let mut warnings = Vec::new();
    for record in dataset.records() {
        let outcome = build_query_text(record)
            .and_then(|text| Ok(embedder.embed(&text)?))
            .and_then(EmbeddingVector::new)
            .and_then(|v| store.insert(&record.id, record.category, v));
        if let Err(e) = outcome {
            let warning = format!("skipped `{}`: {e}", record.id);
            log::warn!("{warning}");
            warnings.push(warning);
        }
    }
    (store, warnings)
}
