//! Bilingual tokenization, TF-IDF vectors, cosine similarity and k-NN voting.
//!
//! English text is split on non-alphanumeric characters and lower-cased.
//! Chinese text is turned into character unigrams followed by character
//! bigrams for every run of Han characters; Latin runs inside Chinese text are
//! tokenized as English words.
//!
//! Inverse document frequency uses the smoothed form
//! `ln((1 + N) / (1 + df)) + 1` and term frequency is the raw count.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::corpus::{Language, StyleLabel};

/// Default minimum nearest-neighbor similarity for a k-NN vote to count.
pub const DEFAULT_KNN_MIN_SIM: f64 = 0.05;
pub const DEFAULT_KNN_K: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenList {
    pub tokens: Vec<String>,
    pub language: Language,
}

impl TokenList {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x30000..=0x3134F)
}

pub fn tokenize(text: &str, language: Language) -> TokenList {
    let mut tokens = Vec::new();
    match language {
        Language::En => push_words(text, &mut tokens),
        Language::Zh => {
            let mut han_run: Vec<char> = Vec::new();
            let mut other_run = String::new();
            for c in text.chars() {
                if is_han(c) {
                    if !other_run.is_empty() {
                        push_words(&other_run, &mut tokens);
                        other_run.clear();
                    }
                    han_run.push(c);
                } else {
                    if !han_run.is_empty() {
                        push_han(&han_run, &mut tokens);
                        han_run.clear();
                    }
                    other_run.push(c);
                }
            }
            push_han(&han_run, &mut tokens);
            push_words(&other_run, &mut tokens);
        }
    }
    TokenList { tokens, language }
}

fn push_words(text: &str, out: &mut Vec<String>) {
    out.extend(
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase),
    );
}

fn push_han(run: &[char], out: &mut Vec<String>) {
    out.extend(run.iter().map(|c| c.to_string()));
    out.extend(run.windows(2).map(|w| w.iter().collect::<String>()));
}

/// Sparse non-negative vector keyed by vocabulary dimension.
///
/// Entries are kept sorted by dimension with no explicit zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Build from arbitrary pairs. Repeated dimensions are summed and zero
    /// weights dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (d, w) in pairs {
            *map.entry(d).or_insert(0.0) += w;
        }
        Self {
            entries: map.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, dim: usize) -> f64 {
        self.entries
            .binary_search_by_key(&dim, |&(d, _)| d)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().map(|&(d, w)| (d, w * factor)))
    }
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]` against
/// rounding. TF-IDF vectors are non-negative, so their cosine lies in
/// `[0, 1]`. Zero when either vector is empty.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (u.dot(v) / denom).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl TfIdfModel {
    /// Fit on a corpus. Dimensions are assigned in order of first appearance.
    pub fn fit(documents: &[TokenList]) -> Result<Self, TextError> {
        if documents.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for doc in documents {
            let mut seen_here: Vec<usize> = Vec::new();
            for tok in &doc.tokens {
                let next = vocabulary.len();
                let dim = *vocabulary.entry(tok.clone()).or_insert(next);
                if dim == df.len() {
                    df.push(0);
                }
                seen_here.push(dim);
            }
            seen_here.sort_unstable();
            seen_here.dedup();
            for dim in seen_here {
                df[dim] += 1;
            }
        }
        let n = documents.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(Self {
            vocabulary,
            idf,
            doc_count: documents.len(),
        })
    }

    /// Tokenize and fit in one step.
    pub fn fit_texts<'a>(
        texts: impl IntoIterator<Item = (&'a str, Language)>,
    ) -> Result<Self, TextError> {
        let docs: Vec<TokenList> = texts.into_iter().map(|(t, l)| tokenize(t, l)).collect();
        Self::fit(&docs)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocabulary_size(&self) -> usize {
        self.idf.len()
    }

    pub fn dimension(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.dimension(token).map(|d| self.idf[d])
    }

    /// Raw count times idf; out-of-vocabulary tokens are dropped.
    pub fn vectorize(&self, doc: &TokenList) -> SparseVector {
        SparseVector::from_pairs(
            doc.tokens
                .iter()
                .filter_map(|t| self.dimension(t))
                .map(|d| (d, self.idf[d])),
        )
    }

    pub fn vectorize_text(&self, text: &str, language: Language) -> SparseVector {
        self.vectorize(&tokenize(text, language))
    }

    pub fn similarity(&self, a: (&str, Language), b: (&str, Language)) -> f64 {
        cosine(
            &self.vectorize_text(a.0, a.1),
            &self.vectorize_text(b.0, b.1),
        )
    }
}

pub fn fit_tfidf(documents: &[TokenList]) -> Result<TfIdfModel, TextError> {
    TfIdfModel::fit(documents)
}

/// Result of a k-NN vote.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnOutcome {
    pub label: StyleLabel,
    /// Similarity of the nearest neighbor.
    pub top_similarity: f64,
    /// Winning votes divided by neighbors consulted.
    pub margin: f64,
    /// Indices into the labeled set, nearest first.
    pub neighbors: Vec<usize>,
}

/// Majority vote among the `k` most similar labeled vectors.
///
/// Neighbors are ranked by cosine similarity, ties by position in `labeled`.
/// Vote ties go to the earlier label in canonical order. Returns `None` when
/// the labeled set is empty or the nearest neighbor is below `min_sim`.
pub fn knn_vote(
    query: &SparseVector,
    labeled: &[(SparseVector, StyleLabel)],
    k: usize,
    min_sim: f64,
) -> Result<Option<KnnOutcome>, TextError> {
    if k == 0 {
        return Err(TextError::ZeroK);
    }
    if labeled.is_empty() {
        return Ok(None);
    }
    let mut scored: Vec<(usize, f64)> = labeled
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (i, cosine(query, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);

    let top_similarity = scored[0].1;
    if top_similarity < min_sim {
        return Ok(None);
    }
    let mut votes: BTreeMap<StyleLabel, usize> = BTreeMap::new();
    for &(i, _) in &scored {
        *votes.entry(labeled[i].1).or_insert(0) += 1;
    }
    let (label, count) = argmax_canonical(&votes).expect("at least one vote");
    Ok(Some(KnnOutcome {
        label,
        top_similarity,
        margin: count as f64 / scored.len() as f64,
        neighbors: scored.iter().map(|&(i, _)| i).collect(),
    }))
}

/// Largest count; ties resolved toward the smallest key.
pub(crate) fn argmax_canonical<K: Ord + Copy, V: PartialOrd + Copy>(
    counts: &BTreeMap<K, V>,
) -> Option<(K, V)> {
    let mut best: Option<(K, V)> = None;
    for (&k, &v) in counts {
        match best {
            Some((_, bv)) if v.partial_cmp(&bv) != Some(std::cmp::Ordering::Greater) => {}
            _ => best = Some((k, v)),
        }
    }
    best
}
