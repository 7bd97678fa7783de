//! Synthetic inputs shared by the benchmarks.

use quipgen_core::corpus::{
    CommentRecord, Dataset, Language, Platform, VideoCategory, VideoRecord,
};
use quipgen_core::retrieval::{EmbeddingVector, VectorStore};

const WORDS: [&str; 16] = [
    "cat",
    "dog",
    "jar",
    "moon",
    "piano",
    "ratio",
    "pov",
    "lol",
    "vacuum",
    "robot",
    "choir",
    "goat",
    "sure",
    "wow",
    "hilarious",
    "skit",
];

/// Cheap deterministic word picker.
fn pick(i: usize, j: usize) -> &'static str {
    WORDS[(i.wrapping_mul(31) ^ j.wrapping_mul(17)) % WORDS.len()]
}

pub fn sentence(i: usize, len: usize) -> String {
    (0..len).map(|j| pick(i, j)).collect::<Vec<_>>().join(" ")
}

/// `videos` English records with five comments each.
pub fn dataset(videos: usize) -> Dataset {
    let records = (0..videos)
        .map(|i| VideoRecord {
            id: format!("v{i}"),
            platform: Platform::YouTube,
            language: Language::En,
            category: VideoCategory::ALL[i % VideoCategory::ALL.len()],
            tags: vec![],
            introduction: sentence(i, 6),
            description: sentence(i + 1, 20),
            transcription: sentence(i + 2, 10),
            comments: (0..5)
                .map(|c| CommentRecord::new(sentence(i * 5 + c, 8), 100 - c as u64))
                .collect(),
            source_url: None,
        })
        .collect();
    Dataset::new(records)
}

/// A store of `n` vectors of dimension `dim` spread over all categories.
pub fn store(n: usize, dim: usize) -> VectorStore {
    let mut store = VectorStore::new();
    for i in 0..n {
        let v = (0..dim)
            .map(|d| ((i * 7 + d * 13) % 23) as f64 - 11.0)
            .collect();
        store
            .insert(
                &format!("s{i}"),
                VideoCategory::ALL[i % VideoCategory::ALL.len()],
                EmbeddingVector::new(v).expect("finite"),
            )
            .expect("consistent dimension");
    }
    store
}
