//! Building blocks for generating stylized comments on short videos.
//!
//! The crate covers the whole path from raw platform data to a scored
//! comment:
//!
//! - [`corpus`]: video records, the dataset file format and validation.
//! - [`textmetrics`]: tokenization, TF-IDF, cosine and k-NN voting.
//! - [`labeler`]: the tiered comment-style labeling cascade.
//! - [`media`]: frame sampling, composite images and climax detection.
//! - [`retrieval`]: embedding store and category-aware top-k search.
//! - [`stylist`]: style voting, few-shot examples and the meme cache.
//! - [`genpipe`]: prompt templates and generation calls.
//! - [`scorer`]: originality, relevance and style-conformity scores.
//! - [`services`]: contracts, HTTP clients and deterministic mocks for
//!   every external dependency.

pub mod corpus;
pub mod fsutil;
pub mod genpipe;
pub mod hashing;
pub mod labeler;
pub mod media;
pub mod retrieval;
pub mod scorer;
pub mod services;
pub mod stylist;
pub mod textmetrics;

pub use corpus::{
    load_dataset, save_dataset, CommentRecord, Dataset, LabelTier, Language, MemeSource, Platform,
    StyleLabel, VideoCategory, VideoRecord,
};
pub use genpipe::{GenerationConfig, PromptBundle, PromptTemplate};
pub use labeler::{CascadeConfig, LabelDecision, LabelResources};
pub use retrieval::{EmbeddingVector, VectorStore};
pub use scorer::{ScoreBreakdown, ScoringContext, ScoringParams};
pub use stylist::{MemeCache, MemeEntry, StyleDecision};
pub use textmetrics::{TfIdfModel, TokenList};
