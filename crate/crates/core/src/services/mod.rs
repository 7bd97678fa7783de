//! Contracts for every external dependency, plus deterministic mocks and thin
//! HTTP implementations.
//!
//! Credentials are never stored: a [`ClientConfig`] only names the
//! environment variable to read at request time.

pub mod http;
pub mod mock;
pub mod workqueue;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommentRecord, Language, Platform, VideoCategory};
use crate::genpipe::GenerationConfig;
use crate::media::decode::{DecodeError, MediaRef};
use crate::stylist::MemeSource;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{service}: request failed: {message}")]
    Request { service: String, message: String },
    #[error("{service}: HTTP status {status}")]
    Status { service: String, status: u16 },
    #[error("{service}: unexpected response: {message}")]
    Response { service: String, message: String },
    #[error("environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error(transparent)]
    Media(#[from] DecodeError),
    #[error("{service}: gave up after {attempts} attempts: {last}")]
    Exhausted {
        service: String,
        attempts: u32,
        last: Box<ServiceError>,
    },
}

impl ServiceError {
    pub fn request(service: &str, message: impl Into<String>) -> Self {
        ServiceError::Request {
            service: service.to_string(),
            message: message.into(),
        }
    }

    pub fn response(service: &str, message: impl Into<String>) -> Self {
        ServiceError::Response {
            service: service.to_string(),
            message: message.into(),
        }
    }

    /// Number of attempts made, when this error came out of a retry loop.
    pub fn attempts(&self) -> Option<u32> {
        match self {
            ServiceError::Exhausted { attempts, .. } => Some(*attempts),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the API key, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env_var: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Model name sent to chat or embedding endpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            credential_env_var: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            model: None,
        }
    }

    /// Read the credential from the environment. `Ok(None)` when no variable
    /// is configured.
    pub fn credential(&self) -> Result<Option<String>, ServiceError> {
        match &self.credential_env_var {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ServiceError::MissingCredential(var.clone())),
        }
    }
}

/// Run `op` up to `max_retries + 1` times. Each failure is logged; after the
/// last one the error is wrapped in [`ServiceError::Exhausted`].
pub fn with_retries<T>(
    service: &str,
    max_retries: u32,
    mut op: impl FnMut(u32) -> Result<T, ServiceError>,
) -> Result<T, ServiceError> {
    let attempts = max_retries + 1;
    let mut attempt = 1;
    loop {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::warn!("{service}: attempt {attempt}/{attempts} failed: {e}");
                if attempt == attempts {
                    return Err(ServiceError::Exhausted {
                        service: service.to_string(),
                        attempts,
                        last: Box::new(e),
                    });
                }
                attempt += 1;
            }
        }
    }
}

/// Platform-side metadata for one video, before processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoMeta {
    pub id: String,
    pub platform: Platform,
    pub category: VideoCategory,
    pub tags: Vec<String>,
    pub introduction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    /// All comments as crawled, in any order.
    pub comments: Vec<CommentRecord>,
    pub media: MediaRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sentiment {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemeDefinition {
    pub name: String,
    pub definition: String,
}

pub trait PlatformClient: Send + Sync {
    /// Up to `count` videos matching any of `tags`.
    fn fetch_videos(&self, tags: &[String], count: usize) -> Result<Vec<VideoMeta>, ServiceError>;

    fn fetch_by_url(&self, url: &str) -> Result<VideoMeta, ServiceError>;
}

pub trait Transcriber: Send + Sync {
    fn transcribe(&self, media: &MediaRef, language: Language) -> Result<String, ServiceError>;
}

pub trait Describer: Send + Sync {
    fn describe(
        &self,
        composite: &RgbImage,
        transcription: &str,
        tags: &[String],
        language: Language,
    ) -> Result<String, ServiceError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ServiceError>;
}

pub trait SentimentClient: Send + Sync {
    fn sentiment(&self, text: &str, language: Language) -> Result<Sentiment, ServiceError>;
}

pub trait GenerationClient: Send + Sync {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, ServiceError>;
}

pub trait MemeEncyclopedia: Send + Sync {
    fn source(&self) -> MemeSource;

    fn lookup(&self, term: &str) -> Result<Option<MemeDefinition>, ServiceError>;
}
