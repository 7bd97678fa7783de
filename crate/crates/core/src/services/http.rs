//! Thin blocking HTTP clients. These are best-effort adapters and are not
//! exercised by the offline test suite beyond construction and error paths.

use std::time::Duration;

use base64::Engine;
use image::RgbImage;
use regex::Regex;
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::Url;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::{
    with_retries, ClientConfig, Describer, Embedder, GenerationClient, MemeDefinition,
    MemeEncyclopedia, PlatformClient, Sentiment, SentimentClient, ServiceError, Transcriber,
    VideoMeta,
};
use crate::corpus::Language;
use crate::genpipe::GenerationConfig;
use crate::media::decode::{DecodeError, MediaRef};
use crate::stylist::MemeSource;

/// Shared transport: timeout, retries and bearer credential lookup.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    service: &'static str,
    config: ClientConfig,
    client: Client,
}

impl HttpTransport {
    pub fn new(service: &'static str, config: ClientConfig) -> Result<Self, ServiceError> {
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .user_agent(concat!("quipgen/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| ServiceError::request(service, e.to_string()))?;
        Ok(Self {
            service,
            config,
            client,
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn url(&self, params: &[(&str, &str)]) -> Result<Url, ServiceError> {
        Url::parse_with_params(&self.config.endpoint, params)
            .map_err(|e| ServiceError::request(self.service, e.to_string()))
    }

    fn send<T: DeserializeOwned>(
        &self,
        build: impl Fn(&Client) -> RequestBuilder,
    ) -> Result<T, ServiceError> {
        let service = self.service;
        with_retries(service, self.config.max_retries, |_| {
            let mut req = build(&self.client);
            if let Some(key) = self.config.credential()? {
                req = req.bearer_auth(key);
            }
            let resp = req
                .send()
                .map_err(|e| ServiceError::request(service, e.without_url().to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(ServiceError::Status {
                    service: service.to_string(),
                    status: status.as_u16(),
                });
            }
            resp.json::<T>()
                .map_err(|e| ServiceError::response(service, e.to_string()))
        })
    }

    fn get_text(&self, url: Url) -> Result<String, ServiceError> {
        let service = self.service;
        with_retries(service, self.config.max_retries, |_| {
            let resp = self
                .client
                .get(url.clone())
                .send()
                .map_err(|e| ServiceError::request(service, e.without_url().to_string()))?;
            if !resp.status().is_success() {
                return Err(ServiceError::Status {
                    service: service.to_string(),
                    status: resp.status().as_u16(),
                });
            }
            resp.text()
                .map_err(|e| ServiceError::response(service, e.to_string()))
        })
    }
}

fn field<'a>(service: &str, v: &'a Value, pointer: &str) -> Result<&'a Value, ServiceError> {
    v.pointer(pointer)
        .ok_or_else(|| ServiceError::response(service, format!("missing `{pointer}`")))
}

fn str_field(service: &str, v: &Value, pointer: &str) -> Result<String, ServiceError> {
    field(service, v, pointer)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| ServiceError::response(service, format!("`{pointer}` is not a string")))
}

/// OpenAI-style chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpGenerationClient {
    transport: HttpTransport,
}

impl HttpGenerationClient {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("generation", config)?,
        })
    }
}

impl GenerationClient for HttpGenerationClient {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, ServiceError> {
        let cfg = self.transport.config();
        let body = json!({
            "model": cfg.model.clone().unwrap_or_default(),
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "repetition_penalty": config.repetition_penalty,
            "max_tokens": config.max_tokens,
        });
        let url = self.transport.url(&[])?;
        // Retries are applied by the caller's generation loop.
        let t = HttpTransport {
            config: ClientConfig {
                max_retries: 0,
                ..cfg.clone()
            },
            ..self.transport.clone()
        };
        let v: Value = t.send(|c| c.post(url.clone()).json(&body))?;
        str_field("generation", &v, "/choices/0/message/content")
    }
}

/// OpenAI-style embeddings endpoint.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    transport: HttpTransport,
}

impl HttpEmbedder {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("embedding", config)?,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ServiceError> {
        let body = json!({
            "model": self.transport.config().model.clone().unwrap_or_default(),
            "input": text,
        });
        let url = self.transport.url(&[])?;
        let v: Value = self.transport.send(|c| c.post(url.clone()).json(&body))?;
        field("embedding", &v, "/data/0/embedding")?
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| ServiceError::response("embedding", "embedding is not a number array"))
    }
}

/// POST `{"text", "language"}`, expects `{"label": "positive" | "negative"}`.
#[derive(Debug, Clone)]
pub struct HttpSentiment {
    transport: HttpTransport,
}

impl HttpSentiment {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("sentiment", config)?,
        })
    }
}

impl SentimentClient for HttpSentiment {
    fn sentiment(&self, text: &str, language: Language) -> Result<Sentiment, ServiceError> {
        let body = json!({"text": text, "language": language.as_str()});
        let url = self.transport.url(&[])?;
        let v: Value = self.transport.send(|c| c.post(url.clone()).json(&body))?;
        let label = str_field("sentiment", &v, "/label")?;
        match label.to_ascii_lowercase().as_str() {
            "positive" | "pos" | "label_1" => Ok(Sentiment::Positive),
            "negative" | "neg" | "label_0" => Ok(Sentiment::Negative),
            other => Err(ServiceError::response(
                "sentiment",
                format!("label `{other}`"),
            )),
        }
    }
}

/// POST raw media bytes, expects `{"text"}`.
#[derive(Debug, Clone)]
pub struct HttpTranscriber {
    transport: HttpTransport,
}

impl HttpTranscriber {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("transcription", config)?,
        })
    }
}

impl Transcriber for HttpTranscriber {
    fn transcribe(&self, media: &MediaRef, language: Language) -> Result<String, ServiceError> {
        let bytes = match media {
            MediaRef::File(p) => {
                std::fs::read(p).map_err(|_| DecodeError::Unreadable(p.display().to_string()))?
            }
            MediaRef::Synthetic(_) => {
                return Err(DecodeError::Unsupported(media.describe()).into());
            }
        };
        let url = self.transport.url(&[("language", language.as_str())])?;
        let v: Value = self.transport.send(|c| {
            c.post(url.clone())
                .header("content-type", "application/octet-stream")
                .body(bytes.clone())
        })?;
        str_field("transcription", &v, "/text")
    }
}

/// POST the composite as base64 PNG with transcription and tags, expects
/// `{"description"}`.
#[derive(Debug, Clone)]
pub struct HttpDescriber {
    transport: HttpTransport,
}

impl HttpDescriber {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("description", config)?,
        })
    }
}

impl Describer for HttpDescriber {
    fn describe(
        &self,
        composite: &RgbImage,
        transcription: &str,
        tags: &[String],
        language: Language,
    ) -> Result<String, ServiceError> {
        let mut png = Vec::new();
        composite
            .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
            .map_err(|e| ServiceError::request("description", e.to_string()))?;
        let body = json!({
            "image_png_base64": base64::engine::general_purpose::STANDARD.encode(&png),
            "transcription": transcription,
            "tags": tags,
            "language": language.as_str(),
        });
        let url = self.transport.url(&[])?;
        let v: Value = self.transport.send(|c| c.post(url.clone()).json(&body))?;
        str_field("description", &v, "/description")
    }
}

/// GET `endpoint?tags=a,b&count=n` returning a JSON array of [`VideoMeta`],
/// and `endpoint?url=...` returning one.
#[derive(Debug, Clone)]
pub struct HttpPlatformClient {
    transport: HttpTransport,
}

impl HttpPlatformClient {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("platform", config)?,
        })
    }
}

impl PlatformClient for HttpPlatformClient {
    fn fetch_videos(&self, tags: &[String], count: usize) -> Result<Vec<VideoMeta>, ServiceError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let url = self
            .transport
            .url(&[("tags", &tags.join(",")), ("count", &count.to_string())])?;
        let mut videos: Vec<VideoMeta> = self.transport.send(|c| c.get(url.clone()))?;
        videos.truncate(count);
        Ok(videos)
    }

    fn fetch_by_url(&self, video_url: &str) -> Result<VideoMeta, ServiceError> {
        let url = self.transport.url(&[("url", video_url)])?;
        self.transport.send(|c| c.get(url.clone()))
    }
}

/// Urban Dictionary's public `define?term=` API.
#[derive(Debug, Clone)]
pub struct UrbanDictionaryClient {
    transport: HttpTransport,
}

impl UrbanDictionaryClient {
    pub fn new(config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            transport: HttpTransport::new("urban-dictionary", config)?,
        })
    }
}

impl MemeEncyclopedia for UrbanDictionaryClient {
    fn source(&self) -> MemeSource {
        MemeSource::UrbanDictionary
    }

    fn lookup(&self, term: &str) -> Result<Option<MemeDefinition>, ServiceError> {
        let url = self.transport.url(&[("term", term)])?;
        let v: Value = self.transport.send(|c| c.get(url.clone()))?;
        Ok(v.pointer("/list/0").and_then(|e| {
            Some(MemeDefinition {
                name: e.get("word")?.as_str()?.to_string(),
                definition: e.get("definition")?.as_str()?.replace(['[', ']'], ""),
            })
        }))
    }
}

/// Fetches `<endpoint>/<slug>` and reads the page's meta description. Used
/// for Know Your Meme and Regeng Baike pages.
#[derive(Debug, Clone)]
pub struct MetaDescriptionScraper {
    source: MemeSource,
    transport: HttpTransport,
}

impl MetaDescriptionScraper {
    pub fn new(source: MemeSource, config: ClientConfig) -> Result<Self, ServiceError> {
        Ok(Self {
            source,
            transport: HttpTransport::new("meme-scraper", config)?,
        })
    }
}

pub(crate) fn meta_description(html: &str) -> Option<String> {
    let re = Regex::new(
        r#"(?is)<meta\s+(?:name|property)\s*=\s*"(?:og:)?description"\s+content\s*=\s*"([^"]*)""#,
    )
    .expect("static regex");
    re.captures(html)
        .map(|c| c[1].trim().to_string())
        .filter(|s| !s.is_empty())
}

impl MemeEncyclopedia for MetaDescriptionScraper {
    fn source(&self) -> MemeSource {
        self.source
    }

    fn lookup(&self, term: &str) -> Result<Option<MemeDefinition>, ServiceError> {
        let slug: String = term
            .trim()
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join("-");
        let base = self.transport.config().endpoint.trim_end_matches('/');
        let url = Url::parse(&format!("{base}/{slug}"))
            .map_err(|e| ServiceError::request("meme-scraper", e.to_string()))?;
        match self.transport.get_text(url) {
            Ok(html) => Ok(meta_description(&html).map(|definition| MemeDefinition {
                name: term.to_string(),
                definition,
            })),
            Err(ServiceError::Exhausted { last, .. })
                if matches!(*last, ServiceError::Status { status: 404, .. }) =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}
