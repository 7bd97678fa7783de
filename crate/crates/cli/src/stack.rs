//! Builds the service clients for a run: all mocks, or HTTP clients from
//! the `[services]` section.

use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{anyhow, Context};

use quipgen_core::media::decode::{DispatchDecoder, MediaDecoder};
use quipgen_core::services::http::{
    HttpDescriber, HttpEmbedder, HttpGenerationClient, HttpPlatformClient, HttpSentiment,
    HttpTranscriber, MetaDescriptionScraper, UrbanDictionaryClient,
};
use quipgen_core::services::mock::{
    encyclopedia_fixture, KeywordSentiment, MockDescriber, MockEmbedder, MockEncyclopedia,
    MockGenerator, MockPlatform, MockTranscriber,
};
use quipgen_core::services::{
    ClientConfig, Describer, Embedder, GenerationClient, MemeDefinition, MemeEncyclopedia,
    PlatformClient, SentimentClient, ServiceError, Transcriber,
};
use quipgen_core::stylist::MemeSource;

use crate::config::PipelineConfig;

pub struct Stack {
    pub platform: Box<dyn PlatformClient>,
    pub transcriber: Box<dyn Transcriber>,
    pub describer: Box<dyn Describer>,
    pub embedder: Box<dyn Embedder>,
    pub sentiment: Box<dyn SentimentClient>,
    pub generator: Box<dyn GenerationClient>,
    pub encyclopedias: Vec<CountingEncyclopedia>,
    pub decoder: Box<dyn MediaDecoder>,
}

/// Wraps an encyclopedia and counts lookups, for provenance reports.
pub struct CountingEncyclopedia {
    inner: Box<dyn MemeEncyclopedia>,
    calls: AtomicUsize,
}

impl CountingEncyclopedia {
    pub fn new(inner: Box<dyn MemeEncyclopedia>) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl MemeEncyclopedia for CountingEncyclopedia {
    fn source(&self) -> MemeSource {
        self.inner.source()
    }

    fn lookup(&self, term: &str) -> Result<Option<MemeDefinition>, ServiceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.lookup(term)
    }
}

impl Stack {
    pub fn build(config: &PipelineConfig) -> anyhow::Result<Self> {
        if config.mock {
            Self::mock(config)
        } else {
            Self::live(config)
        }
    }

    pub fn encyclopedia_calls(&self) -> usize {
        self.encyclopedias
            .iter()
            .map(CountingEncyclopedia::calls)
            .sum()
    }

    fn mock(config: &PipelineConfig) -> anyhow::Result<Self> {
        let seed = config.seed;
        let fixtures = config.paths.fixtures.as_deref();
        let platform = match fixtures {
            Some(dir) => MockPlatform::from_dir(dir)
                .with_context(|| format!("loading mock fixtures from {}", dir.display()))?,
            None => MockPlatform::new(Vec::new()),
        };
        let mut encyclopedias = Vec::new();
        for source in [
            MemeSource::RegengBaike,
            MemeSource::UrbanDictionary,
            MemeSource::KnowYourMeme,
        ] {
            let enc = match fixtures.map(|d| encyclopedia_fixture(d, source)) {
                Some(path) if path.is_file() => MockEncyclopedia::from_tsv(source, &path)?,
                _ => MockEncyclopedia::new(source),
            };
            encyclopedias.push(CountingEncyclopedia::new(Box::new(enc)));
        }
        Ok(Self {
            platform: Box::new(platform),
            transcriber: Box::new(MockTranscriber { seed }),
            describer: Box::new(MockDescriber { seed }),
            embedder: Box::new(MockEmbedder {
                seed,
                dim: config.retrieval.mock_dim,
            }),
            sentiment: Box::new(KeywordSentiment),
            generator: Box::new(MockGenerator::new(seed)),
            encyclopedias,
            decoder: Box::new(DispatchDecoder::default()),
        })
    }

    fn live(config: &PipelineConfig) -> anyhow::Result<Self> {
        let s = &config.services;
        fn need(c: &Option<ClientConfig>, name: &str) -> anyhow::Result<ClientConfig> {
            c.clone().ok_or_else(|| {
                anyhow!("[services.{name}] is not configured; set it or pass --mock")
            })
        }
        let mut encyclopedias = Vec::new();
        if let Some(c) = &s.regeng_baike {
            encyclopedias.push(CountingEncyclopedia::new(Box::new(
                MetaDescriptionScraper::new(MemeSource::RegengBaike, c.clone())?,
            )));
        }
        if let Some(c) = &s.urban_dictionary {
            encyclopedias.push(CountingEncyclopedia::new(Box::new(
                UrbanDictionaryClient::new(c.clone())?,
            )));
        }
        if let Some(c) = &s.know_your_meme {
            encyclopedias.push(CountingEncyclopedia::new(Box::new(
                MetaDescriptionScraper::new(MemeSource::KnowYourMeme, c.clone())?,
            )));
        }
        Ok(Self {
            platform: Box::new(HttpPlatformClient::new(need(&s.platform, "platform")?)?),
            transcriber: Box::new(HttpTranscriber::new(need(&s.transcriber, "transcriber")?)?),
            describer: Box::new(HttpDescriber::new(need(&s.describer, "describer")?)?),
            embedder: Box::new(HttpEmbedder::new(need(&s.embedder, "embedder")?)?),
            sentiment: Box::new(HttpSentiment::new(need(&s.sentiment, "sentiment")?)?),
            generator: Box::new(HttpGenerationClient::new(need(&s.generator, "generator")?)?),
            encyclopedias,
            decoder: Box::new(DispatchDecoder::default()),
        })
    }
}

/// Only the sentiment client, for scoring without the rest of the stack.
pub fn sentiment_client(config: &PipelineConfig) -> anyhow::Result<Box<dyn SentimentClient>> {
    if config.mock {
        return Ok(Box::new(KeywordSentiment));
    }
    let c =
        config.services.sentiment.clone().ok_or_else(|| {
            anyhow!("[services.sentiment] is not configured; set it or pass --mock")
        })?;
    Ok(Box::new(HttpSentiment::new(c)?))
}
