//! Deterministic stand-ins for every external service.
//!
//! Responses derive from a seeded hash of the request, so the same seed and
//! request give the same answer in every process.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use image::RgbImage;

use super::{
    Describer, Embedder, GenerationClient, MemeDefinition, MemeEncyclopedia, PlatformClient,
    Sentiment, SentimentClient, ServiceError, Transcriber, VideoMeta,
};
use crate::corpus::Language;
use crate::genpipe::GenerationConfig;
use crate::hashing::{hex, seeded_digest, seeded_stream};
use crate::media::decode::{DecodeError, MediaRef};
use crate::stylist::MemeSource;
use crate::textmetrics::tokenize;

/// Name of the fixture file a [`MockPlatform`] reads from its directory.
pub const FIXTURE_VIDEOS: &str = "videos.jsonl";

/// Serves videos from `<dir>/videos.jsonl`, one [`VideoMeta`] per line.
#[derive(Debug, Clone)]
pub struct MockPlatform {
    videos: Vec<VideoMeta>,
}

impl MockPlatform {
    pub fn new(videos: Vec<VideoMeta>) -> Self {
        Self { videos }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, ServiceError> {
        let path = dir.join(FIXTURE_VIDEOS);
        let text = fs::read_to_string(&path).map_err(|e| {
            ServiceError::request("mock-platform", format!("{}: {e}", path.display()))
        })?;
        let mut videos = Vec::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let v: VideoMeta = serde_json::from_str(line).map_err(|e| {
                ServiceError::response(
                    "mock-platform",
                    format!("{}:{}: {e}", path.display(), i + 1),
                )
            })?;
            videos.push(v);
        }
        Ok(Self { videos })
    }
}

impl PlatformClient for MockPlatform {
    fn fetch_videos(&self, tags: &[String], count: usize) -> Result<Vec<VideoMeta>, ServiceError> {
        Ok(self
            .videos
            .iter()
            .filter(|v| tags.is_empty() || v.tags.iter().any(|t| tags.contains(t)))
            .take(count)
            .cloned()
            .collect())
    }

    fn fetch_by_url(&self, url: &str) -> Result<VideoMeta, ServiceError> {
        self.videos
            .iter()
            .find(|v| v.source_url.as_deref() == Some(url))
            .cloned()
            .ok_or_else(|| ServiceError::response("mock-platform", format!("no video at {url}")))
    }
}

fn media_bytes(media: &MediaRef) -> Result<Vec<u8>, ServiceError> {
    match media {
        MediaRef::File(p) => fs::read(p)
            .map_err(|_| ServiceError::Media(DecodeError::Unreadable(p.display().to_string()))),
        MediaRef::Synthetic(s) => Ok(serde_json::to_vec(s).expect("synthetic media serializes")),
    }
}

const WORDS_EN: &[&str] = &[
    "the", "dog", "jumps", "over", "my", "couch", "again", "why", "is", "he", "like", "this",
    "look", "at", "that", "cat", "funny", "moment", "wait", "for", "it", "okay", "so", "today",
];
const WORDS_ZH: &[&str] = &[
    "小狗", "今天", "又", "在", "沙发", "上", "跳", "看", "这个", "猫", "太", "搞笑", "了", "等",
    "一下", "哈哈", "我们", "老板", "说", "真的",
];

fn pseudo_text(seed: u64, key: &[u8], language: Language, len: usize) -> String {
    let words = match language {
        Language::En => WORDS_EN,
        Language::Zh => WORDS_ZH,
    };
    let picked: Vec<&str> = seeded_stream(seed, key)
        .take(len)
        .map(|r| words[(r % words.len() as u64) as usize])
        .collect();
    match language {
        Language::En => picked.join(" "),
        Language::Zh => picked.concat(),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockTranscriber {
    pub seed: u64,
}

impl Transcriber for MockTranscriber {
    fn transcribe(&self, media: &MediaRef, language: Language) -> Result<String, ServiceError> {
        let bytes = media_bytes(media)?;
        let d = seeded_digest(self.seed, &[b"transcribe", &bytes]);
        let len = 8 + (d[0] % 9) as usize;
        Ok(pseudo_text(self.seed, &d, language, len))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockDescriber {
    pub seed: u64,
}

impl Describer for MockDescriber {
    fn describe(
        &self,
        composite: &RgbImage,
        transcription: &str,
        tags: &[String],
        language: Language,
    ) -> Result<String, ServiceError> {
        let d = seeded_digest(
            self.seed,
            &[
                composite.as_raw(),
                transcription.as_bytes(),
                tags.join("\u{1f}").as_bytes(),
            ],
        );
        let speech: String = match language {
            Language::En => transcription
                .split_whitespace()
                .take(12)
                .collect::<Vec<_>>()
                .join(" "),
            Language::Zh => transcription.chars().take(20).collect(),
        };
        let scene = pseudo_text(self.seed, &d, language, 6);
        Ok(match language {
            Language::En => format!(
                "A {} video, {}x{} frames. Scene: {scene}. Speech: {speech}. [ref {}]",
                tags.join(", "),
                composite.width(),
                composite.height(),
                hex(&d[..4])
            ),
            Language::Zh => format!(
                "这是一个关于{}的视频。画面：{scene}。台词：{speech}。〔{}〕",
                tags.join("、"),
                hex(&d[..4])
            ),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    pub seed: u64,
    pub dim: usize,
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ServiceError> {
        Ok(seeded_stream(self.seed, text.as_bytes())
            .take(self.dim)
            .map(|r| (r >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
            .collect())
    }
}

const NEGATIVE_EN: &[&str] = &[
    "bad", "sad", "hate", "awful", "terrible", "worst", "angry", "cry", "boring", "ugh",
];
const NEGATIVE_ZH: &[&str] = &[
    "难过", "讨厌", "生气", "无语", "烦", "哭", "差", "恶心", "失望",
];

/// Negative when the text contains a negative cue word, positive otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordSentiment;

impl SentimentClient for KeywordSentiment {
    fn sentiment(&self, text: &str, language: Language) -> Result<Sentiment, ServiceError> {
        let negative = match language {
            Language::En => {
                let toks = tokenize(text, Language::En).tokens;
                toks.iter().any(|t| NEGATIVE_EN.contains(&t.as_str()))
            }
            Language::Zh => NEGATIVE_ZH.iter().any(|w| text.contains(w)),
        };
        Ok(if negative {
            Sentiment::Negative
        } else {
            Sentiment::Positive
        })
    }
}

/// Always answers with the same label.
#[derive(Debug, Clone, Copy)]
pub struct FixedSentiment(pub Sentiment);

impl SentimentClient for FixedSentiment {
    fn sentiment(&self, _text: &str, _language: Language) -> Result<Sentiment, ServiceError> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationCall {
    pub prompt: String,
    pub config: GenerationConfig,
}

/// Builds a comment from words of the prompt chosen by a hash of the prompt
/// and sampling configuration, and records every call.
#[derive(Debug, Default)]
pub struct MockGenerator {
    pub seed: u64,
    calls: Mutex<Vec<GenerationCall>>,
}

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<GenerationCall> {
        self.calls.lock().expect("mock lock").clone()
    }
}

impl GenerationClient for MockGenerator {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, ServiceError> {
        self.calls.lock().expect("mock lock").push(GenerationCall {
            prompt: prompt.to_string(),
            config: *config,
        });
        let key = seeded_digest(
            self.seed,
            &[
                prompt.as_bytes(),
                &config.temperature.to_le_bytes(),
                &config.top_p.to_le_bytes(),
                &config.repetition_penalty.to_le_bytes(),
            ],
        );
        let zh = prompt
            .chars()
            .filter(|c| ('\u{4e00}'..='\u{9fff}').contains(c))
            .count()
            > prompt.len() / 20;
        let language = if zh { Language::Zh } else { Language::En };
        let pool: Vec<String> = tokenize(prompt, language)
            .tokens
            .into_iter()
            .filter(|t| t.chars().count() >= 2 && !t.chars().all(|c| c.is_ascii_digit()))
            .collect();
        if pool.is_empty() {
            return Ok(format!("\"{}\"", hex(&key[..6])));
        }
        let len = 6 + (key[0] % 6) as usize;
        let words: Vec<&str> = seeded_stream(self.seed, &key)
            .take(len)
            .map(|r| pool[(r % pool.len() as u64) as usize].as_str())
            .collect();
        Ok(match language {
            Language::En => format!("\"{}\"\n", words.join(" ")),
            Language::Zh => format!("“{}”\n", words.concat()),
        })
    }
}

/// Table-driven encyclopedia that counts lookups.
#[derive(Debug)]
pub struct MockEncyclopedia {
    source: MemeSource,
    table: BTreeMap<String, MemeDefinition>,
    failing: Vec<String>,
    calls: AtomicUsize,
}

impl MockEncyclopedia {
    pub fn new(source: MemeSource) -> Self {
        Self {
            source,
            table: BTreeMap::new(),
            failing: Vec::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_entry(mut self, term: &str, definition: &str) -> Self {
        self.table.insert(
            term.to_lowercase(),
            MemeDefinition {
                name: term.to_string(),
                definition: definition.to_string(),
            },
        );
        self
    }

    /// Lookups of `term` fail with a request error.
    pub fn failing_on(mut self, term: &str) -> Self {
        self.failing.push(term.to_lowercase());
        self
    }

    /// Load `term<TAB>definition` lines.
    pub fn from_tsv(source: MemeSource, path: &Path) -> Result<Self, ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ServiceError::request("mock-encyclopedia", format!("{}: {e}", path.display()))
        })?;
        let mut enc = Self::new(source);
        for line in text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        {
            if let Some((term, def)) = line.split_once('\t') {
                enc = enc.with_entry(term.trim(), def.trim());
            }
        }
        Ok(enc)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl MemeEncyclopedia for MockEncyclopedia {
    fn source(&self) -> MemeSource {
        self.source
    }

    fn lookup(&self, term: &str) -> Result<Option<MemeDefinition>, ServiceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = term.to_lowercase();
        if self.failing.contains(&key) {
            return Err(ServiceError::request(
                "mock-encyclopedia",
                "simulated outage",
            ));
        }
        Ok(self.table.get(&key).cloned())
    }
}

/// Fixture file of mock encyclopedia entries inside a fixture directory.
pub fn encyclopedia_fixture(dir: &Path, source: MemeSource) -> PathBuf {
    let name = match source {
        MemeSource::RegengBaike => "regeng_baike.tsv",
        MemeSource::UrbanDictionary => "urban_dictionary.tsv",
        MemeSource::KnowYourMeme => "know_your_meme.tsv",
        MemeSource::LocalCache => "local_cache.tsv",
    };
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::decode::SyntheticMedia;

    fn synthetic(seed: u64) -> MediaRef {
        MediaRef::Synthetic(SyntheticMedia {
            duration_s: 10.0,
            fps: 25.0,
            width: 32,
            height: 18,
            seed,
            climaxes: vec![],
        })
    }

    #[test]
    fn transcriber_is_seeded_and_stable() {
        let t = MockTranscriber { seed: 1 };
        let a = t.transcribe(&synthetic(5), Language::En).unwrap();
        assert_eq!(a, t.transcribe(&synthetic(5), Language::En).unwrap());
        assert!(!a.is_empty());
        assert_ne!(
            a,
            MockTranscriber { seed: 2 }
                .transcribe(&synthetic(5), Language::En)
                .unwrap()
        );
    }

    #[test]
    fn transcriber_unreadable_file() {
        let t = MockTranscriber { seed: 1 };
        let err = t
            .transcribe(&MediaRef::File("/no/such/clip.mp4".into()), Language::Zh)
            .unwrap_err();
        assert!(matches!(
            err,
            ServiceError::Media(DecodeError::Unreadable(_))
        ));
    }

    #[test]
    fn describer_is_deterministic_and_accepts_no_tags() {
        let d = MockDescriber { seed: 3 };
        let img = RgbImage::new(4, 4);
        let a = d.describe(&img, "hello there", &[], Language::En).unwrap();
        assert_eq!(
            a,
            d.describe(&img, "hello there", &[], Language::En).unwrap()
        );
        assert!(a.contains("hello there"));
    }

    #[test]
    fn embedder_range_and_determinism() {
        let e = MockEmbedder { seed: 9, dim: 16 };
        let v = e.embed("abc").unwrap();
        assert_eq!(v.len(), 16);
        assert!(v.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(v, e.embed("abc").unwrap());
        assert_ne!(v, e.embed("abd").unwrap());
    }

    #[test]
    fn platform_fixture_filtering() {
        let meta = |id: &str, tag: &str| VideoMeta {
            id: id.into(),
            platform: crate::corpus::Platform::YouTube,
            category: crate::corpus::VideoCategory::FunnyAnimal,
            tags: vec![tag.into()],
            introduction: String::new(),
            source_url: Some(format!("https://example.test/{id}")),
            comments: vec![],
            media: synthetic(1),
        };
        let p = MockPlatform::new(vec![
            meta("a", "dogs"),
            meta("b", "dogs"),
            meta("c", "dogs"),
        ]);
        let tags = vec!["dogs".to_string()];
        assert_eq!(p.fetch_videos(&tags, 2).unwrap().len(), 2);
        assert!(p.fetch_videos(&tags, 0).unwrap().is_empty());
        assert!(p.fetch_videos(&["cats".to_string()], 5).unwrap().is_empty());
        assert_eq!(p.fetch_by_url("https://example.test/b").unwrap().id, "b");
    }

    #[test]
    fn generator_records_config_and_is_stable() {
        let g = MockGenerator::new(4);
        let cfg = GenerationConfig::default();
        let a = g
            .complete("a dog on a skateboard at the park", &cfg)
            .unwrap();
        let b = g
            .complete("a dog on a skateboard at the park", &cfg)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(g.calls().len(), 2);
        assert_eq!(g.calls()[0].config, cfg);
    }

    #[test]
    fn encyclopedia_counts_and_fails_on_demand() {
        let e = MockEncyclopedia::new(MemeSource::UrbanDictionary)
            .with_entry("rizz", "charisma")
            .failing_on("down");
        assert_eq!(e.lookup("RIZZ").unwrap().unwrap().definition, "charisma");
        assert!(e.lookup("nothing").unwrap().is_none());
        assert!(e.lookup("down").is_err());
        assert_eq!(e.calls(), 3);
    }
}
