//! Prompt assembly and generation-client invocation.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Language, Platform, StyleLabel};
use crate::scorer::LengthBounds;
use crate::services::{with_retries, GenerationClient, ServiceError};
use crate::stylist::MemeEntry;

const DOUYIN_ZH: &str = include_str!("../data/templates/douyin_zh.txt");
const YOUTUBE_EN: &str = include_str!("../data/templates/youtube_en.txt");

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("invalid template: {0}")]
    Template(String),
    #[error("template placeholder `{{{{{0}}}}}` has no value")]
    UnresolvedPlaceholder(String),
    #[error("invalid prompt bundle: {0}")]
    Bundle(String),
    #[error("generation returned an empty comment")]
    EmptyCompletion,
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("i/o error on {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 0.75,
            top_p: 0.9,
            repetition_penalty: 1.1,
            max_tokens: 128,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(GenError::Config(format!(
                "temperature {} must be > 0",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenError::Config(format!(
                "top_p {} must be in (0, 1]",
                self.top_p
            )));
        }
        if !(self.repetition_penalty >= 1.0 && self.repetition_penalty.is_finite()) {
            return Err(GenError::Config(format!(
                "repetition_penalty {} must be >= 1",
                self.repetition_penalty
            )));
        }
        if self.max_tokens == 0 {
            return Err(GenError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a prompt is built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub platform: Platform,
    pub language: Language,
    pub introduction: String,
    pub description: String,
    pub transcription: String,
    pub style: StyleLabel,
    pub examples: Vec<String>,
    pub meme: Option<MemeEntry>,
}

impl PromptBundle {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.meme.is_some() && self.style != StyleLabel::Meme {
            return Err(GenError::Bundle(format!(
                "a meme was attached but the style is {}",
                self.style
            )));
        }
        Ok(())
    }
}

/// Short definition of each style, shown to the model with the target style.
pub fn style_definition(style: StyleLabel, language: Language) -> &'static str {
    use StyleLabel::*;
    match (language, style) {
        (Language::En, Puns) => {
            "Play on words: exploit a word's double meaning or a similar-sounding word."
        }
        (Language::En, Rhyming) => {
            "Rhyming: a short line whose phrases rhyme or follow a catchy rhythm."
        }
        (Language::En, Meme) => "Meme: reference a popular internet meme or catchphrase.",
        (Language::En, Sarcasm) => {
            "Sarcasm: say the opposite of what you mean, with an ironic or teasing tone."
        }
        (Language::En, GeneralHumor) => {
            "General humor: a light, playful reaction that makes people laugh."
        }
        (Language::En, ContentExtraction) => {
            "Content extraction: pick out a concrete detail or line from the video and riff on it."
        }
        (Language::Zh, Puns) => "谐音双关：利用同音字或一词多义制造笑点。",
        (Language::Zh, Rhyming) => "押韵：句子押韵或像顺口溜一样朗朗上口。",
        (Language::Zh, Meme) => "玩梗：引用网络流行梗或流行语。",
        (Language::Zh, Sarcasm) => "反讽：正话反说，带有调侃或讽刺的语气。",
        (Language::Zh, GeneralHumor) => "一般幽默：轻松俏皮、让人会心一笑的反应。",
        (Language::Zh, ContentExtraction) => "内容提取：抓住视频中的具体细节或台词进行发挥。",
    }
}

fn length_norm(language: Language) -> String {
    let b = LengthBounds::default_for(language);
    match language {
        Language::En => format!("{}-{} words", b.min, b.max),
        Language::Zh => format!("{}-{}个字", b.min, b.max),
    }
}

const MEME_OPEN: &str = "#meme";
const MEME_CLOSE: &str = "/meme";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Var(String),
    MemeBlock(Vec<Piece>),
}

/// A prompt template with `{{name}}` placeholders and an optional
/// `{{#meme}}...{{/meme}}` block rendered only when a meme is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, GenError> {
        let mut top = Vec::new();
        let mut block: Option<Vec<Piece>> = None;
        let mut rest = text;
        while let Some(open) = rest.find("{{") {
            let (before, after) = rest.split_at(open);
            let close = after
                .find("}}")
                .ok_or_else(|| GenError::Template("unterminated `{{`".into()))?;
            let name = after[2..close].trim();
            let in_block = block.is_some();
            let target = block.as_mut().unwrap_or(&mut top);
            if !before.is_empty() {
                target.push(Piece::Text(before.to_string()));
            }
            match name {
                MEME_OPEN if in_block => {
                    return Err(GenError::Template("nested meme block".into()))
                }
                MEME_OPEN => block = Some(Vec::new()),
                MEME_CLOSE => {
                    let inner = block
                        .take()
                        .ok_or_else(|| GenError::Template("`{{/meme}}` without opener".into()))?;
                    top.push(Piece::MemeBlock(inner));
                    // Swallow the newline after a block tag so an absent
                    // block leaves no blank line.
                    rest = &after[close + 2..];
                    rest = rest.strip_prefix('\n').unwrap_or(rest);
                    continue;
                }
                _ if name.is_empty() || name.starts_with(['#', '/']) => {
                    return Err(GenError::Template(format!("bad tag `{{{{{name}}}}}`")))
                }
                _ => target.push(Piece::Var(name.to_string())),
            }
            rest = &after[close + 2..];
            if name == MEME_OPEN {
                rest = rest.strip_prefix('\n').unwrap_or(rest);
            }
        }
        if block.is_some() {
            return Err(GenError::Template("unclosed meme block".into()));
        }
        if !rest.is_empty() {
            top.push(Piece::Text(rest.to_string()));
        }
        Ok(Self { pieces: top })
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let text = std::fs::read_to_string(path).map_err(|source| GenError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The built-in template for a platform, in the platform's language.
    pub fn default_for(platform: Platform) -> Self {
        let text = match platform {
            Platform::Douyin => DOUYIN_ZH,
            Platform::YouTube => YOUTUBE_EN,
        };
        Self::parse(text).expect("built-in templates parse")
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn value(bundle: &PromptBundle, name: &str) -> Option<String> {
    let meme = bundle.meme.as_ref();
    Some(match name {
        "platform" => bundle.platform.to_string(),
        "introduction" => bundle.introduction.clone(),
        "description" => bundle.description.clone(),
        "transcription" => bundle.transcription.clone(),
        "style" => bundle.style.to_string(),
        "style_definition" => style_definition(bundle.style, bundle.language).to_string(),
        "examples" => bundle
            .examples
            .iter()
            .enumerate()
            .map(|(i, e)| format!("<example {}> {}", i + 1, single_line(e)))
            .collect::<Vec<_>>()
            .join("\n"),
        "meme_name" => meme?.name.clone(),
        "meme_definition" => meme?.definition.clone(),
        "length_norm" => length_norm(bundle.language),
        _ => return None,
    })
}

fn render(pieces: &[Piece], bundle: &PromptBundle, out: &mut String) -> Result<(), GenError> {
    for p in pieces {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Var(name) => out.push_str(
                &value(bundle, name)
                    .ok_or_else(|| GenError::UnresolvedPlaceholder(name.clone()))?,
            ),
            Piece::MemeBlock(inner) => {
                if bundle.meme.is_some() {
                    render(inner, bundle, out)?;
                }
            }
        }
    }
    Ok(())
}

/// Substitute the bundle into the template. Substituted values are inserted
/// verbatim and never re-expanded.
pub fn build_prompt(bundle: &PromptBundle, template: &PromptTemplate) -> Result<String, GenError> {
    bundle.validate()?;
    let mut out = String::new();
    render(&template.pieces, bundle, &mut out)?;
    Ok(out)
}

/// Reduce a raw completion to one clean comment line.
pub fn clean_completion(raw: &str) -> String {
    let role = Regex::new(r"^(?i:assistant|comment|reply|answer|评论|回复)\s*[:：]\s*")
        .expect("static regex");
    let mut s = single_line(raw);
    loop {
        let before = s.clone();
        s = role.replace(&s, "").trim().to_string();
        for (open, close) in [
            ("\"", "\""),
            ("'", "'"),
            ("“", "”"),
            ("「", "」"),
            ("‘", "’"),
        ] {
            if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len()..s.len() - close.len()].trim().to_string();
            }
        }
        if s == before {
            return s;
        }
    }
}

/// Call the generation client with `config` passed through unchanged,
/// retrying failures up to `max_retries` times.
pub fn generate_comment(
    client: &dyn GenerationClient,
    prompt: &str,
    config: &GenerationConfig,
    max_retries: u32,
) -> Result<String, GenError> {
    config.validate()?;
    let raw = with_retries("generation", max_retries, |_| {
        client.complete(prompt, config)
    })?;
    let comment = clean_completion(&raw);
    if comment.is_empty() {
        return Err(GenError::EmptyCompletion);
    }
    Ok(comment)
}
