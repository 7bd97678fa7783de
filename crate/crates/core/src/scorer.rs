//! Automatic comment scoring: originality, relevance against a human
//! baseline, and style conformity (length and sentiment).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Language, Platform, VideoRecord};
use crate::services::{SentimentClient, ServiceError};
use crate::textmetrics::{cosine, tokenize, SparseVector, TextError, TfIdfModel, TokenList};

/// Upper bound of every component score except length and sentiment.
pub const MAX_SCORE: f64 = 10.0;
pub const LENGTH_MAX: f64 = 5.0;
pub const SENTIMENT_MATCH: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("comment is empty")]
    EmptyComment,
    #[error("similarity {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("benchmark has no comment-video pairs")]
    EmptyBenchmark,
    #[error("invalid scoring parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

/// Inclusive platform-typical length band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthBounds {
    pub min: u32,
    pub max: u32,
}

impl LengthBounds {
    /// English in words, Chinese in characters.
    pub fn default_for(language: Language) -> Self {
        match language {
            Language::En => Self { min: 63, max: 72 },
            Language::Zh => Self { min: 25, max: 35 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringParams {
    /// Width of the relevance Gaussian.
    pub sigma: f64,
    pub sigma_l_en: f64,
    pub sigma_l_zh: f64,
    pub bounds_en: LengthBounds,
    pub bounds_zh: LengthBounds,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            sigma_l_en: 10.0,
            sigma_l_zh: 5.0,
            bounds_en: LengthBounds::default_for(Language::En),
            bounds_zh: LengthBounds::default_for(Language::Zh),
        }
    }
}

impl ScoringParams {
    pub fn sigma_l(&self, language: Language) -> f64 {
        match language {
            Language::En => self.sigma_l_en,
            Language::Zh => self.sigma_l_zh,
        }
    }

    pub fn bounds(&self, language: Language) -> LengthBounds {
        match language {
            Language::En => self.bounds_en,
            Language::Zh => self.bounds_zh,
        }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("sigma_l_en", self.sigma_l_en),
            ("sigma_l_zh", self.sigma_l_zh),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScoreError::Params(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, b) in [("bounds_en", self.bounds_en), ("bounds_zh", self.bounds_zh)] {
            if b.min > b.max {
                return Err(ScoreError::Params(format!(
                    "{name}: min {} > max {}",
                    b.min, b.max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    pub s_o: f64,
    pub s_r: f64,
    pub s_l: f64,
    pub s_st: f64,
    pub s_s: f64,
    pub s_total: f64,
}

/// Mean of originality, relevance and style conformity.
pub fn total(s_o: f64, s_r: f64, s_s: f64) -> f64 {
    (s_o + s_r + s_s) / 3.0
}

impl ScoreBreakdown {
    pub fn compose(s_o: f64, s_r: f64, s_l: f64, s_st: f64) -> Self {
        let s_s = s_l + s_st;
        Self {
            s_o,
            s_r,
            s_l,
            s_st,
            s_s,
            s_total: total(s_o, s_r, s_s),
        }
    }
}

/// `10 * (1 - m)` for a maximum similarity `m` in `[0, 1]`.
pub fn originality(m: f64) -> Result<f64, ScoreError> {
    if !(0.0..=1.0).contains(&m) {
        return Err(ScoreError::OutOfRange(m));
    }
    Ok(MAX_SCORE * (1.0 - m))
}

/// Gaussian around the human baseline `b`, peaking at 10.
pub fn relevance_from_similarity(sim: f64, b: f64, sigma: f64) -> f64 {
    let d = sim - b;
    MAX_SCORE * (-(d * d) / (2.0 * sigma * sigma)).exp()
}

/// Comment length: whitespace-separated words for English, non-whitespace
/// characters for Chinese.
pub fn length_units(comment: &str, language: Language) -> usize {
    match language {
        Language::En => comment.split_whitespace().count(),
        Language::Zh => comment.chars().filter(|c| !c.is_whitespace()).count(),
    }
}

/// 5 inside the band, otherwise a Gaussian falloff from the nearer bound.
pub fn length_score_units(units: usize, bounds: LengthBounds, sigma_l: f64) -> f64 {
    length_score_at(units as f64, bounds, sigma_l)
}

/// [`length_score_units`] extended to real lengths.
pub fn length_score_at(n: f64, bounds: LengthBounds, sigma_l: f64) -> f64 {
    let (lo, hi) = (f64::from(bounds.min), f64::from(bounds.max));
    if (lo..=hi).contains(&n) {
        return LENGTH_MAX;
    }
    let nearest = if n < lo { lo } else { hi };
    let d = n - nearest;
    LENGTH_MAX * (-(d * d) / (2.0 * sigma_l * sigma_l)).exp()
}

pub fn length_score(comment: &str, language: Language, params: &ScoringParams) -> f64 {
    length_score_units(
        length_units(comment, language),
        params.bounds(language),
        params.sigma_l(language),
    )
}

/// 5 when the comment's sentiment matches the video's description and
/// transcription, else 0. Client failures are errors.
pub fn sentiment_score(
    comment: &str,
    video: &VideoRecord,
    sentiment: &dyn SentimentClient,
) -> Result<f64, ScoreError> {
    let c = sentiment.sentiment(comment, video.language)?;
    let v = sentiment.sentiment(&video.content_text(), video.language)?;
    Ok(if c == v { SENTIMENT_MATCH } else { 0.0 })
}

/// Mean TF-IDF cosine between each benchmark comment and its own video's
/// content.
pub fn relevance_baseline(benchmark: &Dataset, model: &TfIdfModel) -> Result<f64, ScoreError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in benchmark.records() {
        let content = model.vectorize_text(&v.content_text(), v.language);
        for c in &v.comments {
            sum += cosine(&model.vectorize_text(&c.text, v.language), &content);
            n += 1;
        }
    }
    if n == 0 {
        return Err(ScoreError::EmptyBenchmark);
    }
    Ok(sum / n as f64)
}

/// Fitted similarity space plus the relevance baseline.
#[derive(Debug, Clone)]
pub struct ScoringContext {
    model: TfIdfModel,
    reference: Vec<SparseVector>,
    baseline_b: f64,
    params: ScoringParams,
}

impl ScoringContext {
    /// Fit TF-IDF over every comment and video content text of both corpora,
    /// then compute the baseline over `benchmark`.
    pub fn build(
        benchmark: &Dataset,
        training: &Dataset,
        params: ScoringParams,
    ) -> Result<Self, ScoreError> {
        params.validate()?;
        let records = || benchmark.records().iter().chain(training.records());
        let mut docs: Vec<TokenList> = Vec::new();
        for r in records() {
            docs.extend(r.comments.iter().map(|c| tokenize(&c.text, r.language)));
            docs.push(tokenize(&r.content_text(), r.language));
        }
        let model = TfIdfModel::fit(&docs)?;
        let reference = records()
            .flat_map(|r| {
                r.comments
                    .iter()
                    .map(|c| model.vectorize_text(&c.text, r.language))
            })
            .collect();
        let baseline_b = relevance_baseline(benchmark, &model)?;
        Ok(Self {
            model,
            reference,
            baseline_b,
            params,
        })
    }

    pub fn baseline(&self) -> f64 {
        self.baseline_b
    }

    pub fn params(&self) -> &ScoringParams {
        &self.params
    }

    pub fn model(&self) -> &TfIdfModel {
        &self.model
    }

    fn content_similarity(&self, comment: &SparseVector, video: &VideoRecord) -> f64 {
        cosine(
            comment,
            &self
                .model
                .vectorize_text(&video.content_text(), video.language),
        )
    }

    /// Highest similarity of `comment` to any reference comment or to the
    /// video's own content.
    pub fn max_similarity(&self, comment: &str, video: &VideoRecord) -> Result<f64, ScoreError> {
        if comment.trim().is_empty() {
            return Err(ScoreError::EmptyComment);
        }
        let c = self.model.vectorize_text(comment, video.language);
        Ok(self
            .reference
            .iter()
            .map(|d| cosine(&c, d))
            .fold(self.content_similarity(&c, video), f64::max))
    }

    pub fn relevance(&self, comment: &str, video: &VideoRecord) -> f64 {
        let c = self.model.vectorize_text(comment, video.language);
        relevance_from_similarity(
            self.content_similarity(&c, video),
            self.baseline_b,
            self.params.sigma,
        )
    }

    pub fn score(
        &self,
        comment: &str,
        video: &VideoRecord,
        sentiment: &dyn SentimentClient,
    ) -> Result<ScoreBreakdown, ScoreError> {
        let s_o = originality(self.max_similarity(comment, video)?)?;
        let s_r = self.relevance(comment, video);
        let s_l = length_score(comment, video.language, &self.params);
        let s_st = sentiment_score(comment, video, sentiment)?;
        Ok(ScoreBreakdown::compose(s_o, s_r, s_l, s_st))
    }
}

/// One scored comment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub model: String,
    pub video_id: String,
    pub platform: Platform,
    pub scores: ScoreBreakdown,
}

const COLUMNS: [&str; 6] = ["s_o", "s_r", "s_l", "s_st", "s_s", "s_total"];

fn fields(s: &ScoreBreakdown) -> [f64; 6] {
    [s.s_o, s.s_r, s.s_l, s.s_st, s.s_s, s.s_total]
}

/// Tab-separated report: a `#` config echo, one line per comment, then means
/// per (model, platform).
pub fn score_report_tsv(rows: &[ScoreRow], params: &ScoringParams, baseline_b: f64) -> String {
    let mut out = format!(
        "# sigma={} sigma_l_en={} sigma_l_zh={} bounds_en={}-{} bounds_zh={}-{} baseline_b={:.6}\n",
        params.sigma,
        params.sigma_l_en,
        params.sigma_l_zh,
        params.bounds_en.min,
        params.bounds_en.max,
        params.bounds_zh.min,
        params.bounds_zh.max,
        baseline_b
    );
    out.push_str(&format!(
        "model\tvideo_id\tplatform\t{}\n",
        COLUMNS.join("\t")
    ));
    let mut groups: BTreeMap<(&str, &str), (usize, [f64; 6])> = BTreeMap::new();
    for r in rows {
        let f = fields(&r.scores);
        let cells: Vec<String> = f.iter().map(|v| format!("{v:.4}")).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.model,
            r.video_id,
            r.platform,
            cells.join("\t")
        ));
        let g = groups
            .entry((r.model.as_str(), r.platform.as_str()))
            .or_insert((0, [0.0; 6]));
        g.0 += 1;
        for (acc, v) in g.1.iter_mut().zip(f) {
            *acc += v;
        }
    }
    out.push_str(&format!(
        "\n# means\nmodel\tplatform\tn\t{}\n",
        COLUMNS.join("\t")
    ));
    for ((model, platform), (n, sums)) in groups {
        let cells: Vec<String> = sums
            .iter()
            .map(|s| format!("{:.4}", s / n as f64))
            .collect();
        out.push_str(&format!("{model}\t{platform}\t{n}\t{}\n", cells.join("\t")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::record;
    use crate::corpus::{CommentRecord, VideoCategory};
    use crate::services::mock::FixedSentiment;
    use crate::services::Sentiment;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn originality_is_linear() {
        assert_eq!(originality(0.0).unwrap(), 10.0);
        assert_eq!(originality(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(originality(0.3).unwrap(), 7.0, epsilon = 1e-12);
        assert!(originality(1.01).is_err());
        assert!(originality(-0.01).is_err());
        assert!(originality(f64::NAN).is_err());
    }

    #[test]
    fn relevance_gaussian() {
        assert_eq!(relevance_from_similarity(0.4, 0.4, 0.1), 10.0);
        let one_sigma = 10.0 * (-0.5f64).exp();
        assert_abs_diff_eq!(
            relevance_from_similarity(0.5, 0.4, 0.1),
            one_sigma,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            relevance_from_similarity(0.3, 0.4, 0.1),
            one_sigma,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(one_sigma, 6.0653, epsilon = 1e-4);
        assert!(relevance_from_similarity(1.0, 0.0, 0.1) < 1e-10);
    }

    #[test]
    fn length_band_and_tails() {
        let p = ScoringParams::default();
        let words = |n: usize| vec!["w"; n].join(" ");
        assert_eq!(length_score(&words(65), Language::En, &p), 5.0);
        assert_eq!(length_score(&"字".repeat(30), Language::Zh, &p), 5.0);
        assert_abs_diff_eq!(
            length_score(&words(82), Language::En, &p),
            5.0 * (-0.5f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(5.0 * (-0.5f64).exp(), 3.0327, epsilon = 1e-4);
        assert_eq!(length_units("a  b\tc\n", Language::En), 3);
        assert_eq!(length_units("好 笑 ！", Language::Zh), 3);
        assert!(length_score("", Language::En, &p) > 0.0);
    }

    #[test]
    fn totals() {
        assert_eq!(total(10.0, 10.0, 10.0), 10.0);
        assert_eq!(total(0.0, 0.0, 0.0), 0.0);
        let b = ScoreBreakdown::compose(7.0, 10.0 * (-0.5f64).exp(), 5.0 * (-0.5f64).exp(), 5.0);
        assert_abs_diff_eq!(b.s_s, 8.0327, epsilon = 1e-4);
        assert_abs_diff_eq!(b.s_total, 7.0327, epsilon = 1e-4);
    }

    fn video(id: &str, content: &str, comments: &[&str]) -> VideoRecord {
        let mut r = record(id, VideoCategory::FunnyAnimal, &[]);
        r.description = content.into();
        r.transcription.clear();
        r.comments = comments.iter().map(|c| CommentRecord::new(*c, 1)).collect();
        r
    }

    #[test]
    fn baseline_extremes() {
        let ds = Dataset::new(vec![
            video("a", "red fox jumps", &["red fox jumps"]),
            video("b", "blue whale sings", &["blue whale sings"]),
        ]);
        let ctx =
            ScoringContext::build(&ds, &Dataset::new(vec![]), ScoringParams::default()).unwrap();
        assert_abs_diff_eq!(ctx.baseline(), 1.0, epsilon = 1e-12);

        let ds = Dataset::new(vec![video("a", "red fox", &["green owl"])]);
        let ctx =
            ScoringContext::build(&ds, &Dataset::new(vec![]), ScoringParams::default()).unwrap();
        assert_eq!(ctx.baseline(), 0.0);
        assert!(matches!(
            ScoringContext::build(
                &Dataset::new(vec![video("a", "x", &[])]),
                &Dataset::new(vec![]),
                ScoringParams::default()
            ),
            Err(ScoreError::EmptyBenchmark)
        ));
    }

    #[test]
    fn max_similarity_cases() {
        let bench = Dataset::new(vec![video(
            "a",
            "cat on a sofa",
            &["lazy cat", "nice sofa"],
        )]);
        let train = Dataset::new(vec![video(
            "t",
            "dog park",
            &["good boy", "fetch the ball"],
        )]);
        let ctx = ScoringContext::build(&bench, &train, ScoringParams::default()).unwrap();
        let v = &bench.records()[0];
        assert_abs_diff_eq!(
            ctx.max_similarity("fetch the ball", v).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(ctx.max_similarity("zzz qqq", v).unwrap(), 0.0);
        assert!(matches!(
            ctx.max_similarity("  ", v),
            Err(ScoreError::EmptyComment)
        ));
    }

    #[test]
    fn sentiment_match() {
        let v = record("a", VideoCategory::TalkShow, &[]);
        assert_eq!(
            sentiment_score("x", &v, &FixedSentiment(Sentiment::Positive)).unwrap(),
            5.0
        );
        struct Split;
        impl SentimentClient for Split {
            fn sentiment(&self, text: &str, _: Language) -> Result<Sentiment, ServiceError> {
                Ok(if text == "boo" {
                    Sentiment::Negative
                } else {
                    Sentiment::Positive
                })
            }
        }
        assert_eq!(sentiment_score("boo", &v, &Split).unwrap(), 0.0);
    }

    #[test]
    fn report_layout() {
        let p = ScoringParams::default();
        let empty = score_report_tsv(&[], &p, 0.25);
        assert_eq!(
            empty
                .lines()
                .filter(|l| !l.starts_with('#') && !l.is_empty())
                .count(),
            2
        );
        let row = |m: &str| ScoreRow {
            model: m.into(),
            video_id: "v".into(),
            platform: Platform::YouTube,
            scores: ScoreBreakdown::compose(1.0, 2.0, 3.0, 5.0),
        };
        let t = score_report_tsv(&[row("a"), row("b"), row("a")], &p, 0.25);
        let means: Vec<&str> = t
            .split("# means\n")
            .nth(1)
            .unwrap()
            .lines()
            .skip(1)
            .collect();
        assert_eq!(means.len(), 2);
        assert!(means[0].starts_with("a\tYouTube\t2\t1.0000"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn component_ranges(m in 0.0f64..=1.0, sim in 0.0f64..=1.0, b in 0.0f64..=1.0,
                            units in 0usize..300, zh in any::<bool>(), st in any::<bool>()) {
            let p = ScoringParams::default();
            let lang = if zh { Language::Zh } else { Language::En };
            let s_o = originality(m).unwrap();
            let s_r = relevance_from_similarity(sim, b, p.sigma);
            let s_l = length_score_units(units, p.bounds(lang), p.sigma_l(lang));
            let s = ScoreBreakdown::compose(s_o, s_r, s_l, if st { 5.0 } else { 0.0 });
            prop_assert!((0.0..=10.0).contains(&s.s_o));
            prop_assert!((0.0..=10.0).contains(&s.s_r));
            prop_assert!((0.0..=5.0).contains(&s.s_l));
            prop_assert!((0.0..=10.0).contains(&s.s_s));
            prop_assert!((0.0..=10.0).contains(&s.s_total));
        }

        #[test]
        fn originality_reverses_order(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            if lo < hi {
                prop_assert!(originality(lo).unwrap() > originality(hi).unwrap());
            }
        }
    }

    #[test]
    fn relevance_strictly_decreases_away_from_baseline() {
        let b = 0.37;
        let mut prev = relevance_from_similarity(b, b, 0.1);
        for i in 1..=100 {
            let d = i as f64 * 0.005;
            let up = relevance_from_similarity(b + d, b, 0.1);
            let down = relevance_from_similarity(b - d, b, 0.1);
            assert!(up < prev && down < prev);
            assert_abs_diff_eq!(up, down, epsilon = 1e-9);
            prev = up;
        }
    }
}
