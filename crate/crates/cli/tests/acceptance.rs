//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use quipgen_core::corpus::{
    dataset_to_string, load_dataset, save_dataset, CommentRecord, Dataset, LabelTier, Language,
    Platform, StyleLabel, VideoCategory, VideoRecord,
};
use quipgen_core::genpipe::{build_prompt, generate_comment, PromptBundle, PromptTemplate};
use quipgen_core::labeler::{annotate_dataset, CascadeConfig, LabelResources};
use quipgen_core::media::{
    bucket_midpoints, dual_rate_sample, tiered_frame_count, ClimaxInterval, SamplingRates,
};
use quipgen_core::retrieval::{
    dense_cosine, topk_similar, EmbeddingVector, RetrievalScope, VectorStore,
};
use quipgen_core::scorer::{
    length_score_at, length_score_units, originality, relevance_from_similarity, total,
    LengthBounds, ScoringParams,
};
use quipgen_core::services::mock::{MockEncyclopedia, MockGenerator};
use quipgen_core::stylist::{
    augment_with_memes, record_meme_usage, MemeCache, MemeEntry, MemeSource,
};
use quipgen_core::textmetrics::{cosine, knn_vote, SparseVector, TfIdfModel};

type Outcome = Result<String, String>;
type Criterion = Box<dyn FnOnce(&mut StdRng) -> Outcome>;
/// Planted tier and label per (video id, comment index).
type Planted = BTreeMap<(String, usize), (LabelTier, Option<StyleLabel>)>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

const TIER_BUDGET: Duration = Duration::from_secs(1);

fn tiered_count() -> Outcome {
    let start = Instant::now();
    for n in 1..=1_000_000u64 {
        let expected = if n <= 12 {
            n
        } else if n <= 60 {
            12
        } else if n <= 160 {
            16
        } else {
            24
        };
        let k = tiered_frame_count(n).map_err(|e| e.to_string())?;
        check(k == expected && k <= 24 && k <= n, || {
            format!("N={n}: got {k}, want {expected}")
        })?;
    }
    let elapsed = start.elapsed();
    let boundary: Vec<u64> = [12, 13, 60, 61, 160, 161]
        .iter()
        .map(|&n| tiered_frame_count(n).unwrap())
        .collect();
    check(boundary == [12, 12, 12, 16, 16, 24], || {
        format!("boundaries {boundary:?}")
    })?;
    check(tiered_frame_count(0).is_err(), || "N=0 accepted".into())?;
    check(elapsed < TIER_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("N in [1, 1e6] in {elapsed:?}"))
}

// 2 -------------------------------------------------------------------------

const MIDPOINT_BUDGET: Duration = Duration::from_secs(5);

/// For each bucket, scan its frames for the one containing the bucket's real
/// midpoint `(i + 1/2) N / k`, in exact integer arithmetic.
fn midpoint_oracle(n: u64, k: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(k as usize);
    let mut j = 0u64;
    for i in 0..k {
        // frame j contains the midpoint when 2k*j <= (2i+1)N < 2k*(j+1)
        let twice_mid = (2 * i + 1) * n;
        while 2 * k * (j + 1) <= twice_mid {
            j += 1;
        }
        out.push(j);
    }
    out
}

fn midpoints() -> Outcome {
    let start = Instant::now();
    for n in 1..=5000u64 {
        let k = tiered_frame_count(n).unwrap();
        let got = bucket_midpoints(n, k).map_err(|e| e.to_string())?;
        check(got.len() as u64 == k, || {
            format!("N={n}: {} indices", got.len())
        })?;
        check(got.windows(2).all(|w| w[0] < w[1]), || {
            format!("N={n}: not increasing")
        })?;
        check(got.iter().all(|&i| i < n), || {
            format!("N={n}: out of range")
        })?;
        let want = midpoint_oracle(n, k);
        check(got == want, || format!("N={n}: {got:?} != {want:?}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < MIDPOINT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("N in [1, 5000] in {elapsed:?}"))
}

// 3 -------------------------------------------------------------------------

fn video(
    id: &str,
    category: VideoCategory,
    description: &str,
    comments: Vec<CommentRecord>,
) -> VideoRecord {
    VideoRecord {
        id: id.into(),
        platform: Platform::YouTube,
        language: Language::En,
        category,
        tags: vec![],
        introduction: String::new(),
        description: description.into(),
        transcription: String::new(),
        comments,
        source_url: None,
    }
}

const CLUSTER_LABELS: [StyleLabel; 3] =
    [StyleLabel::Puns, StyleLabel::Rhyming, StyleLabel::Sarcasm];

/// 40 videos with one comment per tier each, shuffled within the video.
fn planted_corpus(rng: &mut StdRng) -> (Dataset, Dataset, Planted) {
    let seed_comments: Vec<CommentRecord> = (0..CLUSTER_LABELS.len())
        .flat_map(|c| {
            (0..3).map(move |j| {
                CommentRecord::new(format!("kk{c}a kk{c}b seedfill{c}x{j}"), 10 - j as u64)
                    .labeled(CLUSTER_LABELS[c], LabelTier::Manual)
            })
        })
        .collect();
    let seed = Dataset::new(vec![video(
        "seed",
        VideoCategory::FunnyAnimal,
        "seed clip",
        seed_comments,
    )]);

    let mut expected = BTreeMap::new();
    let mut records = Vec::new();
    let mut uniq = 0usize;
    let mut fresh = |prefix: &str| {
        uniq += 1;
        format!("{prefix}{uniq}")
    };
    for v in 0..40 {
        let id = format!("v{v:02}");
        let category = VideoCategory::ALL[v % 5];
        let desc_words: Vec<String> = (0..8).map(|j| format!("dv{v}w{j}")).collect();
        let mut picked = desc_words.clone();
        let n = rng.random_range(2..=4);
        let sim_comment = (0..n)
            .map(|_| picked.swap_remove(rng.random_range(0..picked.len())))
            .collect::<Vec<_>>()
            .join(" ");
        let cluster = rng.random_range(0..CLUSTER_LABELS.len());
        let mut planted = vec![
            (
                format!("pov: {} {}", fresh("rf"), fresh("rf")),
                LabelTier::Rule,
                Some(StyleLabel::Meme),
            ),
            (
                sim_comment,
                LabelTier::Similarity,
                Some(StyleLabel::ContentExtraction),
            ),
            (
                format!("{} hilarious {}", fresh("lf"), fresh("lf")),
                LabelTier::Lexicon,
                Some(StyleLabel::GeneralHumor),
            ),
            (
                format!("kk{cluster}a kk{cluster}b {}", fresh("kf")),
                LabelTier::Knn,
                Some(CLUSTER_LABELS[cluster]),
            ),
            (
                format!("{} {}", fresh("mf"), fresh("mf")),
                LabelTier::MapPrior,
                None,
            ),
        ];
        for i in (1..planted.len()).rev() {
            planted.swap(i, rng.random_range(0..=i));
        }
        let mut comments = Vec::new();
        for (ci, (text, tier, label)) in planted.into_iter().enumerate() {
            comments.push(CommentRecord::new(text, 100 - ci as u64));
            expected.insert((id.clone(), ci), (tier, label));
        }
        records.push(video(&id, category, &desc_words.join(" "), comments));
    }
    (Dataset::new(records), seed, expected)
}

/// Category prior argmax from every label known before the fallback pass.
fn prior_oracle(
    labeled: &Dataset,
    seed: &Dataset,
    expected: &Planted,
) -> BTreeMap<VideoCategory, StyleLabel> {
    let mut counts: BTreeMap<VideoCategory, BTreeMap<StyleLabel, u64>> = BTreeMap::new();
    for r in seed.records() {
        for c in &r.comments {
            *counts
                .entry(r.category)
                .or_default()
                .entry(c.c_label.unwrap())
                .or_default() += 1;
        }
    }
    for r in labeled.records() {
        for (ci, _) in r.comments.iter().enumerate() {
            let (tier, label) = expected[&(r.id.clone(), ci)];
            if matches!(
                tier,
                LabelTier::Rule | LabelTier::Similarity | LabelTier::Lexicon
            ) {
                *counts
                    .entry(r.category)
                    .or_default()
                    .entry(label.unwrap())
                    .or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(cat, row)| {
            let mut best = (StyleLabel::ALL[0], 0);
            for &l in StyleLabel::ALL {
                let n = row.get(&l).copied().unwrap_or(0);
                if n > best.1 {
                    best = (l, n);
                }
            }
            (cat, best.0)
        })
        .collect()
}

/// Two videos whose vocabularies make the comment/description cosine exactly
/// 1/sqrt(100): the comment is one token, the description that token plus 99
/// others, and every token has the same document frequency. Padding videos
/// shift the idf until the floating-point result is exactly 0.10 under the
/// same fit the labeler performs over the dataset and seed.
fn boundary_corpus(seed: &Dataset) -> Option<(Dataset, usize)> {
    let others: Vec<String> = (0..99).map(|i| format!("bw{i}")).collect();
    let desc = format!("anchor {}", others.join(" "));
    for padding in 0..200 {
        let mut records = vec![
            video(
                "edge",
                VideoCategory::TalkShow,
                &desc,
                vec![CommentRecord::new("anchor", 1)],
            ),
            video(
                "twin",
                VideoCategory::TalkShow,
                &others.join(" "),
                vec![CommentRecord::new("twinonly", 1)],
            ),
        ];
        for p in 0..padding {
            records.push(video(
                &format!("pad{p}"),
                VideoCategory::TalkShow,
                &format!("padd{p}"),
                vec![CommentRecord::new(format!("padc{p}"), 1)],
            ));
        }
        let texts: Vec<(String, Language)> = records
            .iter()
            .chain(seed.records())
            .flat_map(|r| {
                std::iter::once(r.description.clone())
                    .chain(r.comments.iter().map(|c| c.text.clone()))
                    .map(|t| (t, Language::En))
            })
            .collect();
        let model = TfIdfModel::fit_texts(texts.iter().map(|(t, l)| (t.as_str(), *l))).unwrap();
        if model.similarity(("anchor", Language::En), (&desc, Language::En)) == 0.10 {
            return Some((Dataset::new(records), padding));
        }
    }
    None
}

fn cascade(rng: &mut StdRng) -> Outcome {
    let (dataset, seed, expected) = planted_corpus(rng);
    let resources = LabelResources::default();
    let (labeled, audit) =
        annotate_dataset(&dataset, Some(&seed), &resources, &CascadeConfig::default())
            .map_err(|e| e.to_string())?;
    check(audit.len() == 200, || {
        format!("{} comments labeled", audit.len())
    })?;
    let priors = prior_oracle(&dataset, &seed, &expected);
    let mut per_tier: BTreeMap<LabelTier, usize> = BTreeMap::new();
    for row in &audit {
        let (tier, label) = expected[&(row.video_id.clone(), row.comment_index)];
        let category = labeled.get(&row.video_id).unwrap().category;
        let label = label.unwrap_or(priors[&category]);
        check(row.tier == tier && row.label == label, || {
            format!(
                "{}#{}: got {}/{}, want {tier}/{label}",
                row.video_id, row.comment_index, row.tier, row.label
            )
        })?;
        *per_tier.entry(tier).or_default() += 1;
    }
    check(per_tier.values().all(|&n| n == 40), || {
        format!("tier counts {per_tier:?}")
    })?;

    let (edge, padding) =
        boundary_corpus(&seed).ok_or("no corpus gives a cosine of exactly 0.10")?;
    let at = |threshold: f64| -> Result<(LabelTier, StyleLabel), String> {
        let cfg = CascadeConfig {
            sim_threshold: threshold,
            ..CascadeConfig::default()
        };
        let (_, audit) =
            annotate_dataset(&edge, Some(&seed), &resources, &cfg).map_err(|e| e.to_string())?;
        let row = audit.iter().find(|r| r.video_id == "edge").unwrap();
        Ok((row.tier, row.label))
    };
    let exact = at(0.10)?;
    check(
        exact == (LabelTier::Similarity, StyleLabel::ContentExtraction),
        || format!("similarity 0.10 at threshold 0.10 gave {exact:?}"),
    )?;
    let below = at(0.10 + 1e-9)?;
    check(below.0 != LabelTier::Similarity, || {
        "similarity 1e-9 below the threshold still fired".into()
    })?;
    check(
        !quipgen_core::labeler::meets_content_threshold(0.10 - 1e-9, 0.10),
        || "0.10 - 1e-9 meets the threshold".into(),
    )?;
    Ok(format!(
        "200 comments, 40 per tier; exact-0.10 pair built with {padding} padding videos"
    ))
}

// 4 -------------------------------------------------------------------------

fn random_sparse(rng: &mut StdRng) -> SparseVector {
    let n = rng.random_range(0..5);
    SparseVector::from_pairs(
        (0..n).map(|_| (rng.random_range(0..6), rng.random_range(1..4) as f64)),
    )
}

/// Exhaustive scan: repeatedly take the best remaining neighbor.
fn knn_oracle(
    query: &SparseVector,
    labeled: &[(SparseVector, StyleLabel)],
    k: usize,
    min_sim: f64,
) -> Option<(StyleLabel, Vec<usize>)> {
    if labeled.is_empty() {
        return None;
    }
    let sims: Vec<f64> = labeled.iter().map(|(v, _)| cosine(query, v)).collect();
    let mut taken = vec![false; labeled.len()];
    let mut chosen = Vec::new();
    for _ in 0..k.min(labeled.len()) {
        let mut best: Option<usize> = None;
        for i in 0..labeled.len() {
            if !taken[i] && best.is_none_or(|b| sims[i] > sims[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        chosen.push(b);
    }
    if sims[chosen[0]] < min_sim {
        return None;
    }
    let mut winner = (StyleLabel::ALL[0], 0);
    for &l in StyleLabel::ALL {
        let n = chosen.iter().filter(|&&i| labeled[i].1 == l).count();
        if n > winner.1 {
            winner = (l, n);
        }
    }
    Some((winner.0, chosen))
}

fn topk_oracle(
    entries: &[(String, VideoCategory, Vec<f64>)],
    query: &[f64],
    category: Option<VideoCategory>,
    k: usize,
) -> (RetrievalScope, Vec<(String, f64)>) {
    let scope = match category {
        Some(c) if c != VideoCategory::Other && entries.iter().any(|e| e.1 == c) => {
            RetrievalScope::Category(c)
        }
        _ => RetrievalScope::Global,
    };
    let q = EmbeddingVector::new(query.to_vec()).unwrap();
    let mut pool: Vec<(String, f64)> = entries
        .iter()
        .filter(|e| scope == RetrievalScope::Global || RetrievalScope::Category(e.1) == scope)
        .map(|e| {
            (
                e.0.clone(),
                dense_cosine(&q, &EmbeddingVector::new(e.2.clone()).unwrap()),
            )
        })
        .collect();
    let mut out = Vec::new();
    while out.len() < k && !pool.is_empty() {
        let mut b = 0;
        for i in 1..pool.len() {
            if pool[i].1 > pool[b].1 || (pool[i].1 == pool[b].1 && pool[i].0 < pool[b].0) {
                b = i;
            }
        }
        out.push(pool.swap_remove(b));
    }
    (scope, out)
}

fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn oracles(rng: &mut StdRng) -> Outcome {
    const CASES: usize = 500;
    let mut knn_hits = 0;
    for case in 0..CASES {
        let labeled: Vec<(SparseVector, StyleLabel)> = (0..rng.random_range(0..12))
            .map(|_| (random_sparse(rng), StyleLabel::ALL[rng.random_range(0..6)]))
            .collect();
        let query = random_sparse(rng);
        let k = rng.random_range(1..7);
        let min_sim = [0.0, 0.05, 0.5][rng.random_range(0..3)];
        let got = knn_vote(&query, &labeled, k, min_sim).map_err(|e| e.to_string())?;
        let want = knn_oracle(&query, &labeled, k, min_sim);
        let got = got.map(|o| (o.label, o.neighbors));
        check(got == want, || {
            format!("knn case {case}: {got:?} != {want:?}")
        })?;
        knn_hits += usize::from(want.is_some());
    }
    for case in 0..CASES {
        let dim = rng.random_range(1..5);
        let n = rng.random_range(1..15);
        let mut ids: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            ids.swap(i, rng.random_range(0..=i));
        }
        let entries: Vec<(String, VideoCategory, Vec<f64>)> = ids
            .iter()
            .map(|i| {
                (
                    format!("s{i:02}"),
                    VideoCategory::ALL[rng.random_range(0..6)],
                    (0..dim)
                        .map(|_| rng.random_range(-2i32..3) as f64)
                        .collect(),
                )
            })
            .collect();
        let mut store = VectorStore::new();
        for (id, c, v) in &entries {
            store
                .insert(id, *c, EmbeddingVector::new(v.clone()).unwrap())
                .unwrap();
        }
        let query: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-2i32..3) as f64)
            .collect();
        let category =
            (rng.random_range(0..7) < 6).then(|| VideoCategory::ALL[rng.random_range(0..6)]);
        let k = rng.random_range(1..6);
        let got = topk_similar(
            &store,
            &EmbeddingVector::new(query.clone()).unwrap(),
            category,
            k,
        )
        .map_err(|e| e.to_string())?;
        let (scope, want) = topk_oracle(&entries, &query, category, k);
        let got_hits: Vec<(String, f64)> = got
            .hits
            .iter()
            .map(|h| (h.sample_id.clone(), h.similarity))
            .collect();
        check(got.scope == scope && got_hits == want, || {
            format!(
                "topk case {case}: {:?} {got_hits:?} != {scope:?} {want:?}",
                got.scope
            )
        })?;
        for (id, sim) in &got_hits {
            let v = &entries.iter().find(|e| &e.0 == id).unwrap().2;
            check((sim - naive_cosine(&query, v)).abs() < 1e-12, || {
                format!("topk case {case}: cosine of {id}")
            })?;
        }
    }
    Ok(format!(
        "{CASES} k-NN ({knn_hits} with a vote) and {CASES} top-k instances"
    ))
}

// 5 -------------------------------------------------------------------------

const SCORE_TOL: f64 = 1e-9;

fn scoring_math() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= SCORE_TOL;
    check(
        originality(0.0).unwrap() == 10.0 && originality(1.0).unwrap() == 0.0,
        || "S_o endpoints".into(),
    )?;
    let p = ScoringParams::default();
    for b in [0.0, 0.1, 0.37, 1.0] {
        check(relevance_from_similarity(b, b, p.sigma) == 10.0, || {
            format!("S_r peak at b={b}")
        })?;
        for sim in [b - p.sigma, b + p.sigma] {
            let s = relevance_from_similarity(sim, b, p.sigma);
            check(close(s, 10.0 * (-0.5f64).exp()), || {
                format!("S_r({sim}; b={b}) = {s}")
            })?;
        }
    }
    for (lang, lo, hi) in [(Language::En, 63u32, 72u32), (Language::Zh, 25, 35)] {
        let bounds = p.bounds(lang);
        check(bounds == LengthBounds { min: lo, max: hi }, || {
            format!("{lang} bounds {bounds:?}")
        })?;
        let sl = p.sigma_l(lang);
        for n in lo..=hi {
            check(length_score_units(n as usize, bounds, sl) == 5.0, || {
                format!("{lang} S_l({n}) != 5")
            })?;
        }
        for edge in [lo as f64, hi as f64] {
            for eps in [1e-6, 1e-9, 1e-12] {
                for n in [edge - eps, edge + eps] {
                    let s = length_score_at(n, bounds, sl);
                    check(close(s, 5.0), || format!("{lang} S_l({n}) = {s}"))?;
                }
            }
        }
        check(
            length_score_units(lo as usize - 1, bounds, sl) < 5.0,
            || "S_l below band".into(),
        )?;
        check(
            length_score_units(hi as usize + 1, bounds, sl) < 5.0,
            || "S_l above band".into(),
        )?;
    }
    check(
        total(10.0, 10.0, 10.0) == 10.0 && total(0.0, 0.0, 0.0) == 0.0,
        || "S_total".into(),
    )?;
    Ok(format!("tolerance {SCORE_TOL:e}"))
}

// 6 -------------------------------------------------------------------------

/// Timestamps in tenths of a second: the normal grid every 20 tenths minus
/// anything inside a closed climax interval, each climax every 2 tenths.
fn schedule_oracle(duration10: i64, climaxes10: &[(i64, i64)]) -> (Vec<i64>, Vec<i64>) {
    let normal = (0..duration10)
        .step_by(20)
        .filter(|t| !climaxes10.iter().any(|&(s, e)| s <= *t && *t <= e))
        .collect();
    let mut climax: Vec<i64> = climaxes10
        .iter()
        .flat_map(|&(s, e)| (s..e).step_by(2))
        .collect();
    climax.sort();
    climax.dedup();
    (normal, climax)
}

fn dual_rate(rng: &mut StdRng) -> Outcome {
    let rates = SamplingRates::default();
    let none = dual_rate_sample(20.0, &[], &rates).map_err(|e| e.to_string())?;
    check(none.timestamps_s.len() == 10, || {
        format!("20 s clean: {}", none.timestamps_s.len())
    })?;
    let all = dual_rate_sample(
        10.0,
        &[ClimaxInterval {
            start_s: 0.0,
            end_s: 10.0,
        }],
        &rates,
    )
    .map_err(|e| e.to_string())?;
    check(all.timestamps_s.len() == 50, || {
        format!("10 s climax: {}", all.timestamps_s.len())
    })?;
    let tenths = |v: &[f64]| -> Vec<i64> { v.iter().map(|t| (t * 10.0).round() as i64).collect() };
    const CASES: usize = 500;
    for case in 0..CASES {
        let duration10 = rng.random_range(1..=60) * 10;
        let mut climaxes10 = Vec::new();
        let mut cursor = 0;
        while cursor < duration10 && rng.random_range(0..3) > 0 {
            let s = rng.random_range(cursor..duration10);
            let e = rng.random_range(s + 1..=duration10.min(s + 60));
            climaxes10.push((s, e));
            cursor = e + 1;
        }
        let climaxes: Vec<ClimaxInterval> = climaxes10
            .iter()
            .map(|&(s, e)| ClimaxInterval {
                start_s: s as f64 / 10.0,
                end_s: e as f64 / 10.0,
            })
            .collect();
        let got = dual_rate_sample(duration10 as f64 / 10.0, &climaxes, &rates)
            .map_err(|e| e.to_string())?;
        let (normal, climax) = schedule_oracle(duration10, &climaxes10);
        let mut union: Vec<i64> = normal.iter().chain(&climax).copied().collect();
        union.sort();
        check(
            tenths(&got.normal_s) == normal && tenths(&got.climax_s) == climax,
            || format!("case {case}: duration {duration10}, climaxes {climaxes10:?}"),
        )?;
        check(tenths(&got.timestamps_s) == union, || {
            format!("case {case}: union")
        })?;
        check(
            !got.normal_s.iter().any(|t| got.climax_s.contains(t)),
            || format!("case {case}: overlap"),
        )?;
    }
    Ok(format!("fixed cases plus {CASES} random schedules"))
}

// 7 -------------------------------------------------------------------------

const E2E_BUDGET: Duration = Duration::from_secs(60);
const E2E_ARTIFACTS: [&str; 7] = [
    "work/dataset.jsonl",
    "target/comment.txt",
    "target/provenance.json",
    "bench/comment.txt",
    "bench/provenance.json",
    "scores.tsv",
    "work/memes.jsonl",
];

fn end_to_end_once() -> Result<(common::Run, Vec<Vec<u8>>), String> {
    let run = common::Run::new();
    let fx = common::fixtures();
    let steps: Vec<Vec<String>> = vec![
        vec![
            "dataset-build".into(),
            "--tags".into(),
            common::ALL_TAGS.into(),
        ],
        vec!["embed".into()],
        vec![
            "generate".into(),
            "--target".into(),
            fx.join("target_meta.json").display().to_string(),
            "--out-dir".into(),
            "target".into(),
        ],
        vec![
            "generate".into(),
            "--record".into(),
            fx.join("target_record.json").display().to_string(),
            "--out-dir".into(),
            "bench".into(),
        ],
        vec![
            "score".into(),
            "--comments".into(),
            "bench/comments.jsonl".into(),
            fx.join("comments.jsonl").display().to_string(),
            "--benchmark".into(),
            fx.join("benchmark.jsonl").display().to_string(),
            "--out".into(),
            "scores.tsv".into(),
        ],
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let out = run.quipgen(&args);
        if !out.status.success() {
            return Err(format!("{} failed: {}", step[0], common::stderr(&out)));
        }
    }
    let bytes = E2E_ARTIFACTS
        .iter()
        .map(|f| std::fs::read(run.path(f)).map_err(|e| format!("{f}: {e}")))
        .collect::<Result<_, _>>()?;
    Ok((run, bytes))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let (_a, first) = end_to_end_once()?;
    let (_b, second) = end_to_end_once()?;
    let elapsed = start.elapsed();
    for (name, (x, y)) in E2E_ARTIFACTS.iter().zip(first.iter().zip(&second)) {
        check(x == y, || format!("{name} differs between runs"))?;
        check(!x.is_empty(), || format!("{name} is empty"))?;
    }
    check(elapsed < E2E_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} artifacts identical, two runs in {elapsed:?}",
        E2E_ARTIFACTS.len()
    ))
}

// 8 -------------------------------------------------------------------------

fn snapshot(cache: &MemeCache) -> BTreeMap<String, Vec<String>> {
    cache
        .entries()
        .map(|e| (e.name.clone(), e.expressions.clone()))
        .collect()
}

fn meme_cache(rng: &mut StdRng) -> Outcome {
    const SEQUENCES: usize = 50;
    const OPS: usize = 40;
    let names = [
        "skibidi",
        "Rizz",
        "ＲＩＺＺ",
        "破防",
        "ratio",
        "main  character",
        "绝绝子",
    ];
    let mut hits = 0;
    for seq in 0..SEQUENCES {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("memes.jsonl");
        let mut cache = MemeCache::open(&path).map_err(|e| e.to_string())?;
        for op in 0..OPS {
            let before = snapshot(&cache);
            let name = names[rng.random_range(0..names.len())];
            match rng.random_range(0..4) {
                0 => {
                    let _ = cache.insert(MemeEntry {
                        name: name.into(),
                        definition: format!("definition {op}"),
                        expressions: vec![],
                        source: MemeSource::LocalCache,
                    });
                    cache.save().map_err(|e| e.to_string())?;
                }
                1 => {
                    let _ = record_meme_usage(
                        &mut cache,
                        name,
                        &format!("comment {}", rng.random_range(0..5)),
                    );
                }
                2 => {
                    let cached = cache.lookup(name).is_some();
                    let ud = MockEncyclopedia::new(MemeSource::UrbanDictionary)
                        .with_entry(name, "from the web");
                    let kym = MockEncyclopedia::new(MemeSource::KnowYourMeme)
                        .with_entry(name, "from the web");
                    let hit = augment_with_memes(
                        &[name.to_string()],
                        &mut cache,
                        &[&ud, &kym],
                        Language::En,
                    )
                    .map_err(|e| e.to_string())?
                    .ok_or("lookup missed an available meme")?;
                    if cached {
                        hits += 1;
                        check(hit.from_cache && ud.calls() + kym.calls() == 0, || {
                            format!("sequence {seq} op {op}: cache hit called an encyclopedia")
                        })?;
                    }
                }
                _ => {
                    cache = MemeCache::open(&path).map_err(|e| e.to_string())?;
                }
            }
            let after = snapshot(&cache);
            for (k, exprs) in &before {
                let now = after
                    .get(k)
                    .ok_or_else(|| format!("sequence {seq} op {op}: lost `{k}`"))?;
                check(now.starts_with(exprs), || {
                    format!("sequence {seq} op {op}: `{k}` expressions shrank")
                })?;
            }
        }
    }
    check(hits > 0, || "no cache hits exercised".into())?;
    Ok(format!(
        "{SEQUENCES} sequences of {OPS} operations, {hits} cache hits with 0 calls"
    ))
}

// 9 -------------------------------------------------------------------------

fn generation_config() -> Outcome {
    let sampling = quipgen_cli::config::PipelineConfig::default()
        .generation
        .sampling;
    let bundle = PromptBundle {
        platform: Platform::Douyin,
        language: Language::Zh,
        introduction: "猫和黄瓜".into(),
        description: "一只猫看到黄瓜吓了一跳。".into(),
        transcription: "哎呀".into(),
        style: StyleLabel::GeneralHumor,
        examples: vec!["哈哈哈哈".into()],
        meme: None,
    };
    let prompt = build_prompt(&bundle, &PromptTemplate::default_for(Platform::Douyin))
        .map_err(|e| e.to_string())?;
    let generator = MockGenerator::new(7);
    generate_comment(&generator, &prompt, &sampling, 0).map_err(|e| e.to_string())?;
    let calls = generator.calls();
    check(calls.len() == 1, || format!("{} calls", calls.len()))?;
    let c = calls[0].config;
    let got = (c.temperature, c.top_p, c.repetition_penalty);
    check(got == (0.75, 0.9, 1.1), || {
        format!("client received {got:?}")
    })?;
    Ok(format!("client received {got:?}"))
}

// 10 ------------------------------------------------------------------------

const UNICODE_POOL: &[char] = &[
    'a', 'Z', ' ', '"', '\\', '\t', '\n', '/', '猫', '狗', '哈', '😂', '🐱', 'é', 'e', '\u{301}',
    'ß', 'Ａ', '\u{200d}', '€', '\u{fffd}', '#', '{', '}',
];

fn unicode_text(rng: &mut StdRng, len: usize) -> String {
    (0..len)
        .map(|_| UNICODE_POOL[rng.random_range(0..UNICODE_POOL.len())])
        .collect()
}

fn nonblank(rng: &mut StdRng) -> String {
    let len = rng.random_range(0..12);
    format!("x{}", unicode_text(rng, len))
}

fn random_dataset(rng: &mut StdRng) -> Dataset {
    let records = (0..rng.random_range(1..6))
        .map(|i| {
            let platform = [Platform::Douyin, Platform::YouTube][rng.random_range(0..2)];
            let mut likes: Vec<u64> = (0..rng.random_range(0..6))
                .map(|_| rng.random_range(0..1000))
                .collect();
            likes.sort_by(|a, b| b.cmp(a));
            VideoRecord {
                id: format!("{i}-{}", nonblank(rng)),
                platform,
                language: platform.language(),
                category: VideoCategory::ALL[rng.random_range(0..6)],
                tags: (0..rng.random_range(0..3))
                    .map(|_| unicode_text(rng, 4))
                    .collect(),
                introduction: unicode_text(rng, 20),
                description: unicode_text(rng, 30),
                transcription: unicode_text(rng, 30),
                comments: likes
                    .into_iter()
                    .map(|l| {
                        let c = CommentRecord::new(nonblank(rng), l);
                        if rng.random_range(0..2) == 0 {
                            c.labeled(
                                StyleLabel::ALL[rng.random_range(0..6)],
                                LabelTier::ALL[rng.random_range(0..6)],
                            )
                        } else {
                            c
                        }
                    })
                    .collect(),
                source_url: (rng.random_range(0..2) == 0).then(|| unicode_text(rng, 8)),
            }
        })
        .collect();
    Dataset::new(records)
}

fn round_trips(rng: &mut StdRng) -> Outcome {
    const CASES: usize = 100;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for case in 0..CASES {
        let ds = random_dataset(rng);
        let p = dir.path().join("d.jsonl");
        save_dataset(&ds, &p).map_err(|e| e.to_string())?;
        let first = std::fs::read(&p).unwrap();
        let loaded = load_dataset(&p).map_err(|e| format!("case {case}: {e}"))?;
        check(loaded == ds, || {
            format!("dataset case {case}: value changed")
        })?;
        check(dataset_to_string(&loaded).into_bytes() == first, || {
            format!("dataset case {case}: bytes changed")
        })?;

        let mut store = VectorStore::new();
        let dim = rng.random_range(1..6);
        for i in 0..rng.random_range(1..6) {
            let id: String = format!("{i}{}", unicode_text(rng, 6))
                .split_whitespace()
                .collect();
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-1e6..1e6) * 10f64.powi(rng.random_range(-300..300)))
                .map(|x: f64| if x.is_finite() { x } else { 1.0 })
                .collect();
            store
                .insert(
                    &id,
                    VideoCategory::ALL[rng.random_range(0..6)],
                    EmbeddingVector::new(v).unwrap(),
                )
                .map_err(|e| e.to_string())?;
        }
        let p = dir.path().join("v.tsv");
        store.save(&p).map_err(|e| e.to_string())?;
        let first = std::fs::read(&p).unwrap();
        let loaded = VectorStore::load(&p).map_err(|e| format!("case {case}: {e}"))?;
        check(loaded.entries() == store.entries(), || {
            format!("store case {case}: value changed")
        })?;
        loaded.save(&p).map_err(|e| e.to_string())?;
        check(std::fs::read(&p).unwrap() == first, || {
            format!("store case {case}: bytes changed")
        })?;

        let p = dir.path().join(format!("m{case}.jsonl"));
        let mut cache = MemeCache::open(&p).map_err(|e| e.to_string())?;
        for _ in 0..rng.random_range(1..6) {
            let _ = cache.insert(MemeEntry {
                name: nonblank(rng),
                definition: unicode_text(rng, 20),
                expressions: (0..rng.random_range(0..3))
                    .map(|_| unicode_text(rng, 10))
                    .collect(),
                source: MemeSource::ALL[rng.random_range(0..4)],
            });
        }
        cache.save().map_err(|e| e.to_string())?;
        let first = std::fs::read(&p).unwrap();
        let loaded = MemeCache::open(&p).map_err(|e| format!("case {case}: {e}"))?;
        check(snapshot(&loaded) == snapshot(&cache), || {
            format!("cache case {case}: value changed")
        })?;
        loaded.save().map_err(|e| e.to_string())?;
        check(std::fs::read(&p).unwrap() == first, || {
            format!("cache case {case}: bytes changed")
        })?;
    }
    Ok(format!("{CASES} random dataset, store and cache fixtures"))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut rng = StdRng::seed_from_u64(20_241_017);
    let criteria: Vec<(&str, Criterion)> = vec![
        ("tiered frame count", Box::new(|_| tiered_count())),
        ("bucket midpoints", Box::new(|_| midpoints())),
        ("labeling cascade", Box::new(cascade)),
        ("k-NN and top-k oracles", Box::new(oracles)),
        ("scoring math", Box::new(|_| scoring_math())),
        ("dual-rate sampling", Box::new(dual_rate)),
        ("end-to-end determinism", Box::new(|_| determinism())),
        ("meme cache", Box::new(meme_cache)),
        ("generation config", Box::new(|_| generation_config())),
        ("round-trip persistence", Box::new(round_trips)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        match f(&mut rng) {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
