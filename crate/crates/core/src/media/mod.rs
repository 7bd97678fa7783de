//! Frame selection, composite layout, climax detection and timestamp sampling.
//!
//! Everything here is pure arithmetic over frame counts, signals and images.
//! Decoding real media files lives behind [`decode::MediaDecoder`].

pub mod decode;
pub mod pipeline;

use image::{GenericImage, GenericImageView, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_Z_THRESHOLD: f64 = 2.5;
pub const DEFAULT_MIN_GAP_S: f64 = 1.0;
pub const DEFAULT_MAX_COLS: u32 = 4;

/// Timestamps are rounded to this resolution (seconds) so grid arithmetic
/// does not leak float noise into schedules.
const TIME_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediaError {
    #[error("frame count must be positive")]
    NoFrames,
    #[error("cannot pick {k} frames out of {n}")]
    TooManyFrames { n: u64, k: u64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("signal `{0}` is empty")]
    EmptySignal(&'static str),
    #[error("signal `{0}` contains a negative or non-finite value")]
    BadSignal(&'static str),
    #[error("expected {expected} frames, got {actual}")]
    FrameCount { expected: usize, actual: usize },
    #[error("frame {index} is {w}x{h}, cells are {cell_w}x{cell_h}")]
    FrameSize {
        index: usize,
        w: u32,
        h: u32,
        cell_w: u32,
        cell_h: u32,
    },
    #[error("climax interval [{start}, {end}) outside [0, {duration}] or malformed")]
    BadInterval { start: f64, end: f64, duration: f64 },
    #[error("cell {0} is outside the layout")]
    NoSuchCell(usize),
    #[error("PNG encoding failed: {0}")]
    Encode(String),
}

/// Number of representative frames to keep from a clip of `n` frames.
pub fn tiered_frame_count(n: u64) -> Result<u64, MediaError> {
    match n {
        0 => Err(MediaError::NoFrames),
        1..=12 => Ok(n),
        13..=60 => Ok(12),
        61..=160 => Ok(16),
        _ => Ok(24),
    }
}

/// Split `[0, n)` into `k` equal-width buckets and return each bucket's
/// middle frame, `floor((i + 0.5) * n / k)`.
pub fn bucket_midpoints(n: u64, k: u64) -> Result<Vec<u64>, MediaError> {
    if n == 0 {
        return Err(MediaError::NoFrames);
    }
    if k == 0 {
        return Err(MediaError::NonPositive("k"));
    }
    if k > n {
        return Err(MediaError::TooManyFrames { n, k });
    }
    Ok((0..k)
        .map(|i| ((2 * i + 1) as u128 * n as u128 / (2 * k) as u128) as u64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePlan {
    pub total_frames: u64,
    pub chosen_indices: Vec<u64>,
}

impl FramePlan {
    pub fn for_frames(total_frames: u64) -> Result<Self, MediaError> {
        let k = tiered_frame_count(total_frames)?;
        Ok(Self {
            total_frames,
            chosen_indices: bucket_midpoints(total_frames, k)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: u32,
    pub cols: u32,
    pub cell_w: u32,
    pub cell_h: u32,
    /// `(row, col)` per frame, in temporal order.
    pub positions: Vec<(u32, u32)>,
}

impl GridLayout {
    pub fn width(&self) -> u32 {
        self.cols * self.cell_w
    }

    pub fn height(&self) -> u32 {
        self.rows * self.cell_h
    }
}

pub fn composite_layout(
    k: u32,
    cell_w: u32,
    cell_h: u32,
    max_cols: u32,
) -> Result<GridLayout, MediaError> {
    for (v, name) in [
        (k, "k"),
        (cell_w, "cell_w"),
        (cell_h, "cell_h"),
        (max_cols, "max_cols"),
    ] {
        if v == 0 {
            return Err(MediaError::NonPositive(name));
        }
    }
    let cols = k.min(max_cols);
    let rows = k.div_ceil(cols);
    Ok(GridLayout {
        rows,
        cols,
        cell_w,
        cell_h,
        positions: (0..k).map(|i| (i / cols, i % cols)).collect(),
    })
}

/// Lossless PNG bytes for a composite.
pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>, MediaError> {
    let mut out = Vec::new();
    image
        .write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| MediaError::Encode(e.to_string()))?;
    Ok(out)
}

/// Paste frames into their grid cells. Unused cells stay black.
pub fn stitch(frames: &[RgbImage], layout: &GridLayout) -> Result<RgbImage, MediaError> {
    if frames.len() != layout.positions.len() {
        return Err(MediaError::FrameCount {
            expected: layout.positions.len(),
            actual: frames.len(),
        });
    }
    let mut out = RgbImage::from_pixel(layout.width(), layout.height(), Rgb([0, 0, 0]));
    for (index, (frame, &(row, col))) in frames.iter().zip(&layout.positions).enumerate() {
        if frame.dimensions() != (layout.cell_w, layout.cell_h) {
            return Err(MediaError::FrameSize {
                index,
                w: frame.width(),
                h: frame.height(),
                cell_w: layout.cell_w,
                cell_h: layout.cell_h,
            });
        }
        out.copy_from(frame, col * layout.cell_w, row * layout.cell_h)
            .expect("cell lies inside the canvas");
    }
    Ok(out)
}

/// Copy out the cell holding frame `index`.
pub fn crop_cell(
    image: &RgbImage,
    layout: &GridLayout,
    index: usize,
) -> Result<RgbImage, MediaError> {
    let &(row, col) = layout
        .positions
        .get(index)
        .ok_or(MediaError::NoSuchCell(index))?;
    Ok(image
        .view(
            col * layout.cell_w,
            row * layout.cell_h,
            layout.cell_w,
            layout.cell_h,
        )
        .to_image())
}

/// Per-window signal such as an audio RMS envelope or mean frame luminance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSeries {
    pub values: Vec<f64>,
    pub window_seconds: f64,
}

impl SignalSeries {
    pub fn new(values: Vec<f64>, window_seconds: f64) -> Self {
        Self {
            values,
            window_seconds,
        }
    }

    fn check(&self, name: &'static str) -> Result<(), MediaError> {
        if self.values.is_empty() {
            return Err(MediaError::EmptySignal(name));
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return Err(MediaError::NonPositive("window_seconds"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MediaError::BadSignal(name));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 * self.window_seconds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimaxInterval {
    pub start_s: f64,
    pub end_s: f64,
}

impl ClimaxInterval {
    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimaxConfig {
    pub z_threshold: f64,
    pub min_gap_s: f64,
}

impl Default for ClimaxConfig {
    fn default() -> Self {
        Self {
            z_threshold: DEFAULT_Z_THRESHOLD,
            min_gap_s: DEFAULT_MIN_GAP_S,
        }
    }
}

/// z-scores of absolute first differences. Zero variance gives all zeros.
fn change_scores(values: &[f64]) -> Vec<f64> {
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if diffs.is_empty() {
        return diffs;
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; diffs.len()];
    }
    diffs.iter().map(|d| (d - mean) / sd).collect()
}

/// Intervals where either channel changes sharply.
///
/// A change between windows `j` and `j + 1` marks window `j + 1` as one
/// interval; intervals on both channels are pooled and merged when the gap
/// between them is below `min_gap_s`.
pub fn detect_climax(
    audio: &SignalSeries,
    luma: &SignalSeries,
    config: &ClimaxConfig,
) -> Result<Vec<ClimaxInterval>, MediaError> {
    audio.check("audio")?;
    luma.check("luma")?;
    let mut raw = Vec::new();
    for series in [audio, luma] {
        let w = series.window_seconds;
        for (j, z) in change_scores(&series.values).into_iter().enumerate() {
            if z > config.z_threshold {
                raw.push(ClimaxInterval {
                    start_s: round_time((j + 1) as f64 * w),
                    end_s: round_time((j + 2) as f64 * w),
                });
            }
        }
    }
    raw.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.end_s.total_cmp(&b.end_s))
    });
    let mut merged: Vec<ClimaxInterval> = Vec::new();
    for iv in raw {
        match merged.last_mut() {
            Some(last) if iv.start_s - last.end_s < config.min_gap_s => {
                last.end_s = last.end_s.max(iv.end_s);
            }
            _ => merged.push(iv),
        }
    }
    Ok(merged)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRates {
    pub normal_fps: f64,
    pub climax_fps: f64,
}

impl Default for SamplingRates {
    fn default() -> Self {
        Self {
            normal_fps: 0.5,
            climax_fps: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSchedule {
    /// Union of both sets, sorted.
    pub timestamps_s: Vec<f64>,
    pub normal_s: Vec<f64>,
    pub climax_s: Vec<f64>,
    pub rates: SamplingRates,
}

fn round_time(t: f64) -> f64 {
    (t / TIME_RESOLUTION).round() * TIME_RESOLUTION
}

fn grid(start: f64, end: f64, step: f64) -> impl Iterator<Item = f64> {
    (0u64..)
        .map(move |j| round_time(start + j as f64 * step))
        .take_while(move |&t| t < end - TIME_RESOLUTION / 2.0)
}

/// Sample a clip at the normal rate outside climaxes and at the climax rate
/// inside them.
///
/// The normal grid starts at 0 and drops any timestamp falling within a
/// climax interval, endpoints included. Each climax is sampled from its start
/// up to (not including) its end.
pub fn dual_rate_sample(
    duration_s: f64,
    climaxes: &[ClimaxInterval],
    rates: &SamplingRates,
) -> Result<SampleSchedule, MediaError> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(MediaError::NonPositive("duration_s"));
    }
    if !(rates.normal_fps > 0.0 && rates.climax_fps > 0.0) {
        return Err(MediaError::NonPositive("sampling rate"));
    }
    for c in climaxes {
        if !(c.start_s >= 0.0 && c.end_s > c.start_s && c.end_s <= duration_s) {
            return Err(MediaError::BadInterval {
                start: c.start_s,
                end: c.end_s,
                duration: duration_s,
            });
        }
    }
    let in_climax = |t: f64| climaxes.iter().any(|c| c.start_s <= t && t <= c.end_s);
    let normal_s: Vec<f64> = grid(0.0, duration_s, 1.0 / rates.normal_fps)
        .filter(|&t| !in_climax(t))
        .collect();
    let mut climax_s: Vec<f64> = climaxes
        .iter()
        .flat_map(|c| grid(c.start_s, c.end_s, 1.0 / rates.climax_fps))
        .collect();
    climax_s.sort_by(f64::total_cmp);
    climax_s.dedup();

    let mut timestamps_s: Vec<f64> = normal_s.iter().chain(&climax_s).copied().collect();
    timestamps_s.sort_by(f64::total_cmp);
    timestamps_s.dedup();
    Ok(SampleSchedule {
        timestamps_s,
        normal_s,
        climax_s,
        rates: *rates,
    })
}
