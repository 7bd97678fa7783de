//! Frame extraction and composite assembly on top of a [`MediaDecoder`].

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::decode::{DecodeError, MediaDecoder, MediaRef};
use super::{
    composite_layout, detect_climax, dual_rate_sample, stitch, ClimaxConfig, ClimaxInterval,
    FramePlan, GridLayout, MediaError, SampleSchedule, SamplingRates, DEFAULT_MAX_COLS,
};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Media(#[from] MediaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeConfig {
    pub cell_w: u32,
    pub cell_h: u32,
    pub max_cols: u32,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        Self {
            cell_w: 160,
            cell_h: 90,
            max_cols: DEFAULT_MAX_COLS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TieredComposite {
    pub plan: FramePlan,
    pub layout: GridLayout,
    pub image: RgbImage,
}

/// Pick representative frames by tiered bucket midpoints and stitch them.
pub fn tiered_composite(
    decoder: &dyn MediaDecoder,
    media: &MediaRef,
    config: &CompositeConfig,
) -> Result<TieredComposite, ProcessError> {
    let info = decoder.probe(media)?;
    let plan = FramePlan::for_frames(info.frame_count)?;
    let frames =
        decoder.frames_by_index(media, &plan.chosen_indices, config.cell_w, config.cell_h)?;
    let layout = composite_layout(
        plan.chosen_indices.len() as u32,
        config.cell_w,
        config.cell_h,
        config.max_cols,
    )?;
    let image = stitch(&frames, &layout)?;
    Ok(TieredComposite {
        plan,
        layout,
        image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetProcessing {
    /// Window length for the audio and luminance series.
    pub window_s: f64,
    pub climax: ClimaxConfig,
    pub rates: SamplingRates,
}

impl Default for TargetProcessing {
    fn default() -> Self {
        Self {
            window_s: 0.5,
            climax: ClimaxConfig::default(),
            rates: SamplingRates::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClimaxComposite {
    pub climaxes: Vec<ClimaxInterval>,
    pub schedule: SampleSchedule,
    pub layout: GridLayout,
    pub image: RgbImage,
}

/// Detect climaxes, sample at the dual rate and stitch every sampled frame.
pub fn climax_composite(
    decoder: &dyn MediaDecoder,
    media: &MediaRef,
    processing: &TargetProcessing,
    config: &CompositeConfig,
) -> Result<ClimaxComposite, ProcessError> {
    let info = decoder.probe(media)?;
    let audio = decoder.audio_envelope(media, processing.window_s)?;
    let luma = decoder.luma_series(media, processing.window_s)?;
    let climaxes: Vec<ClimaxInterval> = detect_climax(&audio, &luma, &processing.climax)?
        .into_iter()
        .filter_map(|c| {
            let end = c.end_s.min(info.duration_s);
            (end > c.start_s).then_some(ClimaxInterval { end_s: end, ..c })
        })
        .collect();
    let schedule = dual_rate_sample(info.duration_s, &climaxes, &processing.rates)?;
    let frames = decoder.frames_at(media, &schedule.timestamps_s, config.cell_w, config.cell_h)?;
    let layout = composite_layout(
        schedule.timestamps_s.len() as u32,
        config.cell_w,
        config.cell_h,
        config.max_cols,
    )?;
    let image = stitch(&frames, &layout)?;
    Ok(ClimaxComposite {
        climaxes,
        schedule,
        layout,
        image,
    })
}
