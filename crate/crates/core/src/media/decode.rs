//! Media decoding contract with an `ffmpeg` subprocess backend and a
//! synthetic in-memory backend for tests and offline runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SignalSeries;
use crate::hashing::{seeded_stream, seeded_u64};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("cannot read media {0}")]
    Unreadable(String),
    #[error("{tool} failed: {message}")]
    Tool { tool: &'static str, message: String },
    #[error("decoder cannot handle {0}")]
    Unsupported(String),
}

/// A clip generated procedurally from a seed. Planted climax intervals get a
/// loud audio plateau and brightened frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMedia {
    pub duration_s: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    #[serde(default)]
    pub climaxes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaRef {
    File(PathBuf),
    Synthetic(SyntheticMedia),
}

impl MediaRef {
    pub fn describe(&self) -> String {
        match self {
            MediaRef::File(p) => p.display().to_string(),
            MediaRef::Synthetic(s) => format!("synthetic:{}", s.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediaInfo {
    pub duration_s: f64,
    pub fps: f64,
    pub frame_count: u64,
    pub width: u32,
    pub height: u32,
}

pub trait MediaDecoder: Send + Sync {
    fn probe(&self, media: &MediaRef) -> Result<MediaInfo, DecodeError>;

    /// Frames at the given timestamps, scaled to `w`×`h`.
    fn frames_at(
        &self,
        media: &MediaRef,
        timestamps_s: &[f64],
        w: u32,
        h: u32,
    ) -> Result<Vec<RgbImage>, DecodeError>;

    fn audio_envelope(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError>;

    fn luma_series(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError>;

    /// Frames by index, via the clip's frame rate.
    fn frames_by_index(
        &self,
        media: &MediaRef,
        indices: &[u64],
        w: u32,
        h: u32,
    ) -> Result<Vec<RgbImage>, DecodeError> {
        let info = self.probe(media)?;
        let times: Vec<f64> = indices.iter().map(|&i| i as f64 / info.fps).collect();
        self.frames_at(media, &times, w, h)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticDecoder;

impl SyntheticDecoder {
    fn media<'a>(&self, media: &'a MediaRef) -> Result<&'a SyntheticMedia, DecodeError> {
        match media {
            MediaRef::Synthetic(s) => Ok(s),
            MediaRef::File(p) => Err(DecodeError::Unsupported(p.display().to_string())),
        }
    }

    fn in_climax(s: &SyntheticMedia, t: f64) -> bool {
        s.climaxes.iter().any(|&(a, b)| a <= t && t < b)
    }

    fn scene_color(s: &SyntheticMedia, t: f64) -> [u8; 3] {
        let scene = (t / 3.0).floor() as u64;
        let v = seeded_u64(s.seed, &[b"scene", &scene.to_le_bytes()]);
        let base = [
            40 + (v & 0x1f) as u8,
            40 + ((v >> 8) & 0x1f) as u8,
            40 + ((v >> 16) & 0x1f) as u8,
        ];
        if Self::in_climax(s, t) {
            base.map(|c| c.saturating_add(120))
        } else {
            base
        }
    }
}

impl MediaDecoder for SyntheticDecoder {
    fn probe(&self, media: &MediaRef) -> Result<MediaInfo, DecodeError> {
        let s = self.media(media)?;
        Ok(MediaInfo {
            duration_s: s.duration_s,
            fps: s.fps,
            frame_count: (s.duration_s * s.fps).floor().max(1.0) as u64,
            width: s.width,
            height: s.height,
        })
    }

    fn frames_at(
        &self,
        media: &MediaRef,
        timestamps_s: &[f64],
        w: u32,
        h: u32,
    ) -> Result<Vec<RgbImage>, DecodeError> {
        let s = self.media(media)?;
        Ok(timestamps_s
            .iter()
            .map(|&t| {
                let color = Self::scene_color(s, t);
                let bar = ((t / s.duration_s.max(1e-9)) * w as f64) as u32;
                RgbImage::from_fn(w, h, |x, _| {
                    if x == bar.min(w - 1) {
                        Rgb([255, 255, 255])
                    } else {
                        Rgb(color)
                    }
                })
            })
            .collect())
    }

    fn audio_envelope(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError> {
        let s = self.media(media)?;
        let n = (s.duration_s / window_s).ceil().max(1.0) as usize;
        let noise = seeded_stream(s.seed, b"audio");
        let values = noise
            .take(n)
            .enumerate()
            .map(|(i, r)| {
                let t = i as f64 * window_s;
                let jitter = (r % 1000) as f64 / 1000.0 * 0.02;
                if Self::in_climax(s, t) {
                    0.9 + jitter
                } else {
                    0.2 + jitter
                }
            })
            .collect();
        Ok(SignalSeries::new(values, window_s))
    }

    fn luma_series(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError> {
        let s = self.media(media)?;
        let n = (s.duration_s / window_s).ceil().max(1.0) as usize;
        let values = (0..n)
            .map(|i| {
                let c = Self::scene_color(s, i as f64 * window_s);
                (0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64) / 255.0
            })
            .collect();
        Ok(SignalSeries::new(values, window_s))
    }
}

/// Decodes real files by shelling out to `ffprobe` and `ffmpeg`.
#[derive(Debug, Clone)]
pub struct FfmpegDecoder {
    pub ffmpeg: PathBuf,
    pub ffprobe: PathBuf,
}

impl Default for FfmpegDecoder {
    fn default() -> Self {
        Self {
            ffmpeg: "ffmpeg".into(),
            ffprobe: "ffprobe".into(),
        }
    }
}

fn run(tool: &'static str, cmd: &mut Command) -> Result<Vec<u8>, DecodeError> {
    let out = cmd
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .output()
        .map_err(|e| DecodeError::Tool {
            tool,
            message: e.to_string(),
        })?;
    if !out.status.success() {
        return Err(DecodeError::Tool {
            tool,
            message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(out.stdout)
}

fn parse_rate(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.parse().ok()?, b.parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

impl FfmpegDecoder {
    fn path<'a>(&self, media: &'a MediaRef) -> Result<&'a Path, DecodeError> {
        match media {
            MediaRef::File(p) if p.is_file() => Ok(p),
            MediaRef::File(p) => Err(DecodeError::Unreadable(p.display().to_string())),
            MediaRef::Synthetic(s) => {
                Err(DecodeError::Unsupported(format!("synthetic:{}", s.seed)))
            }
        }
    }

    fn raw(&self, path: &Path, filter: &str, pix_fmt: &str) -> Result<Vec<u8>, DecodeError> {
        run(
            "ffmpeg",
            Command::new(&self.ffmpeg)
                .args(["-v", "error", "-i"])
                .arg(path)
                .args(["-vf", filter, "-f", "rawvideo", "-pix_fmt", pix_fmt, "-"]),
        )
    }
}

impl MediaDecoder for FfmpegDecoder {
    fn probe(&self, media: &MediaRef) -> Result<MediaInfo, DecodeError> {
        let path = self.path(media)?;
        let out = run(
            "ffprobe",
            Command::new(&self.ffprobe)
                .args(["-v", "error", "-select_streams", "v:0", "-show_entries"])
                .arg("format=duration:stream=avg_frame_rate,nb_frames,width,height")
                .args(["-of", "json"])
                .arg(path),
        )?;
        let v: serde_json::Value = serde_json::from_slice(&out).map_err(|e| DecodeError::Tool {
            tool: "ffprobe",
            message: e.to_string(),
        })?;
        let stream = &v["streams"][0];
        let bad = |what: &str| DecodeError::Tool {
            tool: "ffprobe",
            message: format!("missing {what}"),
        };
        let duration_s: f64 = v["format"]["duration"]
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("duration"))?;
        let fps = stream["avg_frame_rate"]
            .as_str()
            .and_then(parse_rate)
            .ok_or_else(|| bad("frame rate"))?;
        let frame_count = stream["nb_frames"]
            .as_str()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| (duration_s * fps).floor() as u64)
            .max(1);
        Ok(MediaInfo {
            duration_s,
            fps,
            frame_count,
            width: stream["width"].as_u64().ok_or_else(|| bad("width"))? as u32,
            height: stream["height"].as_u64().ok_or_else(|| bad("height"))? as u32,
        })
    }

    fn frames_at(
        &self,
        media: &MediaRef,
        timestamps_s: &[f64],
        w: u32,
        h: u32,
    ) -> Result<Vec<RgbImage>, DecodeError> {
        let path = self.path(media)?;
        timestamps_s
            .iter()
            .map(|t| {
                let bytes = run(
                    "ffmpeg",
                    Command::new(&self.ffmpeg)
                        .args(["-v", "error", "-ss", &format!("{t:.3}"), "-i"])
                        .arg(path)
                        .args(["-frames:v", "1", "-vf", &format!("scale={w}:{h}")])
                        .args(["-f", "rawvideo", "-pix_fmt", "rgb24", "-"]),
                )?;
                RgbImage::from_raw(w, h, bytes).ok_or_else(|| DecodeError::Tool {
                    tool: "ffmpeg",
                    message: format!("short frame at {t}s"),
                })
            })
            .collect()
    }

    fn audio_envelope(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError> {
        const RATE: f64 = 16_000.0;
        let path = self.path(media)?;
        let bytes = run(
            "ffmpeg",
            Command::new(&self.ffmpeg)
                .args(["-v", "error", "-i"])
                .arg(path)
                .args(["-vn", "-ac", "1", "-ar", "16000", "-f", "f32le", "-"]),
        )?;
        let samples: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let per_window = ((window_s * RATE).round() as usize).max(1);
        let values = samples
            .chunks(per_window)
            .map(|w| (w.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / w.len() as f64).sqrt())
            .collect();
        Ok(SignalSeries::new(values, window_s))
    }

    fn luma_series(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError> {
        let path = self.path(media)?;
        let bytes = self.raw(path, &format!("fps=1/{window_s},scale=32:32"), "gray")?;
        let values = bytes
            .chunks(32 * 32)
            .map(|f| f.iter().map(|&b| b as f64).sum::<f64>() / f.len() as f64 / 255.0)
            .collect();
        Ok(SignalSeries::new(values, window_s))
    }
}

/// Routes synthetic clips to [`SyntheticDecoder`] and files to
/// [`FfmpegDecoder`].
#[derive(Debug, Clone, Default)]
pub struct DispatchDecoder {
    pub synthetic: SyntheticDecoder,
    pub ffmpeg: FfmpegDecoder,
}

impl DispatchDecoder {
    fn pick(&self, media: &MediaRef) -> &dyn MediaDecoder {
        match media {
            MediaRef::Synthetic(_) => &self.synthetic,
            MediaRef::File(_) => &self.ffmpeg,
        }
    }
}

impl MediaDecoder for DispatchDecoder {
    fn probe(&self, media: &MediaRef) -> Result<MediaInfo, DecodeError> {
        self.pick(media).probe(media)
    }

    fn frames_at(
        &self,
        media: &MediaRef,
        timestamps_s: &[f64],
        w: u32,
        h: u32,
    ) -> Result<Vec<RgbImage>, DecodeError> {
        self.pick(media).frames_at(media, timestamps_s, w, h)
    }

    fn audio_envelope(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError> {
        self.pick(media).audio_envelope(media, window_s)
    }

    fn luma_series(&self, media: &MediaRef, window_s: f64) -> Result<SignalSeries, DecodeError> {
        self.pick(media).luma_series(media, window_s)
    }
}
