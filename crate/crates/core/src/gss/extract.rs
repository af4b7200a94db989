use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use super::{estimate_masks, mvdr_beamform, GssConfig};
use crate::error::invalid;
use crate::fusion::SoftActivity;
use crate::preprocess::wpe_dereverberate;
use crate::segment::Turn;
use crate::signal::{istft, stft, MultichannelAudio};
use crate::Result;

/// Sample range `[start, end)` of `turn` extended by `margin` seconds on both
/// sides and clamped to `[0, len)`.
pub fn segment_window(turn: &Turn, margin: f64, sample_rate: u32, len: usize) -> (usize, usize) {
    let sr = sample_rate as f64;
    let start = ((turn.start - margin) * sr).floor().max(0.0) as usize;
    let end = ((turn.end + margin) * sr).ceil().max(0.0) as usize;
    (start.min(len), end.min(len))
}

/// Separates the speech of `turn.speaker` during `turn` from the
/// multichannel session recording, guided by `activities` (whose rows are
/// matched to speakers by label).
pub fn extract_speaker_segment(
    audio: &MultichannelAudio,
    turn: &Turn,
    activities: &SoftActivity,
    cfg: &GssConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if audio.num_channels() < 2 {
        return Err(invalid!("separation needs at least 2 channels"));
    }
    if !(turn.start < turn.end) || turn.start < 0.0 || turn.start >= audio.duration() {
        return Err(invalid!(
            "turn [{}, {}] outside session",
            turn.start,
            turn.end
        ));
    }
    let target = activities
        .speakers
        .iter()
        .position(|s| *s == turn.speaker)
        .ok_or_else(|| invalid!("speaker {} has no activity row", turn.speaker))?;
    let sr = audio.sample_rate();
    let (ws, we) = segment_window(turn, cfg.context_margin, sr, audio.len());
    let (ts, te) = segment_window(turn, 0.0, sr, audio.len());
    if we <= ws {
        return Err(invalid!("empty segment window"));
    }
    let window = audio.slice(ws, we);
    let mut spec = stft(&window, &cfg.stft)?;
    if cfg.wpe_enabled {
        if spec.frames() > cfg.wpe.taps + cfg.wpe.delay {
            spec = wpe_dereverberate(&spec, &cfg.wpe)?;
        } else {
            log::debug!("segment too short for WPE, skipped");
        }
    }
    let offset = ws as f64 / sr as f64;
    let masks = estimate_masks(&spec, activities, offset, cfg)?.masks;
    let y = mvdr_beamform(&spec, &masks, target)?;
    let out = istft(&y, &cfg.stft)?;
    let samples = out.channel(0);
    let a = (ts - ws).min(samples.len());
    let b = (te - ws).min(samples.len());
    Ok(samples[a..b].to_vec())
}
