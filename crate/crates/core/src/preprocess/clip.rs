use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::invalid;
use crate::signal::MultichannelAudio;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipNormConfig {
    /// Fraction in `(0, 1]`; the clip threshold is this percentile of `|x|`.
    pub percentile: f64,
    /// Peak absolute amplitude after rescaling, in `(0, 1]`.
    pub target_peak: f64,
}

impl Default for ClipNormConfig {
    fn default() -> Self {
        Self {
            percentile: 0.998,
            target_peak: 0.95,
        }
    }
}

impl ClipNormConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return Err(invalid!("percentile {} outside (0, 1]", self.percentile));
        }
        if !(self.target_peak > 0.0 && self.target_peak <= 1.0) {
            return Err(invalid!("target peak {} outside (0, 1]", self.target_peak));
        }
        Ok(())
    }
}

/// Nearest-rank percentile of `|x|`.
fn abs_percentile(x: &[f64], p: f64) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    mags[rank - 1]
}

/// Clips each channel at a percentile of its absolute values, then rescales
/// it so that its peak equals `target_peak`. All-zero channels pass through.
pub fn clip_normalize(
    audio: &MultichannelAudio,
    cfg: &ClipNormConfig,
) -> Result<MultichannelAudio> {
    cfg.validate()?;
    let channels = audio
        .channels()
        .iter()
        .map(|x| {
            if x.is_empty() {
                return x.clone();
            }
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak == 0.0 {
                return x.clone();
            }
            let mut threshold = abs_percentile(x, cfg.percentile);
            if threshold <= 0.0 {
                // mostly-silent channel: clipping at zero would erase it
                threshold = peak;
            }
            let clipped: Vec<f64> = x.iter().map(|v| v.clamp(-threshold, threshold)).collect();
            let new_peak = clipped.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gain = cfg.target_peak / new_peak;
            clipped.into_iter().map(|v| v * gain).collect()
        })
        .collect();
    MultichannelAudio::new(channels, audio.sample_rate())
}
