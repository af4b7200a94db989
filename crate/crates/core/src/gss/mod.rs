//! Guided source separation: activity-guided cACGMM mask estimation per
//! frequency bin followed by mask-based MVDR beamforming.

mod cacgmm;
mod extract;
mod mvdr;

pub use cacgmm::{
    activity_priors, cacgmm_em, cacgmm_em_with_priors, chunked_cacgmm, estimate_masks,
    CacgmmResult, MaskTensor,
};
pub use extract::{extract_speaker_segment, segment_window};
pub use mvdr::{mvdr_beamform, mvdr_beamform_with_reference, souden_weights, spatial_covariances};

use alloc::vec::Vec;

use crate::error::{invalid, mismatch};
use crate::fusion::SoftActivity;
use crate::preprocess::WpeConfig;
use crate::signal::StftParams;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GssConfig {
    pub iterations: usize,
    /// Context added on both sides of a turn before separation, in seconds.
    pub context_margin: f64,
    /// Frames per independently processed chunk; `None` processes the whole segment.
    pub chunk_frames: Option<usize>,
    pub add_noise_source: bool,
    /// Lower bound on the noise-source prior.
    pub noise_floor: f64,
    /// Re-estimate time-invariant source weights inside the activity support
    /// instead of keeping the activity priors frozen.
    pub reestimate_priors: bool,
    pub wpe_enabled: bool,
    pub wpe: WpeConfig,
    pub stft: StftParams,
}

impl Default for GssConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            context_margin: 0.5,
            chunk_frames: None,
            add_noise_source: true,
            noise_floor: 0.01,
            reestimate_priors: false,
            wpe_enabled: true,
            wpe: WpeConfig {
                taps: 10,
                delay: 3,
                iterations: 1,
                ..WpeConfig::default()
            },
            stft: StftParams::default(),
        }
    }
}

impl GssConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid!("need at least one EM iteration"));
        }
        if matches!(self.chunk_frames, Some(c) if c < 2) {
            return Err(invalid!("chunks need at least 2 frames"));
        }
        if !(self.context_margin >= 0.0) {
            return Err(invalid!("context margin must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.noise_floor) {
            return Err(invalid!("noise floor outside [0, 1]"));
        }
        self.stft.validate()
    }
}

/// Multiplies each speaker's activity by a binary per-frame mask.
pub fn apply_vad_mask(activities: &SoftActivity, vad: &[Vec<bool>]) -> Result<SoftActivity> {
    if vad.len() != activities.num_speakers() {
        return Err(mismatch!(
            "{} mask rows for {} speakers",
            vad.len(),
            activities.num_speakers()
        ));
    }
    let mut out = activities.clone();
    for (s, (row, mask)) in out.probs.iter_mut().zip(vad).enumerate() {
        if mask.len() != row.len() {
            return Err(mismatch!(
                "speaker {s}: {} mask frames for {} activity frames",
                mask.len(),
                row.len()
            ));
        }
        for (p, &m) in row.iter_mut().zip(mask) {
            if !m {
                *p = 0.0;
            }
        }
    }
    Ok(out)
}
