use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;
use rand::Rng;

use crate::diarize::{EmbeddingEntry, EmbeddingSet};
use crate::error::invalid;
use crate::fusion::SoftActivity;
use crate::rng::{gaussian, split, unit_vector};
use crate::segment::Segmentation;
use crate::Result;

/// Synthetic speaker embeddings: one Gaussian blob per speaker around a
/// random unit centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingSimConfig {
    pub dim: usize,
    /// Entry length and hop in seconds.
    pub frame_step: f64,
    /// Ratio of the within-speaker spread (RMS distance of a vector to its
    /// centroid) to the mean distance between unit centroids, `sqrt(2)`.
    pub spread_ratio: f64,
}

impl Default for EmbeddingSimConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            frame_step: 0.1,
            spread_ratio: 0.2,
        }
    }
}

/// Embeddings for every frame of `reference` in which somebody speaks. A
/// frame with one active speaker carries one vector; overlapped frames carry
/// one vector per active speaker, as a multi-speaker extractor would emit.
/// Speaker centroids are drawn in sorted label order.
pub fn synthetic_embeddings(reference: &Segmentation, cfg: &EmbeddingSimConfig, seed: u64) -> Result<EmbeddingSet> {
    if cfg.dim < 2 || !(cfg.frame_step > 0.0) || !(cfg.spread_ratio >= 0.0) {
        return Err(invalid!("invalid embedding simulation config"));
    }
    let speakers = reference.speakers();
    let mut rng = split(seed, 0);
    let centroids: Vec<Vec<f64>> = speakers.iter().map(|_| unit_vector(&mut rng, cfg.dim)).collect();
    let sigma = cfg.spread_ratio * core::f64::consts::SQRT_2 / (cfg.dim as f64).sqrt();
    let frames = (reference.end_time() / cfg.frame_step).ceil() as usize;
    let activity = reference.to_activity_matrix(&speakers, frames, cfg.frame_step);
    let mut entries = Vec::new();
    for f in 0..frames {
        let active: Vec<usize> = (0..speakers.len()).filter(|&s| activity[s][f] > 0.5).collect();
        if active.is_empty() {
            continue;
        }
        let vectors = active
            .iter()
            .map(|&s| centroids[s].iter().map(|c| c + sigma * gaussian(&mut rng)).collect())
            .collect();
        let start = f as f64 * cfg.frame_step;
        entries.push(EmbeddingEntry::new(start, start + cfg.frame_step, vectors));
    }
    EmbeddingSet::new(cfg.dim, entries, format!("synthetic-{seed}"))
}

/// Noisy soft activities derived from `reference`: active frames draw from
/// `[1 - noise, 1]`, inactive ones from `[0, noise]`. Rows follow sorted
/// speaker labels.
pub fn synthetic_soft_activity(reference: &Segmentation, frame_step: f64, noise: f64, seed: u64) -> Result<SoftActivity> {
    if !(0.0..0.5).contains(&noise) {
        return Err(invalid!("activity noise must lie in [0, 0.5)"));
    }
    let speakers = reference.speakers();
    let frames = (reference.end_time() / frame_step).ceil() as usize;
    let mut rng = split(seed, 1);
    let probs = reference
        .to_activity_matrix(&speakers, frames, frame_step)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|a| {
                    let jitter = if noise > 0.0 { rng.gen_range(0.0..noise) } else { 0.0 };
                    if a > 0.5 { 1.0 - jitter } else { jitter }
                })
                .collect()
        })
        .collect();
    SoftActivity::new(reference.session_id.clone(), probs, frame_step)?.with_speakers(speakers)
}
