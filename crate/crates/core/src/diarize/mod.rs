//! Clustering-based diarization and speaker counting over precomputed
//! speaker embeddings.
//!
//! The flow is: split entries into single-speaker and mixed ones, reduce the
//! single-speaker vectors, fit a GMM, merge similar clusters and reject small
//! ones, then attract every remaining frame (including mixed speech) to the
//! nearest surviving centroid.

mod clusters;
mod embedding;
mod gmm;
mod reduce;

pub use clusters::{
    assign_mixed_frames, count_speakers, gmm_cluster, merge_reject_clusters, ClusterSet,
};
pub use embedding::{
    concat_normalize, cosine, select_single_speaker_frames, EmbeddingEntry, EmbeddingSet,
    FrameSplit,
};
pub use gmm::{fit_gmm, GmmFit, GmmOptions};
pub use reduce::{reduce_dim, Reduction};

use crate::error::invalid;
use crate::segment::Segmentation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiarizeConfig {
    /// Pairwise cosine above which the vectors of one entry count as one speaker.
    pub single_speaker_threshold: f64,
    pub merge_cos_threshold: f64,
    /// Clusters with `N < N_max / reject_thr` are rejected.
    pub reject_thr: f64,
    pub max_clusters: usize,
    pub reduced_dim: usize,
    pub reduction: Reduction,
    /// Output time resolution in seconds.
    pub frame_step: f64,
    pub variance_floor: f64,
    pub gmm_restarts: usize,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        Self {
            single_speaker_threshold: 0.7,
            merge_cos_threshold: 0.75,
            reject_thr: 10.0,
            max_clusters: 8,
            reduced_dim: 12,
            reduction: Reduction::Linear,
            frame_step: 0.1,
            variance_floor: 1e-6,
            gmm_restarts: 3,
        }
    }
}

impl DiarizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_clusters == 0 || self.reduced_dim == 0 {
            return Err(invalid!("max_clusters and reduced_dim must be at least 1"));
        }
        if !(self.merge_cos_threshold > -1.0 && self.merge_cos_threshold < 1.0) {
            return Err(invalid!(
                "merge threshold {} outside (-1, 1)",
                self.merge_cos_threshold
            ));
        }
        if !(self.reject_thr > 0.0) {
            return Err(invalid!("reject_thr must be positive"));
        }
        if !(self.frame_step > 0.0) {
            return Err(invalid!("frame_step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diarization {
    pub segmentation: Segmentation,
    pub clusters: ClusterSet,
    pub speaker_count: usize,
}

/// Runs the whole clustering pipeline on one embedding set.
///
/// `non_speech` lists cluster ids (after merging) that an external
/// classifier flagged as non-speech.
pub fn diarize(
    emb: &EmbeddingSet,
    cfg: &DiarizeConfig,
    seed: u64,
    non_speech: &[usize],
    session_id: &str,
) -> Result<Diarization> {
    let mut out = diarize_thresholds(emb, cfg, &[cfg.reject_thr], seed, non_speech, session_id)?;
    Ok(out.pop().expect("one threshold"))
}

/// [`diarize`] for several rejection thresholds. The GMM fit does not depend
/// on the threshold, so it runs once; result `i` equals `diarize` with
/// `reject_thr = thresholds[i]` and the same seed.
pub fn diarize_thresholds(
    emb: &EmbeddingSet,
    cfg: &DiarizeConfig,
    thresholds: &[f64],
    seed: u64,
    non_speech: &[usize],
    session_id: &str,
) -> Result<alloc::vec::Vec<Diarization>> {
    cfg.validate()?;
    for &thr in thresholds {
        DiarizeConfig { reject_thr: thr, ..*cfg }.validate()?;
    }
    emb.validate()?;
    let split = select_single_speaker_frames(emb, cfg.single_speaker_threshold);
    let vectors: alloc::vec::Vec<alloc::vec::Vec<f64>> = split
        .single
        .entries
        .iter()
        .map(|e| e.vectors[0].clone())
        .collect();
    if vectors.is_empty() {
        return Err(Error::Empty("single-speaker frames"));
    }
    let n = vectors.len();
    let reduced = match cfg.reduction {
        Reduction::External => vectors.clone(),
        Reduction::Linear => {
            let target = cfg.reduced_dim.min(emb.dim).min(n.saturating_sub(1));
            if target == 0 {
                vectors.clone()
            } else {
                reduce_dim(&vectors, target, Reduction::Linear)?
            }
        }
    };
    let k = cfg.max_clusters.min(n);
    let mut fitted = gmm_cluster(
        &reduced,
        &DiarizeConfig {
            max_clusters: k,
            ..*cfg
        },
        seed,
    )?;
    // centroids live in the unreduced space so mixed vectors can be compared
    fitted.recompute(&vectors);
    thresholds
        .iter()
        .map(|&thr| {
            let mut clusters = merge_reject_clusters(&fitted, &DiarizeConfig { reject_thr: thr, ..*cfg });
            clusters.mark_non_speech(non_speech);
            let segmentation = assign_mixed_frames(
                &clusters,
                &split.single,
                &split.mixed,
                cfg.frame_step,
                session_id,
            )?;
            Ok(Diarization {
                speaker_count: count_speakers(&clusters),
                segmentation,
                clusters,
            })
        })
        .collect()
}
