use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use super::embedding::{cosine, normalized, EmbeddingSet};
use super::gmm::{fit_gmm, GmmOptions};
use super::DiarizeConfig;
use crate::segment::{sort_turns, Segmentation, Turn};
use crate::{Error, Result};

/// Cluster assignment of the single-speaker frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    /// Cluster id per single-speaker frame; `None` means unassigned.
    pub assignments: Vec<Option<usize>>,
    /// Unit-norm centroid per cluster id.
    pub centroids: Vec<Vec<f64>>,
    /// Frame count per cluster id (`N`).
    pub sizes: Vec<usize>,
    /// Clusters removed by the size rule; their frames are unassigned.
    pub rejected: BTreeSet<usize>,
    /// Clusters flagged as non-speech; their frames are discarded.
    pub non_speech: BTreeSet<usize>,
}

impl ClusterSet {
    /// Builds a cluster set from labels, with centroids computed from `vectors`.
    pub fn from_labels(labels: &[usize], vectors: &[Vec<f64>]) -> Self {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut set = Self {
            assignments: labels.iter().map(|&l| Some(l)).collect(),
            centroids: vec![Vec::new(); k],
            sizes: vec![0; k],
            rejected: BTreeSet::new(),
            non_speech: BTreeSet::new(),
        };
        set.recompute(vectors);
        set
    }

    /// Recomputes sizes and centroids from the current assignments.
    pub fn recompute(&mut self, vectors: &[Vec<f64>]) {
        let dim = vectors.first().map_or(0, Vec::len);
        let k = self.centroids.len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0; k];
        for (a, v) in self.assignments.iter().zip(vectors) {
            if let Some(c) = *a {
                sizes[c] += 1;
                let unit = normalized(v).unwrap_or_else(|| v.clone());
                for (s, x) in sums[c].iter_mut().zip(unit) {
                    *s += x;
                }
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                self.centroids[c] = normalized(&sums[c]).unwrap_or_else(|| sums[c].clone());
            }
            if !self.rejected.contains(&c) {
                self.sizes[c] = sizes[c];
            }
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    /// `N_max`: the largest cluster size.
    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Ids of clusters that are neither rejected, non-speech nor empty.
    pub fn surviving(&self) -> Vec<usize> {
        (0..self.centroids.len())
            .filter(|c| {
                !self.rejected.contains(c) && !self.non_speech.contains(c) && self.sizes[*c] > 0
            })
            .collect()
    }

    /// Flags clusters as non-speech; their frames are dropped from the output.
    pub fn mark_non_speech(&mut self, ids: &[usize]) {
        self.non_speech
            .extend(ids.iter().copied().filter(|&c| c < self.centroids.len()));
    }

    fn remove_cluster(&mut self, victim: usize, into: usize) {
        for a in self.assignments.iter_mut() {
            match *a {
                Some(c) if c == victim => *a = Some(into),
                Some(c) if c > victim => *a = Some(c - 1),
                _ => {}
            }
        }
        self.centroids.remove(victim);
        self.sizes.remove(victim);
        let shift = |s: &BTreeSet<usize>| -> BTreeSet<usize> {
            s.iter()
                .filter(|&&c| c != victim)
                .map(|&c| if c > victim { c - 1 } else { c })
                .collect()
        };
        self.rejected = shift(&self.rejected);
        self.non_speech = shift(&self.non_speech);
    }
}

/// Fits the GMM on `vectors` and returns hard assignments. Empty components
/// are dropped and ids compacted.
pub fn gmm_cluster(vectors: &[Vec<f64>], cfg: &DiarizeConfig, seed: u64) -> Result<ClusterSet> {
    let opts = GmmOptions {
        components: cfg.max_clusters,
        variance_floor: cfg.variance_floor,
        restarts: cfg.gmm_restarts,
        ..GmmOptions::default()
    };
    let fit = fit_gmm(vectors, &opts, seed)?;
    let mut used: Vec<usize> = fit.labels.clone();
    used.sort_unstable();
    used.dedup();
    let labels: Vec<usize> = fit
        .labels
        .iter()
        .map(|l| used.binary_search(l).unwrap())
        .collect();
    Ok(ClusterSet::from_labels(&labels, vectors))
}

/// Merges the most similar pair of surviving centroids while their cosine
/// exceeds `merge_cos_threshold`, then rejects clusters with
/// `N < N_max / reject_thr`.
pub fn merge_reject_clusters(clusters: &ClusterSet, cfg: &DiarizeConfig) -> ClusterSet {
    let mut cs = clusters.clone();
    loop {
        let alive = cs.surviving();
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, &a) in alive.iter().enumerate() {
            for &b in &alive[i + 1..] {
                let s = cosine(&cs.centroids[a], &cs.centroids[b]);
                if best.map_or(true, |(bs, _, _)| s > bs) {
                    best = Some((s, a, b));
                }
            }
        }
        match best {
            Some((s, a, b)) if s > cfg.merge_cos_threshold => {
                let (na, nb) = (cs.sizes[a] as f64, cs.sizes[b] as f64);
                let merged: Vec<f64> = cs.centroids[a]
                    .iter()
                    .zip(&cs.centroids[b])
                    .map(|(x, y)| na * x + nb * y)
                    .collect();
                cs.centroids[a] = normalized(&merged).unwrap_or(merged);
                cs.sizes[a] += cs.sizes[b];
                cs.remove_cluster(b, a);
            }
            _ => break,
        }
    }
    let n_max = cs.max_size() as f64;
    for c in cs.surviving() {
        if (cs.sizes[c] as f64) < n_max / cfg.reject_thr {
            cs.rejected.insert(c);
        }
    }
    for a in cs.assignments.iter_mut() {
        if matches!(*a, Some(c) if cs.rejected.contains(&c)) {
            *a = None;
        }
    }
    cs
}

pub fn count_speakers(clusters: &ClusterSet) -> usize {
    clusters.surviving().len()
}

/// Nearest surviving centroid by cosine; ties go to the larger cluster, then
/// the lower id.
fn nearest(cs: &ClusterSet, alive: &[usize], v: &[f64]) -> usize {
    let mut best = alive[0];
    let mut best_sim = f64::NEG_INFINITY;
    for &c in alive {
        let s = cosine(&cs.centroids[c], v);
        let better = s > best_sim || (s == best_sim && cs.sizes[c] > cs.sizes[best]);
        if better {
            best = c;
            best_sim = s;
        }
    }
    best
}

/// Turns every frame into speaker activity and emits the segmentation.
///
/// Unassigned single-speaker frames and every vector of every mixed entry
/// are attracted to their nearest surviving centroid. Activity is rasterized
/// on a `frame_step` grid; where entries overlap, the entry whose midpoint is
/// closest to the frame center decides.
pub fn assign_mixed_frames(
    clusters: &ClusterSet,
    single: &EmbeddingSet,
    mixed: &EmbeddingSet,
    frame_step: f64,
    session_id: &str,
) -> Result<Segmentation> {
    if !(frame_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "frame step {frame_step} must be positive"
        )));
    }
    let alive = clusters.surviving();
    if alive.is_empty() {
        return Err(Error::Empty("surviving clusters"));
    }
    let label_of = |c: usize| alive.binary_search(&c).unwrap();

    // (start, end, midpoint, active labels)
    let mut spans: Vec<(f64, f64, f64, Vec<usize>)> = Vec::new();
    for (e, a) in single.entries.iter().zip(&clusters.assignments) {
        let c = match *a {
            Some(c) if clusters.non_speech.contains(&c) => continue,
            Some(c) if !clusters.rejected.contains(&c) => c,
            _ => nearest(clusters, &alive, &e.vectors[0]),
        };
        spans.push((e.start, e.end, e.midpoint(), vec![label_of(c)]));
    }
    for e in &mixed.entries {
        let mut labels: Vec<usize> = e
            .vectors
            .iter()
            .map(|v| label_of(nearest(clusters, &alive, v)))
            .collect();
        labels.sort_unstable();
        labels.dedup();
        spans.push((e.start, e.end, e.midpoint(), labels));
    }
    if spans.is_empty() {
        return Ok(Segmentation::empty(session_id));
    }
    let end = spans.iter().map(|s| s.1).fold(0.0, f64::max);
    let frames = (end / frame_step).ceil() as usize + 1;
    let mut owner: Vec<Option<(f64, usize)>> = vec![None; frames];
    for (i, (s, e, mid, _)) in spans.iter().enumerate() {
        let first = ((s / frame_step) - 0.5).ceil().max(0.0) as usize;
        let mut f = first;
        while f < frames {
            let center = (f as f64 + 0.5) * frame_step;
            if center >= *e {
                break;
            }
            if center >= *s {
                let d = (center - mid).abs();
                if owner[f].map_or(true, |(bd, _)| d < bd) {
                    owner[f] = Some((d, i));
                }
            }
            f += 1;
        }
    }
    let mut turns = Vec::new();
    for label in 0..alive.len() {
        let active: Vec<bool> = owner
            .iter()
            .map(|o| o.map_or(false, |(_, i)| spans[i].3.contains(&label)))
            .collect();
        let mut f = 0;
        while f < frames {
            if active[f] {
                let s = f;
                while f < frames && active[f] {
                    f += 1;
                }
                turns.push(Turn::new(
                    format!("spk{label}"),
                    s as f64 * frame_step,
                    f as f64 * frame_step,
                ));
            } else {
                f += 1;
            }
        }
    }
    sort_turns(&mut turns);
    Ok(Segmentation {
        session_id: session_id.into(),
        turns,
    })
}
