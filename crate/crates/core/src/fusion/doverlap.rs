//! Weighted voting over diarization hypotheses after mapping their labels
//! onto a common anchor hypothesis.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::{invalid, mismatch};
use crate::hungarian::max_weight_assignment;
use crate::segment::{sort_turns, Segmentation, Turn};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    pub hypotheses: Vec<Segmentation>,
    /// One positive weight per hypothesis.
    pub weights: Vec<f64>,
}

impl FusionInput {
    pub fn uniform(hypotheses: Vec<Segmentation>) -> Self {
        let weights = alloc::vec![1.0; hypotheses.len()];
        Self {
            hypotheses,
            weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hypotheses.is_empty() {
            return Err(Error::Empty("hypotheses"));
        }
        if self.weights.len() != self.hypotheses.len() {
            return Err(mismatch!(
                "{} weights for {} hypotheses",
                self.weights.len(),
                self.hypotheses.len()
            ));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid!("weights must be positive"));
        }
        for h in &self.hypotheses {
            h.validate()?;
        }
        Ok(())
    }
}

fn total_speech(seg: &Segmentation) -> f64 {
    seg.speaker_intervals()
        .values()
        .flat_map(|ivs| ivs.iter().map(|(s, e)| e - s))
        .sum()
}

fn canonical_cmp(a: &Segmentation, b: &Segmentation) -> core::cmp::Ordering {
    let (na, nb) = (a.normalized(), b.normalized());
    for (x, y) in na.turns.iter().zip(&nb.turns) {
        let o = x
            .start
            .total_cmp(&y.start)
            .then_with(|| x.speaker.cmp(&y.speaker))
            .then(x.end.total_cmp(&y.end));
        if o.is_ne() {
            return o;
        }
    }
    na.turns.len().cmp(&nb.turns.len())
}

/// Highest weight wins; ties go to the hypothesis with more speech, then to
/// the canonically smallest one, so the choice ignores input order.
pub fn select_anchor(input: &FusionInput) -> usize {
    let mut best = 0;
    for i in 1..input.hypotheses.len() {
        let o = input.weights[i]
            .total_cmp(&input.weights[best])
            .then_with(|| {
                total_speech(&input.hypotheses[i]).total_cmp(&total_speech(&input.hypotheses[best]))
            })
            .then_with(|| canonical_cmp(&input.hypotheses[best], &input.hypotheses[i]));
        if o.is_gt() {
            best = i;
        }
    }
    best
}

fn intersection(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(s1, e1) in a {
        for &(s2, e2) in b {
            let d = e1.min(e2) - s1.max(s2);
            if d > 0.0 {
                total += d;
            }
        }
    }
    total
}

/// Maps the labels of `hyp` onto `anchor` labels by the assignment with the
/// largest total overlap. Speakers left without an overlapping partner get
/// a fresh label tagged with `tag`.
pub fn map_to_anchor(
    anchor: &Segmentation,
    hyp: &Segmentation,
    tag: usize,
) -> BTreeMap<String, String> {
    let a = anchor.speaker_intervals();
    let h = hyp.speaker_intervals();
    let a_labels: Vec<&String> = a.keys().collect();
    let h_labels: Vec<&String> = h.keys().collect();
    let overlap: Vec<Vec<f64>> = h_labels
        .iter()
        .map(|hl| {
            a_labels
                .iter()
                .map(|al| intersection(&h[*hl], &a[*al]))
                .collect()
        })
        .collect();
    let assignment = if a_labels.is_empty() {
        alloc::vec![None; h_labels.len()]
    } else {
        max_weight_assignment(&overlap)
    };
    let mut map = BTreeMap::new();
    for (i, hl) in h_labels.iter().enumerate() {
        let target = match assignment[i] {
            Some(j) if overlap[i][j] > 0.0 => a_labels[j].clone(),
            _ => format!("{hl}@{tag}"),
        };
        map.insert((*hl).clone(), target);
    }
    map
}

fn relabel(seg: &Segmentation, map: &BTreeMap<String, String>) -> Segmentation {
    Segmentation {
        session_id: seg.session_id.clone(),
        turns: seg
            .turns
            .iter()
            .map(|t| Turn::new(map[&t.speaker].clone(), t.start, t.end))
            .collect(),
    }
}

/// Region-wise weighted voting over hypotheses that already share a label
/// space.
///
/// In every region between consecutive boundaries, the number of output
/// speakers is the weighted mean of the hypotheses' speaker counts rounded
/// half up; the speakers with the most accrued weight are kept (ties by
/// label). Adjacent regions are stitched.
pub fn vote_regions(mapped: &[Segmentation], weights: &[f64]) -> Segmentation {
    let session_id = mapped
        .first()
        .map(|s| s.session_id.clone())
        .unwrap_or_default();
    let per_hyp: Vec<BTreeMap<String, Vec<(f64, f64)>>> =
        mapped.iter().map(|s| s.speaker_intervals()).collect();
    let mut bounds: Vec<f64> = per_hyp
        .iter()
        .flat_map(|m| {
            m.values()
                .flat_map(|ivs| ivs.iter().flat_map(|&(s, e)| [s, e]))
        })
        .collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    let total_w: f64 = weights.iter().sum();

    let mut open: BTreeMap<String, f64> = BTreeMap::new();
    let mut turns = Vec::new();
    for win in bounds.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mut acc: BTreeMap<&String, f64> = BTreeMap::new();
        let mut weighted_count = 0.0;
        for (m, &w) in per_hyp.iter().zip(weights) {
            let mut count = 0;
            for (spk, ivs) in m {
                if ivs.iter().any(|&(s, e)| s <= a && e >= b) {
                    *acc.entry(spk).or_insert(0.0) += w;
                    count += 1;
                }
            }
            weighted_count += w * count as f64;
        }
        let k = (weighted_count / total_w + 0.5 + 1e-9).floor() as usize;
        let mut ranked: Vec<(&String, f64)> = acc.into_iter().collect();
        ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        let chosen: Vec<String> = ranked.iter().take(k).map(|(s, _)| (*s).clone()).collect();

        // close turns that do not continue into this region
        let ended: Vec<String> = open
            .keys()
            .filter(|s| !chosen.contains(s))
            .cloned()
            .collect();
        for spk in ended {
            let start = open.remove(&spk).unwrap();
            turns.push(Turn::new(spk, start, a));
        }
        for spk in chosen {
            open.entry(spk).or_insert(a);
        }
    }
    if let Some(&last) = bounds.last() {
        for (spk, start) in open {
            turns.push(Turn::new(spk, start, last));
        }
    }
    sort_turns(&mut turns);
    Segmentation { session_id, turns }
}

/// Fuses hypotheses of one session: map labels onto the anchor, then vote.
pub fn doverlap_fuse(input: &FusionInput) -> Result<Segmentation> {
    input.validate()?;
    let session = &input.hypotheses[0].session_id;
    if input.hypotheses.iter().any(|h| &h.session_id != session) {
        return Err(mismatch!("hypotheses belong to different sessions"));
    }
    let anchor_idx = select_anchor(input);
    let anchor = &input.hypotheses[anchor_idx];
    let mapped: Vec<Segmentation> = input
        .hypotheses
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if i == anchor_idx {
                h.clone()
            } else {
                relabel(h, &map_to_anchor(anchor, h, i))
            }
        })
        .collect();
    let mut out = vote_regions(&mapped, &input.weights);
    out.session_id = session.clone();
    Ok(out)
}
