//! Diarization and separation scores.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::{invalid, mismatch};
use crate::hungarian::max_weight_assignment;
use crate::segment::{merge_intervals, Segmentation};
use crate::{Error, Result};

/// Upper bound reported by [`si_sdr`] for (near-)perfect estimates.
pub const SI_SDR_CAP: f64 = 60.0;

/// Diarization error components, in seconds of speaker time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerBreakdown {
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    pub total_ref: f64,
    pub der: f64,
}

struct Timeline {
    /// Elementary scored regions `(start, end)`.
    regions: Vec<(f64, f64)>,
    /// Per-region active speaker indices.
    ref_active: Vec<Vec<usize>>,
    hyp_active: Vec<Vec<usize>>,
}

fn active_in(ivs: &[Vec<(f64, f64)>], mid: f64) -> Vec<usize> {
    ivs.iter()
        .enumerate()
        .filter(|(_, iv)| iv.iter().any(|&(s, e)| s <= mid && mid < e))
        .map(|(i, _)| i)
        .collect()
}

fn timeline(
    refs: &[Vec<(f64, f64)>],
    hyps: &[Vec<(f64, f64)>],
    excluded: &[(f64, f64)],
) -> Timeline {
    let mut cuts: Vec<f64> = Vec::new();
    for iv in refs.iter().chain(hyps).flatten().chain(excluded) {
        cuts.push(iv.0);
        cuts.push(iv.1);
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut tl = Timeline {
        regions: Vec::new(),
        ref_active: Vec::new(),
        hyp_active: Vec::new(),
    };
    for w in cuts.windows(2) {
        let (s, e) = (w[0], w[1]);
        if e <= s {
            continue;
        }
        let mid = 0.5 * (s + e);
        if excluded.iter().any(|&(a, b)| a <= mid && mid < b) {
            continue;
        }
        let r = active_in(refs, mid);
        let h = active_in(hyps, mid);
        if r.is_empty() && h.is_empty() {
            continue;
        }
        tl.regions.push((s, e));
        tl.ref_active.push(r);
        tl.hyp_active.push(h);
    }
    tl
}

fn intervals(seg: &Segmentation) -> (Vec<String>, Vec<Vec<(f64, f64)>>) {
    let map: BTreeMap<String, Vec<(f64, f64)>> = seg.speaker_intervals();
    map.into_iter().unzip()
}

/// Diarization error rate with an optimal one-to-one speaker mapping.
/// Reference boundaries are surrounded by a no-score zone of `collar`
/// seconds on each side.
pub fn compute_der(
    reference: &Segmentation,
    hypothesis: &Segmentation,
    collar: f64,
) -> Result<DerBreakdown> {
    if !(collar >= 0.0) {
        return Err(invalid!("collar must be non-negative"));
    }
    reference.validate()?;
    hypothesis.validate()?;
    let (_, refs) = intervals(reference);
    let (_, hyps) = intervals(hypothesis);
    let excluded = if collar > 0.0 {
        merge_intervals(
            reference
                .turns
                .iter()
                .flat_map(|t| {
                    [
                        (t.start - collar, t.start + collar),
                        (t.end - collar, t.end + collar),
                    ]
                })
                .collect(),
        )
    } else {
        Vec::new()
    };
    let tl = timeline(&refs, &hyps, &excluded);
    let mut overlap = vec![vec![0.0; hyps.len()]; refs.len()];
    for (k, &(s, e)) in tl.regions.iter().enumerate() {
        for &r in &tl.ref_active[k] {
            for &h in &tl.hyp_active[k] {
                overlap[r][h] += e - s;
            }
        }
    }
    let mapping = max_weight_assignment(&overlap);
    let mut out = DerBreakdown::default();
    for (k, &(s, e)) in tl.regions.iter().enumerate() {
        let d = e - s;
        let nr = tl.ref_active[k].len();
        let nh = tl.hyp_active[k].len();
        let correct = tl.ref_active[k]
            .iter()
            .filter(|&&r| matches!(mapping.get(r), Some(Some(h)) if tl.hyp_active[k].contains(h)))
            .count();
        out.total_ref += d * nr as f64;
        out.missed += d * nr.saturating_sub(nh) as f64;
        out.false_alarm += d * nh.saturating_sub(nr) as f64;
        out.confusion += d * (nr.min(nh) - correct) as f64;
    }
    if !(out.total_ref > 0.0) {
        return Err(Error::Undefined("reference contains no scored speech"));
    }
    out.der = (out.missed + out.false_alarm + out.confusion) / out.total_ref;
    Ok(out)
}

/// Fraction of `(reference, hypothesis)` speaker-count pairs that agree.
pub fn speaker_count_accuracy(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("speaker count pairs"));
    }
    let hits = pairs.iter().filter(|(r, h)| r == h).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Scale-invariant signal-to-distortion ratio in dB, capped at
/// [`SI_SDR_CAP`].
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(mismatch!(
            "estimate {} vs reference {} samples",
            estimate.len(),
            reference.len()
        ));
    }
    let rr: f64 = reference.iter().map(|v| v * v).sum();
    if !(rr > 0.0) {
        return Err(Error::Undefined("zero reference"));
    }
    let dot: f64 = estimate.iter().zip(reference).map(|(e, r)| e * r).sum();
    let alpha = dot / rr;
    let mut target = 0.0;
    let mut residual = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        let t = alpha * r;
        target += t * t;
        residual += (e - t) * (e - t);
    }
    if residual <= 0.0 {
        return Ok(SI_SDR_CAP);
    }
    if target <= 0.0 {
        return Ok(-SI_SDR_CAP);
    }
    Ok((10.0 * (target / residual).log10()).clamp(-SI_SDR_CAP, SI_SDR_CAP))
}
