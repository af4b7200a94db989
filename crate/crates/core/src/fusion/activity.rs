use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::{invalid, mismatch};
use crate::hungarian::max_weight_assignment;
use crate::segment::{Segmentation, Turn};
use crate::Result;

/// Per-speaker, per-frame activity probabilities. Frame `i` covers
/// `[i * frame_step, (i + 1) * frame_step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftActivity {
    pub session_id: String,
    /// `speakers x frames`, values in `[0, 1]`.
    pub probs: Vec<Vec<f64>>,
    pub frame_step: f64,
    pub source_tag: String,
    /// Label of each row; files carry no labels, so rows read from disk are
    /// named by index.
    pub speakers: Vec<String>,
}

impl SoftActivity {
    pub fn new(
        session_id: impl Into<String>,
        probs: Vec<Vec<f64>>,
        frame_step: f64,
    ) -> Result<Self> {
        let speakers = (0..probs.len()).map(|i| format!("{i}")).collect();
        let a = Self {
            session_id: session_id.into(),
            probs,
            frame_step,
            source_tag: String::new(),
            speakers,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn with_speakers(mut self, speakers: Vec<String>) -> Result<Self> {
        if speakers.len() != self.probs.len() {
            return Err(mismatch!(
                "{} labels for {} rows",
                speakers.len(),
                self.probs.len()
            ));
        }
        self.speakers = speakers;
        Ok(self)
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = tag.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_step > 0.0) {
            return Err(invalid!("frame step must be positive"));
        }
        let frames = self.frames();
        for (s, row) in self.probs.iter().enumerate() {
            if row.len() != frames {
                return Err(mismatch!(
                    "row {s} has {} frames, expected {frames}",
                    row.len()
                ));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(invalid!("row {s} has a value outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn num_speakers(&self) -> usize {
        self.probs.len()
    }

    pub fn frames(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    /// Rows whose activity reaches 0.5 somewhere.
    pub fn active_speaker_count(&self) -> usize {
        self.probs
            .iter()
            .filter(|row| row.iter().any(|&p| p >= 0.5))
            .count()
    }

    /// Binary activity of a segmentation on a frame grid, rows in sorted
    /// speaker order.
    pub fn from_segmentation(seg: &Segmentation, frames: usize, frame_step: f64) -> Result<Self> {
        let speakers = seg.speakers();
        let probs = seg.to_activity_matrix(&speakers, frames, frame_step);
        Ok(Self {
            session_id: seg.session_id.clone(),
            probs,
            frame_step,
            source_tag: String::from("reference"),
            speakers,
        })
    }
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Permutation `p` maximizing `sum_s corr(a_s, b_{p[s]})`.
///
/// The smaller side is padded with all-zero rows, so the result has
/// `max(a.rows, b.rows)` entries and may point at padding rows.
pub fn best_permutation(a: &SoftActivity, b: &SoftActivity) -> Result<Vec<usize>> {
    if a.frames() != b.frames() {
        return Err(mismatch!("{} vs {} frames", a.frames(), b.frames()));
    }
    let n = a.num_speakers().max(b.num_speakers());
    let zeros = vec![0.0; a.frames()];
    let row = |m: &SoftActivity, i: usize| -> Vec<f64> {
        m.probs.get(i).cloned().unwrap_or_else(|| zeros.clone())
    };
    let corr: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let ai = row(a, i);
            (0..n).map(|j| pearson(&ai, &row(b, j))).collect()
        })
        .collect();
    Ok(max_weight_assignment(&corr)
        .into_iter()
        .map(|j| j.unwrap())
        .collect())
}

/// Averages the speaker-permuted activities whose speaker count agrees with
/// `reference`. Output rows follow the reference's sorted speaker labels.
pub fn soft_fuse(activities: &[SoftActivity], reference: &Segmentation) -> Result<SoftActivity> {
    let first = activities
        .first()
        .ok_or(crate::Error::Empty("activities"))?;
    let frames = first.frames();
    let step = first.frame_step;
    for a in activities {
        a.validate()?;
        if a.frames() != frames || (a.frame_step - step).abs() > 1e-12 {
            return Err(mismatch!("activities disagree on frame grid"));
        }
    }
    let target = SoftActivity::from_segmentation(reference, frames, step)?;
    let k = target.num_speakers();
    let survivors: Vec<&SoftActivity> = activities
        .iter()
        .filter(|a| a.active_speaker_count() == k)
        .collect();
    if survivors.is_empty() {
        log::warn!(
            "no activity matches the reference speaker count {k}; using the reference's binary activity"
        );
        return Ok(target.with_tag("fallback"));
    }
    let mut sum = vec![vec![0.0; frames]; k];
    for a in &survivors {
        let perm = best_permutation(&target, a)?;
        for s in 0..k {
            if let Some(row) = a.probs.get(perm[s]) {
                for (acc, p) in sum[s].iter_mut().zip(row) {
                    *acc += p;
                }
            }
        }
    }
    let n = survivors.len() as f64;
    for row in sum.iter_mut() {
        for v in row.iter_mut() {
            *v = (*v / n).clamp(0.0, 1.0);
        }
    }
    Ok(SoftActivity {
        session_id: reference.session_id.clone(),
        probs: sum,
        frame_step: step,
        source_tag: String::from("soft_fusion"),
        speakers: target.speakers,
    })
}

/// Frames with probability at least `threshold` become active; runs of
/// active frames become turns.
pub fn binarize(a: &SoftActivity, threshold: f64) -> Result<Segmentation> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid!("threshold {threshold} outside (0, 1)"));
    }
    let mut turns = Vec::new();
    for (row, label) in a.probs.iter().zip(&a.speakers) {
        let mut t = 0;
        while t < row.len() {
            if row[t] >= threshold {
                let s = t;
                while t < row.len() && row[t] >= threshold {
                    t += 1;
                }
                turns.push(Turn::new(
                    label.clone(),
                    s as f64 * a.frame_step,
                    t as f64 * a.frame_step,
                ));
            } else {
                t += 1;
            }
        }
    }
    let mut seg = Segmentation {
        session_id: a.session_id.clone(),
        turns,
    };
    seg.sort();
    Ok(seg)
}
