//! Speaker-labeled time intervals, the currency of diarization.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
}

impl Turn {
    pub fn new(speaker: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            speaker: speaker.into(),
            start,
            end,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Turns of one session. Turns of different speakers may overlap.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Segmentation {
    pub session_id: String,
    pub turns: Vec<Turn>,
}

impl Segmentation {
    pub fn new(session_id: impl Into<String>, turns: Vec<Turn>) -> Result<Self> {
        let seg = Self {
            session_id: session_id.into(),
            turns,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn empty(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.turns {
            if !(t.start < t.end) || !t.start.is_finite() || !t.end.is_finite() {
                return Err(invalid!(
                    "turn of {} has start {} >= end {}",
                    t.speaker,
                    t.start,
                    t.end
                ));
            }
        }
        Ok(())
    }

    /// Distinct speaker labels in sorted order.
    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.turns.iter().map(|t| t.speaker.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn num_speakers(&self) -> usize {
        self.speakers().len()
    }

    pub fn end_time(&self) -> f64 {
        self.turns.iter().map(|t| t.end).fold(0.0, f64::max)
    }

    /// Per-speaker union of turns as sorted, disjoint, non-touching intervals.
    pub fn speaker_intervals(&self) -> BTreeMap<String, Vec<(f64, f64)>> {
        let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for t in &self.turns {
            map.entry(t.speaker.clone())
                .or_default()
                .push((t.start, t.end));
        }
        for ivs in map.values_mut() {
            *ivs = merge_intervals(core::mem::take(ivs));
        }
        map
    }

    /// Merges overlapping or touching turns of the same speaker and sorts
    /// by `(start, speaker)`.
    pub fn normalized(&self) -> Self {
        let mut turns: Vec<Turn> = self
            .speaker_intervals()
            .into_iter()
            .flat_map(|(spk, ivs)| {
                ivs.into_iter()
                    .map(move |(s, e)| Turn::new(spk.clone(), s, e))
            })
            .collect();
        sort_turns(&mut turns);
        Self {
            session_id: self.session_id.clone(),
            turns,
        }
    }

    pub fn sort(&mut self) {
        sort_turns(&mut self.turns);
    }

    /// Total time during which `speaker` is active.
    pub fn speaker_duration(&self, speaker: &str) -> f64 {
        self.speaker_intervals()
            .get(speaker)
            .map_or(0.0, |ivs| ivs.iter().map(|(s, e)| e - s).sum())
    }

    /// Binary activity of each speaker (rows in `speakers()` order) sampled
    /// at frame centers `(i + 0.5) * step`.
    pub fn to_activity_matrix(
        &self,
        speakers: &[String],
        frames: usize,
        step: f64,
    ) -> Vec<Vec<f64>> {
        let intervals = self.speaker_intervals();
        speakers
            .iter()
            .map(|spk| {
                let ivs = intervals.get(spk);
                (0..frames)
                    .map(|i| {
                        let t = (i as f64 + 0.5) * step;
                        match ivs {
                            Some(ivs) if ivs.iter().any(|&(s, e)| s <= t && t < e) => 1.0,
                            _ => 0.0,
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn sort_turns(turns: &mut [Turn]) {
    turns.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then_with(|| a.speaker.cmp(&b.speaker))
            .then_with(|| a.end.total_cmp(&b.end))
    });
}

/// Union of intervals; touching intervals are joined.
pub fn merge_intervals(mut ivs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ivs.retain(|(s, e)| e > s);
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
    for (s, e) in ivs {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}
