use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use rand::Rng;

use crate::error::invalid;
use crate::rng::{exponential, lognormal, seeded};
use crate::Result;

/// Turn-taking statistics of the conversation sampler. Pauses and turn
/// lengths are lognormal, parameterized by their median and log-domain
/// standard deviation; overlaps are exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapStats {
    pub p_overlap: f64,
    pub pause_median: f64,
    pub pause_sigma: f64,
    pub overlap_mean: f64,
    pub turn_median: f64,
    pub turn_sigma: f64,
}

impl Default for OverlapStats {
    fn default() -> Self {
        Self {
            p_overlap: 0.25,
            pause_median: 0.3,
            pause_sigma: 0.5,
            overlap_mean: 0.7,
            turn_median: 2.5,
            turn_sigma: 0.6,
        }
    }
}

impl OverlapStats {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_overlap) {
            return Err(invalid!("p_overlap outside [0, 1]"));
        }
        if !(self.pause_median > 0.0 && self.turn_median > 0.0 && self.overlap_mean > 0.0) {
            return Err(invalid!("distribution scales must be positive"));
        }
        if !(self.pause_sigma >= 0.0 && self.turn_sigma >= 0.0) {
            return Err(invalid!("log-domain deviations must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledUtterance {
    pub speaker: usize,
    pub start: f64,
    pub duration: f64,
}

impl ScheduledUtterance {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Alternating-turn schedule covering `[0, duration)`.
///
/// Each new turn goes to a speaker other than the previous one. With
/// probability `p_overlap` it starts an exponential overlap before the
/// previous turn ends (never before that turn starts, and never while a third
/// turn is still running); otherwise it starts after a pause. The last turn
/// is truncated at `duration`.
pub fn sample_conversation(
    stats: &OverlapStats,
    speakers: usize,
    duration: f64,
    seed: u64,
) -> Result<Vec<ScheduledUtterance>> {
    stats.validate()?;
    if speakers == 0 {
        return Err(invalid!("need at least one speaker"));
    }
    if !(duration > 0.0) {
        return Err(invalid!("duration must be positive"));
    }
    let mut rng = seeded(seed);
    let mut out: Vec<ScheduledUtterance> = Vec::new();
    let turn_mu = stats.turn_median.ln();
    let pause_mu = stats.pause_median.ln();
    let mut t = 0.0;
    let mut prev: Option<usize> = None;
    loop {
        let speaker = match prev {
            None => rng.gen_range(0..speakers),
            Some(_) if speakers == 1 => 0,
            Some(p) => {
                let k = rng.gen_range(0..speakers - 1);
                if k >= p {
                    k + 1
                } else {
                    k
                }
            }
        };
        let length = lognormal(&mut rng, turn_mu, stats.turn_sigma);
        let overlap = speakers > 1 && prev.is_some() && rng.gen::<f64>() < stats.p_overlap;
        let start = if overlap {
            let o = exponential(&mut rng, stats.overlap_mean);
            let last = &out[out.len() - 1];
            let mut floor = last.start;
            if out.len() >= 2 {
                floor = floor.max(out[out.len() - 2].end());
            }
            (last.end() - o).max(floor)
        } else {
            let pause = lognormal(&mut rng, pause_mu, stats.pause_sigma);
            t + pause
        };
        if start >= duration {
            break;
        }
        let end = (start + length).min(duration);
        out.push(ScheduledUtterance {
            speaker,
            start,
            duration: end - start,
        });
        t = out.iter().map(ScheduledUtterance::end).fold(t, f64::max);
        prev = Some(speaker);
    }
    Ok(out)
}

/// Time during which at least two scheduled utterances are active.
pub fn overlapped_time(schedule: &[ScheduledUtterance]) -> f64 {
    let mut events: Vec<(f64, i32)> = schedule
        .iter()
        .flat_map(|u| [(u.start, 1), (u.end(), -1)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut active = 0;
    let mut last = 0.0;
    let mut total = 0.0;
    for (time, delta) in events {
        if active >= 2 {
            total += time - last;
        }
        active += delta;
        last = time;
    }
    total
}
