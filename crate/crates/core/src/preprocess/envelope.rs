//! Envelope-variance channel ranking.
//!
//! Reverberation and noise smear the sub-band energy envelopes, which lowers
//! their variance. Each channel is scored by the variance of its mean-removed
//! log mel envelopes, normalized per band by the largest variance across
//! channels.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::invalid;
use crate::signal::{stft, MultichannelAudio, Padding, StftParams, Window};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRanking {
    pub scores: Vec<f64>,
    /// Channel indices sorted by descending score.
    pub order: Vec<usize>,
}

impl ChannelRanking {
    /// Rank position (0 = best) of each channel.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.order.len()];
        for (pos, &c) in self.order.iter().enumerate() {
            r[c] = pos;
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConfig {
    pub bands: usize,
    pub min_freq: f64,
    pub max_freq: f64,
    /// Analysis frame length in seconds.
    pub frame_seconds: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            bands: 40,
            min_freq: 20.0,
            max_freq: 7600.0,
            frame_seconds: 0.032,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over `n_fft / 2 + 1` bins, one row per band.
pub fn mel_filterbank(
    bands: usize,
    n_fft: usize,
    sample_rate: u32,
    min_freq: f64,
    max_freq: f64,
) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let lo = hz_to_mel(min_freq);
    let hi = hz_to_mel(max_freq);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    (0..bands)
        .map(|b| {
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > l && f <= c {
                        (f - l) / (c - l)
                    } else if f > c && f < r {
                        (r - f) / (r - c)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Scores every channel by normalized envelope variance; higher is better.
/// Silent channels score 0 and are ranked last.
pub fn envelope_variance_rank(
    audio: &MultichannelAudio,
    cfg: &EnvelopeConfig,
) -> Result<ChannelRanking> {
    let channels = audio.num_channels();
    if channels == 0 {
        return Err(Error::Empty("channels"));
    }
    if cfg.bands == 0 {
        return Err(invalid!("need at least one band"));
    }
    let sr = audio.sample_rate();
    let n_fft = ((cfg.frame_seconds * sr as f64).round() as usize)
        .max(16)
        .next_power_of_two();
    let params = StftParams::new(n_fft, n_fft / 4, Window::Hann, Padding::Center);
    let spec = stft(audio, &params)?;
    let max_freq = cfg.max_freq.min(0.475 * sr as f64);
    let fb = mel_filterbank(cfg.bands, n_fft, sr, cfg.min_freq, max_freq);
    let frames = spec.frames();

    let mut variances = vec![vec![0.0; cfg.bands]; channels];
    let mut silent = vec![false; channels];
    for c in 0..channels {
        let mut env = vec![vec![0.0; frames]; cfg.bands];
        let mut total = 0.0;
        let mut power = vec![0.0; spec.bins()];
        for t in 0..frames {
            for (f, p) in power.iter_mut().enumerate() {
                *p = spec.get(c, t, f).norm_sqr();
            }
            for (b, filt) in fb.iter().enumerate() {
                let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                env[b][t] = e;
                total += e;
            }
        }
        if total <= 0.0 {
            silent[c] = true;
            continue;
        }
        // floor relative to the channel's own level keeps the score gain invariant
        let floor = 1e-10 * total / (frames * cfg.bands) as f64;
        for (b, band) in env.iter().enumerate() {
            let logs: Vec<f64> = band.iter().map(|e| (e + floor).ln()).collect();
            let mean = logs.iter().sum::<f64>() / frames as f64;
            variances[c][b] =
                logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / frames as f64;
        }
    }

    let mut scores = vec![0.0; channels];
    for b in 0..cfg.bands {
        let max = (0..channels)
            .filter(|&c| !silent[c])
            .map(|c| variances[c][b])
            .fold(0.0, f64::max);
        if max <= 0.0 {
            continue;
        }
        for c in (0..channels).filter(|&c| !silent[c]) {
            scores[c] += variances[c][b] / max / cfg.bands as f64;
        }
    }
    let mut order: Vec<usize> = (0..channels).collect();
    order.sort_by(|&a, &b| {
        silent[a]
            .cmp(&silent[b])
            .then(scores[b].total_cmp(&scores[a]))
            .then(a.cmp(&b))
    });
    Ok(ChannelRanking { scores, order })
}

/// The `ceil(fraction * C)` best channels, as original indices in ascending order.
pub fn select_top_channels(ranking: &ChannelRanking, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid!("selection fraction {fraction} outside (0, 1]"));
    }
    let c = ranking.order.len();
    let k = ((fraction * c as f64 - 1e-9).ceil() as usize).clamp(1.min(c), c);
    let mut chosen: Vec<usize> = ranking.order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}
