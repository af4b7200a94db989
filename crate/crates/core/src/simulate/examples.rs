use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use rand::seq::index::sample;
use rand::Rng;

use super::rir::generate_rir;
use super::room::{sample_room, RoomRanges, RoomSpec};
use crate::error::invalid;
use crate::fft::convolve;
use crate::preprocess::{envelope_variance_rank, select_top_channels, EnvelopeConfig};
use crate::rng::{gaussian, split, uniform};
use crate::signal::MultichannelAudio;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DryUtterance {
    pub speaker: String,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub example_seconds: f64,
    pub max_speakers: usize,
    /// Maximum number of simultaneously active speakers.
    pub max_concurrent: usize,
    pub rendered_channels: usize,
    pub kept_channels: usize,
    pub sample_rate: u32,
    pub snr_db: (f64, f64),
    /// Noise standard deviation of speakerless examples.
    pub silence_noise_std: f64,
    pub rooms: RoomRanges,
    pub max_order: Option<usize>,
    pub max_attempts: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            example_seconds: 4.0,
            max_speakers: 3,
            max_concurrent: 2,
            rendered_channels: 10,
            kept_channels: 6,
            sample_rate: 16_000,
            snr_db: (5.0, 20.0),
            silence_noise_std: 1e-3,
            rooms: RoomRanges::default(),
            max_order: None,
            max_attempts: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleMetadata {
    pub seed: u64,
    pub room: RoomSpec,
    pub speakers: Vec<String>,
    /// Active interval `(start, end)` in seconds per speaker.
    pub intervals: Vec<(f64, f64)>,
    /// Rendered receiver indices kept, ascending.
    pub channels: Vec<usize>,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationExample {
    pub mixture: MultichannelAudio,
    /// Reverberant image of each speaker on the kept channels.
    pub targets: Vec<MultichannelAudio>,
    pub noise: MultichannelAudio,
    pub metadata: ExampleMetadata,
}

fn max_concurrency(intervals: &[(f64, f64)]) -> usize {
    let mut events: Vec<(f64, i32)> = intervals
        .iter()
        .flat_map(|&(s, e)| [(s, 1), (e, -1)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut active = 0i32;
    let mut peak = 0i32;
    for (_, d) in events {
        active += d;
        peak = peak.max(active);
    }
    peak as usize
}

fn one_example(
    cfg: &SeparationConfig,
    corpus: &[DryUtterance],
    speakers: &[String],
    seed: u64,
) -> Result<SeparationExample> {
    let mut rng = split(seed, 0);
    let sr = cfg.sample_rate;
    let len = (cfg.example_seconds * sr as f64).round() as usize;
    let mut rooms = cfg.rooms.clone();
    rooms.receivers = cfg.rendered_channels;
    rooms.sources = rooms.sources.max(cfg.max_speakers);
    let room = sample_room(&rooms, rng.gen())?;
    let count = rng.gen_range(0..=cfg.max_speakers.min(speakers.len()));
    let chosen: Vec<usize> = sample(&mut rng, speakers.len(), count).into_vec();
    // place each speaker's active interval, rejecting schedules with too many concurrent talkers
    let mut intervals = Vec::new();
    let mut pieces = Vec::new();
    for _ in 0..cfg.max_attempts {
        intervals.clear();
        pieces.clear();
        for &k in &chosen {
            let pool: Vec<&DryUtterance> =
                corpus.iter().filter(|u| u.speaker == speakers[k]).collect();
            let utt = pool[rng.gen_range(0..pool.len())];
            let n = utt.samples.len().min(len);
            let piece_len = rng.gen_range((n / 2).max(1)..=n.max(1));
            let src_off = rng.gen_range(0..=utt.samples.len() - piece_len);
            let dst_off = rng.gen_range(0..=len - piece_len);
            pieces.push((utt.samples[src_off..src_off + piece_len].to_vec(), dst_off));
            intervals.push((
                dst_off as f64 / sr as f64,
                (dst_off + piece_len) as f64 / sr as f64,
            ));
        }
        if max_concurrency(&intervals) <= cfg.max_concurrent {
            break;
        }
    }
    if max_concurrency(&intervals) > cfg.max_concurrent {
        return Err(Error::Unsatisfiable(cfg.max_attempts));
    }
    let sources: Vec<usize> = sample(&mut rng, room.source_positions.len(), count).into_vec();
    let channels = cfg.rendered_channels;
    let mut images = vec![vec![vec![0.0; len]; channels]; count];
    for (i, (dry, off)) in pieces.iter().enumerate() {
        for ch in 0..channels {
            let rir = generate_rir(&room, sources[i], ch, sr, cfg.max_order)?;
            let wet = convolve(dry, &rir.taps);
            for (d, w) in images[i][ch][*off..].iter_mut().zip(&wet) {
                *d += w;
            }
        }
    }
    let snr_db = uniform(&mut rng, cfg.snr_db.0, cfg.snr_db.1);
    let mut noise: Vec<Vec<f64>> = (0..channels)
        .map(|_| (0..len).map(|_| gaussian(&mut rng)).collect())
        .collect();
    let speech_power = if count == 0 {
        0.0
    } else {
        let mut s = 0.0;
        for ch in 0..channels {
            for t in 0..len {
                let v: f64 = images.iter().map(|img| img[ch][t]).sum();
                s += v * v;
            }
        }
        s / (channels * len) as f64
    };
    let g = if speech_power > 0.0 {
        libm::sqrt(speech_power / libm::pow(10.0, snr_db / 10.0))
    } else {
        cfg.silence_noise_std
    };
    noise.iter_mut().flatten().for_each(|v| *v *= g);
    let mut mix = noise.clone();
    for img in &images {
        for (m, c) in mix.iter_mut().zip(img) {
            for (a, b) in m.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    let full = MultichannelAudio::new(mix, sr)?;
    let ranking = envelope_variance_rank(&full, &EnvelopeConfig::default())?;
    let keep = select_top_channels(&ranking, cfg.kept_channels as f64 / channels as f64)?;
    let targets = images
        .into_iter()
        .map(|c| MultichannelAudio::new(c, sr).and_then(|a| a.select_channels(&keep)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparationExample {
        mixture: full.select_channels(&keep)?,
        targets,
        noise: MultichannelAudio::new(noise, sr)?.select_channels(&keep)?,
        metadata: ExampleMetadata {
            seed,
            room,
            speakers: chosen.iter().map(|&k| speakers[k].clone()).collect(),
            intervals,
            channels: keep,
            snr_db,
        },
    })
}

/// Fixed-length multichannel training examples with per-speaker
/// reverberant targets. Example `i` is generated from its own stream of
/// `seed`, so examples are independent of `count`.
pub fn simulate_separation_examples(
    cfg: &SeparationConfig,
    corpus: &[DryUtterance],
    count: usize,
    seed: u64,
) -> Result<Vec<SeparationExample>> {
    if cfg.kept_channels == 0 || cfg.kept_channels > cfg.rendered_channels {
        return Err(invalid!("kept channels must be in 1..=rendered channels"));
    }
    if cfg.max_concurrent == 0 || !(cfg.example_seconds > 0.0) || cfg.sample_rate == 0 {
        return Err(invalid!("invalid example configuration"));
    }
    if corpus.iter().any(|u| u.samples.is_empty()) {
        return Err(Error::Empty("dry utterance"));
    }
    let mut speakers: Vec<String> = corpus.iter().map(|u| u.speaker.clone()).collect();
    speakers.sort();
    speakers.dedup();
    (0..count)
        .map(|i| {
            one_example(
                cfg,
                corpus,
                &speakers,
                seed.wrapping_add(i as u64)
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )
        })
        .collect()
}
