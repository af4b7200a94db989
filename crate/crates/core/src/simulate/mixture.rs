use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use super::rir::{generate_rir, Rir};
use super::room::RoomSpec;
use crate::error::invalid;
use crate::fft::convolve;
use crate::segment::{Segmentation, Turn};
use crate::signal::MultichannelAudio;
use crate::{Error, Result};

/// Source of dry (anechoic, single-channel) recordings by key.
pub trait DryAudioStore {
    fn get(&self, key: &str) -> Option<&[f64]>;
}

impl DryAudioStore for BTreeMap<String, Vec<f64>> {
    fn get(&self, key: &str) -> Option<&[f64]> {
        BTreeMap::get(self, key).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerPlacement {
    pub id: String,
    /// Index into the room's source positions.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceSpec {
    /// Index into [`MixtureSpec::speakers`].
    pub speaker: usize,
    pub audio: String,
    /// Placement time in seconds.
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub audio: String,
    /// Ratio of mean speech power to noise power; `f64::INFINITY` disables noise.
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub session_id: String,
    pub speakers: Vec<SpeakerPlacement>,
    pub utterances: Vec<UtteranceSpec>,
    pub noise: Option<NoiseSpec>,
    pub duration: f64,
    /// Receiver index for each output channel.
    pub receivers: Vec<usize>,
    pub sample_rate: u32,
    pub max_order: Option<usize>,
}

impl MixtureSpec {
    pub fn validate(&self, room: &RoomSpec) -> Result<()> {
        if self.receivers.is_empty() {
            return Err(invalid!("mixture needs at least one channel"));
        }
        if self.receivers.len() > room.receiver_positions.len()
            || self
                .receivers
                .iter()
                .any(|r| *r >= room.receiver_positions.len())
        {
            return Err(invalid!("channels exceed the room's receivers"));
        }
        if self
            .speakers
            .iter()
            .any(|s| s.source >= room.source_positions.len())
        {
            return Err(invalid!("speaker placed at unknown source"));
        }
        if !(self.duration > 0.0) || self.sample_rate == 0 {
            return Err(invalid!("duration and sample rate must be positive"));
        }
        for u in &self.utterances {
            if u.speaker >= self.speakers.len() {
                return Err(invalid!(
                    "utterance refers to unknown speaker {}",
                    u.speaker
                ));
            }
            if !(u.start >= 0.0 && u.start < self.duration) {
                return Err(invalid!("utterance start {} outside the mixture", u.start));
            }
        }
        Ok(())
    }
}

/// A rendered mixture and its components. `mixture` is exactly the sum of
/// the speaker images and the noise image.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedMixture {
    pub mixture: MultichannelAudio,
    pub reference: Segmentation,
    /// Reverberant image of each speaker, in [`MixtureSpec::speakers`] order.
    pub speaker_images: Vec<MultichannelAudio>,
    pub noise_image: MultichannelAudio,
}

/// Renders every utterance through its room impulse responses, places it at
/// its start time and adds noise at the requested SNR against the mean
/// speech power.
pub fn simulate_mixture(
    spec: &MixtureSpec,
    room: &RoomSpec,
    store: &dyn DryAudioStore,
) -> Result<SimulatedMixture> {
    spec.validate(room)?;
    let sr = spec.sample_rate;
    let len = (spec.duration * sr as f64).round() as usize;
    let channels = spec.receivers.len();
    let mut rirs: BTreeMap<(usize, usize), Rir> = BTreeMap::new();
    let mut images = vec![vec![vec![0.0; len]; channels]; spec.speakers.len()];
    let mut turns = Vec::with_capacity(spec.utterances.len());
    for u in &spec.utterances {
        let dry = store
            .get(&u.audio)
            .ok_or_else(|| invalid!("dry audio {} missing", u.audio))?;
        let offset = (u.start * sr as f64).round() as usize;
        let mut n = dry.len();
        if offset + n > len {
            log::warn!(
                "utterance {} runs past the mixture end and is truncated",
                u.audio
            );
            n = len - offset;
        }
        if n == 0 {
            continue;
        }
        let dry = &dry[..n];
        let source = spec.speakers[u.speaker].source;
        for (ch, &rcv) in spec.receivers.iter().enumerate() {
            let key = (source, rcv);
            if !rirs.contains_key(&key) {
                rirs.insert(key, generate_rir(room, source, rcv, sr, spec.max_order)?);
            }
            let wet = convolve(dry, &rirs[&key].taps);
            let dst = &mut images[u.speaker][ch][offset..];
            for (d, w) in dst.iter_mut().zip(&wet) {
                *d += w;
            }
        }
        let start = offset as f64 / sr as f64;
        turns.push(Turn::new(
            spec.speakers[u.speaker].id.clone(),
            start,
            start + n as f64 / sr as f64,
        ));
    }
    let mut noise = vec![vec![0.0; len]; channels];
    if let Some(ns) = &spec.noise {
        if ns.snr_db.is_finite() {
            let src = store
                .get(&ns.audio)
                .ok_or_else(|| invalid!("noise audio {} missing", ns.audio))?;
            if src.is_empty() {
                return Err(Error::Empty("noise audio"));
            }
            // decorrelate channels by circular shifts of the recording
            for (ch, row) in noise.iter_mut().enumerate() {
                let shift = ch * src.len() / channels;
                for (i, v) in row.iter_mut().enumerate() {
                    *v = src[(i + shift) % src.len()];
                }
            }
            let speech: Vec<Vec<f64>> = (0..channels)
                .map(|ch| {
                    (0..len)
                        .map(|i| images.iter().map(|img| img[ch][i]).sum())
                        .collect()
                })
                .collect();
            let speech_power = mean_power(speech.iter());
            let noise_power = mean_power(noise.iter());
            if noise_power > 0.0 && speech_power > 0.0 {
                let g = (speech_power / noise_power / 10f64.powf(ns.snr_db / 10.0)).sqrt();
                noise.iter_mut().flatten().for_each(|v| *v *= g);
            } else if speech_power == 0.0 {
                log::warn!("no speech to reference the SNR against; noise left at source level");
            }
        }
    }
    let mut mix = vec![vec![0.0; len]; channels];
    for (ch, row) in mix.iter_mut().enumerate() {
        for img in &images {
            for (m, v) in row.iter_mut().zip(&img[ch]) {
                *m += v;
            }
        }
        for (m, v) in row.iter_mut().zip(&noise[ch]) {
            *m += v;
        }
    }
    Ok(SimulatedMixture {
        mixture: MultichannelAudio::new(mix, sr)?,
        reference: Segmentation::new(spec.session_id.clone(), turns)?,
        speaker_images: images
            .into_iter()
            .map(|c| MultichannelAudio::new(c, sr))
            .collect::<Result<_>>()?,
        noise_image: MultichannelAudio::new(noise, sr)?,
    })
}

/// Mean power over all samples of the given channels.
fn mean_power<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for r in rows {
        s += r.iter().map(|v| v * v).sum::<f64>();
        n += r.len();
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
