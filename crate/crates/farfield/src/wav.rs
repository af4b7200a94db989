//! WAV input and output, 16-bit PCM and 32-bit float.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use farfield_core::MultichannelAudio;
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::store::atomic_write_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

fn hound_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::data(path, other.to_string()),
    }
}

/// Reads every channel of one file, scaled to `[-1, 1]` for integer PCM.
pub fn read_wav(path: &Path) -> Result<MultichannelAudio> {
    let mut reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::data(path, "no channels"));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_err(path, e))?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| hound_err(path, e))?
        }
    };
    let frames = interleaved.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, v) in frame.iter().enumerate() {
            data[c].push(*v);
        }
    }
    MultichannelAudio::new(data, spec.sample_rate).map_err(|e| Error::data(path, e.to_string()))
}

/// Reads a session whose channels may be spread over several files. All
/// files must share one sample rate and length.
pub fn read_channels(paths: &[PathBuf]) -> Result<MultichannelAudio> {
    let first = paths
        .first()
        .ok_or_else(|| Error::Config("session lists no audio files".into()))?;
    let mut all = Vec::new();
    let mut rate = None;
    let mut len = None;
    for p in paths {
        let a = read_wav(p)?;
        if *rate.get_or_insert(a.sample_rate()) != a.sample_rate() {
            return Err(Error::data(p, format!("sample rate {} differs from {}", a.sample_rate(), rate.unwrap())));
        }
        if *len.get_or_insert(a.len()) != a.len() {
            return Err(Error::data(p, format!("{} samples, other channels have {}", a.len(), len.unwrap())));
        }
        all.extend(a.into_channels());
    }
    MultichannelAudio::new(all, rate.unwrap()).map_err(|e| Error::data(first, e.to_string()))
}

pub fn write_wav(path: &Path, audio: &MultichannelAudio, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: audio.num_channels() as u16,
        sample_rate: audio.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut failure = None;
    atomic_write_with(path, |file| {
        let to_io = |e: hound::Error| match e {
            hound::Error::IoError(io) => io,
            other => std::io::Error::other(other.to_string()),
        };
        let mut w = WavWriter::new(BufWriter::new(file), spec).map_err(to_io)?;
        for i in 0..audio.len() {
            for c in 0..audio.num_channels() {
                let v = audio.channel(c)[i];
                let r = match format {
                    WavFormat::Float32 => w.write_sample(v as f32),
                    WavFormat::Pcm16 => {
                        if v.abs() > 1.0 {
                            failure.get_or_insert(i);
                        }
                        w.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16)
                    }
                };
                r.map_err(to_io)?;
            }
        }
        w.finalize().map_err(to_io)
    })?;
    if let Some(i) = failure {
        log::warn!("{}: samples clipped to [-1, 1], first at {i}", path.display());
    }
    Ok(())
}
