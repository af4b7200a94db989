#![allow(dead_code)]

use std::path::{Path, PathBuf};

use farfield::sim::{SimulationConfig, DryCorpus};
use farfield::wav::{write_wav, WavFormat};
use farfield_core::rng::{gaussian, seeded};
use farfield_core::MultichannelAudio;
use rand::Rng;

/// White noise with a syllable-rate on/off envelope and a per-speaker
/// spectral tilt.
pub fn speech_like(len: usize, sample_rate: u32, tilt: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let seg = (sample_rate as usize) / 5;
    let mut gain = 1.0;
    let mut prev = 0.0;
    (0..len)
        .map(|n| {
            if n % seg == 0 {
                gain = if rng.gen::<f64>() < 0.3 { 0.05 } else { rng.gen_range(0.3..1.5) };
            }
            let ramp = (std::f64::consts::PI * (n % seg) as f64 / seg as f64).sin();
            let x = gaussian(&mut rng) + tilt * prev;
            prev = x;
            0.1 * gain * ramp * x
        })
        .collect()
}

/// Writes `per_speaker` utterances of 1.5 to 4 s for each speaker and the
/// corpus TOML listing them.
pub fn write_corpus(dir: &Path, speakers: usize, per_speaker: usize, sr: u32) -> PathBuf {
    let mut rng = seeded(99);
    let mut toml = String::new();
    for s in 0..speakers {
        for u in 0..per_speaker {
            let dur: f64 = rng.gen_range(1.5..4.0);
            let len = (dur * sr as f64) as usize;
            let x = speech_like(len, sr, 0.2 * s as f64, (s * 100 + u) as u64);
            let name = format!("spk{s}-{u}.wav");
            write_wav(&dir.join(&name), &MultichannelAudio::mono(x, sr).unwrap(), WavFormat::Float32).unwrap();
            toml.push_str(&format!(
                "[[utterance]]\npath = \"{name}\"\nspeaker = \"spk{s}\"\nduration = {}\n\n",
                len as f64 / sr as f64
            ));
        }
    }
    let path = dir.join("corpus.toml");
    std::fs::write(&path, toml).unwrap();
    path
}

/// A short multi-channel session setup that renders in well under a second.
pub fn small_simulation(seed: u64) -> SimulationConfig {
    let mut c = SimulationConfig {
        seed,
        sessions: 1,
        duration: 20.0,
        speakers: 3,
        channels: 3,
        sample_rate: 8000,
        snr_db: Some(25.0),
        max_order: Some(6),
        synthetic_inputs: true,
        ..SimulationConfig::default()
    };
    c.rooms.t60 = (0.2, 0.3);
    c
}

pub fn load_corpus(path: &Path) -> DryCorpus {
    DryCorpus::load(path).unwrap()
}
