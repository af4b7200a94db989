//! File-level driver for the simulators: room ranges and a dry corpus in,
//! rendered sessions, references and metadata out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use farfield_core::fusion::SoftActivity;
use farfield_core::rng::{gaussian_vec, seeded, split, uniform};
use farfield_core::simulate::{
    sample_conversation, sample_room, simulate_mixture, simulate_separation_examples, synthetic_embeddings,
    synthetic_soft_activity, DryUtterance, EmbeddingSimConfig, MixtureSpec, NoiseSpec, OverlapStats, RoomRanges,
    SeparationConfig, SpeakerPlacement, UtteranceSpec,
};
use farfield_core::MultichannelAudio;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::binfmt::{write_activity, write_embeddings};
use crate::error::{Error, Result, StageExt};
use crate::pipeline::derive_seed;
use crate::manifest::{ActivityRef, EmbeddingRef, Manifest, SessionManifest, SourceRef};
use crate::rttm::write_rttm;
use crate::store::{atomic_write, read_text};
use crate::wav::{read_wav, write_wav, WavFormat};

const STAGE: &str = "simulate";
const NOISE_KEY: &str = "#noise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomSettings {
    pub length: (f64, f64),
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub t60: (f64, f64),
    pub wall_clearance: f64,
    pub min_source_receiver_distance: f64,
    pub max_attempts: usize,
}

impl Default for RoomSettings {
    fn default() -> Self {
        let r = RoomRanges::default();
        Self {
            length: r.length,
            width: r.width,
            height: r.height,
            t60: r.t60,
            wall_clearance: r.wall_clearance,
            min_source_receiver_distance: r.min_source_receiver_distance,
            max_attempts: r.max_attempts,
        }
    }
}

impl RoomSettings {
    fn ranges(&self, sources: usize, receivers: usize) -> RoomRanges {
        RoomRanges {
            length: self.length,
            width: self.width,
            height: self.height,
            t60: self.t60,
            sources,
            receivers,
            wall_clearance: self.wall_clearance,
            min_source_receiver_distance: self.min_source_receiver_distance,
            max_attempts: self.max_attempts,
            ..RoomRanges::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConversationSettings {
    pub p_overlap: f64,
    pub pause_median: f64,
    pub pause_sigma: f64,
    pub overlap_mean: f64,
    pub turn_median: f64,
    pub turn_sigma: f64,
}

impl Default for ConversationSettings {
    fn default() -> Self {
        let s = OverlapStats::default();
        Self {
            p_overlap: s.p_overlap,
            pause_median: s.pause_median,
            pause_sigma: s.pause_sigma,
            overlap_mean: s.overlap_mean,
            turn_median: s.turn_median,
            turn_sigma: s.turn_sigma,
        }
    }
}

impl ConversationSettings {
    fn stats(&self) -> OverlapStats {
        OverlapStats {
            p_overlap: self.p_overlap,
            pause_median: self.pause_median,
            pause_sigma: self.pause_sigma,
            overlap_mean: self.overlap_mean,
            turn_median: self.turn_median,
            turn_sigma: self.turn_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparationSettings {
    pub count: usize,
    pub example_seconds: f64,
    pub max_speakers: usize,
    pub max_concurrent: usize,
    pub rendered_channels: usize,
    pub kept_channels: usize,
    pub snr_db: (f64, f64),
}

impl Default for SeparationSettings {
    fn default() -> Self {
        let c = SeparationConfig::default();
        Self {
            count: 0,
            example_seconds: c.example_seconds,
            max_speakers: c.max_speakers,
            max_concurrent: c.max_concurrent,
            rendered_channels: c.rendered_channels,
            kept_channels: c.kept_channels,
            snr_db: c.snr_db,
        }
    }
}

/// Contents of the simulation TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub seed: u64,
    pub sessions: usize,
    pub duration: f64,
    pub speakers: usize,
    pub channels: usize,
    pub sample_rate: u32,
    /// Speech-to-noise ratio; absent means no noise.
    pub snr_db: Option<f64>,
    /// Noise recording; white noise when absent.
    pub noise: Option<PathBuf>,
    pub max_order: Option<usize>,
    pub output_format: WavFormat,
    /// Also write synthetic embeddings and soft activities so the sessions
    /// can be fed straight to the pipeline.
    pub synthetic_inputs: bool,
    pub rooms: RoomSettings,
    pub conversation: ConversationSettings,
    pub separation: SeparationSettings,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sessions: 1,
            duration: 60.0,
            speakers: 4,
            channels: 4,
            sample_rate: 16_000,
            snr_db: Some(20.0),
            noise: None,
            max_order: Some(20),
            output_format: WavFormat::Float32,
            synthetic_inputs: false,
            rooms: RoomSettings::default(),
            conversation: ConversationSettings::default(),
            separation: SeparationSettings::default(),
        }
    }
}

impl SimulationConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| Error::Config(format!("simulation config: {e}")))?;
        if let Some(n) = &mut c.noise {
            if n.is_relative() {
                *n = base.join(&*n);
            }
        }
        if c.sessions == 0 && c.separation.count == 0 {
            return Err(Error::Config("nothing to simulate: sessions and separation.count are both 0".into()));
        }
        if c.speakers == 0 || c.channels == 0 || c.sample_rate == 0 || !(c.duration > 0.0) {
            return Err(Error::Config("speakers, channels, sample_rate and duration must be positive".into()));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&read_text(path)?, base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub speaker: String,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DryCorpus {
    #[serde(default, rename = "utterance")]
    pub utterances: Vec<CorpusEntry>,
}

impl DryCorpus {
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut c: Self =
            toml::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("corpus {}: {e}", path.display())))?;
        for u in &mut c.utterances {
            if u.path.is_relative() {
                u.path = base.join(&u.path);
            }
        }
        if c.utterances.is_empty() {
            return Err(Error::Config(format!("corpus {} lists no utterances", path.display())));
        }
        Ok(c)
    }

    /// Loads every utterance as mono audio at `sample_rate`.
    pub fn read(&self, sample_rate: u32) -> Result<Vec<(String, Vec<f64>)>> {
        self.utterances
            .iter()
            .map(|u| {
                let a = read_wav(&u.path)?;
                if a.sample_rate() != sample_rate {
                    return Err(Error::data(&u.path, format!("sample rate {}, expected {sample_rate}", a.sample_rate())));
                }
                if (a.duration() - u.duration).abs() > 0.01 {
                    log::warn!("{}: duration {:.3} s, corpus says {:.3} s", u.path.display(), a.duration(), u.duration);
                }
                Ok((u.speaker.clone(), a.channel(0).to_vec()))
            })
            .collect()
    }
}

fn point_json(p: &[f64; 3]) -> serde_json::Value {
    json!([p[0], p[1], p[2]])
}

/// Renders all sessions and examples into `out`; returns the manifest of the
/// rendered sessions (also written to `out/manifest.toml`).
pub fn run_simulation(cfg: &SimulationConfig, corpus: &DryCorpus, out: &Path) -> Result<Manifest> {
    let dry = corpus.read(cfg.sample_rate)?;
    let paths: Vec<PathBuf> = corpus.utterances.iter().map(|u| u.path.clone()).collect();
    let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (spk, _)) in dry.iter().enumerate() {
        by_speaker.entry(spk.as_str()).or_default().push(i);
    }
    let noise = match &cfg.noise {
        Some(p) => Some(read_wav(p)?.channel(0).to_vec()),
        None => None,
    };
    let mut manifest = Manifest::default();
    for k in 0..cfg.sessions {
        let id = format!("sim{k:03}");
        let session = simulate_session(cfg, &id, split(cfg.seed, k as u64), &dry, &by_speaker, &paths, noise.as_deref(), out)?;
        manifest.sessions.push(session);
    }
    if cfg.separation.count > 0 {
        write_examples(cfg, &dry, out)?;
    }
    if !manifest.sessions.is_empty() {
        atomic_write(&out.join("manifest.toml"), relative_to(&manifest, out).to_toml().as_bytes())?;
    }
    Ok(manifest)
}

/// Copy of `manifest` with paths under `dir` written relative to it, which
/// is how the manifest file resolves them when loaded.
fn relative_to(manifest: &Manifest, dir: &Path) -> Manifest {
    let rel = |p: &mut PathBuf| {
        if let Ok(r) = p.strip_prefix(dir) {
            *p = r.to_path_buf();
        }
    };
    let mut m = manifest.clone();
    for s in &mut m.sessions {
        s.wavs.iter_mut().for_each(rel);
        s.reference.iter_mut().for_each(rel);
        s.vad_mask.iter_mut().for_each(rel);
        s.embeddings.iter_mut().for_each(|e| {
            rel(&mut e.path);
            e.path_b.iter_mut().for_each(rel);
            e.non_speech.iter_mut().for_each(rel);
        });
        s.activities.iter_mut().for_each(|a| rel(&mut a.path));
        s.sources.iter_mut().for_each(|x| rel(&mut x.path));
    }
    m
}

fn simulate_session(
    cfg: &SimulationConfig,
    id: &str,
    mut rng: farfield_core::rng::SimRng,
    dry: &[(String, Vec<f64>)],
    by_speaker: &BTreeMap<&str, Vec<usize>>,
    corpus_paths: &[PathBuf],
    noise: Option<&[f64]>,
    out: &Path,
) -> Result<SessionManifest> {
    let mut draw = |n: usize| (uniform(&mut rng, 0.0, n as f64) as usize).min(n - 1);
    let names: Vec<&str> = by_speaker.keys().copied().collect();
    if names.len() < cfg.speakers {
        return Err(Error::Config(format!(
            "corpus has {} speakers, {} requested",
            names.len(),
            cfg.speakers
        )));
    }
    let mut pool = names.clone();
    let mut chosen = Vec::new();
    for _ in 0..cfg.speakers {
        chosen.push(pool.remove(draw(pool.len())));
    }
    let room_seed = draw(usize::MAX) as u64;
    let conv_seed = draw(usize::MAX) as u64;
    let room = sample_room(&cfg.rooms.ranges(cfg.speakers, cfg.channels), room_seed).stage(STAGE)?;
    let schedule = sample_conversation(&cfg.conversation.stats(), cfg.speakers, cfg.duration, conv_seed).stage(STAGE)?;

    let mut store: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut utterances = Vec::new();
    let mut used = Vec::new();
    let sr = cfg.sample_rate as f64;
    for (i, u) in schedule.iter().enumerate() {
        let candidates = &by_speaker[chosen[u.speaker]];
        let pick = candidates[draw(candidates.len())];
        let want = (u.duration * sr).round() as usize;
        let samples = &dry[pick].1;
        let key = format!("u{i}");
        store.insert(key.clone(), samples[..want.min(samples.len())].to_vec());
        utterances.push(UtteranceSpec { speaker: u.speaker, audio: key, start: u.start });
        used.push(pick);
    }
    let noise_spec = cfg.snr_db.map(|snr| {
        let n = (cfg.duration * sr).round() as usize;
        let samples = match noise {
            Some(x) => (0..n).map(|i| x[i % x.len()]).collect(),
            None => gaussian_vec(&mut seeded(room_seed ^ 0x6e6f_6973_65), n, 1.0),
        };
        store.insert(NOISE_KEY.to_string(), samples);
        NoiseSpec { audio: NOISE_KEY.to_string(), snr_db: snr }
    });
    let spec = MixtureSpec {
        session_id: id.to_string(),
        speakers: chosen
            .iter()
            .enumerate()
            .map(|(i, s)| SpeakerPlacement { id: s.to_string(), source: i })
            .collect(),
        utterances,
        noise: noise_spec,
        duration: cfg.duration,
        receivers: (0..cfg.channels).collect(),
        sample_rate: cfg.sample_rate,
        max_order: cfg.max_order,
    };
    let sim = simulate_mixture(&spec, &room, &store).stage(STAGE)?;

    let dir = out.join(id);
    let wav = dir.join(format!("{id}.wav"));
    write_wav(&wav, &sim.mixture, cfg.output_format)?;
    let reference = dir.join(format!("{id}.rttm"));
    write_rttm(&reference, &sim.reference)?;
    let mut sources = Vec::new();
    for (p, image) in spec.speakers.iter().zip(&sim.speaker_images) {
        let path = dir.join(format!("{id}-{}.wav", p.id));
        let first = MultichannelAudio::mono(image.channel(0).to_vec(), cfg.sample_rate).stage(STAGE)?;
        write_wav(&path, &first, WavFormat::Float32)?;
        sources.push(SourceRef { speaker: p.id.clone(), path });
    }
    let metadata = json!({
        "session": id,
        "seed": room_seed,
        "conversation_seed": conv_seed,
        "sample_rate": cfg.sample_rate,
        "duration": cfg.duration,
        "room": {
            "dimensions": point_json(&room.dimensions),
            "t60": room.t60,
            "absorption": room.absorption,
            "sources": room.source_positions.iter().map(point_json).collect::<Vec<_>>(),
            "receivers": room.receiver_positions.iter().map(point_json).collect::<Vec<_>>(),
        },
        "speakers": chosen,
        "snr_db": cfg.snr_db,
        "utterances": schedule.iter().zip(&used).map(|(u, &pick)| json!({
            "speaker": chosen[u.speaker],
            "start": u.start,
            "duration": u.duration,
            "source_file": corpus_paths[pick],
        })).collect::<Vec<_>>(),
    });
    atomic_write(
        &dir.join(format!("{id}.json")),
        serde_json::to_string_pretty(&metadata).expect("json").as_bytes(),
    )?;

    let mut session = SessionManifest {
        id: id.to_string(),
        wavs: vec![wav],
        sample_rate: Some(cfg.sample_rate),
        reference: Some(reference),
        embeddings: Vec::new(),
        activities: Vec::new(),
        sources,
        vad_mask: None,
    };
    if cfg.synthetic_inputs {
        let emb_cfg = EmbeddingSimConfig::default();
        for c in 0..cfg.channels {
            for source in ["vad1", "vad2"] {
                for variant in ["orig", "wpe"] {
                    let seed = derive_seed(room_seed, &[&c.to_string(), source, variant]);
                    let set = synthetic_embeddings(&sim.reference, &emb_cfg, seed).stage(STAGE)?;
                    let path = dir.join(format!("emb-ch{c}-{source}-{variant}.emb"));
                    write_embeddings(&path, &set)?;
                    session.embeddings.push(EmbeddingRef {
                        channel: c,
                        source: source.into(),
                        variant: variant.into(),
                        path,
                        path_b: None,
                        non_speech: None,
                    });
                }
            }
            let act: SoftActivity =
                synthetic_soft_activity(&sim.reference, emb_cfg.frame_step, 0.1, room_seed.wrapping_add(c as u64))
                    .stage(STAGE)?;
            let path = dir.join(format!("act-ch{c}.act"));
            write_activity(&path, &act)?;
            session.activities.push(ActivityRef { channel: c, path });
        }
    }
    Ok(session)
}

fn write_examples(cfg: &SimulationConfig, dry: &[(String, Vec<f64>)], out: &Path) -> Result<()> {
    let s = &cfg.separation;
    let sep = SeparationConfig {
        example_seconds: s.example_seconds,
        max_speakers: s.max_speakers,
        max_concurrent: s.max_concurrent,
        rendered_channels: s.rendered_channels,
        kept_channels: s.kept_channels,
        sample_rate: cfg.sample_rate,
        snr_db: s.snr_db,
        rooms: cfg.rooms.ranges(s.max_speakers, s.rendered_channels),
        max_order: cfg.max_order,
        ..SeparationConfig::default()
    };
    let corpus: Vec<DryUtterance> = dry
        .iter()
        .map(|(speaker, samples)| DryUtterance { speaker: speaker.clone(), samples: samples.clone() })
        .collect();
    let examples = simulate_separation_examples(&sep, &corpus, s.count, cfg.seed).stage(STAGE)?;
    let dir = out.join("examples");
    for (i, ex) in examples.iter().enumerate() {
        let stem = format!("ex{i:05}");
        write_wav(&dir.join(format!("{stem}-mix.wav")), &ex.mixture, cfg.output_format)?;
        for (spk, t) in ex.metadata.speakers.iter().zip(&ex.targets) {
            write_wav(&dir.join(format!("{stem}-{spk}.wav")), t, cfg.output_format)?;
        }
        let m = &ex.metadata;
        let meta = json!({
            "seed": m.seed,
            "speakers": m.speakers,
            "intervals": m.intervals,
            "channels": m.channels,
            "snr_db": m.snr_db,
            "room": {
                "dimensions": point_json(&m.room.dimensions),
                "t60": m.room.t60,
            },
        });
        atomic_write(
            &dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&meta).expect("json").as_bytes(),
        )?;
    }
    Ok(())
}
