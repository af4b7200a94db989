//! Stage orchestration over a manifest of sessions.
//!
//! Every stage writes under `<run>/<stage>/<session>/` and records a content
//! hash of its inputs and settings; a rerun with the same hash reuses the
//! artifacts. Downstream stages always read upstream artifacts back from
//! disk, so cached and fresh runs see identical inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use farfield_core::diarize::{concat_normalize, diarize_thresholds};
use farfield_core::fusion::{binarize, doverlap_fuse, extend_segments, soft_fuse, FusionInput, SoftActivity};
use farfield_core::gss::{apply_vad_mask, extract_speaker_segment};
use farfield_core::metrics::{compute_der, si_sdr, DerBreakdown};
use farfield_core::preprocess::{clip_normalize, envelope_variance_rank, select_top_channels, wpe_dereverberate};
use farfield_core::signal::{istft, stft};
use farfield_core::{MultichannelAudio, Segmentation};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binfmt::{read_activity, read_embeddings, read_vad_mask, write_activity};
use crate::config::PipelineConfig;
use crate::error::{Error, Result, StageExt};
use crate::manifest::{Manifest, SessionManifest};
use crate::rttm::{read_session_rttm, write_rttm};
use crate::store::{atomic_write, read_text, Hasher, RunDir};
use crate::wav::{read_channels, read_wav, write_wav};

pub const PREPROCESS: &str = "preprocess";
pub const DIARIZE: &str = "diarize";
pub const FUSION: &str = "fusion";
pub const GSS: &str = "gss";
pub const SCORE: &str = "score";

/// Seed for one unit of work, derived from the run seed and a path of names.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Hasher::new().field("seed", &base.to_le_bytes());
    for p in parts {
        h = h.text("part", p);
    }
    u64::from_str_radix(&h.hex()[..16], 16).unwrap()
}

fn settings_hash<T: Serialize>(name: &str, value: &T) -> Hasher {
    Hasher::new().text(name, &toml::to_string(value).expect("settings serialize"))
}

/// Per-channel ranking written by the preprocessing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    /// `(channel, score, rank, selected)` per channel.
    pub rows: Vec<(usize, f64, usize, bool)>,
}

impl RankingReport {
    pub fn selected(&self) -> Vec<usize> {
        let mut sel: Vec<usize> = self.rows.iter().filter(|r| r.3).map(|r| r.0).collect();
        sel.sort_unstable();
        sel
    }

    pub fn format(&self) -> String {
        let mut out = String::from("channel\tscore\trank\tselected\n");
        for (c, s, r, sel) in &self.rows {
            let _ = writeln!(out, "{c}\t{s:.6}\t{r}\t{}", if *sel { "yes" } else { "no" });
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(format!("line {}: expected 4 fields", n + 1));
            }
            let bad = |_| format!("line {}: malformed", n + 1);
            rows.push((
                f[0].parse().map_err(bad)?,
                f[1].parse().map_err(|_| format!("line {}: malformed", n + 1))?,
                f[2].parse().map_err(bad)?,
                f[3] == "yes",
            ));
        }
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessOutput {
    pub session: String,
    pub orig: PathBuf,
    pub wpe: Option<PathBuf>,
    pub ranking: RankingReport,
    pub cached: bool,
}

impl PreprocessOutput {
    pub fn variant_path(&self, variant: &str) -> Option<&Path> {
        match variant {
            "orig" => Some(&self.orig),
            "wpe" => self.wpe.as_deref(),
            _ => None,
        }
    }
}

/// Shared state of one pipeline run.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub manifest: Manifest,
    pub run: RunDir,
}

fn dereverberate(audio: &MultichannelAudio, cfg: &PipelineConfig) -> Result<MultichannelAudio> {
    let params = cfg.preprocess.stft.params();
    let spec = stft(audio, &params).stage(PREPROCESS)?;
    let out = wpe_dereverberate(&spec, &cfg.preprocess.wpe()).stage(PREPROCESS)?;
    let y = istft(&out, &params).stage(PREPROCESS)?;
    Ok(y.slice(0, audio.len()))
}

impl Pipeline {
    pub fn new(config: PipelineConfig, manifest: Manifest, run_dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let run = RunDir::new(run_dir)?;
        Ok(Self { config, manifest, run })
    }

    /// Writes the resolved configuration and manifest into the run directory.
    pub fn snapshot(&self) -> Result<()> {
        atomic_write(&self.run.root().join("config.toml"), self.config.to_toml().as_bytes())?;
        atomic_write(&self.run.root().join("manifest.toml"), self.manifest.to_toml().as_bytes())
    }

    fn session(&self, id: &str) -> &SessionManifest {
        self.manifest.sessions.iter().find(|s| s.id == id).expect("known session")
    }

    /// Normalized originals, WPE variants and the channel ranking.
    pub fn run_preprocess(&self) -> Result<Vec<PreprocessOutput>> {
        self.manifest.sessions.par_iter().map(|s| self.preprocess_session(s)).collect()
    }

    fn preprocess_session(&self, s: &SessionManifest) -> Result<PreprocessOutput> {
        let cfg = &self.config;
        let dir = self.run.stage_dir(PREPROCESS, &s.id);
        let orig = dir.join("orig.wav");
        let wpe = cfg.preprocess.wpe_enabled.then(|| dir.join("wpe.wav"));
        let report = dir.join("ranking.tsv");
        let mut key = settings_hash("preprocess", &cfg.preprocess);
        for w in &s.wavs {
            key = key.file(w)?;
        }
        let key = key.hex();
        let mut outputs = vec![orig.clone(), report.clone()];
        outputs.extend(wpe.clone());
        let cached = self.run.is_fresh(PREPROCESS, &s.id, &key, &outputs);
        if cached {
            log::info!("{}: preprocessing cached", s.id);
        } else {
            self.run.invalidate(PREPROCESS, &s.id)?;
            let raw = read_channels(&s.wavs)?;
            if let Some(sr) = s.sample_rate {
                if sr != raw.sample_rate() {
                    return Err(Error::data(&s.wavs[0], format!("sample rate {} but manifest says {sr}", raw.sample_rate())));
                }
            }
            let clip = cfg.preprocess.clip();
            let normalized = clip_normalize(&raw, &clip).stage(PREPROCESS)?;
            write_wav(&orig, &normalized, cfg.preprocess.output_format)?;
            let rank_input = match &wpe {
                Some(path) => {
                    let d = dereverberate(&raw, cfg)?;
                    let d = clip_normalize(&d, &clip).stage(PREPROCESS)?;
                    write_wav(path, &d, cfg.preprocess.output_format)?;
                    d
                }
                None => normalized,
            };
            let ranking = envelope_variance_rank(&rank_input, &cfg.preprocess.envelope()).stage(PREPROCESS)?;
            let selected = select_top_channels(&ranking, cfg.preprocess.selection_fraction).stage(PREPROCESS)?;
            let ranks = ranking.ranks();
            let rows = (0..ranking.scores.len())
                .map(|c| (c, ranking.scores[c], ranks[c] + 1, selected.contains(&c)))
                .collect();
            atomic_write(&report, RankingReport { rows }.format().as_bytes())?;
            self.run.mark_done(PREPROCESS, &s.id, &key)?;
        }
        let ranking = RankingReport::parse(&read_text(&report)?).map_err(|m| Error::data(&report, m))?;
        Ok(PreprocessOutput {
            session: s.id.clone(),
            orig,
            wpe,
            ranking,
            cached,
        })
    }

    /// Runs every grid cell on every selected channel and fuses the cells of
    /// each channel. Returns `session -> channel -> fused segmentation`.
    pub fn run_diarize_grid(
        &self,
        pre: &[PreprocessOutput],
    ) -> Result<BTreeMap<String, BTreeMap<usize, Segmentation>>> {
        pre.par_iter()
            .map(|p| self.diarize_session(p).map(|m| (p.session.clone(), m)))
            .collect()
    }

    fn diarize_session(&self, p: &PreprocessOutput) -> Result<BTreeMap<usize, Segmentation>> {
        let s = self.session(&p.session);
        let d = &self.config.diarize;
        let dir = self.run.stage_dir(DIARIZE, &s.id);
        let selected = p.ranking.selected();
        let mut key = settings_hash("diarize", d)
            .field("seed", &self.config.seed.to_le_bytes())
            .text("ranking", &p.ranking.format());
        for e in &s.embeddings {
            key = key.text("cell", &format!("{}/{}/{}", e.channel, e.source, e.variant)).file(&e.path)?;
            for extra in e.path_b.iter().chain(&e.non_speech) {
                key = key.file(extra)?;
            }
        }
        let key = key.hex();
        let fused_path = |c: usize| dir.join(format!("ch{c}.rttm"));
        let outputs: Vec<PathBuf> = selected.iter().map(|&c| fused_path(c)).collect();
        if self.run.is_fresh(DIARIZE, &s.id, &key, &outputs) {
            log::info!("{}: diarization cached", s.id);
        } else {
            self.run.invalidate(DIARIZE, &s.id)?;
            let results: Vec<Result<()>> = selected
                .par_iter()
                .map(|&c| self.diarize_channel(s, c, &dir, &fused_path(c)))
                .collect();
            results.into_iter().collect::<Result<Vec<()>>>()?;
            self.run.mark_done(DIARIZE, &s.id, &key)?;
        }
        selected
            .iter()
            .map(|&c| read_session_rttm(&fused_path(c), &s.id).map(|seg| (c, seg)))
            .collect()
    }

    fn diarize_channel(&self, s: &SessionManifest, channel: usize, dir: &Path, out: &Path) -> Result<()> {
        let d = &self.config.diarize;
        let mut hyps = Vec::new();
        for source in &d.activity_sources {
            for variant in &d.variants {
                let Some(e) = s
                    .embeddings
                    .iter()
                    .find(|e| e.channel == channel && &e.source == source && &e.variant == variant)
                else {
                    log::warn!("{}: no embeddings for channel {channel}, {source}/{variant}; cell skipped", s.id);
                    continue;
                };
                let tag = format!("{source}-{variant}");
                let mut emb = read_embeddings(&e.path, &tag)?;
                if let Some(b) = &e.path_b {
                    let other = read_embeddings(b, &tag)?;
                    emb = concat_normalize(&emb, &other).map_err(|err| Error::data(b, err.to_string()))?;
                }
                let non_speech = match &e.non_speech {
                    Some(p) => read_cluster_ids(p)?,
                    None => Vec::new(),
                };
                let seed = derive_seed(self.config.seed, &[&s.id, &channel.to_string(), source, variant]);
                match diarize_thresholds(&emb, &d.config(d.reject_thr[0]), &d.reject_thr, seed, &non_speech, &s.id) {
                    Ok(results) => {
                        for (r, thr) in results.iter().zip(&d.reject_thr) {
                            let path = dir.join(format!("ch{channel}")).join(format!("{tag}-thr{thr}.rttm"));
                            write_rttm(&path, &r.segmentation)?;
                            hyps.push(read_session_rttm(&path, &s.id)?);
                        }
                    }
                    Err(err) if err.is_numerical() => return Err(Error::stage(DIARIZE, err)),
                    Err(err) => log::warn!("{}: channel {channel} {tag}: {err}; cell skipped", s.id),
                }
            }
        }
        if hyps.is_empty() {
            return Err(Error::stage(
                format!("{DIARIZE} {} channel {channel}", s.id),
                farfield_core::Error::Empty("grid cells with results"),
            ));
        }
        let fused = doverlap_fuse(&FusionInput::uniform(hyps)).stage(DIARIZE)?;
        write_rttm(out, &fused)
    }

    /// Soft-activity fusion per channel, then cross-channel fusion and
    /// segment extension. Writes `final.rttm`, `extended.rttm` and the
    /// separation priors `final.act` (rows in sorted speaker order).
    pub fn run_fusion(
        &self,
        pre: &[PreprocessOutput],
        channel_segs: &BTreeMap<String, BTreeMap<usize, Segmentation>>,
    ) -> Result<BTreeMap<String, Segmentation>> {
        pre.par_iter()
            .map(|p| {
                let segs = &channel_segs[&p.session];
                self.fuse_session(p, segs).map(|s| (p.session.clone(), s))
            })
            .collect()
    }

    fn fuse_session(&self, p: &PreprocessOutput, segs: &BTreeMap<usize, Segmentation>) -> Result<Segmentation> {
        let s = self.session(&p.session);
        let f = &self.config.fusion;
        let dir = self.run.stage_dir(FUSION, &s.id);
        let final_path = dir.join("final.rttm");
        let ext_path = dir.join("extended.rttm");
        let act_path = dir.join("final.act");
        let mut key = settings_hash("fusion", f).text("diarize_step", &self.config.diarize.frame_step.to_string());
        for (c, seg) in segs {
            key = key.text(&format!("ch{c}"), &crate::rttm::format_rttm(seg));
        }
        for a in &s.activities {
            key = key.text("act", &a.channel.to_string()).file(&a.path)?;
        }
        let key = key.file(&p.orig)?.hex();
        let outputs = [final_path.clone(), ext_path.clone(), act_path.clone()];
        if self.run.is_fresh(FUSION, &s.id, &key, &outputs) {
            log::info!("{}: fusion cached", s.id);
            return read_session_rttm(&final_path, &s.id);
        }
        self.run.invalidate(FUSION, &s.id)?;
        let duration = {
            let a = read_wav(&p.orig)?;
            a.duration()
        };
        let mut channel_acts = Vec::new();
        let mut hyps = Vec::new();
        let mut weights = Vec::new();
        for (&c, seg) in segs {
            let files: Vec<&Path> = s.activities.iter().filter(|a| a.channel == c).map(|a| a.path.as_path()).collect();
            let channel_seg = if files.is_empty() {
                seg.clone()
            } else {
                let acts = files
                    .iter()
                    .map(|p| read_activity(p, &s.id))
                    .collect::<Result<Vec<_>>>()?;
                let fused = soft_fuse(&acts, seg).stage(FUSION)?;
                write_activity(&dir.join(format!("ch{c}.act")), &fused)?;
                let bin = binarize(&fused, f.binarize_threshold).stage(FUSION)?;
                channel_acts.push(fused);
                bin
            };
            let path = dir.join(format!("ch{c}.rttm"));
            write_rttm(&path, &channel_seg)?;
            hyps.push(read_session_rttm(&path, &s.id)?);
            weights.push(f.channel_weights.get(c).copied().unwrap_or(1.0));
        }
        let fused = doverlap_fuse(&FusionInput { hypotheses: hyps, weights }).stage(FUSION)?;
        write_rttm(&final_path, &fused)?;
        let fused = read_session_rttm(&final_path, &s.id)?;
        let extended = extend_segments(&fused, f.extension_margin, duration).stage(FUSION)?;
        write_rttm(&ext_path, &extended)?;
        let step = channel_acts.first().map_or(self.config.diarize.frame_step, |a| a.frame_step);
        let frames = (duration / step).ceil() as usize;
        let priors = if channel_acts.iter().all(|a| a.frames() == frames) && !channel_acts.is_empty() {
            soft_fuse(&channel_acts, &fused).stage(FUSION)?
        } else {
            SoftActivity::from_segmentation(&fused, frames, step).stage(FUSION)?
        };
        write_activity(&act_path, &priors)?;
        self.run.mark_done(FUSION, &s.id, &key)?;
        Ok(fused)
    }

    /// Separates every final turn; returns written files per session.
    pub fn run_gss(&self, pre: &[PreprocessOutput]) -> Result<BTreeMap<String, Vec<(farfield_core::Turn, PathBuf)>>> {
        pre.iter()
            .map(|p| self.gss_session(p).map(|v| (p.session.clone(), v)))
            .collect()
    }

    fn gss_session(&self, p: &PreprocessOutput) -> Result<Vec<(farfield_core::Turn, PathBuf)>> {
        let s = self.session(&p.session);
        let g = &self.config.gss;
        let fdir = self.run.stage_dir(FUSION, &s.id);
        let final_seg = read_session_rttm(&fdir.join("final.rttm"), &s.id)?;
        let dir = self.run.stage_dir(GSS, &s.id);
        let named: Vec<(farfield_core::Turn, PathBuf)> = final_seg
            .turns
            .iter()
            .map(|t| (t.clone(), dir.join(segment_file_name(&s.id, t))))
            .collect();
        let mut key = settings_hash("gss", g)
            .text("margin", &self.config.fusion.extension_margin.to_string())
            .file(&fdir.join("final.rttm"))?
            .file(&fdir.join("final.act"))?
            .file(&p.orig)?
            .text("ranking", &p.ranking.format());
        if let Some(v) = &s.vad_mask {
            key = key.file(v)?;
        }
        let key = key.hex();
        let outputs: Vec<PathBuf> = named.iter().map(|(_, p)| p.clone()).collect();
        if self.run.is_fresh(GSS, &s.id, &key, &outputs) {
            log::info!("{}: separation cached", s.id);
            return Ok(named);
        }
        self.run.invalidate(GSS, &s.id)?;
        let audio = read_wav(&p.orig)?
            .select_channels(&p.ranking.selected())
            .stage(GSS)?;
        let speakers = final_seg.speakers();
        let mut acts = read_activity(&fdir.join("final.act"), &s.id)?
            .with_speakers(speakers)
            .stage(GSS)?;
        if let Some(v) = &s.vad_mask {
            acts = apply_vad_mask(&acts, &read_vad_mask(v)?).map_err(|e| Error::data(v, e.to_string()))?;
        }
        let cfg = g.config(self.config.fusion.extension_margin);
        named
            .par_iter()
            .map(|(turn, path)| {
                let y = extract_speaker_segment(&audio, turn, &acts, &cfg)
                    .map_err(|e| Error::stage(format!("{GSS} {} {}", s.id, path.display()), e))?;
                let out = MultichannelAudio::mono(y, audio.sample_rate()).stage(GSS)?;
                write_wav(path, &out, g.output_format)
            })
            .collect::<Result<Vec<()>>>()?;
        self.run.mark_done(GSS, &s.id, &key)?;
        Ok(named)
    }

    /// Scores sessions that have a reference; returns the per-session scores.
    pub fn run_score(
        &self,
        finals: &BTreeMap<String, Segmentation>,
        separated: &BTreeMap<String, Vec<(farfield_core::Turn, PathBuf)>>,
    ) -> Result<BTreeMap<String, SessionScore>> {
        let mut out = BTreeMap::new();
        for s in &self.manifest.sessions {
            let Some(rpath) = &s.reference else {
                log::info!("{}: no reference, scoring skipped", s.id);
                continue;
            };
            let reference = read_session_rttm(rpath, &s.id)?;
            let hyp = &finals[&s.id];
            let der = compute_der(&reference, hyp, 0.0).map_err(|e| Error::data(rpath, e.to_string()))?;
            let mut si = Vec::new();
            if !s.sources.is_empty() {
                let mapping = overlap_mapping(&reference, hyp);
                for (turn, path) in separated.get(&s.id).into_iter().flatten() {
                    let Some(r) = mapping.get(&turn.speaker) else { continue };
                    let Some(src) = s.sources.iter().find(|x| &x.speaker == r) else { continue };
                    let clean = read_wav(&src.path)?;
                    let est = read_wav(path)?;
                    let sr = clean.sample_rate() as f64;
                    let start = (turn.start * sr).floor() as usize;
                    let end = (start + est.len()).min(clean.len());
                    if end <= start {
                        continue;
                    }
                    let reference_part = &clean.channel(0)[start..end];
                    match si_sdr(&est.channel(0)[..end - start], reference_part) {
                        Ok(v) => si.push(v),
                        Err(e) => log::debug!("{}: {e}", path.display()),
                    }
                }
            }
            let score = SessionScore {
                der,
                ref_speakers: reference.num_speakers(),
                hyp_speakers: hyp.num_speakers(),
                mean_si_sdr: (!si.is_empty()).then(|| si.iter().sum::<f64>() / si.len() as f64),
            };
            let json = serde_json::to_string_pretty(&score).expect("score serializes");
            atomic_write(&self.run.stage_dir(SCORE, &s.id).join("score.json"), json.as_bytes())?;
            out.insert(s.id.clone(), score);
        }
        if !out.is_empty() {
            let table = crate::score::format_table(&[("run".to_string(), out.clone())]);
            atomic_write(&self.run.root().join(SCORE).join("report.txt"), table.as_bytes())?;
        }
        Ok(out)
    }

    /// The whole pipeline. Final RTTMs are also copied to `<run>/final/`.
    pub fn run_full(&self) -> Result<RunSummary> {
        self.manifest.check_files()?;
        self.snapshot()?;
        let pre = self.run_preprocess()?;
        let channel_segs = self.run_diarize_grid(&pre)?;
        let finals = self.run_fusion(&pre, &channel_segs)?;
        for (id, seg) in &finals {
            write_rttm(&self.run.root().join("final").join(format!("{id}.rttm")), seg)?;
        }
        let separated = if self.config.gss.enabled {
            self.run_gss(&pre)?
        } else {
            BTreeMap::new()
        };
        let scores = self.run_score(&finals, &separated)?;
        Ok(RunSummary { finals, separated, scores })
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub finals: BTreeMap<String, Segmentation>,
    pub separated: BTreeMap<String, Vec<(farfield_core::Turn, PathBuf)>>,
    pub scores: BTreeMap<String, SessionScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    #[serde(with = "der_serde")]
    pub der: DerBreakdown,
    pub ref_speakers: usize,
    pub hyp_speakers: usize,
    pub mean_si_sdr: Option<f64>,
}

mod der_serde {
    use farfield_core::metrics::DerBreakdown;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        missed: f64,
        false_alarm: f64,
        confusion: f64,
        total_ref: f64,
        der: f64,
    }

    pub fn serialize<S: Serializer>(d: &DerBreakdown, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            missed: d.missed,
            false_alarm: d.false_alarm,
            confusion: d.confusion,
            total_ref: d.total_ref,
            der: d.der,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DerBreakdown, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(DerBreakdown {
            missed: r.missed,
            false_alarm: r.false_alarm,
            confusion: r.confusion,
            total_ref: r.total_ref,
            der: r.der,
        })
    }
}

/// `<session>-<speaker>-<start_ms>-<end_ms>.wav`
pub fn segment_file_name(session: &str, turn: &farfield_core::Turn) -> String {
    format!(
        "{session}-{}-{}-{}.wav",
        turn.speaker,
        (turn.start * 1000.0).round() as u64,
        (turn.end * 1000.0).round() as u64
    )
}

/// Hypothesis label to the reference label it overlaps most.
pub fn overlap_mapping(reference: &Segmentation, hyp: &Segmentation) -> BTreeMap<String, String> {
    let r = reference.speaker_intervals();
    let mut out = BTreeMap::new();
    for (h, hiv) in hyp.speaker_intervals() {
        let best = r
            .iter()
            .map(|(name, riv)| {
                let mut o = 0.0;
                for &(a, b) in &hiv {
                    for &(c, d) in riv {
                        o += (b.min(d) - a.max(c)).max(0.0);
                    }
                }
                (o, name)
            })
            .filter(|(o, _)| *o > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)));
        if let Some((_, name)) = best {
            out.insert(h, name.clone());
        }
    }
    out
}

/// Cluster ids listed in a non-speech flag file.
pub fn read_cluster_ids(path: &Path) -> Result<Vec<usize>> {
    read_text(path)?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::data(path, format!("bad cluster id {t:?}"))))
        .collect()
}
