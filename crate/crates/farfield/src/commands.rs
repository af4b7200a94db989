//! Standalone stage commands that work on explicit files instead of a run
//! directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use farfield_core::fusion::{doverlap_fuse, FusionInput};
use farfield_core::gss::{apply_vad_mask, extract_speaker_segment, GssConfig};
use farfield_core::metrics::compute_der;
use farfield_core::{MultichannelAudio, Segmentation};
use rayon::prelude::*;
use serde::Deserialize;

use crate::binfmt::{read_activity, read_vad_mask};
use crate::error::{Error, Result, StageExt};
use crate::pipeline::segment_file_name;
use crate::rttm::{format_rttm, read_rttm, read_session_rttm};
use crate::store::{atomic_write, read_text};
use crate::wav::{read_channels, write_wav, WavFormat};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisRef {
    pub path: PathBuf,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Hypothesis files with weights, fused session by session.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseList {
    #[serde(rename = "hypothesis")]
    pub hypotheses: Vec<HypothesisRef>,
}

impl FuseList {
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut l: Self =
            toml::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if l.hypotheses.is_empty() {
            return Err(Error::Config(format!("{}: no hypotheses", path.display())));
        }
        for h in &mut l.hypotheses {
            if h.path.is_relative() {
                h.path = base.join(&h.path);
            }
        }
        Ok(l)
    }
}

/// Fuses every session found in any hypothesis file. A file without a
/// session contributes an empty hypothesis for it.
pub fn fuse_files(list: &FuseList) -> Result<BTreeMap<String, Segmentation>> {
    let files = list
        .hypotheses
        .iter()
        .map(|h| read_rttm(&h.path))
        .collect::<Result<Vec<_>>>()?;
    let sessions: BTreeSet<&String> = files.iter().flat_map(|f| f.keys()).collect();
    let weights: Vec<f64> = list.hypotheses.iter().map(|h| h.weight).collect();
    sessions
        .into_iter()
        .map(|id| {
            let hyps = files
                .iter()
                .map(|f| f.get(id).cloned().unwrap_or_else(|| Segmentation::empty(id.clone())))
                .collect();
            let fused = doverlap_fuse(&FusionInput { hypotheses: hyps, weights: weights.clone() }).stage("fuse")?;
            Ok((id.clone(), fused))
        })
        .collect()
}

/// One accepted step of [`greedy_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub index: usize,
    /// Pooled DER of the fused selection after adding `index`.
    pub der: f64,
}

/// Greedy forward selection of hypotheses for fusion: starting from the
/// empty set, repeatedly add the hypothesis whose inclusion gives the lowest
/// pooled DER of the fused output over the reference sessions, while that
/// DER strictly decreases. Ties go to the lower index.
pub fn greedy_select(
    list: &FuseList,
    reference: &BTreeMap<String, Segmentation>,
    collar: f64,
) -> Result<Vec<SelectionStep>> {
    if reference.is_empty() {
        return Err(Error::Config("reference RTTM lists no sessions".into()));
    }
    let files = list
        .hypotheses
        .iter()
        .map(|h| read_rttm(&h.path))
        .collect::<Result<Vec<_>>>()?;
    let pooled_der = |chosen: &[usize]| -> Result<f64> {
        let (mut err, mut total) = (0.0, 0.0);
        for (id, r) in reference {
            let hyps: Vec<Segmentation> = chosen
                .iter()
                .map(|&i| files[i].get(id).cloned().unwrap_or_else(|| Segmentation::empty(id.clone())))
                .collect();
            let weights = chosen.iter().map(|&i| list.hypotheses[i].weight).collect();
            let fused = doverlap_fuse(&FusionInput { hypotheses: hyps, weights }).stage("fuse")?;
            let d = compute_der(r, &fused, collar).stage("fuse")?;
            err += d.missed + d.false_alarm + d.confusion;
            total += d.total_ref;
        }
        Ok(err / total)
    };
    let mut steps: Vec<SelectionStep> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut current = f64::INFINITY;
    loop {
        let mut best: Option<SelectionStep> = None;
        for i in (0..files.len()).filter(|i| !chosen.contains(i)) {
            let mut trial = chosen.clone();
            trial.push(i);
            let der = pooled_der(&trial)?;
            if best.as_ref().map_or(true, |b| der < b.der) {
                best = Some(SelectionStep { index: i, der });
            }
        }
        match best {
            Some(b) if b.der < current => {
                current = b.der;
                chosen.push(b.index);
                steps.push(b);
            }
            _ => return Ok(steps),
        }
    }
}

pub fn write_fused(path: &Path, fused: &BTreeMap<String, Segmentation>) -> Result<()> {
    let text: String = fused.values().map(format_rttm).collect();
    atomic_write(path, text.as_bytes())
}

/// Inputs of a standalone separation run.
#[derive(Debug, Clone)]
pub struct GssJob {
    pub wavs: Vec<PathBuf>,
    pub rttm: PathBuf,
    /// Session id inside the RTTM; defaults to its only session.
    pub session: Option<String>,
    /// Rows follow the RTTM's sorted speaker labels.
    pub activity: PathBuf,
    pub vad_mask: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: WavFormat,
}

/// Separates every turn of the RTTM; returns the written files.
pub fn run_gss_job(job: &GssJob, cfg: &GssConfig) -> Result<Vec<PathBuf>> {
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    let session = match &job.session {
        Some(s) => s.clone(),
        None => {
            let all = read_rttm(&job.rttm)?;
            let mut ids = all.keys();
            match (ids.next(), ids.next()) {
                (Some(id), None) => id.clone(),
                _ => return Err(Error::data(&job.rttm, "expected exactly one session; pass --session")),
            }
        }
    };
    let seg = read_session_rttm(&job.rttm, &session)?;
    let audio: MultichannelAudio = read_channels(&job.wavs)?;
    let mut acts = read_activity(&job.activity, &session)?
        .with_speakers(seg.speakers())
        .map_err(|e| Error::data(&job.activity, e.to_string()))?;
    if let Some(v) = &job.vad_mask {
        acts = apply_vad_mask(&acts, &read_vad_mask(v)?).map_err(|e| Error::data(v, e.to_string()))?;
    }
    seg.turns
        .par_iter()
        .map(|turn| {
            let y = extract_speaker_segment(&audio, turn, &acts, cfg).stage("gss")?;
            let path = job.out_dir.join(segment_file_name(&session, turn));
            write_wav(&path, &MultichannelAudio::mono(y, audio.sample_rate()).stage("gss")?, job.format)?;
            Ok(path)
        })
        .collect()
}
