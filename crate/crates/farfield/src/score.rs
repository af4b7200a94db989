//! Scoring of hypothesis RTTM directories against references.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use farfield_core::metrics::{compute_der, speaker_count_accuracy};
use farfield_core::Segmentation;

use crate::error::{Error, Result};
use crate::pipeline::SessionScore;
use crate::rttm::read_rttm;

/// Scores per dataset, each a map from session to its score.
pub type DatasetScores = Vec<(String, BTreeMap<String, SessionScore>)>;

fn rttm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "rttm") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn load_all(dir: &Path) -> Result<BTreeMap<String, Segmentation>> {
    let mut all = BTreeMap::new();
    for f in rttm_files(dir)? {
        for (id, seg) in read_rttm(&f)? {
            if all.insert(id.clone(), seg).is_some() {
                return Err(Error::data(&f, format!("session {id} appears in more than one file")));
            }
        }
    }
    Ok(all)
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn score_pair(reference: &BTreeMap<String, Segmentation>, hyp: &BTreeMap<String, Segmentation>, collar: f64, hyp_dir: &Path) -> Result<BTreeMap<String, SessionScore>> {
    let mut out = BTreeMap::new();
    for (id, r) in reference {
        let empty = Segmentation::empty(id.clone());
        let h = hyp.get(id).unwrap_or_else(|| {
            log::warn!("{}: no hypothesis for session {id}, scored as empty", hyp_dir.display());
            &empty
        });
        let der = compute_der(r, h, collar).map_err(|e| Error::data(hyp_dir, format!("{id}: {e}")))?;
        out.insert(
            id.clone(),
            SessionScore {
                der,
                ref_speakers: r.num_speakers(),
                hyp_speakers: h.num_speakers(),
                mean_si_sdr: None,
            },
        );
    }
    Ok(out)
}

/// Scores `hyp_dir` against `ref_dir`. Subdirectories of `ref_dir` are
/// datasets matched by name in `hyp_dir`; without subdirectories the whole
/// directory is one dataset.
pub fn score_dirs(ref_dir: &Path, hyp_dir: &Path, collar: f64) -> Result<DatasetScores> {
    let sets = subdirs(ref_dir)?;
    if sets.is_empty() {
        let name = ref_dir.file_name().map_or("all".into(), |n| n.to_string_lossy().into_owned());
        let r = load_all(ref_dir)?;
        if r.is_empty() {
            return Err(Error::data(ref_dir, "no reference RTTM files"));
        }
        return Ok(vec![(name, score_pair(&r, &load_all(hyp_dir)?, collar, hyp_dir)?)]);
    }
    let mut out = Vec::new();
    for s in sets {
        let name = s.file_name().unwrap().to_string_lossy().into_owned();
        let h = hyp_dir.join(&name);
        let hyp = if h.is_dir() {
            load_all(&h)?
        } else {
            log::warn!("{}: missing dataset directory", h.display());
            BTreeMap::new()
        };
        out.push((name, score_pair(&load_all(&s)?, &hyp, collar, &h)?));
    }
    Ok(out)
}

/// Pooled DER over a dataset and its speaker-count accuracy.
pub fn dataset_summary(scores: &BTreeMap<String, SessionScore>) -> (f64, f64) {
    let (err, total) = scores.values().fold((0.0, 0.0), |(e, t), s| {
        (e + s.der.missed + s.der.false_alarm + s.der.confusion, t + s.der.total_ref)
    });
    let der = if total > 0.0 { err / total } else { 0.0 };
    let pairs: Vec<(usize, usize)> = scores.values().map(|s| (s.ref_speakers, s.hyp_speakers)).collect();
    (der, speaker_count_accuracy(&pairs).unwrap_or(0.0))
}

/// Per-session rows followed by a summary with one column per dataset
/// and their average.
pub fn format_table(scores: &[(String, BTreeMap<String, SessionScore>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<16} {:>8} {:>8} {:>8} {:>8} {:>4} {:>4} {:>8}",
        "dataset", "session", "DER%", "miss%", "fa%", "conf%", "ref", "hyp", "SI-SDR"
    );
    for (name, sessions) in scores {
        for (id, s) in sessions {
            let pct = |x: f64| if s.der.total_ref > 0.0 { 100.0 * x / s.der.total_ref } else { 0.0 };
            let _ = writeln!(
                out,
                "{:<12} {:<16} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>4} {:>4} {:>8}",
                name,
                id,
                100.0 * s.der.der,
                pct(s.der.missed),
                pct(s.der.false_alarm),
                pct(s.der.confusion),
                s.ref_speakers,
                s.hyp_speakers,
                s.mean_si_sdr.map_or("-".to_string(), |v| format!("{v:.2}"))
            );
        }
    }
    let summaries: Vec<(f64, f64)> = scores.iter().map(|(_, s)| dataset_summary(s)).collect();
    let n = summaries.len().max(1) as f64;
    let avg = (
        summaries.iter().map(|s| s.0).sum::<f64>() / n,
        summaries.iter().map(|s| s.1).sum::<f64>() / n,
    );
    out.push('\n');
    let _ = write!(out, "{:<12}", "");
    for (name, _) in scores {
        let _ = write!(out, " {name:>12}");
    }
    let _ = writeln!(out, " {:>12}", "AVG");
    let _ = write!(out, "{:<12}", "DER%");
    for s in &summaries {
        let _ = write!(out, " {:>12.2}", 100.0 * s.0);
    }
    let _ = writeln!(out, " {:>12.2}", 100.0 * avg.0);
    let _ = write!(out, "{:<12}", "count acc");
    for s in &summaries {
        let _ = write!(out, " {:>12.3}", s.1);
    }
    let _ = writeln!(out, " {:>12.3}", avg.1);
    out
}
