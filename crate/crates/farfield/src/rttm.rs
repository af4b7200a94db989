//! RTTM reading and writing (`SPEAKER` lines only).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use farfield_core::{Segmentation, Turn};

use crate::error::{Error, Result};
use crate::store::{atomic_write, read_text};

/// Parses RTTM text into one segmentation per file id. Non-`SPEAKER` lines
/// are ignored.
pub fn parse_rttm(text: &str) -> std::result::Result<BTreeMap<String, Segmentation>, String> {
    let mut turns: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() != Some(&"SPEAKER") {
            continue;
        }
        if fields.len() < 8 {
            return Err(format!("line {}: expected at least 8 fields", n + 1));
        }
        let num = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|_| format!("line {}: bad number {:?}", n + 1, fields[i]))
        };
        let (start, dur) = (num(3)?, num(4)?);
        if !(start >= 0.0) || !(dur >= 0.0) {
            return Err(format!("line {}: negative time", n + 1));
        }
        let entry = turns.entry(fields[1].to_string()).or_default();
        if dur > 0.0 {
            entry.push(Turn::new(fields[7], start, start + dur));
        }
    }
    turns
        .into_iter()
        .map(|(id, t)| {
            Segmentation::new(id.clone(), t)
                .map(|s| (id, s))
                .map_err(|e| e.to_string())
        })
        .collect()
}

pub fn read_rttm(path: &Path) -> Result<BTreeMap<String, Segmentation>> {
    parse_rttm(&read_text(path)?).map_err(|m| Error::data(path, m))
}

/// The segmentation of one session; a file without lines for it yields an
/// empty segmentation.
pub fn read_session_rttm(path: &Path, session: &str) -> Result<Segmentation> {
    let mut all = read_rttm(path)?;
    Ok(all.remove(session).unwrap_or_else(|| Segmentation::empty(session)))
}

/// Millisecond-resolution RTTM, turns sorted by start then speaker.
pub fn format_rttm(seg: &Segmentation) -> String {
    let mut turns = seg.turns.clone();
    turns.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then_with(|| a.speaker.cmp(&b.speaker))
            .then_with(|| a.end.total_cmp(&b.end))
    });
    let mut out = String::new();
    for t in turns {
        let start = (t.start * 1000.0).round() / 1000.0;
        let dur = (t.end * 1000.0).round() / 1000.0 - start;
        if dur <= 0.0 {
            continue;
        }
        let _ = writeln!(
            out,
            "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            seg.session_id, start, dur, t.speaker
        );
    }
    out
}

pub fn write_rttm(path: &Path, seg: &Segmentation) -> Result<()> {
    atomic_write(path, format_rttm(seg).as_bytes())
}
