//! Little-endian binary files for embeddings (`EMB1`) and soft activities
//! (`ACT1`).

use std::path::Path;

use farfield_core::diarize::{EmbeddingEntry, EmbeddingSet};
use farfield_core::fusion::SoftActivity;

use crate::error::{Error, Result};
use crate::store::{atomic_write, read_bytes};

const EMB_MAGIC: &[u8; 4] = b"EMB1";
const ACT_MAGIC: &[u8; 4] = b"ACT1";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        self.pos = end;
        Ok(slice.try_into().unwrap())
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f32(&mut self) -> std::result::Result<f32, String> {
        self.take::<4>().map(f32::from_le_bytes)
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    fn finished(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_embeddings(bytes: &[u8], source_tag: &str) -> std::result::Result<EmbeddingSet, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if &c.take::<4>()? != EMB_MAGIC {
        return Err("not an EMB1 file".into());
    }
    let dim = c.u32()? as usize;
    let count = c.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let start = c.f64()?;
        let end = c.f64()?;
        let n = c.u32()? as usize;
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..dim)
                .map(|_| c.f32().map(f64::from))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            vectors.push(v);
        }
        entries.push(EmbeddingEntry::new(start, end, vectors));
    }
    if !c.finished() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    EmbeddingSet::new(dim, entries, source_tag).map_err(|e| e.to_string())
}

pub fn encode_embeddings(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    out.extend_from_slice(&(set.entries.len() as u32).to_le_bytes());
    for e in &set.entries {
        out.extend_from_slice(&e.start.to_le_bytes());
        out.extend_from_slice(&e.end.to_le_bytes());
        out.extend_from_slice(&(e.vectors.len() as u32).to_le_bytes());
        for v in &e.vectors {
            for x in v {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn read_embeddings(path: &Path, source_tag: &str) -> Result<EmbeddingSet> {
    decode_embeddings(&read_bytes(path)?, source_tag).map_err(|m| Error::data(path, m))
}

pub fn write_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    atomic_write(path, &encode_embeddings(set))
}

/// Rows are labelled by index; callers attach speaker names.
pub fn decode_activity(bytes: &[u8], session_id: &str) -> std::result::Result<SoftActivity, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if &c.take::<4>()? != ACT_MAGIC {
        return Err("not an ACT1 file".into());
    }
    let speakers = c.u32()? as usize;
    let frames = c.u32()? as usize;
    let step = c.f64()?;
    let mut probs = Vec::with_capacity(speakers);
    for _ in 0..speakers {
        let row = (0..frames)
            .map(|_| c.f32().map(f64::from))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        probs.push(row);
    }
    if !c.finished() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    SoftActivity::new(session_id, probs, step).map_err(|e| e.to_string())
}

pub fn encode_activity(a: &SoftActivity) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(ACT_MAGIC);
    out.extend_from_slice(&(a.num_speakers() as u32).to_le_bytes());
    out.extend_from_slice(&(a.frames() as u32).to_le_bytes());
    out.extend_from_slice(&a.frame_step.to_le_bytes());
    for row in &a.probs {
        for p in row {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_activity(path: &Path, session_id: &str) -> Result<SoftActivity> {
    decode_activity(&read_bytes(path)?, session_id).map_err(|m| Error::data(path, m))
}

pub fn write_activity(path: &Path, a: &SoftActivity) -> Result<()> {
    atomic_write(path, &encode_activity(a))
}

/// Binary per-speaker frame mask stored as an `ACT1` file; values of at
/// least 0.5 are on.
pub fn read_vad_mask(path: &Path) -> Result<Vec<Vec<bool>>> {
    let a = read_activity(path, "")?;
    Ok(a.probs
        .iter()
        .map(|row| row.iter().map(|&p| p >= 0.5).collect())
        .collect())
}
