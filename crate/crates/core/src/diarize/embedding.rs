use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::{invalid, mismatch};
use crate::{Error, Result};

/// Embeddings extracted from one time segment. Several vectors mean the
/// extractor saw possibly mixed speech.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingEntry {
    pub start: f64,
    pub end: f64,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingEntry {
    pub fn new(start: f64, end: f64, vectors: Vec<Vec<f64>>) -> Self {
        Self {
            start,
            end,
            vectors,
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub entries: Vec<EmbeddingEntry>,
    pub source_tag: String,
}

impl EmbeddingSet {
    pub fn new(
        dim: usize,
        entries: Vec<EmbeddingEntry>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        let set = Self {
            dim,
            entries,
            source_tag: source_tag.into(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.start < e.end) {
                return Err(invalid!("entry {i}: start {} >= end {}", e.start, e.end));
            }
            if e.start < prev {
                return Err(invalid!("entry {i} is out of time order"));
            }
            prev = e.start;
            if e.vectors.is_empty() {
                return Err(invalid!("entry {i} has no vectors"));
            }
            if let Some(v) = e.vectors.iter().find(|v| v.len() != self.dim) {
                return Err(mismatch!(
                    "entry {i} has a vector of dim {} (expected {})",
                    v.len(),
                    self.dim
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every vector in entry order, flattened.
    pub fn all_vectors(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .flat_map(|e| e.vectors.iter().cloned())
            .collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    if n > 0.0 && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Result of [`select_single_speaker_frames`]. The index lists map entries
/// back to their positions in the input set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSplit {
    pub single: EmbeddingSet,
    pub mixed: EmbeddingSet,
    pub single_index: Vec<usize>,
    pub mixed_index: Vec<usize>,
}

/// Splits entries into single-speaker and mixed ones.
///
/// An entry is single-speaker when every pair of its vectors has cosine
/// similarity above `threshold`; it then contributes its renormalized mean.
/// Mixed entries are passed through unchanged.
pub fn select_single_speaker_frames(emb: &EmbeddingSet, threshold: f64) -> FrameSplit {
    let mut single = Vec::new();
    let mut mixed = Vec::new();
    let mut single_idx = Vec::new();
    let mut mixed_idx = Vec::new();
    for (i, e) in emb.entries.iter().enumerate() {
        let n = e.vectors.len();
        let agree =
            (0..n).all(|a| (a + 1..n).all(|b| cosine(&e.vectors[a], &e.vectors[b]) > threshold));
        if agree {
            let mut mean = alloc::vec![0.0; emb.dim];
            for v in &e.vectors {
                let unit = normalized(v).unwrap_or_else(|| v.clone());
                for (m, x) in mean.iter_mut().zip(unit) {
                    *m += x;
                }
            }
            let mean = normalized(&mean).unwrap_or(mean);
            single.push(EmbeddingEntry::new(e.start, e.end, alloc::vec![mean]));
            single_idx.push(i);
        } else {
            mixed.push(e.clone());
            mixed_idx.push(i);
        }
    }
    let tag = emb.source_tag.clone();
    FrameSplit {
        single: EmbeddingSet {
            dim: emb.dim,
            entries: single,
            source_tag: tag.clone(),
        },
        mixed: EmbeddingSet {
            dim: emb.dim,
            entries: mixed,
            source_tag: tag,
        },
        single_index: single_idx,
        mixed_index: mixed_idx,
    }
}

/// Concatenates two embedding types entry by entry and scales each result
/// to unit length. Entries must share the timeline; an entry holding a single
/// vector on one side is paired with every vector of the other side.
pub fn concat_normalize(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<EmbeddingSet> {
    if a.entries.len() != b.entries.len() {
        return Err(mismatch!(
            "{} vs {} entries",
            a.entries.len(),
            b.entries.len()
        ));
    }
    let dim = a.dim + b.dim;
    let mut entries = Vec::with_capacity(a.entries.len());
    for (i, (ea, eb)) in a.entries.iter().zip(&b.entries).enumerate() {
        if (ea.start - eb.start).abs() > 1e-6 || (ea.end - eb.end).abs() > 1e-6 {
            return Err(mismatch!("entry {i} timelines differ"));
        }
        let (na, nb) = (ea.vectors.len(), eb.vectors.len());
        let pairs = if na == nb {
            na
        } else if na == 1 || nb == 1 {
            na.max(nb)
        } else {
            return Err(mismatch!("entry {i} has {na} and {nb} vectors"));
        };
        let mut vectors = Vec::with_capacity(pairs);
        for k in 0..pairs {
            let va = &ea.vectors[if na == 1 { 0 } else { k }];
            let vb = &eb.vectors[if nb == 1 { 0 } else { k }];
            let mut v = va.clone();
            v.extend_from_slice(vb);
            vectors
                .push(normalized(&v).ok_or(Error::Undefined("zero-norm concatenated embedding"))?);
        }
        entries.push(EmbeddingEntry::new(ea.start, ea.end, vectors));
    }
    Ok(EmbeddingSet {
        dim,
        entries,
        source_tag: alloc::format!("{}+{}", a.source_tag, b.source_tag),
    })
}
