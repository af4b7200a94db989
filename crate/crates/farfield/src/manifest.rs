//! Session manifests: which files make up each session.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRef {
    /// Index into the session's channel list.
    pub channel: usize,
    pub source: String,
    pub variant: String,
    pub path: PathBuf,
    /// Second extractor's embeddings for the same entries, concatenated
    /// with the first.
    #[serde(default)]
    pub path_b: Option<PathBuf>,
    /// Whitespace-separated cluster ids an external classifier marked as
    /// non-speech; their frames are dropped.
    #[serde(default)]
    pub non_speech: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityRef {
    pub channel: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub speaker: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub id: String,
    /// One or more WAV files whose channels are stacked in order.
    pub wavs: Vec<PathBuf>,
    #[serde(default)]
    pub sample_rate: Option<u32>,
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Vec<EmbeddingRef>,
    /// Soft activities from external neural diarization, per channel.
    #[serde(default)]
    pub activities: Vec<ActivityRef>,
    /// Clean per-speaker references for separation scoring.
    #[serde(default)]
    pub sources: Vec<SourceRef>,
    /// Per-speaker binary frame mask applied to the separation priors.
    #[serde(default)]
    pub vad_mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, rename = "session")]
    pub sessions: Vec<SessionManifest>,
}

impl Manifest {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut m: Self = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.resolve(base);
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&read_text(path)?, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sessions {
            s.wavs.iter_mut().for_each(fix);
            s.reference.iter_mut().for_each(fix);
            s.vad_mask.iter_mut().for_each(fix);
            for e in &mut s.embeddings {
                fix(&mut e.path);
                e.path_b.iter_mut().for_each(fix);
                e.non_speech.iter_mut().for_each(fix);
            }
            s.activities.iter_mut().for_each(|a| fix(&mut a.path));
            s.sources.iter_mut().for_each(|a| fix(&mut a.path));
        }
    }

    fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.sessions.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("session {} listed twice", w[0])));
        }
        for s in &self.sessions {
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return Err(Error::Config(format!("invalid session id {:?}", s.id)));
            }
            if s.wavs.is_empty() {
                return Err(Error::Config(format!("session {} lists no audio", s.id)));
            }
        }
        Ok(())
    }

    /// Checks that every referenced file exists, naming the first missing one.
    pub fn check_files(&self) -> Result<()> {
        for s in &self.sessions {
            let paths = s
                .wavs
                .iter()
                .chain(&s.reference)
                .chain(&s.vad_mask)
                .chain(s.embeddings.iter().flat_map(|e| std::iter::once(&e.path).chain(&e.path_b).chain(&e.non_speech)))
                .chain(s.activities.iter().map(|a| &a.path))
                .chain(s.sources.iter().map(|a| &a.path));
            for p in paths {
                if !p.exists() {
                    return Err(Error::data(p, "file not found"));
                }
            }
        }
        Ok(())
    }
}
