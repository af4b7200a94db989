//! Run directory layout, atomic artifact writes and content-hash caching.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const KEY_FILE: &str = ".cache-key";

/// Writes `path` through a temporary file in the same directory followed by
/// a rename, so readers never observe a partial artifact.
pub fn atomic_write_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut fs::File) -> std::io::Result<()>,
{
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    write(tmp.as_file_mut()).map_err(|e| Error::io(path, e))?;
    tmp.as_file_mut().flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write_with(path, |f| f.write_all(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Incremental SHA-256 over labelled fields and file contents.
#[derive(Clone, Default)]
pub struct Hasher(Sha256);

impl Hasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, name: &str, value: &[u8]) -> Self {
        self.0.update((name.len() as u64).to_le_bytes());
        self.0.update(name.as_bytes());
        self.0.update((value.len() as u64).to_le_bytes());
        self.0.update(value);
        self
    }

    pub fn text(self, name: &str, value: &str) -> Self {
        self.field(name, value.as_bytes())
    }

    pub fn file(self, path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        Ok(self.field(&path.to_string_lossy(), &bytes))
    }

    pub fn hex(self) -> String {
        self.0
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A run directory: `<root>/<stage>/<session>/...`.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: &str, session: &str) -> PathBuf {
        self.root.join(stage).join(session)
    }

    /// True when the stage directory was produced under the same key and all
    /// `outputs` are still present.
    pub fn is_fresh(&self, stage: &str, session: &str, key: &str, outputs: &[PathBuf]) -> bool {
        let dir = self.stage_dir(stage, session);
        match fs::read_to_string(dir.join(KEY_FILE)) {
            Ok(k) if k.trim() == key => outputs.iter().all(|p| p.exists()),
            _ => false,
        }
    }

    /// Records the key after all outputs of a stage were written.
    pub fn mark_done(&self, stage: &str, session: &str, key: &str) -> Result<()> {
        atomic_write(&self.stage_dir(stage, session).join(KEY_FILE), key.as_bytes())
    }

    /// Clears a stale key before recomputing so an interrupted run is never
    /// mistaken for a complete one.
    pub fn invalidate(&self, stage: &str, session: &str) -> Result<()> {
        let path = self.stage_dir(stage, session).join(KEY_FILE);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}
