//! Files produced by runs, kept by id, with an append-only gallery listing.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use genflow_core::assets::sha256_hex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const GALLERY_FILE: &str = "gallery.jsonl";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact store io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt gallery line {line}: {cause}")]
    Corrupt { line: usize, cause: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub id: String,
    pub name: String,
    pub content_type: String,
    pub size: u64,
    pub workflow_id: String,
    pub run_id: String,
    pub node: String,
    pub created_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Content type from a file name's extension.
pub fn content_type_for(name: &str) -> &'static str {
    let ext = Path::new(name).extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "ppm" => "image/x-portable-pixmap",
        "pgm" => "image/x-portable-graymap",
        "png" => "image/png",
        "txt" => "text/plain; charset=utf-8",
        "json" => "application/json",
        _ => "application/octet-stream",
    }
}

pub struct ArtifactStore {
    dir: PathBuf,
    gallery: Mutex<()>,
}

fn valid_id(id: &str) -> bool {
    id.len() == 24 && id.bytes().all(|b| b.is_ascii_hexdigit())
}

impl ArtifactStore {
    pub fn open(dir: &Path) -> Result<Self, ArtifactError> {
        std::fs::create_dir_all(dir.join("blobs"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            gallery: Mutex::new(()),
        })
    }

    /// Store bytes and add a gallery entry. The id is derived from the run,
    /// node, name and content.
    pub fn put(
        &self,
        bytes: &[u8],
        name: &str,
        workflow_id: &str,
        run_id: &str,
        node: &str,
    ) -> Result<ArtifactMeta, ArtifactError> {
        let mut keyed = format!("{run_id}\0{node}\0{name}\0").into_bytes();
        keyed.extend_from_slice(bytes);
        let id = sha256_hex(&keyed)[..24].to_string();
        let meta = ArtifactMeta {
            id: id.clone(),
            name: name.to_string(),
            content_type: content_type_for(name).to_string(),
            size: bytes.len() as u64,
            workflow_id: workflow_id.to_string(),
            run_id: run_id.to_string(),
            node: node.to_string(),
            created_ms: now_ms(),
        };
        let blobs = self.dir.join("blobs");
        let mut tmp = tempfile::NamedTempFile::new_in(&blobs)?;
        tmp.write_all(bytes)?;
        tmp.persist(blobs.join(&id)).map_err(|e| e.error)?;
        let _guard = self.gallery.lock().unwrap_or_else(|e| e.into_inner());
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(GALLERY_FILE))?;
        let mut line = serde_json::to_vec(&meta).expect("meta serializes");
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(meta)
    }

    /// Gallery entries, newest first.
    pub fn gallery(&self) -> Result<Vec<ArtifactMeta>, ArtifactError> {
        let _guard = self.gallery.lock().unwrap_or_else(|e| e.into_inner());
        let text = match std::fs::read_to_string(self.dir.join(GALLERY_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            out.push(serde_json::from_str(line).map_err(|e| ArtifactError::Corrupt {
                line: i + 1,
                cause: e.to_string(),
            })?);
        }
        out.reverse();
        Ok(out)
    }

    pub fn meta(&self, id: &str) -> Result<Option<ArtifactMeta>, ArtifactError> {
        Ok(self.gallery()?.into_iter().find(|m| m.id == id))
    }

    pub fn bytes(&self, id: &str) -> Option<Vec<u8>> {
        if !valid_id(id) {
            return None;
        }
        std::fs::read(self.dir.join("blobs").join(id)).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_and_list() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        assert!(store.gallery().unwrap().is_empty());
        let a = store.put(b"P6 1 1 255\n\0\0\0", "out.ppm", "wf", "r1", "save").unwrap();
        let b = store.put(b"hello", "note.txt", "wf", "r1", "save2").unwrap();
        assert_eq!(a.content_type, "image/x-portable-pixmap");
        assert_eq!(store.bytes(&b.id).unwrap(), b"hello");
        let g = store.gallery().unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].id, b.id);
        assert!(store.bytes("../../etc/passwd").is_none());
    }
}
