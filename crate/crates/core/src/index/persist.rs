//! Single-file index persistence.
//!
//! ```text
//! header : "GFIX" | version u32 | dimension u32 | count u32
//! record : id | clean_text | likes u64 | source | name | description | D x f32
//! ```
//! Strings are a u32 byte length followed by UTF-8. All integers and reals
//! are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{VectorIndex, WorkflowRecord};
use crate::embedding::EmbeddingVector;
use crate::scalar::Real;

pub const INDEX_MAGIC: &[u8; 4] = b"GFIX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexFileError {
    #[error("index io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error("index dimension {found} does not match configured dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

fn corrupt(msg: impl Into<String>) -> IndexFileError {
    IndexFileError::Corrupt(msg.into())
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IndexFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, IndexFileError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, IndexFileError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| corrupt(e.to_string()))
    }
}

impl<T: Real> VectorIndex<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let records = self.records.read().unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for r in records.values() {
            put_str(&mut out, &r.id);
            put_str(&mut out, &r.clean_text);
            out.extend_from_slice(&r.likes.to_le_bytes());
            put_str(&mut out, &r.source);
            put_str(&mut out, &r.name);
            put_str(&mut out, &r.description);
            for v in r.embedding.values() {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        out
    }

    /// Decode an index. Stored vectors are re-normalized in `T`, so a record
    /// compared with itself scores 1 to full `T` precision.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexFileError> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(4)? != INDEX_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = c.u32()?;
        if version != INDEX_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let dimension = c.u32()? as usize;
        if dimension == 0 {
            return Err(corrupt("zero dimension"));
        }
        let count = c.u32()?;
        let index = Self::new(dimension);
        for _ in 0..count {
            let id = c.string()?;
            let clean_text = c.string()?;
            let likes = c.u64()?;
            let source = c.string()?;
            let name = c.string()?;
            let description = c.string()?;
            let raw = (0..dimension)
                .map(|_| c.f32().map(|v| T::of(v as f64)))
                .collect::<Result<Vec<_>, _>>()?;
            let embedding = EmbeddingVector::normalize(raw).map_err(|e| corrupt(e.to_string()))?;
            index
                .upsert(WorkflowRecord {
                    id,
                    clean_text,
                    embedding,
                    likes,
                    source,
                    name,
                    description,
                })
                .expect("dimension read from the header");
        }
        if c.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        if index.len() != count as usize {
            return Err(corrupt("duplicate record ids"));
        }
        Ok(index)
    }

    /// Write atomically: temp file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> Result<(), IndexFileError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&self.to_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| IndexFileError::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexFileError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Load `path` if it exists, otherwise start empty. The stored dimension
    /// must agree with `dimension`.
    pub fn open_or_new(path: &Path, dimension: usize) -> Result<Self, IndexFileError> {
        if !path.exists() {
            return Ok(Self::new(dimension));
        }
        let index = Self::load(path)?;
        if index.dimension != dimension {
            return Err(IndexFileError::DimensionMismatch {
                expected: dimension,
                found: index.dimension,
            });
        }
        Ok(index)
    }
}
