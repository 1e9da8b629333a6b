use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AssetDescriptor, AssetKind};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry corrupt at line {line}: {reason}")]
    RegistryCorrupt { line: usize, reason: String },
    #[error("registry io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Line {
    #[serde(flatten)]
    descriptor: AssetDescriptor,
    line_crc: String,
}

fn line_crc(d: &AssetDescriptor) -> String {
    let canonical = serde_json::to_string(d).expect("descriptor serializes");
    format!("{:08x}", crc32fast::hash(canonical.as_bytes()))
}

/// Append-only JSON-lines store of asset descriptors, one checksummed entry
/// per line; a later line for the same `(kind, name)` supersedes earlier
/// ones.
#[derive(Debug, Default)]
pub struct Registry {
    path: Option<PathBuf>,
    entries: RwLock<BTreeMap<(AssetKind, String), AssetDescriptor>>,
    writer: Mutex<()>,
}

impl Registry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create on first write) a registry file.
    pub fn open(path: &Path) -> Result<Self, RegistryError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let text = std::fs::read(path)?;
            let text = String::from_utf8(text).map_err(|e| RegistryError::RegistryCorrupt {
                line: 0,
                reason: e.to_string(),
            })?;
            for (i, raw) in text.lines().enumerate() {
                if raw.trim().is_empty() {
                    continue;
                }
                let corrupt = |reason: String| RegistryError::RegistryCorrupt { line: i + 1, reason };
                let line: Line = serde_json::from_str(raw).map_err(|e| corrupt(e.to_string()))?;
                let expected = line_crc(&line.descriptor);
                if line.line_crc != expected {
                    return Err(corrupt(format!("line_crc {} != {expected}", line.line_crc)));
                }
                let d = line.descriptor;
                entries.insert((d.kind, d.name.clone()), d);
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn lookup(&self, name: &str, kind: AssetKind) -> Option<AssetDescriptor> {
        self.entries.read().unwrap().get(&(kind, name.to_string())).cloned()
    }

    /// Node pack named `type_name`, or the first pack (by name) that lists it
    /// in `provides`.
    pub fn lookup_node_type(&self, type_name: &str) -> Option<AssetDescriptor> {
        if let Some(d) = self.lookup(type_name, AssetKind::NodePack) {
            return Some(d);
        }
        self.entries
            .read()
            .unwrap()
            .values()
            .find(|d| d.kind == AssetKind::NodePack && d.provides.iter().any(|p| p == type_name))
            .cloned()
    }

    /// Append a descriptor. Re-recording an identical descriptor is a no-op.
    pub fn record(&self, descriptor: AssetDescriptor) -> Result<(), RegistryError> {
        let _guard = self.writer.lock().unwrap();
        let key = (descriptor.kind, descriptor.name.clone());
        if self.entries.read().unwrap().get(&key) == Some(&descriptor) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let line = Line {
                line_crc: line_crc(&descriptor),
                descriptor: descriptor.clone(),
            };
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&line).expect("line serializes"))?;
            file.sync_data()?;
        }
        self.entries.write().unwrap().insert(key, descriptor);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> Vec<AssetDescriptor> {
        self.entries.read().unwrap().values().cloned().collect()
    }
}
