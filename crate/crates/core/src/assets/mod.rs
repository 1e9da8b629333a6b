//! Installable assets (node packs and model checkpoints): the local registry
//! of install metadata, dependency extraction from workflows, fetching,
//! atomic installation into the managed root, and the timed
//! local-versus-remote resolution harness.
//!
//! The managed root mirrors the layout the runtime expects:
//! `models/checkpoints/<file>` for checkpoints and
//! `custom_nodes/<pack>/nodes.json` for node packs.

mod deps;
mod fetch;
mod install;
mod registry;
mod resolve;

use std::fmt;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deps::{extract_dependencies, is_model_reference, DependencyReport, MODEL_EXTENSIONS};
pub use fetch::{FetchError, Fetcher, HttpFetcher, RemoteDirectory, SimulatedFetcher};
pub use install::{install, AssetSource, AssetStatus, BlobCache, FetcherSource, InstallError, InstallOutcome, InstallResult};
pub use registry::{Registry, RegistryError};
pub use resolve::{
    timed_resolve_and_install, LocalDatabase, Mode, Operation, ResolveEnv, ResolveError, ResolveOutcome, WorkflowStore,
    TimingSample, TimingTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    NodePack,
    Model,
}

impl AssetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssetKind::NodePack => "node_pack",
            AssetKind::Model => "model",
        }
    }

    /// Top-level directory assets of this kind must live under.
    pub fn root_dir(&self) -> &'static str {
        match self {
            AssetKind::NodePack => "custom_nodes",
            AssetKind::Model => "models",
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid save path {path:?}: {reason}")]
pub struct PathEscape {
    pub path: String,
    pub reason: String,
}

/// Install metadata for one asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetDescriptor {
    pub name: String,
    pub kind: AssetKind,
    pub url: String,
    /// Relative to the managed root.
    pub save_path: String,
    pub size_bytes: u64,
    /// Lowercase hex SHA-256 of the asset bytes.
    pub checksum: String,
    /// Node types a pack provides; empty for models.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provides: Vec<String>,
}

impl AssetDescriptor {
    /// Check the save path: relative, no `..`, and under the directory
    /// required for the asset kind.
    pub fn checked_save_path(&self) -> Result<PathBuf, PathEscape> {
        let escape = |reason: &str| PathEscape {
            path: self.save_path.clone(),
            reason: reason.into(),
        };
        let path = Path::new(&self.save_path);
        if self.save_path.is_empty() || self.save_path.contains('\\') || self.save_path.contains('\0') {
            return Err(escape("empty or contains forbidden characters"));
        }
        let mut parts = Vec::new();
        for c in path.components() {
            match c {
                Component::Normal(p) => parts.push(p),
                Component::CurDir => {}
                _ => return Err(escape("must be relative without parent traversal")),
            }
        }
        if parts.len() < 2 || parts[0] != self.kind.root_dir() {
            return Err(escape(&format!("{} assets must live under {}/", self.kind, self.kind.root_dir())));
        }
        Ok(parts.iter().collect())
    }

    pub fn file_name(&self) -> Option<&str> {
        Path::new(&self.save_path).file_name().and_then(|n| n.to_str())
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Locate an installed model file by name: `models/checkpoints/<name>` first,
/// then anywhere under `models/`.
pub fn find_model(root: &Path, name: &str) -> Option<PathBuf> {
    let file = Path::new(name).file_name()?;
    let direct = root.join("models/checkpoints").join(file);
    if direct.is_file() {
        return Some(direct);
    }
    walkdir::WalkDir::new(root.join("models"))
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .find(|e| e.file_type().is_file() && e.file_name() == file)
        .map(|e| e.into_path())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(kind: AssetKind, save_path: &str) -> AssetDescriptor {
        AssetDescriptor {
            name: "x".into(),
            kind,
            url: "sim://x".into(),
            save_path: save_path.into(),
            size_bytes: 0,
            checksum: String::new(),
            provides: vec![],
        }
    }

    #[test]
    fn save_path_rules() {
        use AssetKind::*;
        assert!(desc(Model, "models/checkpoints/a.safetensors").checked_save_path().is_ok());
        assert!(desc(NodePack, "custom_nodes/pack/nodes.json").checked_save_path().is_ok());
        assert!(desc(Model, "./models/a.ckpt").checked_save_path().is_ok());
        for bad in [
            "",
            "/etc/passwd",
            "models/../../x",
            "models",
            "custom_nodes/p/nodes.json",
            "models\\..\\x",
            "../models/a.ckpt",
        ] {
            assert!(desc(Model, bad).checked_save_path().is_err(), "{bad}");
        }
        assert!(desc(NodePack, "models/a.ckpt").checked_save_path().is_err());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn finds_models_anywhere_under_models() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("models/loras")).unwrap();
        std::fs::write(dir.path().join("models/loras/x.safetensors"), b"1").unwrap();
        assert!(find_model(dir.path(), "x.safetensors").is_some());
        assert!(find_model(dir.path(), "y.safetensors").is_none());
    }
}
