use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::resolve::{LocalDatabase, Mode, Operation, TimingSample};
use super::{sha256_hex, AssetDescriptor, AssetKind, FetchError, Fetcher, PathEscape};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstallError {
    #[error(transparent)]
    PathEscape(#[from] PathEscape),
    #[error("{name}: checksum mismatch (expected {expected}, got {actual})")]
    ChecksumMismatch { name: String, expected: String, actual: String },
    #[error("{name}: fetch failed: {cause}")]
    FetchFailure { name: String, cause: String },
    #[error("{name}: io error: {cause}")]
    Io { name: String, cause: String },
}

/// Where asset bytes come from during installation.
pub trait AssetSource: Send + Sync {
    fn bytes(&self, descriptor: &AssetDescriptor) -> Result<Vec<u8>, InstallError>;
    fn mode(&self) -> Mode;
}

/// Fetches each asset from its descriptor URL.
pub struct FetcherSource<'a>(pub &'a dyn Fetcher);

impl AssetSource for FetcherSource<'_> {
    fn bytes(&self, d: &AssetDescriptor) -> Result<Vec<u8>, InstallError> {
        self.0.fetch(&d.url).map_err(|e: FetchError| InstallError::FetchFailure {
            name: d.name.clone(),
            cause: e.to_string(),
        })
    }

    fn mode(&self) -> Mode {
        Mode::Remote
    }
}

/// Content-addressed store of asset bytes, keyed by SHA-256.
#[derive(Debug, Clone)]
pub struct BlobCache {
    dir: PathBuf,
}

impl BlobCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, checksum: &str) -> Option<PathBuf> {
        let valid = checksum.len() == 64 && checksum.bytes().all(|b| b.is_ascii_hexdigit());
        valid.then(|| self.dir.join(checksum.to_ascii_lowercase()))
    }

    pub fn contains(&self, checksum: &str) -> bool {
        self.path(checksum).is_some_and(|p| p.is_file())
    }

    pub fn get(&self, checksum: &str) -> Option<Vec<u8>> {
        std::fs::read(self.path(checksum)?).ok()
    }

    /// Store `bytes` and return their checksum.
    pub fn put(&self, bytes: &[u8]) -> std::io::Result<String> {
        let checksum = sha256_hex(bytes);
        let path = self.dir.join(&checksum);
        if !path.is_file() {
            write_atomic(&path, bytes)?;
        }
        Ok(checksum)
    }
}

impl AssetSource for BlobCache {
    fn bytes(&self, d: &AssetDescriptor) -> Result<Vec<u8>, InstallError> {
        self.get(&d.checksum).ok_or_else(|| InstallError::FetchFailure {
            name: d.name.clone(),
            cause: "not in local blob cache".into(),
        })
    }

    fn mode(&self) -> Mode {
        Mode::Local
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

static DEST_LOCKS: LazyLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = LazyLock::new(Default::default);

fn dest_lock(path: &Path) -> Arc<Mutex<()>> {
    DEST_LOCKS.lock().unwrap().entry(path.to_path_buf()).or_default().clone()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstallOutcome {
    Installed(PathBuf),
    AlreadyPresent(PathBuf),
}

#[derive(Debug, Clone)]
pub struct AssetStatus {
    pub name: String,
    pub kind: AssetKind,
    pub outcome: Result<InstallOutcome, InstallError>,
}

#[derive(Debug, Clone, Default)]
pub struct InstallResult {
    pub statuses: Vec<AssetStatus>,
    pub samples: Vec<TimingSample>,
}

impl InstallResult {
    pub fn all_ok(&self) -> bool {
        self.statuses.iter().all(|s| s.outcome.is_ok())
    }
}

fn install_one(
    d: &AssetDescriptor,
    source: &dyn AssetSource,
    root: &Path,
    db: Option<&LocalDatabase>,
) -> Result<InstallOutcome, InstallError> {
    let dest = root.join(d.checked_save_path()?);
    let io = |e: std::io::Error| InstallError::Io {
        name: d.name.clone(),
        cause: e.to_string(),
    };
    let lock = dest_lock(&dest);
    let _guard = lock.lock().unwrap();

    let present = dest.is_file() && std::fs::read(&dest).map(|b| sha256_hex(&b) == d.checksum).unwrap_or(false);
    let outcome = if present {
        InstallOutcome::AlreadyPresent(dest)
    } else {
        let bytes = source.bytes(d)?;
        let actual = sha256_hex(&bytes);
        if actual != d.checksum.to_ascii_lowercase() {
            return Err(InstallError::ChecksumMismatch {
                name: d.name.clone(),
                expected: d.checksum.clone(),
                actual,
            });
        }
        write_atomic(&dest, &bytes).map_err(io)?;
        if let Some(db) = db {
            db.blobs.put(&bytes).map_err(io)?;
        }
        InstallOutcome::Installed(dest)
    };
    if let Some(db) = db {
        db.registry.record(d.clone()).map_err(|e| InstallError::Io {
            name: d.name.clone(),
            cause: e.to_string(),
        })?;
    }
    Ok(outcome)
}

/// Install every asset in `plan` under `root`. Bytes are verified against
/// the descriptor checksum before they are moved into place; a failure
/// leaves no partial file at the destination. When `db` is given, installed
/// assets are recorded in its registry and blob cache.
pub fn install(
    plan: &[AssetDescriptor],
    source: &dyn AssetSource,
    root: &Path,
    db: Option<&LocalDatabase>,
) -> InstallResult {
    let mut result = InstallResult::default();
    for d in plan {
        let start = Instant::now();
        let outcome = install_one(d, source, root, db);
        if let Err(e) = &outcome {
            log::warn!("install failed: {e}");
        }
        result.samples.push(TimingSample {
            operation: match d.kind {
                AssetKind::NodePack => Operation::InstallMissingNodes,
                AssetKind::Model => Operation::InstallMissingModels,
            },
            mode: source.mode(),
            duration: start.elapsed(),
        });
        result.statuses.push(AssetStatus {
            name: d.name.clone(),
            kind: d.kind,
            outcome,
        });
    }
    result
}

impl InstallResult {
    pub fn total_time(&self) -> Duration {
        self.samples.iter().map(|s| s.duration).sum()
    }
}
