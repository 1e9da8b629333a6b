use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;
use std::time::Duration;

use thiserror::Error;

use super::{AssetDescriptor, AssetKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("{url}: not found")]
    NotFound { url: String },
    #[error("{url}: {cause}")]
    Failed { url: String, cause: String },
}

/// Outbound retrieval of bytes by URL. Implementations count their calls so
/// callers can assert locality.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError>;
    fn calls(&self) -> usize;
}

/// In-memory web: URL routes to byte blobs, with a fixed per-request delay.
#[derive(Debug, Default)]
pub struct SimulatedFetcher {
    routes: RwLock<HashMap<String, Vec<u8>>>,
    latency: Duration,
    calls: AtomicUsize,
}

impl SimulatedFetcher {
    pub fn new(latency: Duration) -> Self {
        Self {
            latency,
            ..Self::default()
        }
    }

    pub fn latency(&self) -> Duration {
        self.latency
    }

    pub fn publish(&self, url: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.routes.write().unwrap().insert(url.into(), bytes.into());
    }

    /// Publish an asset's bytes at its URL and its metadata at the
    /// directory's lookup URLs (by name, and by each provided node type).
    pub fn publish_asset(&self, dir: &RemoteDirectory, descriptor: &AssetDescriptor, bytes: impl Into<Vec<u8>>) {
        let meta = serde_json::to_vec(descriptor).expect("descriptor serializes");
        self.publish(dir.asset_url(descriptor.kind, &descriptor.name), meta.clone());
        for t in &descriptor.provides {
            self.publish(dir.node_type_url(t), meta.clone());
        }
        self.publish(descriptor.url.clone(), bytes);
    }

    pub fn publish_workflow(&self, dir: &RemoteDirectory, id: &str, document: impl Into<Vec<u8>>) {
        self.publish(dir.workflow_url(id), document);
    }
}

impl Fetcher for SimulatedFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        self.routes
            .read()
            .unwrap()
            .get(url)
            .cloned()
            .ok_or_else(|| FetchError::NotFound { url: url.to_string() })
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Plain HTTP GET.
#[derive(Debug)]
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    calls: AtomicUsize,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| FetchError::Failed {
                url: String::new(),
                cause: e.to_string(),
            })?;
        Ok(Self {
            client,
            calls: AtomicUsize::new(0),
        })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let failed = |cause: String| FetchError::Failed {
            url: url.to_string(),
            cause,
        };
        let resp = self.client.get(url).send().map_err(|e| failed(e.to_string()))?;
        if resp.status() == reqwest::StatusCode::NOT_FOUND {
            return Err(FetchError::NotFound { url: url.to_string() });
        }
        if !resp.status().is_success() {
            return Err(failed(format!("HTTP {}", resp.status())));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| failed(e.to_string()))
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// URL layout of the remote metadata service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteDirectory {
    base: String,
}

impl RemoteDirectory {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
        }
    }

    pub fn simulated() -> Self {
        Self::new("sim://remote")
    }

    pub fn workflow_url(&self, id: &str) -> String {
        format!("{}/workflows/{id}", self.base)
    }

    pub fn asset_url(&self, kind: AssetKind, name: &str) -> String {
        format!("{}/registry/{kind}/{name}", self.base)
    }

    pub fn node_type_url(&self, type_name: &str) -> String {
        format!("{}/registry/node_type/{type_name}", self.base)
    }
}

impl Default for RemoteDirectory {
    fn default() -> Self {
        Self::simulated()
    }
}
