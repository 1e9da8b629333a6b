use std::collections::BTreeMap;
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::assets::{sha256_hex, AssetDescriptor, AssetKind};
use crate::merge::DetectedElement;

#[derive(Debug, Error)]
pub enum SiteError {
    #[error("malformed site: {0}")]
    Malformed(String),
    #[error("start page {0:?} does not exist")]
    UnknownStart(String),
    #[error("page {page:?} links {target:?} to missing page {to:?}")]
    DanglingLink { page: String, target: String, to: String },
    #[error("asset {name:?}: {cause}")]
    BadAsset { name: String, cause: String },
    #[error("cannot read site: {0}")]
    Io(#[from] std::io::Error),
}

/// One page of a simulated platform. Elements become interactable through
/// their `target` property, which keys into `links` (page navigation) or
/// `downloads` (a workflow document).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimPage {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub w_elements: Vec<DetectedElement<f64>>,
    #[serde(default)]
    pub o_elements: Vec<DetectedElement<f64>>,
    #[serde(default)]
    pub links: BTreeMap<String, String>,
    /// A JSON object is served as its serialization; a string as its raw
    /// UTF-8 bytes.
    #[serde(default)]
    pub downloads: BTreeMap<String, Value>,
}

impl SimPage {
    pub fn download_bytes(&self, target: &str) -> Option<Vec<u8>> {
        match self.downloads.get(target)? {
            Value::String(s) => Some(s.clone().into_bytes()),
            other => Some(serde_json::to_vec(other).expect("json value serializes")),
        }
    }
}

/// A downloadable asset advertised by the site, with its install metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAsset {
    pub descriptor: AssetDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_b64: Option<String>,
}

impl SimAsset {
    pub fn bytes(&self) -> Result<Vec<u8>, SiteError> {
        let bad = |cause: String| SiteError::BadAsset {
            name: self.descriptor.name.clone(),
            cause,
        };
        match (&self.content, &self.content_b64) {
            (Some(text), None) => Ok(text.clone().into_bytes()),
            (None, Some(b64)) => base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| bad(e.to_string())),
            _ => Err(bad("exactly one of content / content_b64 is required".into())),
        }
    }

    /// Does this asset satisfy a missing node type or model file?
    pub fn satisfies(&self, kind: AssetKind, name: &str) -> bool {
        let d = &self.descriptor;
        d.kind == kind && (d.name == name || (kind == AssetKind::NodePack && d.provides.iter().any(|p| p == name)))
    }
}

/// A hermetic web environment for the exploration agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSite {
    pub start: String,
    pub pages: BTreeMap<String, SimPage>,
    #[serde(default)]
    pub assets: Vec<SimAsset>,
}

impl SimSite {
    /// Parse and check a site document. Assets with an empty checksum get
    /// the digest of their content.
    pub fn parse(bytes: &[u8]) -> Result<Self, SiteError> {
        let mut site: SimSite = serde_json::from_slice(bytes).map_err(|e| SiteError::Malformed(e.to_string()))?;
        site.check()?;
        for asset in &mut site.assets {
            let bytes = asset.bytes()?;
            if asset.descriptor.checksum.is_empty() {
                asset.descriptor.checksum = sha256_hex(&bytes);
            }
            asset.descriptor.checked_save_path().map_err(|e| SiteError::BadAsset {
                name: asset.descriptor.name.clone(),
                cause: e.to_string(),
            })?;
        }
        Ok(site)
    }

    pub fn load(path: &Path) -> Result<Self, SiteError> {
        Self::parse(&std::fs::read(path)?)
    }

    pub fn check(&self) -> Result<(), SiteError> {
        if !self.pages.contains_key(&self.start) {
            return Err(SiteError::UnknownStart(self.start.clone()));
        }
        for (id, page) in &self.pages {
            for (target, to) in &page.links {
                if !self.pages.contains_key(to) {
                    return Err(SiteError::DanglingLink {
                        page: id.clone(),
                        target: target.clone(),
                        to: to.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn page(&self, id: &str) -> Option<&SimPage> {
        self.pages.get(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_fills_checksums() {
        let json = r#"{
            "start": "home",
            "pages": {
                "home": {
                    "w_elements": [{"bbox": [0,0,10,10], "source": "W", "properties": {"target": "go"}}],
                    "links": {"go": "next"},
                    "downloads": {"raw": "not json", "doc": {"version": 1, "id": "x", "nodes": []}}
                },
                "next": {}
            },
            "assets": [{
                "descriptor": {"name": "m.ckpt", "kind": "model", "url": "sim://m", "save_path": "models/checkpoints/m.ckpt", "size_bytes": 6940000000, "checksum": ""},
                "content_b64": "AAEC"
            }]
        }"#;
        let site = SimSite::parse(json.as_bytes()).unwrap();
        let home = site.page("home").unwrap();
        assert_eq!(home.download_bytes("raw").unwrap(), b"not json");
        assert!(crate::workflow::parse_workflow(&home.download_bytes("doc").unwrap()).is_ok());
        assert_eq!(site.assets[0].bytes().unwrap(), [0, 1, 2]);
        assert_eq!(site.assets[0].descriptor.checksum, sha256_hex(&[0, 1, 2]));
        assert!(site.assets[0].satisfies(AssetKind::Model, "m.ckpt"));
    }

    #[test]
    fn rejects_dangling_links_and_bad_start() {
        let dangling = r#"{"start":"a","pages":{"a":{"links":{"t":"nowhere"}}}}"#;
        assert!(matches!(SimSite::parse(dangling.as_bytes()), Err(SiteError::DanglingLink { .. })));
        let no_start = r#"{"start":"z","pages":{"a":{}}}"#;
        assert!(matches!(SimSite::parse(no_start.as_bytes()), Err(SiteError::UnknownStart(_))));
    }
}
