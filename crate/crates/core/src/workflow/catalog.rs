use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::ParamValue;

/// Type of data flowing along a connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataKind {
    Text,
    Image,
    Number,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Text,
    Integer,
    Real,
    Boolean,
}

impl ParamKind {
    pub fn accepts(&self, value: &ParamValue) -> bool {
        matches!(
            (self, value),
            (ParamKind::Text, ParamValue::Text(_))
                | (ParamKind::Integer, ParamValue::Int(_))
                | (ParamKind::Real, ParamValue::Real(_) | ParamValue::Int(_))
                | (ParamKind::Boolean, ParamValue::Bool(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
}

/// Built-in operator implementations. Node types map onto one of these; node
/// packs introduce new type names backed by an existing executor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorId {
    LoadImage,
    SaveImage,
    Resize,
    BoxBlur,
    Invert,
    TextPrompt,
    ConcatText,
    MockGenerate,
    /// Blend the input image with noise seeded by an installed checkpoint.
    CheckpointImg2img,
    /// Like `mock_generate`, seeded additionally by an installed checkpoint.
    CheckpointGenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    #[serde(default)]
    pub inputs: BTreeMap<String, DataKind>,
    #[serde(default)]
    pub outputs: BTreeMap<String, DataKind>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamSpec>,
    /// When set, any input port name is accepted and carries this kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variadic_inputs: Option<DataKind>,
    pub executor: ExecutorId,
}

impl NodeSpec {
    fn new(executor: ExecutorId) -> Self {
        Self {
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            params: BTreeMap::new(),
            variadic_inputs: None,
            executor,
        }
    }

    fn input(mut self, name: &str, kind: DataKind) -> Self {
        self.inputs.insert(name.into(), kind);
        self
    }

    fn output(mut self, name: &str, kind: DataKind) -> Self {
        self.outputs.insert(name.into(), kind);
        self
    }

    fn param(mut self, name: &str, kind: ParamKind, default: Option<ParamValue>) -> Self {
        self.params.insert(name.into(), ParamSpec { kind, default });
        self
    }

    pub fn input_kind(&self, port: &str) -> Option<DataKind> {
        self.inputs.get(port).copied().or(self.variadic_inputs)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("node pack manifest {path}: {cause}")]
    BadManifest { path: String, cause: String },
    #[error("io error reading {path}: {cause}")]
    Io { path: String, cause: String },
}

/// Manifest shipped inside an installed node pack
/// (`custom_nodes/<pack>/nodes.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackManifest {
    pub pack: String,
    pub nodes: BTreeMap<String, NodeSpec>,
}

pub const PACK_MANIFEST_FILE: &str = "nodes.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCatalog {
    entries: BTreeMap<String, NodeSpec>,
}

impl NodeCatalog {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// The eight built-in operators.
    pub fn builtin() -> Self {
        use DataKind::*;
        use ParamKind as P;
        let mut entries = BTreeMap::new();
        entries.insert(
            "load_image".into(),
            NodeSpec::new(ExecutorId::LoadImage)
                .output("image", Image)
                .param("path", P::Text, None),
        );
        entries.insert(
            "save_image".into(),
            NodeSpec::new(ExecutorId::SaveImage)
                .input("image", Image)
                .param("path", P::Text, None),
        );
        entries.insert(
            "resize".into(),
            NodeSpec::new(ExecutorId::Resize)
                .input("image", Image)
                .output("image", Image)
                .param("width", P::Integer, None)
                .param("height", P::Integer, None),
        );
        entries.insert(
            "box_blur".into(),
            NodeSpec::new(ExecutorId::BoxBlur)
                .input("image", Image)
                .output("image", Image)
                .param("radius", P::Integer, Some(ParamValue::Int(1))),
        );
        entries.insert(
            "invert".into(),
            NodeSpec::new(ExecutorId::Invert).input("image", Image).output("image", Image),
        );
        entries.insert(
            "text_prompt".into(),
            NodeSpec::new(ExecutorId::TextPrompt)
                .output("text", Text)
                .param("text", P::Text, None),
        );
        let mut concat = NodeSpec::new(ExecutorId::ConcatText).output("text", Text);
        concat.variadic_inputs = Some(Text);
        entries.insert("concat_text".into(), concat);
        entries.insert(
            "mock_generate".into(),
            NodeSpec::new(ExecutorId::MockGenerate)
                .input("prompt", Text)
                .output("image", Image)
                .param("prompt", P::Text, None)
                .param("seed", P::Integer, Some(ParamValue::Int(0)))
                .param("width", P::Integer, Some(ParamValue::Int(64)))
                .param("height", P::Integer, Some(ParamValue::Int(64))),
        );
        Self { entries }
    }

    /// Built-ins plus every pack manifest found under `<root>/custom_nodes/`.
    /// Later packs (by directory name) never override earlier definitions.
    pub fn with_installed_packs(root: &Path) -> Result<Self, CatalogError> {
        let mut catalog = Self::builtin();
        for manifest in installed_pack_manifests(root)? {
            catalog.add_pack(manifest);
        }
        Ok(catalog)
    }

    pub fn add_pack(&mut self, manifest: PackManifest) {
        for (name, spec) in manifest.nodes {
            self.entries.entry(name).or_insert(spec);
        }
    }

    pub fn insert(&mut self, type_name: impl Into<String>, spec: NodeSpec) {
        self.entries.insert(type_name.into(), spec);
    }

    pub fn get(&self, type_name: &str) -> Option<&NodeSpec> {
        self.entries.get(type_name)
    }

    pub fn contains(&self, type_name: &str) -> bool {
        self.entries.contains_key(type_name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &NodeSpec)> {
        self.entries.iter()
    }
}

impl Default for NodeCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

pub fn parse_pack_manifest(bytes: &[u8]) -> Result<PackManifest, String> {
    serde_json::from_slice(bytes).map_err(|e| e.to_string())
}

/// Manifests of all node packs installed under `root`, sorted by pack
/// directory name.
pub fn installed_pack_manifests(root: &Path) -> Result<Vec<PackManifest>, CatalogError> {
    let dir = root.join("custom_nodes");
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let io_err = |e: std::io::Error| CatalogError::Io {
        path: dir.display().to_string(),
        cause: e.to_string(),
    };
    let mut packs: Vec<_> = std::fs::read_dir(&dir)
        .map_err(io_err)?
        .filter_map(Result::ok)
        .map(|e| e.path().join(PACK_MANIFEST_FILE))
        .filter(|p| p.is_file())
        .collect();
    packs.sort();
    packs
        .into_iter()
        .map(|path| {
            let bytes = std::fs::read(&path).map_err(|e| CatalogError::Io {
                path: path.display().to_string(),
                cause: e.to_string(),
            })?;
            parse_pack_manifest(&bytes).map_err(|cause| CatalogError::BadManifest {
                path: path.display().to_string(),
                cause,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_the_eight_operators() {
        let c = NodeCatalog::builtin();
        let names: Vec<_> = c.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            [
                "box_blur",
                "concat_text",
                "invert",
                "load_image",
                "mock_generate",
                "resize",
                "save_image",
                "text_prompt"
            ]
        );
    }

    #[test]
    fn param_kind_acceptance() {
        assert!(ParamKind::Real.accepts(&ParamValue::Int(2)));
        assert!(!ParamKind::Integer.accepts(&ParamValue::Real(2.0)));
        assert!(!ParamKind::Text.accepts(&ParamValue::Bool(true)));
    }

    #[test]
    fn loads_pack_manifests_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let pack = dir.path().join("custom_nodes/demo-pack");
        std::fs::create_dir_all(&pack).unwrap();
        std::fs::write(
            pack.join(PACK_MANIFEST_FILE),
            br#"{"pack":"demo-pack","nodes":{"Sharpen":{"inputs":{"image":"Image"},
                "outputs":{"image":"Image"},"executor":"invert"}}}"#,
        )
        .unwrap();
        let c = NodeCatalog::with_installed_packs(dir.path()).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c.get("Sharpen").unwrap().executor, ExecutorId::Invert);
    }
}
