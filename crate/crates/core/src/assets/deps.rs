use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::find_model;
use crate::workflow::{installed_pack_manifests, NodeCatalog, ParamValue, Workflow};

/// File extensions that mark a text parameter as a model reference.
pub const MODEL_EXTENSIONS: [&str; 3] = [".safetensors", ".ckpt", ".pt"];

pub fn is_model_reference(value: &str) -> bool {
    let lower = value.to_ascii_lowercase();
    MODEL_EXTENSIONS.iter().any(|ext| lower.len() > ext.len() && lower.ends_with(ext))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyReport {
    pub workflow_id: String,
    pub required_node_types: BTreeSet<String>,
    pub required_models: BTreeSet<String>,
    pub missing_node_types: BTreeSet<String>,
    pub missing_models: BTreeSet<String>,
}

impl DependencyReport {
    pub fn is_satisfied(&self) -> bool {
        self.missing_node_types.is_empty() && self.missing_models.is_empty()
    }
}

/// Node types and model files a workflow needs, and which of them are
/// neither in `catalog` nor installed under `root`.
pub fn extract_dependencies(workflow: &Workflow, catalog: &NodeCatalog, root: Option<&Path>) -> DependencyReport {
    let mut report = DependencyReport {
        workflow_id: workflow.id.clone(),
        ..DependencyReport::default()
    };
    for node in &workflow.nodes {
        report.required_node_types.insert(node.type_name.clone());
        for value in node.params.values() {
            if let ParamValue::Text(s) = value {
                if is_model_reference(s) {
                    report.required_models.insert(s.clone());
                }
            }
        }
    }

    let on_disk: BTreeSet<String> = match root {
        Some(root) => match installed_pack_manifests(root) {
            Ok(packs) => packs.into_iter().flat_map(|p| p.nodes.into_keys()).collect(),
            Err(e) => {
                log::warn!("ignoring installed node packs: {e}");
                BTreeSet::new()
            }
        },
        None => BTreeSet::new(),
    };
    report.missing_node_types = report
        .required_node_types
        .iter()
        .filter(|t| !catalog.contains(t) && !on_disk.contains(*t))
        .cloned()
        .collect();
    report.missing_models = report
        .required_models
        .iter()
        .filter(|m| root.and_then(|r| find_model(r, m)).is_none())
        .cloned()
        .collect();
    report
}
