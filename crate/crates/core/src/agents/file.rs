use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assets::{extract_dependencies, DependencyReport};
use crate::workflow::{parse_workflow, NodeCatalog, ParseError, Workflow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowSummary {
    pub id: String,
    pub name: String,
    pub node_count: usize,
    pub type_histogram: BTreeMap<String, usize>,
    pub model_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileReport {
    pub workflow: Workflow,
    pub summary: WorkflowSummary,
    pub dependencies: DependencyReport,
}

/// Parse a downloaded workflow document and organise what it needs.
pub fn file_agent_run(bytes: &[u8], catalog: &NodeCatalog, root: Option<&Path>) -> Result<FileReport, ParseError> {
    let workflow = parse_workflow(bytes)?;
    let dependencies = extract_dependencies(&workflow, catalog, root);
    let mut type_histogram = BTreeMap::new();
    for node in &workflow.nodes {
        *type_histogram.entry(node.type_name.clone()).or_insert(0) += 1;
    }
    let summary = WorkflowSummary {
        id: workflow.id.clone(),
        name: workflow.name.clone(),
        node_count: workflow.nodes.len(),
        type_histogram,
        model_refs: dependencies.required_models.iter().cloned().collect(),
    };
    Ok(FileReport {
        workflow,
        summary,
        dependencies,
    })
}

/// Short cause name for a parse failure.
pub fn parse_error_cause(e: &ParseError) -> &'static str {
    match e {
        ParseError::MalformedDocument(_) => "MalformedDocument",
        ParseError::SchemaViolation(_) => "SchemaViolation",
    }
}
