//! Workflow documents: the node-graph data model, validation against a node
//! catalog, deterministic topological ordering and execution.

mod catalog;
mod exec;
mod image;
mod model;
mod validate;

pub use catalog::{
    installed_pack_manifests, parse_pack_manifest, CatalogError, DataKind, ExecutorId, NodeCatalog, NodeSpec,
    PackManifest, ParamKind, ParamSpec, PACK_MANIFEST_FILE,
};
pub use exec::{execute, execute_with, mock_generate, ExecEnv, ExecError, ExecutionResult, NodeResult, Value};
pub use image::{ImageBuffer, ImageError};
pub use model::{parse_workflow, Connection, NodeInstance, ParamValue, ParseError, PortRef, Workflow, FORMAT_VERSION};
pub use validate::{topo_order, validate, Finding, FindingCode, GraphError, ValidationReport};
