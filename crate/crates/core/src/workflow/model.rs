use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed workflow document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

/// Scalar node parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Integers widen to reals.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

/// Source end of a connection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortRef {
    pub node: String,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInstance {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub inputs: BTreeMap<String, PortRef>,
}

impl NodeInstance {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            type_name: type_name.into(),
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn param(mut self, name: impl Into<String>, value: ParamValue) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn input(mut self, port: impl Into<String>, node: impl Into<String>, src_port: impl Into<String>) -> Self {
        self.inputs.insert(
            port.into(),
            PortRef {
                node: node.into(),
                port: src_port.into(),
            },
        );
        self
    }
}

/// A directed edge `from.port -> to.port`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Connection {
    pub from: PortRef,
    pub to: PortRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub version: u32,
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub likes: u64,
    pub nodes: Vec<NodeInstance>,
    /// Unknown top-level keys, kept verbatim for round-tripping.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Workflow {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            version: FORMAT_VERSION,
            id: id.into(),
            name: String::new(),
            description: String::new(),
            tags: Vec::new(),
            likes: 0,
            nodes: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn with_node(mut self, node: NodeInstance) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn node(&self, id: &str) -> Option<&NodeInstance> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// All connections, sorted.
    pub fn connections(&self) -> Vec<Connection> {
        let mut out: Vec<Connection> = self
            .nodes
            .iter()
            .flat_map(|n| {
                n.inputs.iter().map(move |(port, src)| Connection {
                    from: src.clone(),
                    to: PortRef {
                        node: n.id.clone(),
                        port: port.clone(),
                    },
                })
            })
            .collect();
        out.sort();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("workflow serialization is infallible")
    }
}

/// Parse a canonical workflow document.
///
/// Syntax errors are [`ParseError::MalformedDocument`]; well-formed JSON with
/// the wrong shape, an unsupported version or duplicate node ids is a
/// [`ParseError::SchemaViolation`]. Unknown node types are accepted here and
/// reported by validation.
pub fn parse_workflow(bytes: &[u8]) -> Result<Workflow, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::MalformedDocument(e.to_string()))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| ParseError::MalformedDocument(e.to_string()))?;
    if !value.is_object() {
        return Err(ParseError::SchemaViolation("top level must be an object".into()));
    }
    let wf: Workflow =
        serde_json::from_value(value).map_err(|e| ParseError::SchemaViolation(e.to_string()))?;
    if wf.version != FORMAT_VERSION {
        return Err(ParseError::SchemaViolation(format!(
            "unsupported version {} (expected {FORMAT_VERSION})",
            wf.version
        )));
    }
    let mut seen = HashSet::new();
    for node in &wf.nodes {
        if node.id.is_empty() {
            return Err(ParseError::SchemaViolation("empty node id".into()));
        }
        if !seen.insert(node.id.as_str()) {
            return Err(ParseError::SchemaViolation(format!("duplicate node id {:?}", node.id)));
        }
    }
    Ok(wf)
}
