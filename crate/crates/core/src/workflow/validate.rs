use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::NodeCatalog;
use super::model::Workflow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    Cycle,
    UnknownType,
    BadPort,
    KindMismatch,
    UnboundInput,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingCode::Cycle => "CYCLE",
            FindingCode::UnknownType => "UNKNOWN_TYPE",
            FindingCode::BadPort => "BAD_PORT",
            FindingCode::KindMismatch => "KIND_MISMATCH",
            FindingCode::UnboundInput => "UNBOUND_INPUT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub node: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    /// Executable once unknown types are resolved.
    pub fn is_executable(&self) -> bool {
        self.findings.iter().all(|f| f.code == FindingCode::UnknownType)
    }

    /// Findings other than UNKNOWN_TYPE.
    pub fn blocking(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.code != FindingCode::UnknownType)
    }

    pub fn unknown_types(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.code == FindingCode::UnknownType)
    }

    fn push(&mut self, code: FindingCode, node: &str, detail: String) {
        self.findings.push(Finding {
            code,
            node: node.to_string(),
            detail,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("cycle detected among nodes {0:?}")]
    CycleDetected(Vec<String>),
    #[error("connection references unknown node {0:?}")]
    DanglingReference(String),
}

/// Check a workflow against a catalog. Findings are data; nothing here fails.
pub fn validate(workflow: &Workflow, catalog: &NodeCatalog) -> ValidationReport {
    let mut report = ValidationReport::default();

    for node in &workflow.nodes {
        let Some(spec) = catalog.get(&node.type_name) else {
            report.push(
                FindingCode::UnknownType,
                &node.id,
                format!("node type {:?} is not in the catalog", node.type_name),
            );
            continue;
        };

        for (name, value) in &node.params {
            if let Some(ps) = spec.params.get(name) {
                if !ps.kind.accepts(value) {
                    report.push(
                        FindingCode::KindMismatch,
                        &node.id,
                        format!("param {name:?} expects {:?}, got {value:?}", ps.kind),
                    );
                }
            }
        }

        for (port, src) in &node.inputs {
            let Some(dst_kind) = spec.input_kind(port) else {
                report.push(
                    FindingCode::BadPort,
                    &node.id,
                    format!("{} has no input port {port:?}", node.type_name),
                );
                continue;
            };
            let Some(src_node) = workflow.node(&src.node) else {
                report.push(
                    FindingCode::BadPort,
                    &node.id,
                    format!("input {port:?} references missing node {:?}", src.node),
                );
                continue;
            };
            // Ports of unresolved types cannot be checked yet.
            let Some(src_spec) = catalog.get(&src_node.type_name) else {
                continue;
            };
            match src_spec.outputs.get(&src.port) {
                None => report.push(
                    FindingCode::BadPort,
                    &node.id,
                    format!("{} has no output port {:?}", src_node.type_name, src.port),
                ),
                Some(&src_kind) if src_kind != dst_kind => report.push(
                    FindingCode::KindMismatch,
                    &node.id,
                    format!("input {port:?} expects {dst_kind}, {}.{} produces {src_kind}", src.node, src.port),
                ),
                _ => {}
            }
        }

        for port in spec.inputs.keys() {
            let bound = node.inputs.contains_key(port)
                || node.params.contains_key(port)
                || spec.params.get(port).is_some_and(|p| p.default.is_some());
            if !bound {
                report.push(
                    FindingCode::UnboundInput,
                    &node.id,
                    format!("input {port:?} is neither connected nor given as a parameter"),
                );
            }
        }

        for (name, ps) in &spec.params {
            let is_port = spec.inputs.contains_key(name);
            if !is_port && ps.default.is_none() && !node.params.contains_key(name) {
                report.push(
                    FindingCode::UnboundInput,
                    &node.id,
                    format!("required param {name:?} is missing"),
                );
            }
        }
    }

    if let Err(GraphError::CycleDetected(nodes)) = topo_order(workflow) {
        report.push(
            FindingCode::Cycle,
            nodes.first().map(String::as_str).unwrap_or(""),
            format!("cycle through {}", nodes.join(", ")),
        );
    }
    report
}

/// Kahn's algorithm with a min-heap on node id, giving the lexicographically
/// smallest topological order. Edges to unknown nodes are ignored here
/// (validation reports them as BAD_PORT).
pub fn topo_order(workflow: &Workflow) -> Result<Vec<String>, GraphError> {
    let index: BTreeMap<&str, usize> = workflow
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let n = workflow.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in workflow.nodes.iter().enumerate() {
        for src in node.inputs.values() {
            if let Some(&s) = index.get(src.node.as_str()) {
                children[s].push(i);
                indegree[i] += 1;
            }
        }
    }

    let ids: Vec<&str> = workflow.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut ready: BinaryHeap<Reverse<(&str, usize)>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| Reverse((ids[i], i)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((id, i))) = ready.pop() {
        order.push(id.to_string());
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse((ids[c], c)));
            }
        }
    }

    if order.len() < n {
        let mut stuck: Vec<String> = (0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| ids[i].to_string())
            .collect();
        stuck.sort();
        return Err(GraphError::CycleDetected(stuck));
    }
    Ok(order)
}

/// Depth of every node (longest path from a source), in topological order.
pub(crate) fn levels(workflow: &Workflow, order: &[String]) -> Vec<Vec<String>> {
    let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
    for id in order {
        let node = workflow.node(id).expect("ordered ids come from the workflow");
        let d = node
            .inputs
            .values()
            .filter_map(|src| depth.get(src.node.as_str()))
            .map(|d| d + 1)
            .max()
            .unwrap_or(0);
        depth.insert(id, d);
    }
    let max = depth.values().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); max];
    for id in order {
        out[depth[id.as_str()]].push(id.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::model::{NodeInstance, ParamValue};

    fn text(id: &str, t: &str) -> NodeInstance {
        NodeInstance::new(id, "text_prompt").param("text", ParamValue::Text(t.into()))
    }

    #[test]
    fn compatible_chain_is_clean() {
        let wf = Workflow::new("w")
            .with_node(text("a", "x"))
            .with_node(NodeInstance::new("b", "concat_text").input("t0", "a", "text"));
        assert!(validate(&wf, &NodeCatalog::builtin()).is_empty());
    }

    #[test]
    fn two_cycle_is_reported() {
        let wf = Workflow::new("w")
            .with_node(NodeInstance::new("A", "invert").input("image", "B", "image"))
            .with_node(NodeInstance::new("B", "invert").input("image", "A", "image"));
        let report = validate(&wf, &NodeCatalog::builtin());
        assert!(report.has(FindingCode::Cycle));
        assert!(!report.is_executable());
        assert_eq!(
            topo_order(&wf),
            Err(GraphError::CycleDetected(vec!["A".into(), "B".into()]))
        );
    }

    #[test]
    fn unknown_type_names_the_node() {
        let wf = Workflow::new("w").with_node(NodeInstance::new("ip", "IPAdapterApply"));
        let report = validate(&wf, &NodeCatalog::builtin());
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].code, FindingCode::UnknownType);
        assert_eq!(report.findings[0].node, "ip");
        assert!(report.is_executable());
    }

    #[test]
    fn port_and_kind_errors() {
        let wf = Workflow::new("w")
            .with_node(text("t", "hello"))
            .with_node(NodeInstance::new("inv", "invert").input("image", "t", "text"))
            .with_node(NodeInstance::new("inv2", "invert").input("picture", "t", "text"))
            .with_node(NodeInstance::new("inv3", "invert").input("image", "t", "nope"));
        let report = validate(&wf, &NodeCatalog::builtin());
        let codes: Vec<_> = report.findings.iter().map(|f| (f.node.as_str(), f.code)).collect();
        assert!(codes.contains(&("inv", FindingCode::KindMismatch)));
        assert!(codes.contains(&("inv2", FindingCode::BadPort)));
        assert!(codes.contains(&("inv2", FindingCode::UnboundInput)));
        assert!(codes.contains(&("inv3", FindingCode::BadPort)));
    }

    #[test]
    fn param_fallback_binds_input() {
        let cat = NodeCatalog::builtin();
        let bare = Workflow::new("w").with_node(NodeInstance::new("g", "mock_generate"));
        assert!(validate(&bare, &cat).has(FindingCode::UnboundInput));
        let with_param = Workflow::new("w").with_node(
            NodeInstance::new("g", "mock_generate").param("prompt", ParamValue::Text("car".into())),
        );
        assert!(validate(&with_param, &cat).is_empty());
        let bad_kind = Workflow::new("w").with_node(
            NodeInstance::new("g", "mock_generate").param("prompt", ParamValue::Int(3)),
        );
        assert!(validate(&bad_kind, &cat).has(FindingCode::KindMismatch));
    }

    #[test]
    fn topo_single_and_diamond() {
        let single = Workflow::new("w").with_node(text("only", "x"));
        assert_eq!(topo_order(&single).unwrap(), ["only"]);

        let diamond = Workflow::new("w")
            .with_node(NodeInstance::new("d", "concat_text").input("x", "b", "text").input("y", "c", "text"))
            .with_node(NodeInstance::new("c", "concat_text").input("x", "a", "text"))
            .with_node(NodeInstance::new("b", "concat_text").input("x", "a", "text"))
            .with_node(text("a", "x"));
        assert_eq!(topo_order(&diamond).unwrap(), ["a", "b", "c", "d"]);
        assert_eq!(
            levels(&diamond, &topo_order(&diamond).unwrap()),
            vec![vec!["a".to_string()], vec!["b".into(), "c".into()], vec!["d".into()]]
        );
    }
}
