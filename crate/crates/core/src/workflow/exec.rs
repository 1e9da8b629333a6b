use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::catalog::{ExecutorId, NodeCatalog, NodeSpec};
use super::image::ImageBuffer;
use super::model::{NodeInstance, ParamValue, Workflow};
use super::validate::{levels, topo_order, validate, Finding};
use crate::hashing::{fnv1a64, SplitMix64};

/// Value carried on a port.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Image(ImageBuffer),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeResult {
    pub outputs: BTreeMap<String, Value>,
    /// Files written under the workspace, relative to it.
    pub files: Vec<PathBuf>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionResult {
    pub order: Vec<String>,
    pub nodes: BTreeMap<String, NodeResult>,
}

impl ExecutionResult {
    pub fn output(&self, node: &str, port: &str) -> Option<&Value> {
        self.nodes.get(node)?.outputs.get(port)
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("workflow is not executable: {0:?}")]
    NotExecutable(Vec<Finding>),
    #[error("executor for node {node:?} failed: {cause}")]
    ExecutorFailure { node: String, cause: String },
    #[error("missing input file {0}")]
    MissingInputFile(PathBuf),
}

fn failure(node: &NodeInstance, cause: impl Into<String>) -> ExecError {
    ExecError::ExecutorFailure {
        node: node.id.clone(),
        cause: cause.into(),
    }
}

/// Where executors read and write.
#[derive(Debug, Clone)]
pub struct ExecEnv {
    /// Directory `load_image`/`save_image` paths are relative to.
    pub workspace: PathBuf,
    /// Managed root holding `models/`; needed by checkpoint-backed executors.
    pub model_root: Option<PathBuf>,
    /// Worker threads per topological level; 1 runs everything inline.
    pub threads: usize,
}

impl ExecEnv {
    pub fn new(workspace: impl Into<PathBuf>) -> Self {
        Self {
            workspace: workspace.into(),
            model_root: None,
            threads: 1,
        }
    }

    pub fn with_model_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.model_root = Some(root.into());
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }
}

/// Run a workflow single-threaded in `workspace`.
pub fn execute(workflow: &Workflow, catalog: &NodeCatalog, workspace: &Path) -> Result<ExecutionResult, ExecError> {
    execute_with(workflow, catalog, &ExecEnv::new(workspace))
}

/// Run a workflow level by level; nodes within a level may run concurrently.
/// Executors are pure functions of their inputs, so the result does not
/// depend on `env.threads`.
pub fn execute_with(workflow: &Workflow, catalog: &NodeCatalog, env: &ExecEnv) -> Result<ExecutionResult, ExecError> {
    let report = validate(workflow, catalog);
    if !report.is_empty() {
        return Err(ExecError::NotExecutable(report.findings));
    }
    let order = topo_order(workflow).expect("validated workflows are acyclic");
    let mut done: BTreeMap<String, NodeResult> = BTreeMap::new();

    for level in levels(workflow, &order) {
        let results = run_level(workflow, catalog, env, &level, &done)?;
        done.extend(level.into_iter().zip(results));
    }
    Ok(ExecutionResult { order, nodes: done })
}

fn run_level(
    workflow: &Workflow,
    catalog: &NodeCatalog,
    env: &ExecEnv,
    level: &[String],
    done: &BTreeMap<String, NodeResult>,
) -> Result<Vec<NodeResult>, ExecError> {
    let run = |id: &String| {
        let node = workflow.node(id).expect("level ids come from the workflow");
        let spec = catalog.get(&node.type_name).expect("validated");
        run_node(node, spec, done, env)
    };
    let threads = env.threads.min(level.len());
    if threads <= 1 {
        return level.iter().map(run).collect();
    }

    let slots: Vec<Mutex<Option<Result<NodeResult, ExecError>>>> = level.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= level.len() {
                    break;
                }
                let r = run(&level[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    // Errors surface in level order regardless of which thread hit them first.
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

struct Inputs<'a> {
    node: &'a NodeInstance,
    spec: &'a NodeSpec,
    values: BTreeMap<&'a str, &'a Value>,
}

impl<'a> Inputs<'a> {
    fn gather(node: &'a NodeInstance, spec: &'a NodeSpec, done: &'a BTreeMap<String, NodeResult>) -> Result<Self, ExecError> {
        let mut values = BTreeMap::new();
        for (port, src) in &node.inputs {
            let v = done
                .get(&src.node)
                .and_then(|r| r.outputs.get(&src.port))
                .ok_or_else(|| failure(node, format!("no value on {}.{}", src.node, src.port)))?;
            values.insert(port.as_str(), v);
        }
        Ok(Self { node, spec, values })
    }

    fn param(&self, name: &str) -> Option<&'a ParamValue> {
        self.node
            .params
            .get(name)
            .or_else(|| self.spec.params.get(name).and_then(|p| p.default.as_ref()))
    }

    fn param_text(&self, name: &str) -> Result<&'a str, ExecError> {
        self.param(name)
            .and_then(ParamValue::as_text)
            .ok_or_else(|| failure(self.node, format!("missing text param {name:?}")))
    }

    fn param_int(&self, name: &str) -> Result<i64, ExecError> {
        self.param(name)
            .and_then(ParamValue::as_i64)
            .ok_or_else(|| failure(self.node, format!("missing integer param {name:?}")))
    }

    fn param_real(&self, name: &str, default: f64) -> Result<f64, ExecError> {
        match self.param(name) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| failure(self.node, format!("param {name:?} is not a number"))),
        }
    }

    fn dim(&self, name: &str) -> Result<usize, ExecError> {
        let v = self.param_int(name)?;
        if !(1..=16384).contains(&v) {
            return Err(failure(self.node, format!("{name} must be in 1..=16384, got {v}")));
        }
        Ok(v as usize)
    }

    fn image(&self, port: &str) -> Result<&'a ImageBuffer, ExecError> {
        match self.values.get(port) {
            Some(Value::Image(img)) => Ok(img),
            _ => Err(failure(self.node, format!("input {port:?} is not an image"))),
        }
    }

    /// Connected text input, falling back to the same-named parameter.
    fn text(&self, port: &str) -> Result<String, ExecError> {
        match self.values.get(port) {
            Some(Value::Text(t)) => Ok(t.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            Some(Value::Image(_)) => Err(failure(self.node, format!("input {port:?} is an image"))),
            None => self.param(port).map(|p| p.to_string()).ok_or_else(|| {
                failure(self.node, format!("input {port:?} is neither connected nor a parameter"))
            }),
        }
    }
}

fn run_node(
    node: &NodeInstance,
    spec: &NodeSpec,
    done: &BTreeMap<String, NodeResult>,
    env: &ExecEnv,
) -> Result<NodeResult, ExecError> {
    let started = Instant::now();
    let inputs = Inputs::gather(node, spec, done)?;
    let mut outputs = BTreeMap::new();
    let mut files = Vec::new();

    match spec.executor {
        ExecutorId::LoadImage => {
            let rel = workspace_path(node, inputs.param_text("path")?)?;
            let path = env.workspace.join(&rel);
            let bytes = std::fs::read(&path).map_err(|_| ExecError::MissingInputFile(path.clone()))?;
            let img = ImageBuffer::from_pnm(&bytes).map_err(|e| failure(node, e.to_string()))?;
            outputs.insert("image".into(), Value::Image(img));
        }
        ExecutorId::SaveImage => {
            let img = inputs.image("image")?;
            let rel = workspace_path(node, inputs.param_text("path")?)?;
            let path = env.workspace.join(&rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| failure(node, e.to_string()))?;
            }
            std::fs::write(&path, img.to_pnm()).map_err(|e| failure(node, e.to_string()))?;
            files.push(rel);
        }
        ExecutorId::Resize => {
            let img = inputs.image("image")?;
            let out = img
                .resize(inputs.dim("width")?, inputs.dim("height")?)
                .map_err(|e| failure(node, e.to_string()))?;
            outputs.insert("image".into(), Value::Image(out));
        }
        ExecutorId::BoxBlur => {
            let radius = inputs.param_int("radius")?;
            if radius < 0 {
                return Err(failure(node, format!("radius must be >= 0, got {radius}")));
            }
            let out = inputs.image("image")?.box_blur(radius as usize);
            outputs.insert("image".into(), Value::Image(out));
        }
        ExecutorId::Invert => {
            outputs.insert("image".into(), Value::Image(inputs.image("image")?.invert()));
        }
        ExecutorId::TextPrompt => {
            outputs.insert("text".into(), Value::Text(inputs.text("text")?));
        }
        ExecutorId::ConcatText => {
            // BTreeMap iteration gives ascending input-port names.
            let parts = node
                .inputs
                .keys()
                .map(|port| inputs.text(port))
                .collect::<Result<Vec<_>, _>>()?;
            outputs.insert("text".into(), Value::Text(parts.join(" ")));
        }
        ExecutorId::MockGenerate => {
            let prompt = inputs.text("prompt")?;
            let seed = inputs.param_int("seed")?;
            let img = mock_generate(&prompt, seed, inputs.dim("width")?, inputs.dim("height")?);
            outputs.insert("image".into(), Value::Image(img));
        }
        ExecutorId::CheckpointGenerate => {
            let digest = checkpoint_digest(node, env, inputs.param_text("ckpt_name")?)?;
            let prompt = inputs.text("prompt")?;
            let seed = inputs.param_int("seed")? ^ digest as i64;
            let img = mock_generate(&prompt, seed, inputs.dim("width")?, inputs.dim("height")?);
            outputs.insert("image".into(), Value::Image(img));
        }
        ExecutorId::CheckpointImg2img => {
            let digest = checkpoint_digest(node, env, inputs.param_text("ckpt_name")?)?;
            let src = inputs.image("image")?;
            let prompt = inputs.text("prompt")?;
            let strength = inputs.param_real("strength", 0.5)?;
            if !(0.0..=1.0).contains(&strength) {
                return Err(failure(node, format!("strength must be in [0, 1], got {strength}")));
            }
            let seed = inputs.param_int("seed").unwrap_or(0) ^ digest as i64;
            let noise = mock_generate(&prompt, seed, src.width(), src.height());
            let img = blend(src, &noise, strength);
            outputs.insert("image".into(), Value::Image(img));
        }
    }

    Ok(NodeResult {
        outputs,
        files,
        wall_time: started.elapsed(),
    })
}

fn workspace_path(node: &NodeInstance, raw: &str) -> Result<PathBuf, ExecError> {
    let p = Path::new(raw);
    let safe = !raw.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !safe {
        return Err(failure(node, format!("path {raw:?} escapes the workspace")));
    }
    Ok(p.to_path_buf())
}

/// Deterministic RGB pseudo-image for a prompt and seed.
pub fn mock_generate(prompt: &str, seed: i64, width: usize, height: usize) -> ImageBuffer {
    let mut rng = SplitMix64::new(fnv1a64(prompt.as_bytes()) ^ (seed as u64).rotate_left(32));
    let base = rng.next_u64().to_le_bytes();
    let mut noise = vec![0u8; width * height * 3];
    rng.fill_bytes(&mut noise);
    // Low-amplitude noise over a per-prompt colour gradient.
    let mut pixels = Vec::with_capacity(noise.len());
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let grad = (x * 255 / width.max(1) + y * 255 / height.max(1)) / 2;
                let v = (base[c] as usize + grad) / 2 + (noise[(y * width + x) * 3 + c] as usize & 0x3f);
                pixels.push(v.min(255) as u8);
            }
        }
    }
    ImageBuffer::new(width, height, 3, pixels).expect("dimensions are positive")
}

fn blend(src: &ImageBuffer, noise: &ImageBuffer, strength: f64) -> ImageBuffer {
    let channels = src.channels();
    let pixels = src
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let pixel = i / channels;
            let n = noise.pixels()[pixel * 3 + (i % channels)];
            ((1.0 - strength) * p as f64 + strength * n as f64).round() as u8
        })
        .collect();
    ImageBuffer::new(src.width(), src.height(), channels, pixels).expect("same shape as source")
}

fn checkpoint_digest(node: &NodeInstance, env: &ExecEnv, name: &str) -> Result<u64, ExecError> {
    let root = env
        .model_root
        .as_ref()
        .ok_or_else(|| failure(node, "no model root configured"))?;
    let path = crate::assets::find_model(root, name)
        .ok_or_else(|| failure(node, format!("model {name:?} is not installed")))?;
    let bytes = std::fs::read(&path).map_err(|e| failure(node, e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    Ok(u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::model::NodeInstance;

    fn text_node(id: &str, t: &str) -> NodeInstance {
        NodeInstance::new(id, "text_prompt").param("text", ParamValue::Text(t.into()))
    }

    #[test]
    fn invert_chain_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::new(2, 2, 1, vec![0, 255, 10, 20]).unwrap();
        std::fs::write(dir.path().join("in.pgm"), img.to_pnm()).unwrap();
        let wf = Workflow::new("w")
            .with_node(NodeInstance::new("load", "load_image").param("path", ParamValue::Text("in.pgm".into())))
            .with_node(NodeInstance::new("inv", "invert").input("image", "load", "image"))
            .with_node(
                NodeInstance::new("save", "save_image")
                    .param("path", ParamValue::Text("out/out.pgm".into()))
                    .input("image", "inv", "image"),
            );
        let res = execute(&wf, &NodeCatalog::builtin(), dir.path()).unwrap();
        assert_eq!(res.order, ["load", "inv", "save"]);
        let saved = ImageBuffer::from_pnm(&std::fs::read(dir.path().join("out/out.pgm")).unwrap()).unwrap();
        assert_eq!(saved.pixels(), &[255, 0, 245, 235]);
        assert_eq!(res.nodes["save"].files, vec![PathBuf::from("out/out.pgm")]);
    }

    #[test]
    fn concat_joins_by_port_name() {
        let wf = Workflow::new("w")
            .with_node(text_node("p", "a"))
            .with_node(text_node("q", "b"))
            .with_node(NodeInstance::new("c", "concat_text").input("b", "p", "text").input("a", "q", "text"));
        let res = execute(&wf, &NodeCatalog::builtin(), Path::new(".")).unwrap();
        // port "a" <- "b", port "b" <- "a"
        assert_eq!(res.output("c", "text"), Some(&Value::Text("b a".into())));
    }

    #[test]
    fn missing_input_file() {
        let dir = tempfile::tempdir().unwrap();
        let wf = Workflow::new("w")
            .with_node(NodeInstance::new("load", "load_image").param("path", ParamValue::Text("nope.pgm".into())));
        assert!(matches!(
            execute(&wf, &NodeCatalog::builtin(), dir.path()),
            Err(ExecError::MissingInputFile(_))
        ));
    }

    #[test]
    fn path_escape_is_executor_failure() {
        let dir = tempfile::tempdir().unwrap();
        let wf = Workflow::new("w")
            .with_node(NodeInstance::new("load", "load_image").param("path", ParamValue::Text("../x.pgm".into())));
        assert!(matches!(
            execute(&wf, &NodeCatalog::builtin(), dir.path()),
            Err(ExecError::ExecutorFailure { .. })
        ));
    }

    #[test]
    fn unknown_type_is_not_executable() {
        let wf = Workflow::new("w").with_node(NodeInstance::new("x", "IPAdapterApply"));
        assert!(matches!(
            execute(&wf, &NodeCatalog::builtin(), Path::new(".")),
            Err(ExecError::NotExecutable(_))
        ));
    }

    #[test]
    fn mock_generate_is_deterministic_and_prompt_sensitive() {
        let a = mock_generate("car", 0, 16, 16);
        assert_eq!(a, mock_generate("car", 0, 16, 16));
        assert_ne!(a, mock_generate("cat", 0, 16, 16));
        assert_ne!(a, mock_generate("car", 1, 16, 16));
        assert_eq!(a.pixels().len(), 16 * 16 * 3);
    }

    #[test]
    fn negative_blur_radius_fails() {
        let wf = Workflow::new("w")
            .with_node(NodeInstance::new("g", "mock_generate").param("prompt", ParamValue::Text("x".into())))
            .with_node(
                NodeInstance::new("b", "box_blur")
                    .param("radius", ParamValue::Int(-1))
                    .input("image", "g", "image"),
            );
        assert!(matches!(
            execute(&wf, &NodeCatalog::builtin(), Path::new(".")),
            Err(ExecError::ExecutorFailure { .. })
        ));
    }
}
